#include "sciflow/server.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>

#include <httplib.h>

#include "sciflow/error.hpp"
#include "sciflow/pipeline.hpp"
#include "sciflow/rng.hpp"

namespace sciflow {

namespace fs = std::filesystem;

// ---- Cache ----

std::optional<std::string> LayoutCache::get(const std::string& key) {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  entries_.splice(entries_.begin(), entries_, it->second);
  return it->second->second;
}

void LayoutCache::put(const std::string& key, std::string body) {
  std::lock_guard lock(mu_);
  if (auto it = index_.find(key); it != index_.end()) {
    entries_.splice(entries_.begin(), entries_, it->second);
    return;
  }
  entries_.emplace_front(key, std::move(body));
  index_[key] = entries_.begin();
  while (entries_.size() > capacity_) {
    index_.erase(entries_.back().first);
    entries_.pop_back();
  }
}

std::size_t LayoutCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---- State ----

ServerState::ServerState(std::shared_ptr<const Corpus> corpus, std::vector<MetricRecord> paper_metrics,
                         std::vector<ResearcherMetrics> researcher_metrics,
                         std::optional<PatentabilityTable> predictions,
                         std::map<std::string, std::optional<double>> p_index)
    : corpus_(std::move(corpus)),
      view_(corpus_),
      metrics_(make_metrics_table(*corpus_, paper_metrics)),
      researcher_metrics_(corpus_->researcher_count()),
      predictions_(std::move(predictions)),
      p_index_(std::move(p_index)) {
  for (auto& m : researcher_metrics) {
    auto r = corpus_->find_researcher(m.researcher_id);
    if (!r) throw ValidationError("researcher metrics: unknown researcher '" + m.researcher_id + "'");
    researcher_metrics_[*r] = std::move(m);
  }
  if (predictions_) scores_ = predictions_->scores(*corpus_);
}

std::unique_ptr<ServerState> ServerState::load(const fs::path& manifest, const fs::path& out,
                                               std::optional<YearRange> window) {
  auto corpus = Corpus::load(manifest, window);
  for (const char* required : {"metrics.jsonl", "researchers_metrics.jsonl"})
    if (!fs::exists(out / required))
      throw IoError("missing artifact " + (out / required).string() + " (run `metrics` first)");
  std::optional<PatentabilityTable> predictions;
  if (fs::exists(out / "predictions.jsonl")) predictions = read_predictions(out / "predictions.jsonl");
  std::map<std::string, std::optional<double>> pindex;
  if (fs::exists(out / "pindex.jsonl")) pindex = read_pindex(out / "pindex.jsonl");
  return std::make_unique<ServerState>(std::move(corpus), read_metrics(out / "metrics.jsonl"),
                                       read_researcher_metrics(out / "researchers_metrics.jsonl"),
                                       std::move(predictions), std::move(pindex));
}

std::optional<double> ServerState::p_index(std::string_view researcher_id) const {
  auto it = p_index_.find(std::string(researcher_id));
  return it == p_index_.end() ? std::nullopt : it->second;
}

// ---- Researchers ----

std::optional<double> researcher_axis(const ResearcherMetrics& m, std::optional<double> p_index,
                                      std::string_view axis) {
  auto opt = [](std::optional<int> v) { return v ? std::optional<double>(*v) : std::nullopt; };
  if (axis == "paper_count") return m.paper_count;
  if (axis == "avg_science_citation_5y") return m.avg_science_citation_5y;
  if (axis == "papers_cited_by_patents") return m.papers_cited_by_patents;
  if (axis == "citing_patent_count") return m.citing_patent_count;
  if (axis == "patent_citation_count") return m.patent_citation_count;
  if (axis == "invention_disclosure_count") return opt(m.invention_disclosure_count);
  if (axis == "granted_patent_count") return opt(m.granted_patent_count);
  if (axis == "p_index") return p_index;
  throw ValidationError("unknown researcher metric '" + std::string(axis) + "'");
}

double DensityGrid::integral() const {
  if (xs.size() < 2 || ys.size() < 2) return 0.0;
  const double dx = xs[1] - xs[0], dy = ys[1] - ys[0];
  return std::accumulate(density.begin(), density.end(), 0.0) * dx * dy;
}

json DensityGrid::to_json() const {
  return json{{"xs", xs}, {"ys", ys}, {"density", density},
              {"bandwidth", {bandwidth_x, bandwidth_y}}};
}

std::optional<DensityGrid> kernel_density(const std::vector<std::pair<double, double>>& points, int grid) {
  const auto n = points.size();
  if (n == 0 || grid < 2) return std::nullopt;
  auto axis_bandwidth = [&](auto get) {
    double mean = 0.0;
    for (const auto& p : points) mean += get(p);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& p : points) ss += (get(p) - mean) * (get(p) - mean);
    double sigma = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (!(sigma > 0.0)) sigma = 1.0;
    return sigma * std::pow(static_cast<double>(n), -1.0 / 6.0);
  };
  DensityGrid g;
  g.bandwidth_x = axis_bandwidth([](const auto& p) { return p.first; });
  g.bandwidth_y = axis_bandwidth([](const auto& p) { return p.second; });

  auto axis_grid = [&](auto get, double h) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : points) {
      lo = std::min(lo, get(p));
      hi = std::max(hi, get(p));
    }
    lo -= 3.0 * h;
    hi += 3.0 * h;
    std::vector<double> v(static_cast<std::size_t>(grid));
    for (int i = 0; i < grid; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (grid - 1);
    return v;
  };
  g.xs = axis_grid([](const auto& p) { return p.first; }, g.bandwidth_x);
  g.ys = axis_grid([](const auto& p) { return p.second; }, g.bandwidth_y);

  // Separable kernel: precompute per-axis factors.
  const double inv_sqrt_2pi = 0.3989422804014327;
  auto factors = [&](const std::vector<double>& axis, double h, auto get) {
    std::vector<double> f(axis.size() * n);
    for (std::size_t i = 0; i < axis.size(); ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double u = (axis[i] - get(points[k])) / h;
        f[i * n + k] = inv_sqrt_2pi * std::exp(-0.5 * u * u) / h;
      }
    return f;
  };
  const auto fx = factors(g.xs, g.bandwidth_x, [](const auto& p) { return p.first; });
  const auto fy = factors(g.ys, g.bandwidth_y, [](const auto& p) { return p.second; });
  g.density.assign(g.xs.size() * g.ys.size(), 0.0);
  for (std::size_t iy = 0; iy < g.ys.size(); ++iy)
    for (std::size_t ix = 0; ix < g.xs.size(); ++ix) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += fx[ix * n + k] * fy[iy * n + k];
      g.density[iy * g.xs.size() + ix] = s;
    }
  return g;
}

json query_researchers(const ServerState& s, std::string_view x_axis, std::string_view y_axis,
                       const QueryFilter& filter) {
  // Validates the names even for an empty corpus.
  const ResearcherMetrics probe;
  researcher_axis(probe, std::nullopt, x_axis);
  researcher_axis(probe, std::nullopt, y_axis);

  const auto view = filter_view(s.view(), filter, s.scores());
  json rows = json::array();
  std::vector<std::pair<double, double>> points;
  for (Index r : view.researchers()) {
    const auto& m = s.researcher_metrics()[r];
    if (!m) continue;
    const auto pi = s.p_index(m->researcher_id);
    const auto x = researcher_axis(*m, pi, x_axis);
    const auto y = researcher_axis(*m, pi, y_axis);
    rows.push_back({{"id", m->researcher_id},
                    {"name", s.corpus().researcher(r).name},
                    {"x", optional_to_json(x)},
                    {"y", optional_to_json(y)},
                    {"p_index", optional_to_json(pi)}});
    if (x && y) points.emplace_back(*x, *y);
  }
  const auto grid = kernel_density(points);
  return json{{"x_axis", x_axis},
              {"y_axis", y_axis},
              {"researchers", rows},
              {"contour", grid ? grid->to_json() : json(nullptr)}};
}

json query_researcher(const ServerState& s, std::string_view id) {
  const auto r = s.corpus().find_researcher(id);
  if (!r) throw NotFound("unknown researcher '" + std::string(id) + "'");
  const auto& res = s.corpus().researcher(*r);
  json papers = json::array();
  for (Index p : s.corpus().researcher_papers(*r)) {
    const auto& paper = s.corpus().paper(p);
    papers.push_back({{"id", paper.id}, {"title", paper.title}, {"year", paper.year}});
  }
  json gender = nullptr;
  if (res.gender) gender = *res.gender == Gender::Female ? "female" : *res.gender == Gender::Male ? "male" : "other";
  const auto& m = s.researcher_metrics()[*r];
  return json{{"id", res.id},
              {"name", res.name},
              {"gender", gender},
              {"rank", optional_to_json(res.rank)},
              {"affiliation", optional_to_json(res.affiliation)},
              {"metrics", m ? m->to_json() : json(nullptr)},
              {"p_index", optional_to_json(s.p_index(res.id))},
              {"papers", papers}};
}

// ---- Stats ----

json query_stats(const ServerState& s, const QueryFilter& filter) {
  const auto view = filter_view(s.view(), filter, s.scores());
  const auto& c = view.corpus();
  std::map<int, std::uint64_t> paper_years, patent_years;
  for (Index p : view.papers()) ++paper_years[c.paper(p).year];
  for (Index t : view.patents()) ++patent_years[c.patent(t).application_year];
  std::map<std::string, std::uint64_t> genders, ranks, classes;
  for (Index r : view.researchers()) {
    const auto& res = c.researcher(r);
    const char* g = !res.gender ? "unknown"
                    : *res.gender == Gender::Female ? "female"
                    : *res.gender == Gender::Male   ? "male"
                                                    : "other";
    ++genders[g];
    ++ranks[res.rank.value_or("unknown")];
  }
  for (Index t : view.patents()) ++classes[std::string(to_string(c.patent(t).assignee_class))];

  auto year_json = [](const std::map<int, std::uint64_t>& m) {
    json j = json::object();
    for (const auto& [y, n] : m) j[std::to_string(y)] = n;
    return j;
  };
  json researchers = json::array();
  for (const auto& m : compute_researcher_metrics(view)) {
    auto j = m.to_json();
    j["p_index"] = optional_to_json(s.p_index(m.researcher_id));
    researchers.push_back(std::move(j));
  }
  std::size_t paper_citations = 0;
  for (Index p : view.papers()) paper_citations += view.references(p).size();
  return json{{"counts", {{"papers", view.papers().size()},
                          {"patents", view.patents().size()},
                          {"researchers", view.researchers().size()},
                          {"paper_citations", paper_citations},
                          {"paper_patent_citations", view.paper_patent_citation_count()}}},
              {"paper_years", year_json(paper_years)},
              {"patent_years", year_json(patent_years)},
              {"gender", genders},
              {"rank", ranks},
              {"assignee_classes", classes},
              {"researchers", researchers}};
}

// ---- Interplay, timelines ----

std::string query_interplay(const ServerState& s, const InterplayRequest& request) {
  const auto key = request.to_json().dump();
  if (auto hit = s.cache().get(key)) return *hit;
  auto body = layout_payload(s.view(), s.metrics(), s.predictions(), request).dump();
  s.cache().put(key, body);
  return body;
}

json query_timeline(const ServerState& s, const std::vector<std::string>& ids, TimelineKind kind,
                    const QueryFilter& filter) {
  const auto view = filter_view(s.view(), filter, s.scores());
  std::vector<std::string> chosen = ids;
  if (chosen.empty()) {
    const auto& h = kind == TimelineKind::Paper ? s.corpus().fields() : s.corpus().cpc();
    for (Index n : h.nodes_at_level(1)) chosen.push_back(h.node(n).id);
    std::sort(chosen.begin(), chosen.end());
  }
  return field_timeline(view, chosen, kind).to_json();
}

// ---- Assignees ----

namespace {

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "about", "above", "after", "again", "against", "all", "also", "among", "and", "any",
      "are", "based", "because", "been", "before", "being", "below", "between", "both", "but",
      "can", "could", "did", "does", "doing", "down", "during", "each", "few", "for", "from",
      "further", "had", "has", "have", "having", "her", "here", "hers", "him", "his", "how",
      "into", "its", "itself", "more", "most", "not", "now", "off", "once", "only", "other",
      "our", "out", "over", "own", "same", "she", "should", "some", "such", "than", "that",
      "the", "their", "them", "then", "there", "these", "they", "this", "those", "through",
      "too", "under", "until", "upon", "using", "very", "via", "was", "were", "what", "when",
      "where", "which", "while", "who", "whom", "why", "will", "with", "within", "without",
      "would", "you", "your", "toward", "towards", "new", "method", "methods", "system",
      "systems", "apparatus", "device", "devices", "thereof", "therefor", "use"};
  return words;
}

}  // namespace

std::vector<std::string> keywords(std::string_view title) {
  std::vector<std::string> out;
  for (auto& t : tokenize_title(title)) {
    if (t.size() < 3 || stopwords().count(t)) continue;
    if (std::all_of(t.begin(), t.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) continue;
    out.push_back(std::move(t));
  }
  return out;
}

json query_assignees(const ServerState& s, const QueryFilter& filter, int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  const auto view = filter_view(s.view(), filter, s.scores());
  const auto& c = view.corpus();
  const auto total = view.patents().size();
  std::map<AssigneeClass, std::map<std::string, std::uint64_t>> per_class;
  std::map<std::string, std::uint64_t> terms;
  for (Index t : view.patents()) {
    const auto& pt = c.patent(t);
    ++per_class[pt.assignee_class][pt.assignee_name];
    for (const auto& w : keywords(pt.title)) ++terms[w];
  }
  auto share = [&](std::uint64_t n) { return total ? static_cast<double>(n) / static_cast<double>(total) : 0.0; };

  json classes = json::array();
  for (auto cls : {AssigneeClass::University, AssigneeClass::Company, AssigneeClass::Other}) {
    auto it = per_class.find(cls);
    if (it == per_class.end()) continue;
    std::vector<std::pair<std::string, std::uint64_t>> names(it->second.begin(), it->second.end());
    std::stable_sort(names.begin(), names.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::uint64_t count = 0, shown = 0;
    json children = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
      count += names[i].second;
      if (i < static_cast<std::size_t>(k)) {
        shown += names[i].second;
        children.push_back({{"name", names[i].first}, {"count", names[i].second}, {"share", share(names[i].second)}});
      }
    }
    classes.push_back({{"name", to_string(cls)},
                       {"count", count},
                       {"share", share(count)},
                       {"children", children},
                       {"remainder", {{"count", count - shown}, {"share", share(count - shown)}}}});
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(terms.begin(), terms.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > 50) ranked.resize(50);
  json kw = json::array();
  for (const auto& [term, n] : ranked) kw.push_back({{"term", term}, {"count", n}});
  return json{{"total", total}, {"k", k}, {"classes", classes}, {"keywords", kw}};
}

// ---- Papers ----

namespace {

std::optional<double> paper_rank_value(const ServerState& s, Index p, std::string_view rank) {
  if (rank == "patentability") {
    const auto* sc = s.scores();
    return sc ? (*sc)[p] : std::nullopt;
  }
  const auto& m = s.metrics()[p];
  if (!m) return std::nullopt;
  if (rank == "science_citation_5y") return m->science_citation_5y;
  if (rank == "patent_citation_5y") return m->patent_citation_5y;
  if (rank == "disruption") return m->disruption;
  if (rank == "novelty") return m->novelty;
  if (rank == "team_size") return m->team_size;
  if (rank == "institution_count") return m->institution_count;
  if (rank == "grant_count") return m->grant_count;
  throw ValidationError("unknown rank metric '" + std::string(rank) + "'");
}

}  // namespace

json query_papers(const ServerState& s, const QueryFilter& filter, std::string_view rank, int limit,
                  int offset) {
  if (limit < 0 || offset < 0) throw ValidationError("limit and offset must be >= 0");
  static const std::set<std::string, std::less<>> known = {
      "science_citation_5y", "patent_citation_5y", "disruption", "novelty",
      "team_size", "institution_count", "grant_count", "patentability"};
  if (!known.count(rank)) throw ValidationError("unknown rank metric '" + std::string(rank) + "'");
  const auto view = filter_view(s.view(), filter, s.scores());
  const auto& c = view.corpus();
  std::vector<std::pair<Index, std::optional<double>>> ranked;
  for (Index p : view.papers()) ranked.emplace_back(p, paper_rank_value(s, p, rank));
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.second.has_value() != b.second.has_value()) return a.second.has_value();
    if (a.second && *a.second != *b.second) return *a.second > *b.second;
    return c.paper(a.first).id < c.paper(b.first).id;
  });
  json rows = json::array();
  const auto begin = std::min(ranked.size(), static_cast<std::size_t>(offset));
  const auto end = std::min(ranked.size(), begin + static_cast<std::size_t>(limit));
  for (auto i = begin; i < end; ++i) {
    const auto [p, value] = ranked[i];
    const auto& paper = c.paper(p);
    const auto* sc = s.scores();
    rows.push_back({{"paper_id", paper.id},
                    {"title", paper.title},
                    {"year", paper.year},
                    {"value", optional_to_json(value)},
                    {"metrics", s.metrics()[p] ? s.metrics()[p]->to_json() : json(nullptr)},
                    {"patentability", sc ? optional_to_json((*sc)[p]) : json(nullptr)}});
  }
  return json{{"rank", rank}, {"total", ranked.size()}, {"offset", offset}, {"limit", limit}, {"papers", rows}};
}

// ---- Routing ----

namespace {

std::optional<std::string> param(const std::multimap<std::string, std::string>& params, const char* name) {
  auto it = params.find(name);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

int int_param(const std::multimap<std::string, std::string>& params, const char* name, int fallback) {
  auto v = param(params, name);
  if (!v) return fallback;
  int out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (v->empty() || ec != std::errc() || p != v->data() + v->size())
    throw ValidationError(std::string("parameter '") + name + "' must be an integer");
  return out;
}

double double_param(const std::multimap<std::string, std::string>& params, const char* name, double fallback) {
  auto v = param(params, name);
  if (!v) return fallback;
  char* end = nullptr;
  const double out = std::strtod(v->c_str(), &end);
  if (v->empty() || end != v->c_str() + v->size() || !std::isfinite(out))
    throw ValidationError(std::string("parameter '") + name + "' must be a number");
  return out;
}

QueryFilter filter_param(const ServerState& s, const std::multimap<std::string, std::string>& params) {
  auto v = param(params, "filter");
  if (!v || v->empty()) return {};
  json j;
  try {
    j = json::parse(*v);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("filter: malformed JSON: ") + e.what());
  }
  auto f = QueryFilter::from_json(j);
  validate_filter(s.corpus(), f);
  return f;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    if (comma > start) out.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

HttpResponse error_response(int status, const char* code, const std::string& message) {
  return {status, json{{"code", code}, {"message", message}}.dump(), {}};
}

std::string route(const ServerState& s, const std::string& path,
                  const std::multimap<std::string, std::string>& params) {
  if (path == "/health") return json{{"status", "ok"}}.dump();
  if (path == "/researchers")
    return query_researchers(s, param(params, "x").value_or("invention_disclosure_count"),
                             param(params, "y").value_or("papers_cited_by_patents"), filter_param(s, params))
        .dump();
  if (path.rfind("/researchers/", 0) == 0) {
    const auto id = path.substr(std::string("/researchers/").size());
    return query_researcher(s, id).dump();
  }
  if (path == "/stats") return query_stats(s, filter_param(s, params)).dump();
  if (path == "/interplay") {
    InterplayRequest req;
    req.filter = filter_param(s, params);
    req.level = int_param(params, "level", req.level);
    if (auto b = param(params, "bins")) req.bins = parse_bins(*b);
    req.weights.alpha = double_param(params, "alpha", req.weights.alpha);
    req.weights.beta = double_param(params, "beta", req.weights.beta);
    req.weights.gamma = double_param(params, "gamma", req.weights.gamma);
    if (auto m = param(params, "mode")) req.mode = flow_mode_from_string(*m);
    req.min_percentile = double_param(params, "min_pct", req.min_percentile);
    if (req.min_percentile < 0.0 || req.min_percentile > 100.0)
      throw ValidationError("min_pct must be in [0, 100]");
    return query_interplay(s, req);
  }
  if (path == "/timeline") {
    const auto kind = timeline_kind_from_string(param(params, "kind").value_or("paper"));
    return query_timeline(s, split_ids(param(params, "ids").value_or("")), kind, filter_param(s, params)).dump();
  }
  if (path == "/assignees")
    return query_assignees(s, filter_param(s, params), int_param(params, "k", 10)).dump();
  if (path == "/papers")
    return query_papers(s, filter_param(s, params), param(params, "rank").value_or("patent_citation_5y"),
                        int_param(params, "limit", 50), int_param(params, "offset", 0))
        .dump();
  throw NotFound("no route for " + path);
}

}  // namespace

HttpResponse handle_request(const ServerState& s, const std::string& path,
                            const std::multimap<std::string, std::string>& params,
                            const std::string& if_none_match) {
  HttpResponse r;
  try {
    r.body = route(s, path, params);
  } catch (const NotFound& e) {
    return error_response(404, "not_found", e.what());
  } catch (const ValidationError& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
  r.etag = "\"" + hex64(fnv1a64(r.body)) + "\"";
  if (!if_none_match.empty() && if_none_match == r.etag) {
    r.status = 304;
    r.body.clear();
  }
  return r;
}

// ---- HTTP ----

struct HttpService::Impl {
  const ServerState& state;
  httplib::Server server;
  explicit Impl(const ServerState& s) : state(s) {}
};

HttpService::HttpService(const ServerState& state) : impl_(std::make_unique<Impl>(state)) {
  impl_->server.Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
    const auto r = handle_request(impl_->state, req.path, params, req.get_header_value("If-None-Match"));
    res.status = r.status;
    if (!r.etag.empty()) res.set_header("ETag", r.etag);
    if (r.status != 304) res.set_content(r.body, "application/json");
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace sciflow
