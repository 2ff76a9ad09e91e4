#include "sciflow/interplay.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Cholesky>

#include "sciflow/error.hpp"

namespace sciflow {

// ---- Bins ----

std::vector<int> default_bins() { return {0, 1, 3, 8, 21}; }

void validate_bins(std::span<const int> bins) {
  if (bins.empty()) throw ValidationError("bins: empty");
  if (bins.front() != 0) throw ValidationError("bins: first lower bound must be 0");
  for (std::size_t i = 1; i < bins.size(); ++i)
    if (bins[i] <= bins[i - 1]) throw ValidationError("bins: lower bounds must increase");
}

std::vector<int> parse_bins(std::string_view text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto part = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc() || p != part.data() + part.size())
      throw ValidationError("bins: cannot parse '" + std::string(text) + "'");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  validate_bins(out);
  return out;
}

int bin_of(std::span<const int> bins, int count) {
  auto it = std::upper_bound(bins.begin(), bins.end(), count);
  return static_cast<int>(it - bins.begin()) - 1;
}

std::vector<int> merge_bins(std::span<const int> bins, int row) {
  if (row < 0 || row + 1 >= static_cast<int>(bins.size()))
    throw ValidationError("bins: no row to merge with");
  std::vector<int> out(bins.begin(), bins.end());
  out.erase(out.begin() + row + 1);
  return out;
}

// ---- Paper matrix ----

std::size_t PaperMatrix::paper_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.count();
  return n;
}

const MatrixCell* PaperMatrix::cell(std::size_t column, int row) const {
  for (const auto& c : cells)
    if (c.column == column && c.row == row) return &c;
  return nullptr;
}

std::optional<Index> primary_field(const Corpus& corpus, Index paper, int level) {
  const auto& h = corpus.fields();
  std::optional<Index> deepest;
  for (Index t : corpus.paper_fields(paper)) {
    if (!deepest || h.node(t).level > h.node(*deepest).level ||
        (h.node(t).level == h.node(*deepest).level && h.node(t).id < h.node(*deepest).id))
      deepest = t;
  }
  if (!deepest) return std::nullopt;
  return h.ancestor_at(*deepest, level);
}

namespace {

std::array<std::optional<double>, kGlyphAxes> glyph_values(const MetricRecord& r) {
  return {static_cast<double>(r.team_size), static_cast<double>(r.institution_count),
          static_cast<double>(r.grant_count), static_cast<double>(r.science_citation_5y),
          r.disruption, r.novelty};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

PaperMatrix build_matrix(const CorpusView& view, int level, std::span<const int> bins,
                         const MetricsTable& metrics) {
  const auto& c = view.corpus();
  if (level < 0 || level > 3) throw ValidationError("matrix: unknown level " + std::to_string(level));
  validate_bins(bins);

  PaperMatrix m;
  m.level = level;
  m.bins.assign(bins.begin(), bins.end());

  // Column per primary field; unassigned papers share one trailing column.
  std::map<std::string, std::optional<Index>> column_fields;
  std::vector<std::pair<Index, std::optional<Index>>> primary;
  for (Index p : view.papers()) {
    auto f = primary_field(c, p, level);
    primary.emplace_back(p, f);
    column_fields.emplace(f ? c.fields().node(*f).id : std::string(kUnassignedColumn), f);
  }
  std::vector<std::pair<std::string, std::optional<Index>>> ordered(column_fields.begin(), column_fields.end());
  std::stable_partition(ordered.begin(), ordered.end(), [](const auto& e) { return e.second.has_value(); });
  std::map<std::string, std::size_t> column_of;
  for (const auto& [id, f] : ordered) {
    column_of[id] = m.columns.size();
    MatrixColumn col;
    col.field_id = id;
    col.label = f ? c.fields().node(*f).label : "Unassigned";
    m.columns.push_back(col);
  }

  // Global min-max per glyph axis.
  std::array<double, kGlyphAxes> lo, hi;
  lo.fill(INFINITY);
  hi.fill(-INFINITY);
  for (Index p : view.papers()) {
    if (p >= metrics.size() || !metrics[p]) continue;
    const auto g = glyph_values(*metrics[p]);
    for (int a = 0; a < kGlyphAxes; ++a)
      if (g[a]) {
        lo[a] = std::min(lo[a], *g[a]);
        hi[a] = std::max(hi[a], *g[a]);
      }
  }

  std::map<std::pair<std::size_t, int>, std::vector<Index>> cell_papers;
  std::vector<std::vector<Index>> column_papers(m.columns.size());
  for (const auto& [p, f] : primary) {
    const auto col = column_of.at(f ? c.fields().node(*f).id : std::string(kUnassignedColumn));
    const int cites = static_cast<int>(view.citing_patents(p).size());
    const int row = bin_of(bins, cites);
    cell_papers[{col, row}].push_back(p);
    column_papers[col].push_back(p);
    m.columns[col].total_citations += static_cast<std::uint64_t>(cites);
    m.placement.push_back({p, {col, row}});
  }

  for (std::size_t col = 0; col < m.columns.size(); ++col) {
    const auto& id = m.columns[col].field_id;
    m.columns[col].diversity = id.empty() ? diversity_of_papers(view, column_papers[col])
                                          : diversity(view, *c.fields().find(id));
  }

  for (auto& [key, papers] : cell_papers) {
    MatrixCell cell;
    cell.column = key.first;
    cell.row = key.second;
    double cite_sum = 0.0;
    std::array<std::vector<double>, kGlyphAxes> axis;
    for (Index p : papers) {
      cell.paper_ids.push_back(c.paper(p).id);
      cite_sum += static_cast<double>(view.citing_patents(p).size());
      if (p >= metrics.size() || !metrics[p]) continue;
      const auto g = glyph_values(*metrics[p]);
      for (int a = 0; a < kGlyphAxes; ++a)
        if (g[a]) axis[a].push_back(hi[a] > lo[a] ? (*g[a] - lo[a]) / (hi[a] - lo[a]) : 0.0);
    }
    std::sort(cell.paper_ids.begin(), cell.paper_ids.end());
    cell.mean_patent_citation = cite_sum / static_cast<double>(papers.size());
    for (int a = 0; a < kGlyphAxes; ++a)
      if (!axis[a].empty()) cell.glyph[a] = median(axis[a]);
    m.cells.push_back(std::move(cell));
  }
  return m;
}

// ---- Icicle ----

std::vector<std::size_t> PatentIcicle::groups() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].level == 2) out.push_back(i);
  return out;
}

std::vector<double> PatentIcicle::group_positions() const {
  const auto n = groups().size();
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j)
    x[j] = static_cast<double>(j) - (static_cast<double>(n) - 1.0) / 2.0;
  return x;
}

PatentIcicle build_icicle(const CorpusView& view) {
  const auto& c = view.corpus();
  const auto& h = c.cpc();
  std::vector<std::uint64_t> counts(h.size(), 0);
  for (Index t : view.patents())
    for (int level = 0; level < 3; ++level)
      for (Index node : c.patent_cpc_nodes(t, level)) ++counts[node];

  PatentIcicle icicle;
  auto visit = [&](auto&& self, Index node, std::optional<std::size_t> parent) -> void {
    if (counts[node] == 0) return;
    const auto& n = h.node(node);
    const auto here = icicle.nodes.size();
    icicle.nodes.push_back({n.id, n.label, n.level, parent, counts[node]});
    for (Index child : h.children(node)) self(self, child, here);
  };
  for (Index r : h.roots()) visit(visit, r, std::nullopt);
  return icicle;
}

// ---- Flows ----

std::string_view to_string(FlowMode m) { return m == FlowMode::Historical ? "historical" : "prediction"; }

FlowMode flow_mode_from_string(std::string_view s) {
  if (s == "historical") return FlowMode::Historical;
  if (s == "prediction") return FlowMode::Prediction;
  throw ValidationError("unknown flow mode '" + std::string(s) + "'");
}

std::uint64_t FlowSet::group_total(std::string_view group) const {
  std::uint64_t n = 0;
  for (const auto& e : cell_edges)
    if (e.group == group) n += e.weight;
  return n;
}

FlowSet build_flows(const PaperMatrix& matrix, const CorpusView& view, FlowMode mode,
                    const PatentabilityTable* predictions, double min_percentile) {
  const auto& c = view.corpus();
  FlowSet flows;
  flows.mode = mode;
  std::map<std::tuple<std::size_t, int, std::string>, std::uint64_t> cell_w;

  if (mode == FlowMode::Historical) {
    for (const auto& [p, where] : matrix.placement)
      for (Index t : view.citing_patents(p))
        for (Index g : c.patent_cpc_nodes(t, 2))
          ++cell_w[{where.first, where.second, c.cpc().node(g).id}];
  } else {
    if (!predictions) throw ValidationError("prediction flows need a predictions file");
    std::map<std::string, std::pair<std::size_t, int>> where_of;
    for (const auto& [p, where] : matrix.placement) where_of[c.paper(p).id] = where;
    for (const auto& row : predictions->rows) {
      if (row.percentile < min_percentile) continue;
      auto it = where_of.find(row.paper_id);
      if (it == where_of.end()) continue;
      ++cell_w[{it->second.first, it->second.second, row.group}];
    }
  }

  std::map<std::pair<std::size_t, std::string>, std::uint64_t> column_w;
  for (const auto& [key, w] : cell_w) {
    const auto& [col, row, group] = key;
    flows.cell_edges.push_back({col, row, group, w});
    column_w[{col, group}] += w;
  }
  for (const auto& [key, w] : column_w) flows.column_edges.push_back({key.first, key.second, w});
  return flows;
}

Eigen::MatrixXd field_similarity(const PaperMatrix& matrix, const FlowSet& flows) {
  const auto m = matrix.columns.size();
  std::map<std::string, std::size_t> group_index;
  for (const auto& e : flows.column_edges) group_index.emplace(e.group, group_index.size());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                            static_cast<Eigen::Index>(group_index.size()));
  for (const auto& e : flows.column_edges)
    v(static_cast<Eigen::Index>(e.column), static_cast<Eigen::Index>(group_index[e.group])) +=
        static_cast<double>(e.weight);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double ni = v.row(i).norm(), nj = v.row(j).norm();
      w(i, j) = (ni > 0.0 && nj > 0.0) ? v.row(i).dot(v.row(j)) / (ni * nj) : 0.0;
    }
  return w;
}

// ---- Layout ----

std::vector<double> target_order(std::span<const std::uint64_t> totals,
                                 std::span<const std::string> ids) {
  const auto m = totals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (totals[a] != totals[b]) return totals[a] > totals[b];
    return ids[a] < ids[b];
  });
  std::vector<double> x(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto step = static_cast<double>((k + 1) / 2);
    x[order[k]] = (k % 2 == 1) ? step : -step;
  }
  return x;
}

double layout_objective(const Eigen::MatrixXd& w, std::span<const double> t,
                        std::span<const double> p, const LayoutWeights& k,
                        std::span<const double> x) {
  const auto m = x.size();
  double similar = 0.0, anchor = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j)
      similar += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (x[i] - x[j]) * (x[i] - x[j]);
    anchor += (x[i] - t[i]) * (x[i] - t[i]);
    for (double pj : p) spread += (x[i] - pj) * (x[i] - pj);
  }
  return k.alpha * similar + k.beta * anchor + k.gamma * spread;
}

LayoutSolution solve_layout(const Eigen::MatrixXd& w, std::span<const double> t,
                            std::span<const double> p, const LayoutWeights& k,
                            std::span<const std::string> ids) {
  const auto m = t.size();
  if (static_cast<std::size_t>(w.rows()) != m || static_cast<std::size_t>(w.cols()) != m ||
      ids.size() != m)
    throw ValidationError("layout: size mismatch");
  for (double v : {k.alpha, k.beta, k.gamma})
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("layout: weights must be finite and >= 0");
  const double n = static_cast<double>(p.size());
  if (k.beta == 0.0 && k.gamma * n == 0.0)
    throw ValidationError("layout: non-convex parameterization (needs beta > 0 or gamma > 0 with patents)");

  // (α L + (β + γ n) I) x = β t + γ Σp · 1, with L the Laplacian of the
  // symmetrized upper triangle of w.
  const auto dim = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs(dim);
  const double p_sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      const double wij = k.alpha * w(i, j);
      h(i, i) += wij;
      h(j, j) += wij;
      h(i, j) -= wij;
      h(j, i) -= wij;
    }
    h(i, i) += k.beta + k.gamma * n;
    rhs[i] = k.beta * t[static_cast<std::size_t>(i)] + k.gamma * p_sum;
  }
  LayoutSolution s;
  s.weights = k;
  if (m == 0) return s;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw ValidationError("layout: system is not positive definite");
  Eigen::VectorXd x = ldlt.solve(rhs);
  // One step of iterative refinement.
  x += ldlt.solve(rhs - h * x);
  s.x.assign(x.data(), x.data() + x.size());
  s.ordering.resize(m);
  std::iota(s.ordering.begin(), s.ordering.end(), 0);
  std::sort(s.ordering.begin(), s.ordering.end(), [&](std::size_t a, std::size_t b) {
    if (s.x[a] != s.x[b]) return s.x[a] < s.x[b];
    return ids[a] < ids[b];
  });
  s.objective = layout_objective(w, t, p, k, s.x);
  return s;
}

// ---- Timelines ----

TimelineKind timeline_kind_from_string(std::string_view s) {
  if (s == "paper") return TimelineKind::Paper;
  if (s == "patent") return TimelineKind::Patent;
  throw ValidationError("unknown timeline kind '" + std::string(s) + "'");
}

json FieldTimeline::to_json() const {
  json series_json = json::object();
  for (const auto& [id, counts] : series) series_json[id] = counts;
  return json{{"kind", kind == TimelineKind::Paper ? "paper" : "patent"},
              {"years", {years.lo, years.hi}},
              {"series", series_json}};
}

FieldTimeline field_timeline(const CorpusView& view, std::span<const std::string> ids,
                             TimelineKind kind) {
  const auto& c = view.corpus();
  FieldTimeline tl;
  tl.kind = kind;
  if (kind == TimelineKind::Paper) {
    tl.years = c.window();
  } else if (c.patent_count() > 0) {
    tl.years = {INT32_MAX, INT32_MIN};
    for (const auto& t : c.patents()) {
      tl.years.lo = std::min(tl.years.lo, t.application_year);
      tl.years.hi = std::max(tl.years.hi, t.application_year);
    }
  } else {
    tl.years = c.window();
  }
  for (const auto& id : ids) {
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(tl.years.span()), 0);
    if (kind == TimelineKind::Paper) {
      const Index f = c.fields().at(id);
      for (Index p : view.papers()) {
        const int y = c.paper(p).year;
        if (tl.years.contains(y) && paper_in_field(c, p, f)) ++counts[static_cast<std::size_t>(y - tl.years.lo)];
      }
    } else {
      const Index node = c.cpc().at(id);
      for (Index t : view.patents()) {
        const int y = c.patent(t).application_year;
        if (tl.years.contains(y) && patent_has_cpc(c, t, node)) ++counts[static_cast<std::size_t>(y - tl.years.lo)];
      }
    }
    tl.series.emplace_back(id, std::move(counts));
  }
  return tl;
}

// ---- Assembly ----

json InterplayRequest::to_json() const {
  return json{{"filter", filter.to_json()},
              {"level", level},
              {"bins", bins},
              {"alpha", weights.alpha},
              {"beta", weights.beta},
              {"gamma", weights.gamma},
              {"mode", to_string(mode)},
              {"min_pct", min_percentile}};
}

InterplayLayout build_interplay(const CorpusView& view, const MetricsTable& metrics,
                                const PatentabilityTable* predictions,
                                const InterplayRequest& request) {
  PaperScores scores;
  if (predictions) scores = predictions->scores(view.corpus());
  const auto filtered = filter_view(view, request.filter, predictions ? &scores : nullptr);

  InterplayLayout out;
  out.matrix = build_matrix(filtered, request.level, request.bins, metrics);
  out.icicle = build_icicle(filtered);
  out.flows = build_flows(out.matrix, filtered, request.mode, predictions, request.min_percentile);

  std::vector<std::uint64_t> totals;
  std::vector<std::string> ids;
  std::vector<std::string> field_ids;
  for (const auto& col : out.matrix.columns) {
    totals.push_back(col.total_citations);
    ids.push_back(col.field_id);
    if (!col.field_id.empty()) field_ids.push_back(col.field_id);
  }
  out.target_x = target_order(totals, ids);
  out.patent_x = out.icicle.group_positions();
  const auto w = field_similarity(out.matrix, out.flows);
  out.solution = solve_layout(w, out.target_x, out.patent_x, request.weights, ids);
  out.timelines = field_timeline(filtered, field_ids, TimelineKind::Paper);
  return out;
}

namespace {

json glyph_json(const std::array<std::optional<double>, kGlyphAxes>& g) {
  json j = json::object();
  for (int a = 0; a < kGlyphAxes; ++a) j[kGlyphNames[static_cast<std::size_t>(a)]] = optional_to_json(g[static_cast<std::size_t>(a)]);
  return j;
}

}  // namespace

json interplay_to_json(const InterplayLayout& l, const Corpus&, const InterplayRequest& request) {
  json columns = json::array();
  json diversity = json::object();
  for (std::size_t i = 0; i < l.matrix.columns.size(); ++i) {
    const auto& col = l.matrix.columns[i];
    columns.push_back({{"id", col.field_id},
                       {"label", col.label},
                       {"total_citations", col.total_citations},
                       {"diversity", col.diversity},
                       {"x", l.solution.x.empty() ? json(nullptr) : json(l.solution.x[i])},
                       {"target_x", l.target_x[i]}});
    diversity[col.field_id] = col.diversity;
  }
  json rows = json::array();
  for (std::size_t r = 0; r < l.matrix.bins.size(); ++r) {
    json hi = r + 1 < l.matrix.bins.size() ? json(l.matrix.bins[r + 1] - 1) : json(nullptr);
    rows.push_back({{"lo", l.matrix.bins[r]}, {"hi", hi}});
  }
  json cells = json::array();
  for (const auto& c : l.matrix.cells)
    cells.push_back({{"column", c.column},
                     {"row", c.row},
                     {"count", c.count()},
                     {"paper_ids", c.paper_ids},
                     {"mean_patent_citation", c.mean_patent_citation},
                     {"glyph", glyph_json(c.glyph)}});
  json icicle = json::array();
  for (const auto& n : l.icicle.nodes)
    icicle.push_back({{"id", n.id},
                      {"label", n.label},
                      {"level", n.level},
                      {"parent", n.parent ? json(*n.parent) : json(nullptr)},
                      {"count", n.count}});
  json cell_edges = json::array();
  for (const auto& e : l.flows.cell_edges)
    cell_edges.push_back({{"column", e.column}, {"row", e.row}, {"group", e.group}, {"weight", e.weight}});
  json column_edges = json::array();
  for (const auto& e : l.flows.column_edges)
    column_edges.push_back({{"column", e.column}, {"group", e.group}, {"weight", e.weight}});
  json patent_x = json::object();
  const auto groups = l.icicle.groups();
  for (std::size_t j = 0; j < groups.size(); ++j) patent_x[l.icicle.nodes[groups[j]].id] = l.patent_x[j];

  return json{{"request", request.to_json()},
              {"level", l.matrix.level},
              {"columns", columns},
              {"rows", rows},
              {"cells", cells},
              {"icicle", icicle},
              {"flows", {{"mode", to_string(l.flows.mode)},
                         {"cell_edges", cell_edges},
                         {"column_edges", column_edges}}},
              {"positions", {{"x", l.solution.x},
                             {"ordering", l.solution.ordering},
                             {"objective", l.solution.objective},
                             {"alpha", l.solution.weights.alpha},
                             {"beta", l.solution.weights.beta},
                             {"gamma", l.solution.weights.gamma},
                             {"patent_x", patent_x}}},
              {"diversity", diversity},
              {"timelines", l.timelines.to_json()}};
}

}  // namespace sciflow
