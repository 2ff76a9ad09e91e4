#include "sciflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "sciflow/error.hpp"
#include "sciflow/rng.hpp"

namespace sciflow {

json MetricsConfig::to_json() const {
  return json{{"novelty_shuffles", novelty.shuffle_count},
              {"novelty_seed", novelty.seed},
              {"exclude_self_citations", exclude_self_citations}};
}

json MetricRecord::to_json() const {
  return json{{"paper_id", paper_id},
              {"team_size", team_size},
              {"institution_count", institution_count},
              {"grant_count", grant_count},
              {"science_citation_5y", science_citation_5y},
              {"disruption", optional_to_json(disruption)},
              {"novelty", optional_to_json(novelty)},
              {"patent_citation_5y", patent_citation_5y}};
}

MetricRecord MetricRecord::from_json(const json& j) {
  MetricRecord r;
  r.paper_id = j.at("paper_id").get<std::string>();
  r.team_size = j.at("team_size").get<int>();
  r.institution_count = j.at("institution_count").get<int>();
  r.grant_count = j.at("grant_count").get<int>();
  r.science_citation_5y = j.at("science_citation_5y").get<int>();
  if (!j.at("disruption").is_null()) r.disruption = j.at("disruption").get<double>();
  if (!j.at("novelty").is_null()) r.novelty = j.at("novelty").get<double>();
  r.patent_citation_5y = j.at("patent_citation_5y").get<int>();
  return r;
}

json ResearcherMetrics::to_json() const {
  return json{{"researcher_id", researcher_id},
              {"paper_count", paper_count},
              {"avg_science_citation_5y", optional_to_json(avg_science_citation_5y)},
              {"papers_cited_by_patents", papers_cited_by_patents},
              {"citing_patent_count", citing_patent_count},
              {"patent_citation_count", patent_citation_count},
              {"invention_disclosure_count", optional_to_json(invention_disclosure_count)},
              {"granted_patent_count", optional_to_json(granted_patent_count)}};
}

ResearcherMetrics ResearcherMetrics::from_json(const json& j) {
  ResearcherMetrics m;
  m.researcher_id = j.at("researcher_id").get<std::string>();
  m.paper_count = j.at("paper_count").get<int>();
  if (!j.at("avg_science_citation_5y").is_null())
    m.avg_science_citation_5y = j.at("avg_science_citation_5y").get<double>();
  m.papers_cited_by_patents = j.at("papers_cited_by_patents").get<int>();
  m.citing_patent_count = j.at("citing_patent_count").get<int>();
  m.patent_citation_count = j.at("patent_citation_count").get<int>();
  if (!j.at("invention_disclosure_count").is_null())
    m.invention_disclosure_count = j.at("invention_disclosure_count").get<int>();
  if (!j.at("granted_patent_count").is_null())
    m.granted_patent_count = j.at("granted_patent_count").get<int>();
  return m;
}

// ---- Disruption ----

std::optional<double> DisruptionCounts::value() const {
  const int total = only_focal + both + only_references;
  if (total == 0) return std::nullopt;
  return static_cast<double>(only_focal - both) / static_cast<double>(total);
}

DisruptionCounts disruption_counts(const CorpusView& view, Index focal) {
  const auto& c = view.corpus();
  if (!view.has_paper(focal)) throw ValidationError("paper not in view");
  const int year = c.paper(focal).year;
  const auto refs = view.references(focal);

  // Candidates: papers citing the focal paper or any of its references.
  std::vector<Index> candidates = view.citers(focal);
  for (Index r : refs) {
    auto cr = view.citers(r);
    candidates.insert(candidates.end(), cr.begin(), cr.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  DisruptionCounts counts;
  for (Index cand : candidates) {
    if (cand == focal || c.paper(cand).year < year) continue;
    const auto& cand_refs = c.references(cand);
    const bool cites_focal = std::binary_search(cand_refs.begin(), cand_refs.end(), focal);
    const bool cites_refs = std::any_of(refs.begin(), refs.end(), [&](Index r) {
      return std::binary_search(cand_refs.begin(), cand_refs.end(), r);
    });
    if (cites_focal && cites_refs) ++counts.both;
    else if (cites_focal) ++counts.only_focal;
    else if (cites_refs) ++counts.only_references;
  }
  return counts;
}

std::optional<double> disruption(const CorpusView& view, std::string_view paper_id) {
  const Index p = view.corpus().paper_at(paper_id);
  return disruption_counts(view, p).value();
}

// ---- Novelty ----

double percentile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::uint64_t NoveltyModel::key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

NoveltyModel::NoveltyModel(const CorpusView& view, const NoveltyConfig& config) : view_(&view) {
  if (config.shuffle_count < 1) throw ValidationError("novelty: shuffle count must be >= 1");
  const auto& c = view.corpus();
  reference_venues_.assign(c.paper_count(), {});

  // Edge list (citing paper, venue) in view order, grouped by citing year.
  std::map<int, std::vector<Index>> stratum_papers;
  for (Index p : view.papers()) {
    for (Index r : view.references(p)) {
      const auto& v = c.paper(r).venue_id;
      if (!v) continue;
      auto [it, inserted] =
          venue_ids_.emplace(*v, static_cast<std::uint32_t>(venue_ids_.size()));
      reference_venues_[p].push_back(it->second);
    }
    if (!reference_venues_[p].empty()) stratum_papers[c.paper(p).year].push_back(p);
  }

  auto count_pairs = [](const std::vector<std::uint32_t>& venues, auto&& emit) {
    std::vector<std::uint32_t> d = venues;
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = i + 1; j < d.size(); ++j) emit(key(d[i], d[j]));
  };

  for (Index p : view.papers())
    count_pairs(reference_venues_[p], [&](std::uint64_t k) { ++stats_[k].observed; });

  const auto m = static_cast<std::size_t>(config.shuffle_count);
  std::unordered_map<std::uint64_t, std::vector<double>> samples;
  for (auto& [k, s] : stats_) samples[k].assign(m, 0.0);

  Rng rng(derive_seed(config.seed, "novelty"));
  for (std::size_t round = 0; round < m; ++round) {
    for (const auto& [year, papers] : stratum_papers) {
      std::vector<std::uint32_t> targets;
      for (Index p : papers)
        targets.insert(targets.end(), reference_venues_[p].begin(), reference_venues_[p].end());
      rng.shuffle(targets);
      std::size_t pos = 0;
      for (Index p : papers) {
        const auto deg = reference_venues_[p].size();
        std::vector<std::uint32_t> shuffled(targets.begin() + static_cast<std::ptrdiff_t>(pos),
                                            targets.begin() + static_cast<std::ptrdiff_t>(pos + deg));
        pos += deg;
        count_pairs(shuffled, [&](std::uint64_t k) {
          auto it = samples.find(k);
          if (it != samples.end()) it->second[round] += 1.0;
        });
      }
    }
  }

  for (auto& [k, s] : stats_) {
    const auto& xs = samples[k];
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.mean = mean;
    s.stddev = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
  }
}

std::vector<std::uint32_t> NoveltyModel::distinct_venues(Index paper) const {
  auto d = reference_venues_[paper];
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  return d;
}

std::vector<double> NoveltyModel::pair_z_scores(Index paper) const {
  if (!view_->has_paper(paper)) throw ValidationError("paper not in view");
  const auto d = distinct_venues(paper);
  std::vector<double> z;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      const auto& s = stats_.at(key(d[i], d[j]));
      if (s.stddev == 0.0) continue;
      z.push_back((static_cast<double>(s.observed) - s.mean) / s.stddev);
    }
  }
  return z;
}

std::optional<double> NoveltyModel::novelty(Index paper) const {
  const auto z = pair_z_scores(paper);
  if (z.empty()) return std::nullopt;
  return percentile_linear(z, NoveltyConfig::kPercentile);
}

std::uint64_t NoveltyModel::observed(std::uint32_t a, std::uint32_t b) const {
  auto it = stats_.find(key(a, b));
  return it == stats_.end() ? 0 : it->second.observed;
}

std::optional<NoveltyModel::PairStats> NoveltyModel::pair(std::uint32_t a, std::uint32_t b) const {
  auto it = stats_.find(key(a, b));
  if (it == stats_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> pair_z(const NoveltyModel::PairStats& s) {
  const double diff = static_cast<double>(s.observed) - s.mean;
  if (s.stddev > 0.0) return diff / s.stddev;
  if (diff == 0.0) return 0.0;
  return std::nullopt;
}

std::optional<std::uint32_t> NoveltyModel::venue_index(std::string_view venue_id) const {
  auto it = venue_ids_.find(std::string(venue_id));
  if (it == venue_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> novelty(const CorpusView& view, std::string_view paper_id,
                              const NoveltyConfig& config) {
  const Index p = view.corpus().paper_at(paper_id);
  NoveltyModel model(view, config);
  return model.novelty(p);
}

// ---- Citation windows ----

namespace {

bool shares_author(const Paper& a, const Paper& b) {
  for (const auto& x : a.author_ids)
    if (std::find(b.author_ids.begin(), b.author_ids.end(), x) != b.author_ids.end()) return true;
  return false;
}

bool within_horizon(int from_year, int to_year) {
  const int d = to_year - from_year;
  return d >= 0 && d <= 5;
}

}  // namespace

int science_citation_5y(const CorpusView& view, Index paper, const MetricsConfig& config) {
  const auto& c = view.corpus();
  const auto& focal = c.paper(paper);
  int n = 0;
  for (Index citer : view.citers(paper)) {
    const auto& cp = c.paper(citer);
    if (!within_horizon(focal.year, cp.year)) continue;
    if (config.exclude_self_citations && shares_author(focal, cp)) continue;
    ++n;
  }
  return n;
}

int patent_citation_5y(const CorpusView& view, Index paper) {
  const auto& c = view.corpus();
  int n = 0;
  for (Index t : view.citing_patents(paper))
    n += within_horizon(c.paper(paper).year, c.patent(t).application_year);
  return n;
}

MetricRecord paper_facts(const CorpusView& view, Index p, const MetricsConfig& config,
                         const NoveltyModel& novelty_model) {
  const auto& c = view.corpus();
  if (!view.has_paper(p)) throw ValidationError("paper not in view");
  const auto& paper = c.paper(p);
  MetricRecord r;
  r.paper_id = paper.id;
  r.team_size = static_cast<int>(paper.author_ids.size());
  std::set<std::string> affiliations;
  for (Index a : c.paper_researchers(p))
    if (const auto& aff = c.researcher(a).affiliation) affiliations.insert(*aff);
  r.institution_count = static_cast<int>(affiliations.size());
  r.grant_count = paper.grant_count;
  r.science_citation_5y = science_citation_5y(view, p, config);
  r.patent_citation_5y = patent_citation_5y(view, p);
  r.disruption = disruption_counts(view, p).value();
  r.novelty = novelty_model.novelty(p);
  return r;
}

MetricRecord paper_facts(const CorpusView& view, std::string_view paper_id,
                         const MetricsConfig& config) {
  const Index p = view.corpus().paper_at(paper_id);
  NoveltyModel model(view, config.novelty);
  return paper_facts(view, p, config, model);
}

std::vector<MetricRecord> compute_paper_metrics(const CorpusView& view,
                                                const MetricsConfig& config) {
  NoveltyModel model(view, config.novelty);
  std::vector<MetricRecord> out;
  out.reserve(view.papers().size());
  for (Index p : view.papers()) out.push_back(paper_facts(view, p, config, model));
  return out;
}

// ---- Researchers ----

namespace {

ResearcherMetrics researcher_metrics_at(const CorpusView& view, Index r,
                                        const MetricsConfig& config) {
  const auto& c = view.corpus();
  const auto& researcher = c.researcher(r);
  ResearcherMetrics m;
  m.researcher_id = researcher.id;
  m.invention_disclosure_count = researcher.invention_disclosure_count;
  m.granted_patent_count = researcher.granted_patent_count;
  const auto papers = view.researcher_papers(r);
  m.paper_count = static_cast<int>(papers.size());
  std::set<Index> patents;
  long long citation_sum = 0;
  for (Index p : papers) {
    citation_sum += science_citation_5y(view, p, config);
    const auto cites = view.citing_patents(p);
    if (!cites.empty()) ++m.papers_cited_by_patents;
    m.patent_citation_count += static_cast<int>(cites.size());
    patents.insert(cites.begin(), cites.end());
  }
  m.citing_patent_count = static_cast<int>(patents.size());
  if (!papers.empty())
    m.avg_science_citation_5y = static_cast<double>(citation_sum) / static_cast<double>(papers.size());
  return m;
}

}  // namespace

ResearcherMetrics researcher_metrics(const CorpusView& view, std::string_view researcher_id,
                                     const MetricsConfig& config) {
  return researcher_metrics_at(view, view.corpus().researcher_at(researcher_id), config);
}

std::vector<ResearcherMetrics> compute_researcher_metrics(const CorpusView& view,
                                                          const MetricsConfig& config) {
  std::vector<ResearcherMetrics> out;
  out.reserve(view.researchers().size());
  for (Index r : view.researchers()) out.push_back(researcher_metrics_at(view, r, config));
  return out;
}

// ---- Diversity ----

double shannon_entropy(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0 || c == total) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

MetricsTable make_metrics_table(const Corpus& corpus, std::span<const MetricRecord> records) {
  MetricsTable table(corpus.paper_count());
  for (const auto& r : records)
    if (auto p = corpus.find_paper(r.paper_id)) table[*p] = r;
  return table;
}

double diversity(const CorpusView& view, Index field) {
  std::vector<Index> papers;
  for (Index p : view.papers())
    if (paper_in_field(view.corpus(), p, field)) papers.push_back(p);
  return diversity_of_papers(view, papers);
}

double diversity_of_papers(const CorpusView& view, std::span<const Index> papers) {
  const auto& c = view.corpus();
  std::set<Index> patents;
  for (Index p : papers)
    for (Index t : view.citing_patents(p)) patents.insert(t);
  std::map<Index, std::uint64_t> by_section;
  for (Index t : patents)
    for (Index s : c.patent_cpc_nodes(t, 0)) ++by_section[s];
  std::vector<std::uint64_t> counts;
  for (const auto& [s, n] : by_section) counts.push_back(n);
  return shannon_entropy(counts);
}

double diversity(const CorpusView& view, std::string_view field_id) {
  auto f = view.corpus().fields().find(field_id);
  if (!f) throw ValidationError("unknown field id '" + std::string(field_id) + "'");
  return diversity(view, *f);
}

}  // namespace sciflow
