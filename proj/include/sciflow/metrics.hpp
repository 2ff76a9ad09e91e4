#pragma once

// Per-paper scientific facts and researcher aggregates over a CorpusView.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sciflow/corpus.hpp"

namespace sciflow {

struct NoveltyConfig {
  int shuffle_count = 10;  // M randomized reference graphs
  std::uint64_t seed = 0;
  static constexpr double kPercentile = 10.0;
};

struct MetricsConfig {
  NoveltyConfig novelty;
  // Drop citing papers that share an author with the cited paper.
  bool exclude_self_citations = false;

  json to_json() const;
};

struct MetricRecord {
  std::string paper_id;
  int team_size = 0;
  int institution_count = 0;
  int grant_count = 0;
  int science_citation_5y = 0;
  std::optional<double> disruption;
  std::optional<double> novelty;
  int patent_citation_5y = 0;

  json to_json() const;
  static MetricRecord from_json(const json& j);
  bool operator==(const MetricRecord&) const = default;
};

struct ResearcherMetrics {
  std::string researcher_id;
  int paper_count = 0;
  std::optional<double> avg_science_citation_5y;
  int papers_cited_by_patents = 0;
  int citing_patent_count = 0;
  int patent_citation_count = 0;
  std::optional<int> invention_disclosure_count;
  std::optional<int> granted_patent_count;

  json to_json() const;
  static ResearcherMetrics from_json(const json& j);
};

// Subsequent papers that cite only the focal paper (i), both it and one of
// its references (j), or only its references (k).
struct DisruptionCounts {
  int only_focal = 0;
  int both = 0;
  int only_references = 0;

  std::optional<double> value() const;
  bool operator==(const DisruptionCounts&) const = default;
};

DisruptionCounts disruption_counts(const CorpusView& view, Index paper);
std::optional<double> disruption(const CorpusView& view, std::string_view paper_id);

// Reference venue-pair co-occurrence statistics under M degree- and
// year-preserving shuffles of the (citing paper -> referenced venue) edges.
// Building it is the expensive part; queries are cheap.
class NoveltyModel {
 public:
  NoveltyModel(const CorpusView& view, const NoveltyConfig& config);

  std::optional<double> novelty(Index paper) const;
  // z-scores of the paper's distinct venue pairs, skipping pairs with zero spread.
  std::vector<double> pair_z_scores(Index paper) const;

  struct PairStats {
    std::uint64_t observed = 0;
    double mean = 0.0;
    double stddev = 0.0;
  };
  std::uint64_t observed(std::uint32_t venue_a, std::uint32_t venue_b) const;
  std::optional<PairStats> pair(std::uint32_t venue_a, std::uint32_t venue_b) const;
  std::optional<std::uint32_t> venue_index(std::string_view venue_id) const;

 private:
  static std::uint64_t key(std::uint32_t a, std::uint32_t b);
  std::vector<std::uint32_t> distinct_venues(Index paper) const;

  const CorpusView* view_;
  std::unordered_map<std::string, std::uint32_t> venue_ids_;
  std::vector<std::vector<std::uint32_t>> reference_venues_;  // per corpus paper, in view
  std::unordered_map<std::uint64_t, PairStats> stats_;
};

// (observed - mean) / stddev. With zero spread: 0 when observed equals the
// mean, undefined otherwise.
std::optional<double> pair_z(const NoveltyModel::PairStats& s);

std::optional<double> novelty(const CorpusView& view, std::string_view paper_id,
                              const NoveltyConfig& config);

// Linear-interpolated percentile (q in [0, 100]) of an unsorted sample.
double percentile_linear(std::vector<double> values, double q);

int science_citation_5y(const CorpusView& view, Index paper, const MetricsConfig& config = {});
int patent_citation_5y(const CorpusView& view, Index paper);

MetricRecord paper_facts(const CorpusView& view, std::string_view paper_id,
                         const MetricsConfig& config);
// Same as paper_facts with a prebuilt novelty model.
MetricRecord paper_facts(const CorpusView& view, Index paper, const MetricsConfig& config,
                         const NoveltyModel& novelty);

// MetricRecord for every paper in the view, in view order.
std::vector<MetricRecord> compute_paper_metrics(const CorpusView& view,
                                                const MetricsConfig& config);

ResearcherMetrics researcher_metrics(const CorpusView& view, std::string_view researcher_id,
                                     const MetricsConfig& config = {});
std::vector<ResearcherMetrics> compute_researcher_metrics(const CorpusView& view,
                                                          const MetricsConfig& config = {});

// Metric records indexed by corpus paper; nullopt where none was computed.
using MetricsTable = std::vector<std::optional<MetricRecord>>;
MetricsTable make_metrics_table(const Corpus& corpus, std::span<const MetricRecord> records);

// Shannon entropy (natural log) of a count distribution; zero counts ignored.
double shannon_entropy(std::span<const std::uint64_t> counts);

// Entropy of CPC sections over distinct (citing patent, section) pairs for
// patents citing papers in the field.
double diversity(const CorpusView& view, std::string_view field_id);
double diversity(const CorpusView& view, Index field);
// Same measure over an explicit paper set.
double diversity_of_papers(const CorpusView& view, std::span<const Index> papers);

}  // namespace sciflow
