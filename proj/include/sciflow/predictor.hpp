#pragma once

// Patentability prediction: title features, per-CPC-group labels and splits,
// per-group GCN runs, rank percentiles and the researcher P-index.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sciflow/corpus.hpp"
#include "sciflow/gcn.hpp"

namespace sciflow {

enum class FeatureProvider { HashedTitle, ExternalFile };

struct FeatureConfig {
  FeatureProvider provider = FeatureProvider::HashedTitle;
  int dimensions = 64;
  // JSONL rows {"paper_id": ..., "embedding": [...]} for ExternalFile.
  std::filesystem::path external_path;

  json to_json() const;
};

struct FeatureMatrix {
  Matrix x;                   // one row per paper, in `papers` order
  std::vector<Index> papers;  // corpus paper indices
  FeatureProvider provider = FeatureProvider::HashedTitle;
};

// Lowercase ASCII, split on anything that is not a letter or digit.
std::vector<std::string> tokenize_title(std::string_view title);

// Signed feature hashing: FNV-1a 64 of the token picks bucket h % dims and
// sign + when bit 32 of h is set, - otherwise.
Eigen::VectorXd hashed_title_counts(std::string_view title, int dims);
// Counts scaled to unit L2 norm; zero rows stay zero.
Eigen::VectorXd hashed_title_embedding(std::string_view title, int dims);

FeatureMatrix build_features(const CorpusView& view, const FeatureConfig& config);

// Undirected paper-paper citation graph over `papers` (row order).
NormalizedAdjacency normalize_adjacency(const CorpusView& view, std::span<const Index> papers);

struct PredictionConfig {
  TrainConfig train;
  int split_year = 2014;         // train/val: year <= split_year; test: split_year + 1
  double train_fraction = 0.7;
  YearRange predict_window{2016, 2020};
  int k_groups = 50;
  int label_horizon = 5;
  int jobs = 1;

  json to_json() const;
};

// Top-K CPC groups by distinct citing patents (patents in the view citing at
// least one paper in the view); ties by group id.
std::vector<Index> top_cpc_groups(const CorpusView& view, int k);

// 1 iff the paper is cited by a patent in `group` with
// application_year - year in [0, horizon]; one entry per row of `papers`.
std::vector<int> group_labels(const CorpusView& view, std::span<const Index> papers, Index group,
                              int horizon = 5);

struct PaperSplits {
  Splits labelled;              // row indices
  std::vector<NodeIndex> predict;
};

// Seeded 70/30 shuffle of rows with year <= split_year; test and predict
// rows by year.
PaperSplits make_splits(const CorpusView& view, std::span<const Index> papers,
                        const PredictionConfig& config);

// Average-rank percentile in [0, 100]: 100 · (rank - 1) / (n - 1) with ranks
// 1..n ascending; 50 for a single value.
std::vector<double> percentile_ranks(std::span<const double> values);

struct GroupResult {
  std::string group;
  GcnModel model;
  std::optional<double> test_auc;
  std::optional<double> best_val_auc;
};

// Trains one GCN per group. Results come back in `groups` order and do not
// depend on `jobs`.
std::vector<GroupResult> train_groups(const FeatureMatrix& features, const NormalizedAdjacency& a,
                                      const CorpusView& view, std::span<const Index> groups,
                                      const PredictionConfig& config);

struct PredictionRow {
  std::string paper_id;
  std::string group;
  double prob = 0.0;
  double percentile = 0.0;

  json to_json() const;
};

// Per-paper patentability for the prediction window.
struct PatentabilityTable {
  std::vector<std::string> groups;
  std::vector<PredictionRow> rows;                  // group-major, papers in view order
  std::map<std::string, double> patentability;      // mean percentile over groups

  // Indexed by corpus paper; nullopt for papers without a score.
  PaperScores scores(const Corpus& corpus) const;
  static PatentabilityTable from_rows(std::vector<PredictionRow> rows);
};

// Evaluates each model on the predict-window papers and converts the
// positive-class probabilities to percentiles.
PatentabilityTable patentability(const FeatureMatrix& features, const NormalizedAdjacency& a,
                                 const CorpusView& view,
                                 const std::vector<std::pair<std::string, GcnModel>>& models,
                                 const PredictionConfig& config);

// Mean Patentability over the researcher's papers in the prediction window;
// nullopt when there are none.
std::optional<double> p_index(const Corpus& corpus, std::string_view researcher_id,
                              const PatentabilityTable& table, const YearRange& predict_window);

// Incremental mean; a constant sequence returns that constant exactly.
double running_mean(std::span<const double> values);

}  // namespace sciflow
