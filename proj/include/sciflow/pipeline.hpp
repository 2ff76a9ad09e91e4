#pragma once

// Batch stages behind the CLI. Each stage reads the manifest and earlier
// outputs from RunConfig::out and writes its own files there; every output
// begins with an OutputHeader line.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sciflow/corpus.hpp"
#include "sciflow/interplay.hpp"
#include "sciflow/metrics.hpp"
#include "sciflow/predictor.hpp"

namespace sciflow {

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  std::optional<YearRange> window;  // overrides the manifest window
  MetricsConfig metrics;
  PredictionConfig prediction;
  FeatureConfig features;
  InterplayRequest layout;

  // Copies `seed` into the novelty, training and split seeds.
  void apply_seed();
  // Resolved settings without paths, so outputs do not depend on where
  // they are written.
  json to_json() const;
  OutputHeader header() const;
};

std::shared_ptr<const Corpus> load_corpus(const RunConfig& config);

// corpus_snapshot.jsonl: ingest report, then the canonical corpus dump.
void run_ingest(const RunConfig& config);
// metrics.jsonl and researchers_metrics.jsonl.
void run_metrics(const RunConfig& config);
// models/<group>.json and train_report.jsonl.
void run_train(const RunConfig& config);
// predictions.jsonl, patentability.jsonl and pindex.jsonl; needs run_train output.
void run_predict(const RunConfig& config);
// layout.json: header line and the interplay payload; needs metrics.jsonl,
// and predictions.jsonl in prediction mode.
void run_layout(const RunConfig& config);

// Readers for stage outputs.
std::vector<MetricRecord> read_metrics(const std::filesystem::path& path);
std::vector<ResearcherMetrics> read_researcher_metrics(const std::filesystem::path& path);
PatentabilityTable read_predictions(const std::filesystem::path& path);
std::vector<std::pair<std::string, GcnModel>> read_models(const std::filesystem::path& out);
std::map<std::string, std::optional<double>> read_pindex(const std::filesystem::path& path);

// Same payload run_layout writes, built in memory.
json layout_payload(const CorpusView& view, const MetricsTable& metrics,
                    const PatentabilityTable* predictions, const InterplayRequest& request);

}  // namespace sciflow
