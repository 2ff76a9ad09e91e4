#include "sciflow/pipeline.hpp"

#include <filesystem>

#include "sciflow/error.hpp"

namespace sciflow {

namespace fs = std::filesystem;

void RunConfig::apply_seed() {
  metrics.novelty.seed = seed;
  prediction.train.seed = seed;
}

json RunConfig::to_json() const {
  return json{{"seed", seed},
              {"window", window ? json{window->lo, window->hi} : json(nullptr)},
              {"metrics", metrics.to_json()},
              {"prediction", prediction.to_json()},
              {"features", features.to_json()},
              {"layout", layout.to_json()}};
}

OutputHeader RunConfig::header() const {
  OutputHeader h;
  h.config_hash = config_hash(to_json());
  h.seed = seed;
  return h;
}

std::shared_ptr<const Corpus> load_corpus(const RunConfig& config) {
  if (config.manifest.empty()) throw ValidationError("--manifest is required");
  return Corpus::load(config.manifest, config.window);
}

void run_ingest(const RunConfig& config) {
  const auto corpus = load_corpus(config);
  json counts = {{"papers", corpus->paper_count()},
                 {"patents", corpus->patent_count()},
                 {"researchers", corpus->researcher_count()},
                 {"paper_citations", corpus->paper_citation_count()},
                 {"paper_patent_citations", corpus->paper_patent_citation_count()}};
  write_jsonl(config.out / "corpus_snapshot.jsonl", config.header(),
              {json{{"counts", counts}, {"report", corpus->report().to_json()}}, corpus->snapshot()});
}

void run_metrics(const RunConfig& config) {
  const auto corpus = load_corpus(config);
  const CorpusView view(corpus);
  std::vector<json> rows;
  for (const auto& r : compute_paper_metrics(view, config.metrics)) rows.push_back(r.to_json());
  write_jsonl(config.out / "metrics.jsonl", config.header(), rows);
  rows.clear();
  for (const auto& r : compute_researcher_metrics(view, config.metrics)) rows.push_back(r.to_json());
  write_jsonl(config.out / "researchers_metrics.jsonl", config.header(), rows);
}

namespace {

struct ModelInputs {
  FeatureMatrix features;
  NormalizedAdjacency adjacency;
};

ModelInputs model_inputs(const CorpusView& view, const RunConfig& config) {
  ModelInputs in;
  in.features = build_features(view, config.features);
  in.adjacency = normalize_adjacency(view, in.features.papers);
  return in;
}

std::string model_file(const std::string& group) { return "models/" + group + ".json"; }

}  // namespace

void run_train(const RunConfig& config) {
  const auto corpus = load_corpus(config);
  const CorpusView view(corpus);
  const auto in = model_inputs(view, config);
  const auto groups = top_cpc_groups(view, config.prediction.k_groups);
  const auto results = train_groups(in.features, in.adjacency, view, groups, config.prediction);
  std::vector<json> report;
  for (const auto& r : results) {
    write_jsonl(config.out / model_file(r.group), config.header(),
                {json{{"group", r.group}, {"model", r.model.to_json()}}});
    report.push_back({{"group", r.group},
                      {"test_auc", optional_to_json(r.test_auc)},
                      {"best_val_auc", optional_to_json(r.best_val_auc)},
                      {"best_epoch", r.model.best_epoch},
                      {"model", model_file(r.group)},
                      {"warnings", r.model.warnings}});
  }
  write_jsonl(config.out / "train_report.jsonl", config.header(), report);
}

std::vector<std::pair<std::string, GcnModel>> read_models(const fs::path& out) {
  std::vector<std::pair<std::string, GcnModel>> models;
  for (const auto& row : read_output_jsonl(out / "train_report.jsonl").rows) {
    const auto group = require_string(row, "group");
    const auto file = read_output_jsonl(out / require_string(row, "model"));
    if (file.rows.size() != 1) throw ValidationError("model file for '" + group + "' must hold one row");
    models.emplace_back(group, GcnModel::from_json(require_key(file.rows[0], "model")));
  }
  return models;
}

void run_predict(const RunConfig& config) {
  const auto corpus = load_corpus(config);
  const CorpusView view(corpus);
  const auto models = read_models(config.out);
  const auto in = model_inputs(view, config);
  const auto table = patentability(in.features, in.adjacency, view, models, config.prediction);

  std::vector<json> rows;
  for (const auto& r : table.rows) rows.push_back(r.to_json());
  write_jsonl(config.out / "predictions.jsonl", config.header(), rows);
  rows.clear();
  for (const auto& [id, v] : table.patentability) rows.push_back({{"paper_id", id}, {"patentability", v}});
  write_jsonl(config.out / "patentability.jsonl", config.header(), rows);
  rows.clear();
  for (const auto& r : corpus->researchers())
    rows.push_back({{"researcher_id", r.id},
                    {"p_index", optional_to_json(p_index(*corpus, r.id, table, config.prediction.predict_window))}});
  write_jsonl(config.out / "pindex.jsonl", config.header(), rows);
}

std::vector<MetricRecord> read_metrics(const fs::path& path) {
  std::vector<MetricRecord> out;
  for (const auto& row : read_output_jsonl(path).rows) out.push_back(MetricRecord::from_json(row));
  return out;
}

std::vector<ResearcherMetrics> read_researcher_metrics(const fs::path& path) {
  std::vector<ResearcherMetrics> out;
  for (const auto& row : read_output_jsonl(path).rows) out.push_back(ResearcherMetrics::from_json(row));
  return out;
}

PatentabilityTable read_predictions(const fs::path& path) {
  std::vector<PredictionRow> rows;
  for (const auto& row : read_output_jsonl(path).rows) {
    PredictionRow r;
    r.paper_id = require_string(row, "paper_id");
    r.group = require_string(row, "group");
    r.prob = require_key(row, "prob").get<double>();
    r.percentile = require_key(row, "percentile").get<double>();
    rows.push_back(std::move(r));
  }
  return PatentabilityTable::from_rows(std::move(rows));
}

std::map<std::string, std::optional<double>> read_pindex(const fs::path& path) {
  std::map<std::string, std::optional<double>> out;
  for (const auto& row : read_output_jsonl(path).rows) {
    const auto& v = require_key(row, "p_index");
    out[require_string(row, "researcher_id")] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  }
  return out;
}

json layout_payload(const CorpusView& view, const MetricsTable& metrics,
                    const PatentabilityTable* predictions, const InterplayRequest& request) {
  validate_filter(view.corpus(), request.filter);
  const auto layout = build_interplay(view, metrics, predictions, request);
  return interplay_to_json(layout, view.corpus(), request);
}

void run_layout(const RunConfig& config) {
  const auto corpus = load_corpus(config);
  const CorpusView view(corpus);
  const auto metrics = make_metrics_table(*corpus, read_metrics(config.out / "metrics.jsonl"));
  std::optional<PatentabilityTable> predictions;
  if (config.layout.mode == FlowMode::Prediction || config.layout.filter.min_patentability)
    predictions = read_predictions(config.out / "predictions.jsonl");
  const auto payload = layout_payload(view, metrics, predictions ? &*predictions : nullptr, config.layout);
  write_jsonl(config.out / "layout.json", config.header(), {payload});
}

}  // namespace sciflow
