// sciflow command line: ingest, metrics, train, predict, layout, serve, synth.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sciflow/error.hpp"
#include "sciflow/pipeline.hpp"
#include "sciflow/server.hpp"
#include "sciflow/synth.hpp"

using namespace sciflow;
namespace fs = std::filesystem;

namespace {

struct Options {
  RunConfig run;
  SynthConfig synth;
  std::string window;
  std::string bins = "0,1,3,8,21";
  std::string mode = "historical";
  std::string filter;
  std::string optimizer = "adam";
  std::string features;
  std::string host = "127.0.0.1";
  int port = 8080;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--manifest", o.run.manifest, "Ingest manifest (JSON)");
  cmd->add_option("--out", o.run.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", o.run.seed, "Base seed")->capture_default_str();
  cmd->add_option("--window", o.window, "Publication window, e.g. 2001:2020");
}

void add_metrics(CLI::App* cmd, Options& o) {
  cmd->add_option("--novelty-shuffles", o.run.metrics.novelty.shuffle_count, "Randomized reference graphs")
      ->capture_default_str();
  cmd->add_flag("--exclude-self-citations", o.run.metrics.exclude_self_citations,
                "Drop citing papers sharing an author");
}

void add_model(CLI::App* cmd, Options& o) {
  auto& p = o.run.prediction;
  cmd->add_option("--k-groups", p.k_groups, "CPC groups to model")->capture_default_str();
  cmd->add_option("--epochs", p.train.epochs)->capture_default_str();
  cmd->add_option("--lr", p.train.learning_rate)->capture_default_str();
  cmd->add_option("--dropout", p.train.dropout)->capture_default_str();
  cmd->add_option("--hidden", p.train.hidden)->capture_default_str();
  cmd->add_option("--weight-decay", p.train.weight_decay)->capture_default_str();
  cmd->add_option("--optimizer", o.optimizer, "adam or gd")->capture_default_str();
  cmd->add_flag("--halve-lr", p.train.halve_lr_on_increase, "gd: halve the step when the loss rises");
  cmd->add_option("--split-year", p.split_year)->capture_default_str();
  cmd->add_option("--jobs", p.jobs, "Parallel group workers")->capture_default_str();
  cmd->add_option("--features", o.features, "External embeddings JSONL {paper_id, embedding}");
  cmd->add_option("--dims", o.run.features.dimensions, "Hashed title feature size")->capture_default_str();
}

void add_layout(CLI::App* cmd, Options& o) {
  auto& l = o.run.layout;
  cmd->add_option("--bins", o.bins, "Citation-count row lower bounds")->capture_default_str();
  cmd->add_option("--alpha", l.weights.alpha)->capture_default_str();
  cmd->add_option("--beta", l.weights.beta)->capture_default_str();
  cmd->add_option("--gamma", l.weights.gamma)->capture_default_str();
  cmd->add_option("--level", l.level, "Field hierarchy level of the columns")->capture_default_str();
  cmd->add_option("--mode", o.mode, "historical or prediction")->capture_default_str();
  cmd->add_option("--min-pct", l.min_percentile, "Prediction mode percentile cut")->capture_default_str();
  cmd->add_option("--filter", o.filter, "QueryFilter as JSON");
}

void resolve(Options& o) {
  if (!o.window.empty()) o.run.window = parse_year_range(o.window);
  o.run.layout.bins = parse_bins(o.bins);
  o.run.layout.mode = flow_mode_from_string(o.mode);
  if (!o.filter.empty()) {
    try {
      o.run.layout.filter = QueryFilter::from_json(json::parse(o.filter));
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("--filter: malformed JSON: ") + e.what());
    }
  }
  if (o.optimizer == "adam") o.run.prediction.train.optimizer = Optimizer::Adam;
  else if (o.optimizer == "gd") o.run.prediction.train.optimizer = Optimizer::GradientDescent;
  else throw ValidationError("--optimizer must be adam or gd");
  if (!o.features.empty()) {
    o.run.features.provider = FeatureProvider::ExternalFile;
    o.run.features.external_path = o.features;
  }
  o.run.apply_seed();
}

void echo(const std::string& command, const json& config) {
  std::cerr << "sciflow " << command << " " << config.dump() << "\n";
}

json with_paths(const RunConfig& run) {
  auto j = run.to_json();
  j["manifest"] = run.manifest.string();
  j["out"] = run.out.string();
  return j;
}

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Science-technology interplay analysis"};
  app.require_subcommand(1);
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Validate and index a corpus");
  add_common(ingest, o);
  auto* metrics = app.add_subcommand("metrics", "Per-paper and per-researcher metrics");
  add_common(metrics, o);
  add_metrics(metrics, o);
  auto* train = app.add_subcommand("train", "Train one GCN per CPC group");
  add_common(train, o);
  add_model(train, o);
  auto* predict = app.add_subcommand("predict", "Patentability, percentiles and P-index");
  add_common(predict, o);
  add_model(predict, o);
  auto* layout = app.add_subcommand("layout", "Build the interplay layout");
  add_common(layout, o);
  add_layout(layout, o);
  auto* serve = app.add_subcommand("serve", "Serve the query API");
  add_common(serve, o);
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--port", o.port)->capture_default_str();
  auto* synth = app.add_subcommand("synth", "Write the synthetic corpus");
  synth->add_option("--out", o.run.out, "Output directory")->capture_default_str();
  synth->add_option("--seed", o.synth.seed)->capture_default_str();
  synth->add_option("--papers", o.synth.papers)->capture_default_str();
  synth->add_option("--patents", o.synth.patents)->capture_default_str();
  synth->add_option("--links", o.synth.links)->capture_default_str();
  synth->add_option("--researchers", o.synth.researchers)->capture_default_str();
  synth->add_option("--window", o.window, "Year range of the generated papers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    resolve(o);
    if (*synth) {
      if (o.run.window) o.synth.years = *o.run.window;
      auto j = o.synth.to_json();
      j["out"] = o.run.out.string();
      echo("synth", j);
      const auto data = synth_corpus(o.synth);
      write_corpus(data, o.run.out, o.synth.years);
    } else if (*serve) {
      json j = with_paths(o.run);
      j["host"] = o.host;
      j["port"] = o.port;
      echo("serve", j);
      if (o.run.manifest.empty()) throw ValidationError("--manifest is required");
      const auto state = ServerState::load(o.run.manifest, o.run.out, o.run.window);
      HttpService service(*state);
      const int port = service.bind(o.host, o.port);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << o.host << ":" << port << "\n";
      service.listen();
      g_service = nullptr;
    } else {
      const std::string name = app.get_subcommands().front()->get_name();
      echo(name, with_paths(o.run));
      if (*ingest) run_ingest(o.run);
      else if (*metrics) run_metrics(o.run);
      else if (*train) run_train(o.run);
      else if (*predict) run_predict(o.run);
      else if (*layout) run_layout(o.run);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
