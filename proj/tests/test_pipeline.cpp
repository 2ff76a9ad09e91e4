#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sciflow/error.hpp"
#include "sciflow/pipeline.hpp"
#include "support.hpp"

using namespace sciflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents for every file under `dir`.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

RunConfig small_run(const fs::path& manifest, const fs::path& out) {
  RunConfig run;
  run.manifest = manifest;
  run.out = out;
  run.seed = 11;
  run.prediction.k_groups = 2;
  run.prediction.train.epochs = 5;
  run.metrics.novelty.shuffle_count = 3;
  run.apply_seed();
  return run;
}

void run_all(const RunConfig& run) {
  run_ingest(run);
  run_metrics(run);
  run_train(run);
  run_predict(run);
  run_layout(run);
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SCIFLOW_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("written corpus is byte-identical across runs") {
  const auto a = testing::temp_dir("synth_a");
  const auto b = testing::temp_dir("synth_b");
  write_corpus(synth_corpus({}), a, {2001, 2020});
  write_corpus(synth_corpus({}), b, {2001, 2020});
  CHECK(tree(a) == tree(b));
  CHECK(tree(a).size() == 10);
}

TEST_CASE("full pipeline is deterministic and independent of the output path") {
  const auto dir = testing::temp_dir("determinism");
  const auto manifest = write_corpus(testing::synthetic_data(), dir / "corpus", {2001, 2020});
  run_all(small_run(manifest, dir / "one"));
  run_all(small_run(manifest, dir / "two"));
  const auto one = tree(dir / "one");
  const auto two = tree(dir / "two");
  CHECK(one == two);
  for (auto f : {"corpus_snapshot.jsonl", "metrics.jsonl", "researchers_metrics.jsonl", "train_report.jsonl",
                 "predictions.jsonl", "patentability.jsonl", "pindex.jsonl", "layout.json"})
    CHECK(one.count(f) == 1);

  // Every output starts with the same header.
  const auto header = json::parse(one.at("metrics.jsonl").substr(0, one.at("metrics.jsonl").find('\n')));
  CHECK(header["seed"] == 11);
  CHECK(header.contains("config_hash"));
  CHECK(header.contains("tool_version"));
  for (const auto& [name, body] : one)
    CHECK(json::parse(body.substr(0, body.find('\n')))["config_hash"] == header["config_hash"]);

  // A different seed changes the model outputs.
  auto other = small_run(manifest, dir / "three");
  other.seed = 12;
  other.apply_seed();
  run_all(other);
  CHECK(tree(dir / "three").at("predictions.jsonl") != one.at("predictions.jsonl"));
}

TEST_CASE("stage readers round trip") {
  const auto dir = testing::temp_dir("readers");
  const auto manifest = write_corpus(testing::synthetic_data(), dir / "corpus", {2001, 2020});
  const auto run = small_run(manifest, dir / "out");
  run_all(run);
  const auto metrics = read_metrics(run.out / "metrics.jsonl");
  CHECK(metrics.size() == 2000);
  CHECK(read_researcher_metrics(run.out / "researchers_metrics.jsonl").size() == 120);
  const auto models = read_models(run.out);
  CHECK(models.size() == 2);
  const auto table = read_predictions(run.out / "predictions.jsonl");
  CHECK(table.groups.size() == 2);
  const auto pindex = read_pindex(run.out / "pindex.jsonl");
  CHECK(pindex.size() == 120);

  // The layout file holds the in-memory payload.
  const auto corpus = load_corpus(run);
  const CorpusView view(corpus);
  const auto payload = layout_payload(view, make_metrics_table(*corpus, metrics), nullptr, run.layout);
  const auto text = slurp(run.out / "layout.json");
  CHECK(text.substr(text.find('\n') + 1) == payload.dump() + "\n");
}

TEST_CASE("metrics leave the corpus untouched") {
  const auto c = testing::synthetic();
  const auto before = c->snapshot().dump();
  MetricsConfig cfg;
  cfg.novelty.shuffle_count = 2;
  compute_paper_metrics(CorpusView(c), cfg);
  compute_researcher_metrics(CorpusView(c), cfg);
  CHECK(c->snapshot().dump() == before);
}

TEST_CASE("stages report missing inputs") {
  const auto dir = testing::temp_dir("missing");
  const auto manifest = write_corpus(testing::synthetic_data(), dir / "corpus", {2001, 2020});
  const auto run = small_run(manifest, dir / "out");
  CHECK_THROWS_AS(run_layout(run), IoError);
  CHECK_THROWS_AS(run_predict(run), IoError);
  auto no_manifest = run;
  no_manifest.manifest = dir / "absent.json";
  CHECK_THROWS_AS(run_ingest(no_manifest), IoError);
}

TEST_CASE("command line exit codes") {
  const auto dir = testing::temp_dir("cli");
  const auto corpus = (dir / "corpus").string();
  const auto out = (dir / "out").string();
  REQUIRE(cli("synth --out " + corpus + " --papers 300 --patents 80 --links 400 --researchers 30") == 0);
  const auto m = "--manifest " + corpus + "/manifest.json --out " + out;
  CHECK(cli("ingest " + m) == 0);
  CHECK(cli("metrics " + m + " --novelty-shuffles 3") == 0);
  CHECK(cli("layout " + m + " --bins 0,1,5") == 0);
  CHECK(fs::exists(dir / "out" / "layout.json"));

  CHECK(cli("ingest --bogus") == 1);
  CHECK(cli("") == 1);
  CHECK(cli("layout " + m + " --bins 3,1") == 1);
  CHECK(cli("layout " + m + " --filter '{\"field_ids\":[\"nope\"]}'") == 1);
  CHECK(cli("layout " + m + " --filter '{oops'") == 1);
  CHECK(cli("train " + m + " --optimizer sgd") == 1);
  CHECK(cli("ingest --manifest " + (dir / "none.json").string() + " --out " + out) == 2);
  CHECK(cli("predict --manifest " + corpus + "/manifest.json --out " + (dir / "empty").string()) == 2);

  // A malformed row fails validation.
  std::ofstream(dir / "corpus" / "papers.jsonl", std::ios::app) << "{\"id\":\n";
  CHECK(cli("ingest " + m) == 1);
}
