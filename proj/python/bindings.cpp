// Python module over the core library. Structured results cross the
// boundary as JSON text; the package wrapper decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sciflow/error.hpp"
#include "sciflow/gcn.hpp"
#include "sciflow/interplay.hpp"
#include "sciflow/metrics.hpp"
#include "sciflow/pipeline.hpp"
#include "sciflow/predictor.hpp"
#include "sciflow/server.hpp"
#include "sciflow/synth.hpp"

namespace py = pybind11;
using namespace sciflow;

namespace {

std::optional<YearRange> window_of(const std::optional<std::pair<int, int>>& w) {
  if (!w) return std::nullopt;
  return YearRange{w->first, w->second};
}

RunConfig make_run(const std::filesystem::path& manifest, const std::filesystem::path& out,
                   std::uint64_t seed, int novelty_shuffles, int k_groups, int epochs, int jobs,
                   const std::string& layout_request) {
  RunConfig run;
  run.manifest = manifest;
  run.out = out;
  run.seed = seed;
  run.metrics.novelty.shuffle_count = novelty_shuffles;
  run.prediction.k_groups = k_groups;
  run.prediction.train.epochs = epochs;
  run.prediction.jobs = jobs;
  if (!layout_request.empty()) {
    const auto j = json::parse(layout_request);
    if (auto it = j.find("filter"); it != j.end()) run.layout.filter = QueryFilter::from_json(*it);
    run.layout.level = j.value("level", run.layout.level);
    if (auto it = j.find("bins"); it != j.end()) run.layout.bins = it->get<std::vector<int>>();
    run.layout.weights.alpha = j.value("alpha", run.layout.weights.alpha);
    run.layout.weights.beta = j.value("beta", run.layout.weights.beta);
    run.layout.weights.gamma = j.value("gamma", run.layout.weights.gamma);
    if (auto it = j.find("mode"); it != j.end()) run.layout.mode = flow_mode_from_string(it->get<std::string>());
    run.layout.min_percentile = j.value("min_percentile", run.layout.min_percentile);
  }
  run.apply_seed();
  return run;
}

// Loaded corpus with the full view kept alive next to it.
struct PyCorpus {
  std::shared_ptr<const Corpus> corpus;
  CorpusView view;

  explicit PyCorpus(std::shared_ptr<const Corpus> c) : corpus(c), view(c) {}
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Science-technology interplay analysis";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "synth",
      [](const std::filesystem::path& out, std::uint64_t seed, int papers, int patents, int links,
         int researchers, std::pair<int, int> years) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.papers = papers;
        cfg.patents = patents;
        cfg.links = links;
        cfg.researchers = researchers;
        cfg.years = {years.first, years.second};
        return write_corpus(synth_corpus(cfg), out, cfg.years);
      },
      py::arg("out"), py::arg("seed") = 7, py::arg("papers") = 2000, py::arg("patents") = 500,
      py::arg("links") = 5000, py::arg("researchers") = 120, py::arg("years") = std::pair<int, int>{2001, 2020});

  py::class_<PyCorpus>(m, "Corpus")
      .def_static(
          "load",
          [](const std::filesystem::path& manifest, std::optional<std::pair<int, int>> window) {
            return PyCorpus(Corpus::load(manifest, window_of(window)));
          },
          py::arg("manifest"), py::arg("window") = py::none())
      .def_property_readonly("paper_count", [](const PyCorpus& c) { return c.corpus->paper_count(); })
      .def_property_readonly("patent_count", [](const PyCorpus& c) { return c.corpus->patent_count(); })
      .def_property_readonly("researcher_count", [](const PyCorpus& c) { return c.corpus->researcher_count(); })
      .def_property_readonly("paper_citation_count",
                             [](const PyCorpus& c) { return c.corpus->paper_citation_count(); })
      .def_property_readonly("paper_patent_citation_count",
                             [](const PyCorpus& c) { return c.corpus->paper_patent_citation_count(); })
      .def("report_json", [](const PyCorpus& c) { return c.corpus->report().to_json().dump(); })
      .def("snapshot_json", [](const PyCorpus& c) { return c.corpus->snapshot().dump(); })
      .def("disruption", [](const PyCorpus& c, const std::string& id) { return disruption(c.view, id); })
      .def(
          "novelty",
          [](const PyCorpus& c, const std::string& id, int shuffles, std::uint64_t seed) {
            NoveltyConfig cfg;
            cfg.shuffle_count = shuffles;
            cfg.seed = seed;
            return novelty(c.view, id, cfg);
          },
          py::arg("paper_id"), py::arg("shuffles") = 10, py::arg("seed") = 0)
      .def(
          "paper_facts_json",
          [](const PyCorpus& c, const std::string& id, int shuffles, std::uint64_t seed) {
            MetricsConfig cfg;
            cfg.novelty.shuffle_count = shuffles;
            cfg.novelty.seed = seed;
            return paper_facts(c.view, id, cfg).to_json().dump();
          },
          py::arg("paper_id"), py::arg("shuffles") = 10, py::arg("seed") = 0)
      .def("researcher_metrics_json",
           [](const PyCorpus& c, const std::string& id) { return researcher_metrics(c.view, id).to_json().dump(); })
      .def("diversity", [](const PyCorpus& c, const std::string& field) { return diversity(c.view, field); })
      .def("filtered_paper_ids",
           [](const PyCorpus& c, const std::string& filter) {
             const auto v = filter_view(c.view, QueryFilter::from_json(json::parse(filter)));
             std::vector<std::string> ids;
             for (Index p : v.papers()) ids.push_back(c.corpus->paper(p).id);
             return ids;
           });

  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& manifest, const std::filesystem::path& out,
         std::uint64_t seed, int novelty_shuffles, int k_groups, int epochs, int jobs,
         const std::string& layout_request) {
        const auto run = make_run(manifest, out, seed, novelty_shuffles, k_groups, epochs, jobs, layout_request);
        py::gil_scoped_release release;
        if (stage == "ingest") run_ingest(run);
        else if (stage == "metrics") run_metrics(run);
        else if (stage == "train") run_train(run);
        else if (stage == "predict") run_predict(run);
        else if (stage == "layout") run_layout(run);
        else throw ValidationError("unknown stage '" + stage + "'");
      },
      py::arg("stage"), py::arg("manifest"), py::arg("out"), py::arg("seed") = 0, py::arg("novelty_shuffles") = 10,
      py::arg("k_groups") = 50, py::arg("epochs") = 200, py::arg("jobs") = 1, py::arg("layout_request") = "");

  m.def(
      "query",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out, const std::string& path,
         const std::map<std::string, std::string>& params) {
        const auto state = ServerState::load(manifest, out);
        const std::multimap<std::string, std::string> mm(params.begin(), params.end());
        const auto r = handle_request(*state, path, mm);
        return std::make_pair(r.status, r.body);
      },
      py::arg("manifest"), py::arg("out"), py::arg("path"),
      py::arg("params") = std::map<std::string, std::string>{});

  m.def("percentile_ranks", [](const std::vector<double>& v) { return percentile_ranks(v); });
  m.def("running_mean", [](const std::vector<double>& v) { return running_mean(v); });
  m.def("shannon_entropy", [](const std::vector<std::uint64_t>& v) { return shannon_entropy(v); });
  m.def("auc", [](const std::vector<double>& s, const std::vector<int>& y) { return auc(s, y); });
  m.def("hashed_title_embedding", [](const std::string& title, int dims) {
    const auto v = hashed_title_embedding(title, dims);
    return std::vector<double>(v.data(), v.data() + v.size());
  });
  m.def("target_order", [](const std::vector<std::uint64_t>& totals, const std::vector<std::string>& ids) {
    return target_order(totals, ids);
  });
  m.def(
      "solve_layout",
      [](const std::vector<std::vector<double>>& w, const std::vector<double>& target,
         const std::vector<double>& patent_x, double alpha, double beta, double gamma) {
        const auto n = static_cast<Eigen::Index>(w.size());
        Eigen::MatrixXd mw(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (static_cast<Eigen::Index>(w[static_cast<std::size_t>(i)].size()) != n)
            throw ValidationError("similarity matrix must be square");
          for (Eigen::Index j = 0; j < n; ++j) mw(i, j) = w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        std::vector<std::string> ids;
        for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
        const auto s = solve_layout(mw, target, patent_x, {alpha, beta, gamma}, ids);
        return std::make_pair(s.x, s.objective);
      },
      py::arg("w"), py::arg("target"), py::arg("patent_x"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0,
      py::arg("gamma") = 1.0);
  m.def("parse_bins", [](const std::string& text) { return parse_bins(text); });
  m.def("bin_of", [](const std::vector<int>& bins, int count) { return bin_of(bins, count); });
}
