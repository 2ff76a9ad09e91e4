// Acceptance gate: one PASS/FAIL line per criterion. Tolerances live here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "sciflow/gcn.hpp"
#include "sciflow/interplay.hpp"
#include "sciflow/metrics.hpp"
#include "sciflow/pipeline.hpp"
#include "sciflow/predictor.hpp"
#include "sciflow/rng.hpp"
#include "support.hpp"

using namespace sciflow;
using testing::Tiny;
using testing::code;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kSignalAuc = 0.90;
constexpr double kNullAucLo = 0.40, kNullAucHi = 0.60;
constexpr double kEpochSeconds = 10.0;
constexpr double kEpochGrowth = 1.5;
constexpr double kLayoutTolerance = 1e-9;
constexpr double kEntropyTolerance = 1e-12;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---- Disruption ----

std::optional<double> disruption_enumerated(const CorpusData& d, const std::string& focal) {
  const Paper* f = nullptr;
  for (const auto& p : d.papers)
    if (p.id == focal) f = &p;
  std::set<std::string> refs(f->reference_ids.begin(), f->reference_ids.end());
  long i = 0, j = 0, k = 0;
  for (const auto& p : d.papers) {
    if (p.id == focal || p.year < f->year) continue;
    const bool a = std::count(p.reference_ids.begin(), p.reference_ids.end(), focal) > 0;
    const bool b = std::any_of(p.reference_ids.begin(), p.reference_ids.end(),
                               [&](const std::string& r) { return refs.count(r) > 0; });
    if (a && b) ++j;
    else if (a) ++i;
    else if (b) ++k;
  }
  if (i + j + k == 0) return std::nullopt;
  return static_cast<double>(i - j) / static_cast<double>(i + j + k);
}

void disruption_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  long compared = 0, mismatches = 0;
  for (int dag = 0; dag < 200; ++dag) {
    Tiny t;
    const int n = 1 + static_cast<int>(rng.uniform_index(30));
    int year = 1990;
    for (int i = 0; i < n; ++i) {
      year += static_cast<int>(rng.uniform_index(3));
      std::vector<std::string> refs;
      for (int r = 0; r < i; ++r)
        if (rng.bernoulli(0.2)) refs.push_back("p" + std::to_string(r));
      t.paper("p" + std::to_string(i), year, refs);
    }
    const auto c = t.build();
    const CorpusView v(c);
    for (const auto& p : t.d.papers) {
      const auto got = disruption(v, p.id);
      const auto want = disruption_enumerated(t.d, p.id);
      ++compared;
      if (got.has_value() != want.has_value() || (got && *got != *want)) ++mismatches;
    }
  }
  const double s = seconds_since(t0);
  report("disruption_oracle", mismatches == 0 && s < 5.0,
         std::to_string(compared) + " papers, " + std::to_string(mismatches) + " mismatches, " +
             fmt("%.2f s (limit 5 s)", s));
}

// ---- Gradient check ----

Matrix dense_adjacency(std::size_t n, const std::vector<std::pair<NodeIndex, NodeIndex>>& edges) {
  Matrix a = Matrix::Identity(n, n);
  for (auto [u, v] : edges)
    if (u != v) a(u, v) = a(v, u) = 1.0;
  Eigen::VectorXd d = a.rowwise().sum();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) /= std::sqrt(d(i) * d(j));
  return a;
}

// Objective evaluated densely from scratch.
double dense_objective(const Matrix& a, const Matrix& x, const Matrix& w0, const Matrix& w1,
                       const std::vector<int>& y, const std::vector<NodeIndex>& mask, double wd) {
  Matrix h = a * x * w0;
  h = h.cwiseMax(0.0);
  const Matrix s = a * h * w1;
  double loss = 0;
  for (NodeIndex i : mask) {
    const double m = s.row(i).maxCoeff();
    const double lse = m + std::log((s.row(i).array() - m).exp().sum());
    loss -= std::log(std::max(std::exp(s(i, y[i]) - lse), 1e-12));
  }
  return loss + 0.5 * wd * w0.squaredNorm();
}

void gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(99);
  const double wd = 5e-4, h = 1e-6;
  double worst = 0, worst_library = 0;
  for (int inst = 0; inst < 5; ++inst) {
    const std::size_t n = 8 + rng.uniform_index(13);  // <= 20 nodes
    const int f = 6, b = 5;
    std::vector<std::pair<NodeIndex, NodeIndex>> edges;
    for (NodeIndex i = 0; i < n; ++i)
      for (NodeIndex j = i + 1; j < n; ++j)
        if (rng.bernoulli(0.25)) edges.emplace_back(i, j);
    const auto a = normalize_adjacency(n, edges);
    const Matrix ad = dense_adjacency(n, edges);
    Matrix x(n, f), w0(f, b), w1(b, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < w0.size(); ++i) w0.data()[i] = rng.uniform(-0.7, 0.7);
    for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = rng.uniform(-0.7, 0.7);
    std::vector<int> y;
    std::vector<NodeIndex> mask;
    for (NodeIndex i = 0; i < n; ++i) {
      y.push_back(static_cast<int>(rng.uniform_index(2)));
      if (rng.bernoulli(0.7)) mask.push_back(i);
    }
    if (mask.empty()) mask.push_back(0);

    const auto g = compute_gradients(x, a, w0, w1, y, mask, wd, 0.0, Mode::Eval, nullptr);
    auto check = [&](const Matrix& grad, bool first) {
      for (Eigen::Index k = 0; k < grad.size(); ++k) {
        Matrix p0 = w0, m0 = w0, p1 = w1, m1 = w1;
        (first ? p0 : p1).data()[k] += h;
        (first ? m0 : m1).data()[k] -= h;
        const double num = (dense_objective(ad, x, p0, p1, y, mask, wd) -
                            dense_objective(ad, x, m0, m1, y, mask, wd)) / (2 * h);
        const double ana = grad.data()[k];
        const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
        worst = std::max(worst, rel);
      }
    };
    check(g.w0, true);
    check(g.w1, false);
    worst_library = std::max(worst_library, grad_check(x, a, w0, w1, y, mask, wd).max_relative_error);
  }
  const double s = seconds_since(t0);
  report("gcn_gradient_check", worst < kGradTolerance && worst_library < kGradTolerance && s < 10.0,
         fmt("max relative error %.3g (independent), %.3g (built-in), limit %.0e, %.2f s (limit 10 s)", worst,
             worst_library, kGradTolerance, s));
}

// ---- Signal recovery ----

struct Planted {
  Matrix x;
  NormalizedAdjacency a;
  std::vector<int> community;
};

Planted two_communities(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 400;
  Planted g;
  g.community.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.community[i] = i < n / 2 ? 0 : 1;
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  for (NodeIndex i = 0; i < n; ++i)
    for (NodeIndex j = i + 1; j < n; ++j)
      if (rng.bernoulli(g.community[i] == g.community[j] ? 0.10 : 0.005)) edges.emplace_back(i, j);
  g.a = normalize_adjacency(n, edges);
  // Random text drawn from one shared vocabulary, so the features carry no label signal.
  std::vector<std::string> vocab;
  for (int w = 0; w < 1000; ++w) {
    std::string word;
    const int len = 3 + static_cast<int>(rng.uniform_index(6));
    for (int c = 0; c < len; ++c) word.push_back(static_cast<char>('a' + rng.uniform_index(26)));
    vocab.push_back(word);
  }
  g.x.resize(n, 64);
  for (std::size_t i = 0; i < n; ++i) {
    std::string title;
    const int words = 6 + static_cast<int>(rng.uniform_index(7));
    for (int w = 0; w < words; ++w) title += vocab[rng.uniform_index(vocab.size())] + " ";
    g.x.row(static_cast<Eigen::Index>(i)) = hashed_title_embedding(title, 64).transpose();
  }
  return g;
}

double test_auc(const Planted& g, const std::vector<int>& labels, const Splits& s, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  const auto model = train(g.x, g.a, labels, s, cfg);
  const Matrix z = forward(g.x, g.a, model, Mode::Eval);
  std::vector<double> scores;
  std::vector<int> y;
  for (NodeIndex i : s.test) {
    scores.push_back(z(i, 1));
    y.push_back(labels[i]);
  }
  return auc(scores, y).value_or(0.0);
}

void signal_recovery() {
  const auto t0 = Clock::now();
  const auto g = two_communities(31);
  Rng rng(32);
  std::vector<NodeIndex> order(g.community.size());
  for (NodeIndex i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  Splits s;
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < 140 ? s.train : k < 200 ? s.val : s.test).push_back(order[k]);
  const double real = test_auc(g, g.community, s, 33);
  auto permuted = g.community;
  rng.shuffle(permuted);
  const double null = test_auc(g, permuted, s, 33);
  const double secs = seconds_since(t0);
  report("gcn_signal_recovery", real >= kSignalAuc && null >= kNullAucLo && null <= kNullAucHi && secs < 60.0,
         fmt("test AUC %.3f (>= %.2f), permuted-label AUC %.3f (in [0.40, 0.60]), %.1f s (limit 60 s)", real,
             kSignalAuc, null, secs));
}

// ---- Epoch scaling ----

double epoch_seconds(std::size_t nodes, std::size_t edge_target, std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::pair<NodeIndex, NodeIndex>> seen;
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  while (edges.size() < edge_target) {
    auto u = static_cast<NodeIndex>(rng.uniform_index(nodes));
    auto v = static_cast<NodeIndex>(rng.uniform_index(nodes));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (seen.insert({u, v}).second) edges.emplace_back(u, v);
  }
  const auto a = normalize_adjacency(nodes, edges);
  Matrix x(nodes, 64);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.bernoulli(0.1) ? rng.uniform(-1, 1) : 0.0;
  std::vector<int> y(nodes);
  Splits s;
  for (NodeIndex i = 0; i < nodes; ++i) {
    y[i] = static_cast<int>(rng.uniform_index(2));
    (i % 10 < 7 ? s.train : i % 10 < 8 ? s.val : s.test).push_back(i);
  }
  TrainConfig cfg;
  cfg.seed = seed;
  const int epochs = 5;
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    cfg.epochs = epochs;
    const auto t0 = Clock::now();
    train(x, a, y, s, cfg);
    best = std::min(best, seconds_since(t0) / epochs);
  }
  return best;
}

void epoch_scaling() {
  const double base = epoch_seconds(20000, 100000, 41);
  const double grown = epoch_seconds(25000, 125000, 42);
  const double ratio = grown / base;
  report("gcn_epoch_scaling", base < kEpochSeconds && grown < kEpochSeconds && ratio <= kEpochGrowth,
         fmt("%.4f s/epoch at 100k edges, %.4f s/epoch at 125k edges, ratio %.2f (limit %.1f)", base, grown, ratio,
             kEpochGrowth));
}

// ---- Layout ----

std::vector<double> layout_gradient(const Eigen::MatrixXd& w, const std::vector<double>& t,
                                    const std::vector<double>& p, const LayoutWeights& k,
                                    const std::vector<double>& x) {
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j)
      if (j != i) g[i] += 2 * k.alpha * w(i, j) * (x[i] - x[j]);
    g[i] += 2 * k.beta * (x[i] - t[i]);
    for (double pj : p) g[i] += 2 * k.gamma * (x[i] - pj);
  }
  return g;
}

void layout_exactness() {
  const auto t0 = Clock::now();
  Rng rng(51);
  const std::size_t n = 6;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("F" + std::to_string(i));
  double worst_target = 0, worst_grad = 0;
  int beaten = 0;
  for (int inst = 0; inst < 50; ++inst) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = rng.uniform01();
    std::vector<std::uint64_t> totals(n);
    for (auto& v : totals) v = rng.uniform_index(1000);
    const auto target = target_order(totals, ids);
    std::vector<double> p(2 + rng.uniform_index(14));
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = static_cast<double>(j) - (p.size() - 1) / 2.0;

    const auto only_target = solve_layout(w, target, p, {0.0, 1.0, 0.0}, ids);
    for (std::size_t i = 0; i < n; ++i) worst_target = std::max(worst_target, std::abs(only_target.x[i] - target[i]));

    const LayoutWeights k{rng.uniform(0.1, 5), rng.uniform(0.1, 5), rng.uniform(0.0, 2)};
    const auto s = solve_layout(w, target, p, k, ids);
    double norm = 0;
    for (double gi : layout_gradient(w, target, p, k, s.x)) norm += gi * gi;
    worst_grad = std::max(worst_grad, std::sqrt(norm));
    const double best = layout_objective(w, target, p, k, s.x);
    if (layout_objective(w, target, p, k, target) < best) ++beaten;
    for (int r = 0; r < 100; ++r) {
      std::vector<double> y(n);
      for (auto& v : y) v = rng.uniform(-4, 4);
      if (layout_objective(w, target, p, k, y) < best) ++beaten;
    }
  }
  const double secs = seconds_since(t0);
  report("layout_exactness",
         worst_target < kLayoutTolerance && worst_grad < kLayoutTolerance && beaten == 0 && secs < 5.0,
         fmt("|x - target| %.2g with alpha=gamma=0, gradient norm %.2g (limit 1e-9), ", worst_target, worst_grad) +
             std::to_string(beaten) + fmt(" placements beat the solution, %.2f s (limit 5 s)", secs));
}

// ---- Entropy ----

void entropy_properties() {
  // Four patents in four sections cite one paper: uniform over 4.
  Tiny u;
  u.paper("p", 2010, {}, {}, {"Fa1"});
  for (auto s : {"A", "B", "C", "D"}) u.patent(std::string("t") + s, 2011, {code(s)}).cite(std::string("t") + s, "p");
  const double uniform = diversity(CorpusView(u.build()), "Fa1");

  Tiny one;
  one.paper("p", 2010, {}, {}, {"Fa1"});
  one.patent("t1", 2011, {code("A", 'x')}).patent("t2", 2011, {code("A", 'y')}).cite("t1", "p").cite("t2", "p");
  const double single = diversity(CorpusView(one.build()), "Fa1");

  const auto c = testing::synthetic();
  const CorpusView v(c);
  const double bound = std::log(static_cast<double>(c->cpc().nodes_at_level(0).size()));
  int outside = 0;
  for (Index f = 0; f < c->fields().size(); ++f) {
    const double d = diversity(v, f);
    if (d < 0.0 || d > bound + kEntropyTolerance) ++outside;
  }
  report("entropy_properties",
         std::abs(uniform - std::log(4.0)) <= kEntropyTolerance && single == 0.0 && outside == 0,
         fmt("uniform-over-4 %.15f vs ln 4 %.15f, single section %.1f, ", uniform, std::log(4.0), single) +
             std::to_string(outside) + " of " + std::to_string(c->fields().size()) + " fields outside [0, ln 4]");
}

// ---- Percentile and P-index ----

void percentile_pindex() {
  Rng rng(61);
  int range_violations = 0, order_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> probs(2 + rng.uniform_index(200));
    for (auto& p : probs) p = rng.uniform01();
    const auto pct = percentile_ranks(probs);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (pct[i] < 0.0 || pct[i] > 100.0) ++range_violations;
      for (std::size_t j = 0; j < probs.size(); ++j)
        if (probs[i] < probs[j] && !(pct[i] < pct[j])) ++order_violations;
    }
  }
  const std::vector<double> constant(500, 0.42);
  const auto flat = percentile_ranks(constant);
  const bool all_fifty = std::all_of(flat.begin(), flat.end(), [](double p) { return p == 50.0; });

  // A researcher whose every paper has the same Patentability.
  Tiny t;
  std::vector<std::string> papers;
  std::vector<PredictionRow> rows;
  const double value = 37.3;
  for (int i = 0; i < 13; ++i) {
    const auto id = "p" + std::to_string(i);
    t.paper(id, 2016 + i % 5);
    papers.push_back(id);
    rows.push_back({id, "G1", 0.5, value});
  }
  t.researcher("r", papers);
  const auto table = PatentabilityTable::from_rows(rows);
  const auto pi = p_index(*t.build(), "r", table, {2016, 2020});
  const bool exact = pi && *pi == value;
  report("percentile_pindex", range_violations == 0 && order_violations == 0 && all_fifty && exact,
         std::to_string(range_violations) + " out-of-range, " + std::to_string(order_violations) +
             " order violations; constant probabilities all 50: " + (all_fifty ? "yes" : "no") +
             fmt("; constant P-index %.17g vs %.17g", pi.value_or(-1), value));
}

// ---- Conservation ----

void conservation() {
  const auto c = testing::synthetic();
  const CorpusView all(c);
  MetricsConfig mc;
  mc.novelty.shuffle_count = 2;
  const auto metrics = make_metrics_table(*c, compute_paper_metrics(all, mc));
  std::vector<QueryFilter> filters(3);
  filters[1].paper_year_range = YearRange{2006, 2015};
  filters[2].field_ids = std::set<std::string>{"F0"};
  filters[2].patent_year_range = YearRange{2008, 2020};
  long cell_errors = 0, flow_errors = 0;
  std::string detail;
  for (const auto& f : filters) {
    const auto v = filter_view(all, f);
    const auto m = build_matrix(v, 1, default_bins(), metrics);
    std::size_t cells = 0;
    for (const auto& cell : m.cells) cells += cell.count();
    if (cells != v.papers().size()) ++cell_errors;
    const auto flows = build_flows(m, v, FlowMode::Historical);
    std::map<std::string, std::uint64_t> expected;
    for (Index t : v.patents())
      for (Index p : v.cited_papers(t)) {
        (void)p;
        std::set<std::string> groups;
        for (const auto& k : c->patent(t).cpc_codes) groups.insert(k.group);
        for (const auto& g : groups) ++expected[g];
      }
    std::set<std::string> names;
    for (const auto& e : flows.cell_edges) names.insert(e.group);
    for (const auto& [g, n] : expected) names.insert(g);
    for (const auto& g : names) {
      auto it = expected.find(g);
      if (flows.group_total(g) != (it == expected.end() ? 0 : it->second)) ++flow_errors;
    }
    detail += std::to_string(cells) + "/" + std::to_string(v.papers().size()) + " papers placed, " +
              std::to_string(names.size()) + " groups; ";
  }
  report("conservation", cell_errors == 0 && flow_errors == 0,
         detail + std::to_string(cell_errors) + " cell and " + std::to_string(flow_errors) + " flow mismatches");
}

// ---- Determinism ----

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      out[fs::relative(e.path(), dir).string()] = ss.str();
    }
  return out;
}

void determinism() {
  const auto dir = testing::temp_dir("acceptance");
  fs::path manifest = fs::path(SCIFLOW_DATA) / "manifest.json";
  std::string source = "bundled corpus";
  if (!fs::exists(manifest)) {
    manifest = write_corpus(testing::synthetic_data(), dir / "corpus", testing::synth_config().years);
    source = "regenerated corpus";
  }
  const auto t0 = Clock::now();
  for (const char* name : {"first", "second"}) {
    RunConfig run;
    run.manifest = manifest;
    run.out = dir / name;
    run.seed = 7;
    run.apply_seed();
    run_ingest(run);
    run_metrics(run);
    run_train(run);
    run_predict(run);
    run_layout(run);
  }
  const double secs = seconds_since(t0);
  const auto a = tree(dir / "first");
  const auto b = tree(dir / "second");
  std::size_t differing = 0;
  for (const auto& [k, v] : a) differing += !b.count(k) || b.at(k) != v;
  report("determinism", a == b && !a.empty() && secs < 300.0,
         source + ", " + std::to_string(a.size()) + " files, " + std::to_string(differing) + " differ, " +
             fmt("two full runs %.1f s (limit 300 s)", secs));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> criteria = {
      {"disruption_oracle", disruption_oracle}, {"gcn_gradient_check", gradient_check},
      {"gcn_signal_recovery", signal_recovery}, {"gcn_epoch_scaling", epoch_scaling},
      {"layout_exactness", layout_exactness},   {"entropy_properties", entropy_properties},
      {"percentile_pindex", percentile_pindex}, {"conservation", conservation},
      {"determinism", determinism}};
  for (const auto& [name, run] : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
