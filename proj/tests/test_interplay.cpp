#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "sciflow/error.hpp"
#include "sciflow/interplay.hpp"
#include "sciflow/rng.hpp"
#include "support.hpp"

using namespace sciflow;
using testing::Tiny;
using testing::code;

namespace {

MetricsTable metrics_of(const CorpusView& v) {
  MetricsConfig cfg;
  cfg.novelty.shuffle_count = 3;
  return make_metrics_table(v.corpus(), compute_paper_metrics(v, cfg));
}

// Gradient of the layout objective, written out term by term.
std::vector<double> layout_gradient(const Eigen::MatrixXd& w, const std::vector<double>& t,
                                    const std::vector<double>& p, const LayoutWeights& k,
                                    const std::vector<double>& x) {
  const auto n = x.size();
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) g[i] += 2 * k.alpha * w(i, j) * (x[i] - x[j]);
    g[i] += 2 * k.beta * (x[i] - t[i]);
    for (double pj : p) g[i] += 2 * k.gamma * (x[i] - pj);
  }
  return g;
}

Eigen::MatrixXd random_similarity(Rng& rng, std::size_t n) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = rng.uniform01();
  for (std::size_t i = 0; i < n; ++i) w(i, i) = 1.0;
  return w;
}

std::vector<std::string> ids_of(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("F" + std::to_string(i));
  return ids;
}

}  // namespace

TEST_CASE("bins") {
  const std::vector<int> bins{0, 1, 3, 8, 21};
  CHECK(default_bins() == bins);
  CHECK(parse_bins("0,1,3,8,21") == bins);
  CHECK(bin_of(bins, 0) == 0);
  CHECK(bin_of(bins, 1) == 1);
  CHECK(bin_of(bins, 2) == 1);
  CHECK(bin_of(bins, 5) == 2);
  CHECK(bin_of(bins, 30) == 4);
  CHECK(merge_bins(bins, 1) == std::vector<int>{0, 1, 8, 21});
  CHECK_THROWS_AS(parse_bins("0,3,3"), ValidationError);
  CHECK_THROWS_AS(parse_bins("1,3"), ValidationError);
  CHECK_THROWS_AS(parse_bins("0,x"), ValidationError);
  CHECK_THROWS_AS(merge_bins(bins, 4), ValidationError);
}

TEST_CASE("merging rows merges cells") {
  Rng rng(40);
  const std::vector<int> bins{0, 1, 3, 8, 21};
  for (int row = 0; row < 4; ++row) {
    const auto merged = merge_bins(bins, row);
    for (int trial = 0; trial < 100; ++trial) {
      const int count = static_cast<int>(rng.uniform_index(40));
      const int before = bin_of(bins, count);
      const int after = bin_of(merged, count);
      CHECK(after == (before > row ? before - 1 : before));
    }
  }
}

TEST_CASE("matrix places every paper once and uses patent citation rows") {
  Tiny t;
  t.paper("a", 2010, {}, {}, {"Fa1"}).paper("b", 2010, {}, {}, {"Fa11", "Fb1"});
  t.paper("c", 2011, {}, {}, {}).paper("d", 2012, {}, {}, {"Fa2"});
  t.patent("t1", 2012, {code("A")}).patent("t2", 2012, {code("B")}).cite("t1", "a").cite("t2", "a");
  t.cite("t1", "c");
  const auto c = t.build();
  const CorpusView v(c);
  const auto m = build_matrix(v, 1, default_bins(), metrics_of(v));
  CHECK(m.paper_count() == 4);
  std::vector<std::string> cols;
  for (const auto& col : m.columns) cols.push_back(col.field_id);
  // b's deepest tag is Fa11, so its level-1 field is Fa1.
  CHECK(cols == std::vector<std::string>{"Fa1", "Fa2", ""});
  CHECK(m.cell(0, 1)->paper_ids == std::vector<std::string>{"a"});  // 2 citations -> [1, 2]
  CHECK(m.cell(0, 0)->paper_ids == std::vector<std::string>{"b"});
  CHECK(m.cell(2, 1)->paper_ids == std::vector<std::string>{"c"});
  CHECK(m.columns[0].total_citations == 2);
  CHECK(m.columns[2].label == "Unassigned");
  CHECK(m.cell(0, 1)->mean_patent_citation == 2.0);
  CHECK(*primary_field(*c, c->paper_at("b"), 2) == *c->fields().find("Fa11"));
  CHECK_FALSE(primary_field(*c, c->paper_at("a"), 2).has_value());
}

TEST_CASE("matrix conservation on the synthetic corpus") {
  const auto c = testing::synthetic();
  const CorpusView v(c);
  const auto metrics = metrics_of(v);
  for (int level = 0; level <= 3; ++level) {
    const auto m = build_matrix(v, level, default_bins(), metrics);
    std::size_t cells = 0;
    for (const auto& cell : m.cells) cells += cell.count();
    CHECK(cells == v.papers().size());
    std::uint64_t links = 0;
    for (const auto& col : m.columns) links += col.total_citations;
    CHECK(links == c->paper_patent_citation_count());
    for (const auto& cell : m.cells)
      for (const auto& g : cell.glyph)
        if (g) {
          CHECK(*g >= 0.0);
          CHECK(*g <= 1.0);
        }
  }
}

TEST_CASE("icicle examples") {
  Tiny t;
  t.patent("t1", 2010, {code("A", 'x'), code("A", 'y')}).patent("t2", 2010, {code("A", 'x')});
  t.patent("t3", 2010, {code("C")});
  const auto ic = build_icicle(CorpusView(t.build()));
  std::vector<std::pair<std::string, std::uint64_t>> got;
  for (const auto& n : ic.nodes) got.emplace_back(n.id, n.count);
  // t1 counts once at A and A1 despite two codes.
  CHECK(got == std::vector<std::pair<std::string, std::uint64_t>>{
                   {"A", 2}, {"A1", 2}, {"A1x", 2}, {"A1y", 1}, {"C", 1}, {"C1", 1}, {"C1x", 1}});
  CHECK(ic.groups().size() == 3);
  CHECK(ic.group_positions() == std::vector<double>{-1, 0, 1});
  CHECK(*ic.nodes[1].parent == 0);
}

TEST_CASE("icicle counts equal a group-by over patents") {
  const auto c = testing::synthetic();
  QueryFilter f;
  f.patent_year_range = YearRange{2010, 2016};
  const auto v = filter_view(CorpusView(c), f);
  std::map<std::string, std::set<std::string>> oracle;
  for (Index t : v.patents())
    for (const auto& k : c->patent(t).cpc_codes) {
      oracle[k.section].insert(c->patent(t).id);
      oracle[k.subsection].insert(c->patent(t).id);
      oracle[k.group].insert(c->patent(t).id);
    }
  const auto ic = build_icicle(v);
  CHECK(ic.nodes.size() == oracle.size());
  for (const auto& n : ic.nodes) CHECK(n.count == oracle.at(n.id).size());
  // Children never exceed their parent; a parent never exceeds the sum of its children.
  for (std::size_t i = 0; i < ic.nodes.size(); ++i) {
    std::uint64_t kids = 0;
    bool any = false;
    for (const auto& n : ic.nodes)
      if (n.parent == i) {
        CHECK(n.count <= ic.nodes[i].count);
        kids += n.count;
        any = true;
      }
    if (any) CHECK(ic.nodes[i].count <= kids);
  }
}

TEST_CASE("flows") {
  Tiny t;
  t.paper("a", 2010, {}, {}, {"Fa1"}).paper("b", 2010, {}, {}, {"Fb1"});
  t.patent("t1", 2012, {code("A", 'x'), code("A", 'y')}).cite("t1", "a");
  const auto c = t.build();
  const CorpusView v(c);
  const auto m = build_matrix(v, 1, default_bins(), metrics_of(v));
  const auto f = build_flows(m, v, FlowMode::Historical);
  // One patent with two group codes expands to two units.
  REQUIRE(f.column_edges.size() == 2);
  CHECK(f.group_total("A1x") == 1);
  CHECK(f.group_total("A1y") == 1);
  CHECK(f.cell_edges[0].row == 1);

  Tiny e;
  e.paper("a", 2010);
  const auto ce = e.build();
  const CorpusView ve(ce);
  CHECK(build_flows(build_matrix(ve, 1, default_bins(), metrics_of(ve)), ve, FlowMode::Historical)
            .cell_edges.empty());
  CHECK_THROWS_AS(build_flows(m, v, FlowMode::Prediction), ValidationError);

  const auto table = PatentabilityTable::from_rows({{"a", "G1", 0.4, 90.0}, {"b", "G1", 0.1, 10.0}, {"b", "G2", 0.1, 60.0}});
  const auto p = build_flows(m, v, FlowMode::Prediction, &table, 50.0);
  CHECK(p.group_total("G1") == 1);
  CHECK(p.group_total("G2") == 1);
}

TEST_CASE("historical flows match a pair scan and conserve mass") {
  const auto c = testing::synthetic();
  QueryFilter filter;
  filter.paper_year_range = YearRange{2004, 2014};
  const auto v = filter_view(CorpusView(c), filter);
  const auto m = build_matrix(v, 1, default_bins(), metrics_of(v));
  const auto f = build_flows(m, v, FlowMode::Historical);
  std::map<std::string, std::uint64_t> oracle;
  for (Index t : v.patents())
    for (Index p : v.cited_papers(t)) {
      std::set<std::string> groups;
      for (const auto& k : c->patent(t).cpc_codes) groups.insert(k.group);
      for (const auto& g : groups) ++oracle[g];
    }
  std::map<std::string, std::uint64_t> got;
  for (const auto& e : f.cell_edges) got[e.group] += e.weight;
  CHECK(got == oracle);
  std::map<std::string, std::uint64_t> by_column;
  for (const auto& e : f.column_edges) by_column[e.group] += e.weight;
  CHECK(by_column == oracle);
}

TEST_CASE("field similarity") {
  PaperMatrix m;
  m.columns.resize(3);
  FlowSet f;
  f.column_edges = {{0, "G1", 2}, {0, "G2", 2}, {1, "G1", 5}};
  const auto w = field_similarity(m, f);
  CHECK(w(0, 1) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(w(0, 0) == doctest::Approx(1.0));
  CHECK(w(2, 0) == 0.0);
  CHECK(w(1, 0) == w(0, 1));
}

TEST_CASE("target order") {
  const std::vector<std::uint64_t> totals{10, 7, 5, 3, 1};
  const auto ids = ids_of(5);
  const auto x = target_order(totals, ids);
  CHECK(x == std::vector<double>{0, 1, -1, 2, -2});
  // Left to right: 1, 5, 10, 7, 3.
  std::vector<std::size_t> order{0, 1, 2, 3, 4};
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<std::uint64_t> shown;
  for (auto i : order) shown.push_back(totals[i]);
  CHECK(shown == std::vector<std::uint64_t>{1, 5, 10, 7, 3});
  const std::vector<std::uint64_t> tied{4, 4};
  const std::vector<std::string> rev{"b", "a"};
  CHECK(target_order(tied, rev) == std::vector<double>{1, 0});
}

TEST_CASE("layout closed forms") {
  const auto ids = ids_of(3);
  Rng rng(41);
  const auto w = random_similarity(rng, 3);
  const std::vector<double> t{0, 1, -1};
  const std::vector<double> p{-1, 0, 1, 4};
  // Only the target term: x = t.
  auto s = solve_layout(w, t, p, {0, 1, 0}, ids);
  for (int i = 0; i < 3; ++i) CHECK(s.x[static_cast<std::size_t>(i)] == doctest::Approx(t[static_cast<std::size_t>(i)]));
  CHECK(s.ordering == std::vector<std::size_t>{2, 0, 1});
  // Only the patent term: every column at the patent mean.
  s = solve_layout(w, t, p, {0, 0, 1}, ids);
  for (double xi : s.x) CHECK(xi == doctest::Approx(1.0));
  CHECK_THROWS_AS(solve_layout(w, t, {}, {1, 0, 1}, ids), ValidationError);
  CHECK_THROWS_AS(solve_layout(w, t, p, {-1, 1, 1}, ids), ValidationError);
}

TEST_CASE("layout solution is stationary and beats random placements") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(6);
    const auto w = random_similarity(rng, n);
    std::vector<double> t(n), p(1 + rng.uniform_index(8));
    for (auto& v : t) v = rng.uniform(-3, 3);
    for (auto& v : p) v = rng.uniform(-3, 3);
    const LayoutWeights k{rng.uniform(0, 3), rng.uniform(0.1, 3), rng.uniform(0, 3)};
    const auto s = solve_layout(w, t, p, k, ids_of(n));
    for (double g : layout_gradient(w, t, p, k, s.x)) CHECK(std::abs(g) < 1e-9);
    CHECK(s.objective == doctest::Approx(layout_objective(w, t, p, k, s.x)));
    for (int r = 0; r < 20; ++r) {
      std::vector<double> y(n);
      for (auto& v : y) v = rng.uniform(-4, 4);
      CHECK(layout_objective(w, t, p, k, y) >= s.objective - 1e-12);
    }
  }
}

TEST_CASE("layout translates and scales with its inputs") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(4);
    const auto w = random_similarity(rng, n);
    std::vector<double> t(n), p(4);
    for (auto& v : t) v = rng.uniform(-3, 3);
    for (auto& v : p) v = rng.uniform(-3, 3);
    const LayoutWeights k{1, 1, 1};
    const auto base = solve_layout(w, t, p, k, ids_of(n));
    const double shift = rng.uniform(-5, 5), scale = rng.uniform(0.5, 3);
    auto ts = t, ps = p, tk = t, pk = p;
    for (auto& v : ts) v += shift;
    for (auto& v : ps) v += shift;
    for (auto& v : tk) v *= scale;
    for (auto& v : pk) v *= scale;
    const auto moved = solve_layout(w, ts, ps, k, ids_of(n));
    const auto scaled = solve_layout(w, tk, pk, k, ids_of(n));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(moved.x[i] == doctest::Approx(base.x[i] + shift).epsilon(1e-9));
      CHECK(scaled.x[i] == doctest::Approx(base.x[i] * scale).epsilon(1e-9));
    }
  }
}

TEST_CASE("timelines") {
  Tiny t;
  t.paper("a", 2010, {}, {}, {"Fa1"}).paper("b", 2012, {}, {}, {"Fa11"}).paper("c", 2012, {}, {}, {"Fb1"});
  t.patent("t1", 2011, {code("A")}).patent("t2", 2013, {code("A"), code("B")});
  const auto c = t.build({2010, 2012});
  const CorpusView v(c);
  const std::vector<std::string> fields{"Fa1", "Fb"};
  const auto tl = field_timeline(v, fields, TimelineKind::Paper);
  CHECK(tl.years == YearRange{2010, 2012});
  CHECK(tl.series[0].second == std::vector<std::uint64_t>{1, 0, 1});
  CHECK(tl.series[1].second == std::vector<std::uint64_t>{0, 0, 1});
  const std::vector<std::string> nodes{"A", "B1"};
  const auto pt = field_timeline(v, nodes, TimelineKind::Patent);
  CHECK(pt.years == YearRange{2011, 2013});
  CHECK(pt.series[0].second == std::vector<std::uint64_t>{1, 0, 1});
  CHECK(pt.series[1].second == std::vector<std::uint64_t>{0, 0, 1});
  const std::vector<std::string> bad{"nope"};
  CHECK_THROWS_AS(field_timeline(v, bad, TimelineKind::Paper), ValidationError);
  CHECK_THROWS_AS(timeline_kind_from_string("x"), ValidationError);
}

TEST_CASE("paper timelines match a histogram") {
  const auto c = testing::synthetic();
  const CorpusView v(c);
  std::vector<std::string> ids;
  for (Index f : c->fields().nodes_at_level(1)) ids.push_back(c->fields().node(f).id);
  const auto tl = field_timeline(v, ids, TimelineKind::Paper);
  for (const auto& [id, counts] : tl.series) {
    const Index f = *c->fields().find(id);
    std::map<int, std::uint64_t> hist;
    for (Index p : v.papers())
      if (paper_in_field(*c, p, f)) ++hist[c->paper(p).year];
    for (int y = tl.years.lo; y <= tl.years.hi; ++y)
      CHECK(counts[static_cast<std::size_t>(y - tl.years.lo)] == hist[y]);
  }
}

TEST_CASE("full interplay payload") {
  const auto c = testing::synthetic();
  const CorpusView v(c);
  const auto metrics = metrics_of(v);
  InterplayRequest req;
  const auto layout = build_interplay(v, metrics, nullptr, req);
  CHECK(layout.matrix.paper_count() == c->paper_count());
  CHECK(layout.solution.x.size() == layout.matrix.columns.size());
  const auto j = interplay_to_json(layout, *c, req);
  for (auto key : {"columns", "rows", "cells", "icicle", "flows", "positions", "diversity", "timelines"})
    CHECK(j.contains(key));
  CHECK(j["rows"].back()["hi"].is_null());
  CHECK(interplay_to_json(build_interplay(v, metrics, nullptr, req), *c, req).dump() == j.dump());

  req.mode = FlowMode::Prediction;
  CHECK_THROWS_AS(build_interplay(v, metrics, nullptr, req), ValidationError);
}
