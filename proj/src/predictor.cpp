#include "sciflow/predictor.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "sciflow/error.hpp"
#include "sciflow/rng.hpp"

namespace sciflow {

json FeatureConfig::to_json() const {
  return json{{"provider", provider == FeatureProvider::HashedTitle ? "hashed-title" : "external-file"},
              {"dimensions", dimensions},
              {"external_path", provider == FeatureProvider::ExternalFile
                                    ? json(external_path.string())
                                    : json(nullptr)}};
}

json PredictionConfig::to_json() const {
  return json{{"train", train.to_json()},
              {"split_year", split_year},
              {"train_fraction", train_fraction},
              {"predict_window", {predict_window.lo, predict_window.hi}},
              {"k_groups", k_groups},
              {"label_horizon", label_horizon}};
}

// ---- Features ----

std::vector<std::string> tokenize_title(std::string_view title) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : title) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

Eigen::VectorXd hashed_title_counts(std::string_view title, int dims) {
  if (dims <= 0) throw ValidationError("features: dimensions must be positive");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dims);
  for (const auto& tok : tokenize_title(title)) {
    const std::uint64_t h = fnv1a64(tok);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dims));
    v[bucket] += ((h >> 32) & 1U) ? 1.0 : -1.0;
  }
  return v;
}

Eigen::VectorXd hashed_title_embedding(std::string_view title, int dims) {
  Eigen::VectorXd v = hashed_title_counts(title, dims);
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

FeatureMatrix build_features(const CorpusView& view, const FeatureConfig& config) {
  const auto& c = view.corpus();
  FeatureMatrix fm;
  fm.papers = view.papers();
  fm.provider = config.provider;
  const auto n = static_cast<Eigen::Index>(fm.papers.size());

  if (config.provider == FeatureProvider::HashedTitle) {
    fm.x.resize(n, config.dimensions);
    for (Eigen::Index r = 0; r < n; ++r)
      fm.x.row(r) = hashed_title_embedding(c.paper(fm.papers[r]).title, config.dimensions).transpose();
    return fm;
  }

  std::unordered_map<std::string, std::vector<double>> rows;
  std::optional<std::size_t> width;
  for_each_jsonl(config.external_path, [&](const json& o, std::size_t) {
    auto id = require_string(o, "paper_id");
    auto emb = require_key(o, "embedding").get<std::vector<double>>();
    if (width && emb.size() != *width) throw ValidationError("embedding width differs from first row");
    for (double d : emb)
      if (!std::isfinite(d)) throw ValidationError("embedding has a non-finite entry");
    width = emb.size();
    rows[id] = std::move(emb);
  });
  if (!width || *width == 0) throw ValidationError("external features file is empty");
  fm.x.resize(n, static_cast<Eigen::Index>(*width));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& id = c.paper(fm.papers[r]).id;
    auto it = rows.find(id);
    if (it == rows.end()) throw ValidationError("external features missing paper id '" + id + "'");
    for (std::size_t k = 0; k < *width; ++k) fm.x(r, static_cast<Eigen::Index>(k)) = it->second[k];
  }
  return fm;
}

NormalizedAdjacency normalize_adjacency(const CorpusView& view, std::span<const Index> papers) {
  std::unordered_map<Index, NodeIndex> row;
  for (NodeIndex i = 0; i < papers.size(); ++i) row.emplace(papers[i], i);
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  for (NodeIndex i = 0; i < papers.size(); ++i)
    for (Index r : view.references(papers[i])) {
      auto it = row.find(r);
      if (it != row.end()) edges.emplace_back(i, it->second);
    }
  return normalize_adjacency(papers.size(), edges);
}

// ---- Labels and splits ----

std::vector<Index> top_cpc_groups(const CorpusView& view, int k) {
  const auto& c = view.corpus();
  std::unordered_map<Index, std::size_t> counts;
  for (Index t : view.patents()) {
    if (view.cited_papers(t).empty()) continue;
    for (Index g : c.patent_cpc_nodes(t, 2)) ++counts[g];
  }
  std::vector<std::pair<Index, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return c.cpc().node(a.first).id < c.cpc().node(b.first).id;
  });
  std::vector<Index> out;
  for (const auto& [g, n] : ranked) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(g);
  }
  return out;
}

std::vector<int> group_labels(const CorpusView& view, std::span<const Index> papers, Index group,
                              int horizon) {
  const auto& c = view.corpus();
  std::vector<int> labels(papers.size(), 0);
  for (std::size_t i = 0; i < papers.size(); ++i) {
    const int year = c.paper(papers[i]).year;
    for (Index t : view.citing_patents(papers[i])) {
      const int d = c.patent(t).application_year - year;
      if (d < 0 || d > horizon) continue;
      const auto& groups = c.patent_cpc_nodes(t, 2);
      if (std::binary_search(groups.begin(), groups.end(), group)) {
        labels[i] = 1;
        break;
      }
    }
  }
  return labels;
}

PaperSplits make_splits(const CorpusView& view, std::span<const Index> papers,
                        const PredictionConfig& config) {
  const auto& c = view.corpus();
  PaperSplits s;
  std::vector<NodeIndex> early;
  for (NodeIndex i = 0; i < papers.size(); ++i) {
    const int year = c.paper(papers[i]).year;
    if (year <= config.split_year) early.push_back(i);
    else if (year == config.split_year + 1) s.labelled.test.push_back(i);
    if (config.predict_window.contains(year)) s.predict.push_back(i);
  }
  Rng rng(derive_seed(config.train.seed, "split"));
  rng.shuffle(early);
  auto n_train = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(early.size()) + 0.5));
  n_train = std::min(n_train, early.size());
  s.labelled.train.assign(early.begin(), early.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.labelled.val.assign(early.begin() + static_cast<std::ptrdiff_t>(n_train), early.end());
  std::sort(s.labelled.train.begin(), s.labelled.train.end());
  std::sort(s.labelled.val.begin(), s.labelled.val.end());
  return s;
}

std::vector<double> percentile_ranks(std::span<const double> values) {
  const auto n = values.size();
  std::vector<double> out(n, 50.0);
  if (n <= 1) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const double pct = 100.0 * (avg_rank - 1.0) / static_cast<double>(n - 1);
    for (std::size_t k = i; k < j; ++k) out[order[k]] = pct;
    i = j;
  }
  return out;
}

double running_mean(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean of an empty sequence");
  double m = values[0];
  for (std::size_t i = 1; i < values.size(); ++i)
    m += (values[i] - m) / static_cast<double>(i + 1);
  return m;
}

// ---- Per-group training ----

std::vector<GroupResult> train_groups(const FeatureMatrix& features, const NormalizedAdjacency& a,
                                      const CorpusView& view, std::span<const Index> groups,
                                      const PredictionConfig& config) {
  const auto& c = view.corpus();
  const auto splits = make_splits(view, features.papers, config);
  std::vector<GroupResult> results(groups.size());

  auto run_one = [&](std::size_t gi) {
    const auto& group_id = c.cpc().node(groups[gi]).id;
    auto labels = group_labels(view, features.papers, groups[gi], config.label_horizon);
    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.train.seed, group_id);
    GroupResult r;
    r.group = group_id;
    r.model = train(features.x, a, labels, splits.labelled, tc);
    if (r.model.best_epoch > 0) r.best_val_auc = r.model.history[r.model.best_epoch - 1].val_auc;
    if (!splits.labelled.test.empty()) {
      const auto z = forward(features.x, a, r.model, Mode::Eval);
      std::vector<double> s;
      std::vector<int> y;
      for (NodeIndex i : splits.labelled.test) {
        s.push_back(z(i, 1));
        y.push_back(labels[i]);
      }
      r.test_auc = auc(s, y);
    }
    results[gi] = std::move(r);
  };

  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(groups.size())));
  if (jobs <= 1) {
    for (std::size_t gi = 0; gi < groups.size(); ++gi) run_one(gi);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t gi = next++; gi < groups.size(); gi = next++) run_one(gi);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

// ---- Patentability ----

json PredictionRow::to_json() const {
  return json{{"paper_id", paper_id}, {"group", group}, {"prob", prob}, {"percentile", percentile}};
}

PaperScores PatentabilityTable::scores(const Corpus& corpus) const {
  PaperScores out(corpus.paper_count());
  for (const auto& [id, v] : patentability)
    if (auto p = corpus.find_paper(id)) out[*p] = v;
  return out;
}

PatentabilityTable PatentabilityTable::from_rows(std::vector<PredictionRow> rows) {
  PatentabilityTable t;
  std::map<std::string, std::vector<double>> per_paper;
  for (const auto& r : rows) {
    if (std::find(t.groups.begin(), t.groups.end(), r.group) == t.groups.end()) t.groups.push_back(r.group);
    per_paper[r.paper_id].push_back(r.percentile);
  }
  for (const auto& [id, v] : per_paper) t.patentability[id] = running_mean(v);
  t.rows = std::move(rows);
  return t;
}

PatentabilityTable patentability(const FeatureMatrix& features, const NormalizedAdjacency& a,
                                 const CorpusView& view,
                                 const std::vector<std::pair<std::string, GcnModel>>& models,
                                 const PredictionConfig& config) {
  const auto& c = view.corpus();
  const auto splits = make_splits(view, features.papers, config);
  std::vector<PredictionRow> rows;
  for (const auto& [group, model] : models) {
    const auto z = forward(features.x, a, model, Mode::Eval);
    std::vector<double> probs;
    for (NodeIndex i : splits.predict) probs.push_back(z(i, 1));
    const auto pct = percentile_ranks(probs);
    for (std::size_t k = 0; k < splits.predict.size(); ++k)
      rows.push_back({c.paper(features.papers[splits.predict[k]]).id, group, probs[k], pct[k]});
  }
  return PatentabilityTable::from_rows(std::move(rows));
}

std::optional<double> p_index(const Corpus& corpus, std::string_view researcher_id,
                              const PatentabilityTable& table, const YearRange& predict_window) {
  const Index r = corpus.researcher_at(researcher_id);
  std::vector<double> values;
  for (Index p : corpus.researcher_papers(r)) {
    const auto& paper = corpus.paper(p);
    if (!predict_window.contains(paper.year)) continue;
    auto it = table.patentability.find(paper.id);
    if (it != table.patentability.end()) values.push_back(it->second);
  }
  if (values.empty()) return std::nullopt;
  return running_mean(values);
}

}  // namespace sciflow
