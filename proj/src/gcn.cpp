#include "sciflow/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sciflow/error.hpp"
#include "sciflow/rng.hpp"

namespace sciflow {

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"learning_rate", learning_rate},
              {"dropout", dropout},
              {"hidden", hidden},
              {"weight_decay", weight_decay},
              {"seed", seed},
              {"optimizer", optimizer == Optimizer::Adam ? "adam" : "gd"},
              {"halve_lr_on_increase", halve_lr_on_increase}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.hidden = j.at("hidden").get<int>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto opt = j.at("optimizer").get<std::string>();
  if (opt == "adam") c.optimizer = Optimizer::Adam;
  else if (opt == "gd") c.optimizer = Optimizer::GradientDescent;
  else throw ValidationError("unknown optimizer '" + opt + "'");
  c.halve_lr_on_increase = j.value("halve_lr_on_increase", false);
  return c;
}

namespace {

json matrix_json(const Matrix& m) {
  std::vector<double> flat(m.data(), m.data() + m.size());
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw ValidationError("checkpoint: matrix data size mismatch");
  Matrix m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

}  // namespace

json GcnModel::to_json() const {
  json hist = json::array();
  for (const auto& e : history)
    hist.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                    {"val_auc", optional_to_json(e.val_auc)}});
  return json{{"config", config.to_json()}, {"W0", matrix_json(w0)},  {"W1", matrix_json(w1)},
              {"history", hist},          {"best_epoch", best_epoch}, {"warnings", warnings}};
}

GcnModel GcnModel::from_json(const json& j) {
  GcnModel m;
  m.config = TrainConfig::from_json(j.at("config"));
  m.w0 = matrix_from_json(j.at("W0"));
  m.w1 = matrix_from_json(j.at("W1"));
  if (m.w0.cols() != m.w1.rows() || m.w1.cols() != kClassCount)
    throw ValidationError("checkpoint: inconsistent weight shapes");
  for (const auto& e : j.at("history")) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<int>();
    r.train_loss = e.at("train_loss").get<double>();
    if (!e.at("val_auc").is_null()) r.val_auc = e.at("val_auc").get<double>();
    m.history.push_back(r);
  }
  m.best_epoch = j.at("best_epoch").get<int>();
  m.warnings = j.value("warnings", std::vector<std::string>{});
  return m;
}

NormalizedAdjacency normalize_adjacency(std::size_t n,
                                        std::span<const std::pair<NodeIndex, NodeIndex>> edges) {
  std::vector<std::pair<NodeIndex, NodeIndex>> und;
  und.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) throw ValidationError("adjacency: node index out of range");
    if (u == v) continue;
    und.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(und.begin(), und.end());
  und.erase(std::unique(und.begin(), und.end()), und.end());

  std::vector<double> degree(n, 1.0);
  for (auto [u, v] : und) {
    degree[u] += 1.0;
    degree[v] += 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * und.size() + n);
  for (std::size_t i = 0; i < n; ++i)
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0 / degree[i]);
  for (auto [u, v] : und) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    triplets.emplace_back(static_cast<int>(u), static_cast<int>(v), w);
    triplets.emplace_back(static_cast<int>(v), static_cast<int>(u), w);
  }
  NormalizedAdjacency out;
  out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  out.edge_count = und.size();
  return out;
}

GcnModel init_model(int feature_count, const TrainConfig& config) {
  if (feature_count <= 0 || config.hidden <= 0)
    throw ValidationError("gcn: feature and hidden sizes must be positive");
  GcnModel m;
  m.config = config;
  Rng rng(derive_seed(config.seed, "glorot"));
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
    return w;
  };
  m.w0 = glorot(feature_count, config.hidden);
  m.w1 = glorot(config.hidden, kClassCount);
  return m;
}

namespace {

void apply_dropout(Matrix& m, Matrix* mask, double rate, Rng& rng) {
  const double scale = 1.0 / (1.0 - rate);
  if (mask) mask->resize(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double s = rng.uniform01() < rate ? 0.0 : scale;
    m.data()[i] *= s;
    if (mask) mask->data()[i] = s;
  }
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = std::exp(m(r, c) - mx);
      sum += m(r, c);
    }
    m.row(r) /= sum;
  }
}

void check_shapes(const Matrix& x, const NormalizedAdjacency& a, const Matrix& w0,
                  const Matrix& w1) {
  if (a.matrix.rows() != x.rows() || a.matrix.cols() != x.rows())
    throw ValidationError("gcn: adjacency size does not match feature rows");
  if (w0.rows() != x.cols()) throw ValidationError("gcn: W0 rows do not match feature width");
  if (w1.rows() != w0.cols() || w1.cols() != kClassCount)
    throw ValidationError("gcn: W1 shape mismatch");
}

}  // namespace

ForwardPass forward_pass(const Matrix& x, const NormalizedAdjacency& a, const Matrix& w0,
                         const Matrix& w1, double dropout, Mode mode, Rng* rng) {
  check_shapes(x, a, w0, w1);
  const bool drop = mode == Mode::Train && dropout > 0.0;
  if (drop && !rng) throw ValidationError("gcn: train-mode dropout needs an rng");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("gcn: dropout must be in [0, 1)");

  ForwardPass f;
  f.x_dropped = x;
  if (drop) apply_dropout(f.x_dropped, nullptr, dropout, *rng);
  Matrix xw = f.x_dropped * w0;
  f.pre_hidden = a.matrix * xw;
  f.hidden_dropped = f.pre_hidden.cwiseMax(0.0);
  if (drop) {
    apply_dropout(f.hidden_dropped, &f.hidden_mask, dropout, *rng);
  } else {
    f.hidden_mask = Matrix::Ones(f.pre_hidden.rows(), f.pre_hidden.cols());
  }
  Matrix hw = f.hidden_dropped * w1;
  f.probabilities = a.matrix * hw;
  softmax_rows(f.probabilities);
  return f;
}

Matrix forward(const Matrix& x, const NormalizedAdjacency& a, const GcnModel& model, Mode mode,
               Rng* rng) {
  return forward_pass(x, a, model.w0, model.w1, model.config.dropout, mode, rng).probabilities;
}

double cross_entropy(const Matrix& z, std::span<const int> labels,
                     std::span<const NodeIndex> mask) {
  if (mask.empty()) throw ValidationError("cross_entropy: empty mask");
  double loss = 0.0;
  for (NodeIndex l : mask) {
    const int y = labels[l];
    if (y < 0 || y >= kClassCount) throw ValidationError("cross_entropy: unlabelled node in mask");
    loss -= std::log(std::max(z(l, y), 1e-12));
  }
  return loss;
}

Gradients compute_gradients(const Matrix& x, const NormalizedAdjacency& a, const Matrix& w0,
                            const Matrix& w1, std::span<const int> labels,
                            std::span<const NodeIndex> mask, double weight_decay, double dropout,
                            Mode mode, Rng* rng) {
  const auto f = forward_pass(x, a, w0, w1, dropout, mode, rng);
  Gradients g;
  g.loss = cross_entropy(f.probabilities, labels, mask);
  g.objective = g.loss + 0.5 * weight_decay * w0.squaredNorm();

  // dL/dlogits = Z - Y on labelled rows.
  Matrix d_logits = Matrix::Zero(f.probabilities.rows(), kClassCount);
  for (NodeIndex l : mask) {
    d_logits.row(l) = f.probabilities.row(l);
    d_logits(l, labels[l]) -= 1.0;
  }
  // logits = Â H_d W1, Â symmetric.
  Matrix a_d = a.matrix * d_logits;                   // N x 2
  g.w1 = f.hidden_dropped.transpose() * a_d;          // B x 2
  Matrix d_hidden = a_d * w1.transpose();             // N x B
  d_hidden = d_hidden.cwiseProduct(f.hidden_mask);
  for (Eigen::Index i = 0; i < d_hidden.size(); ++i)
    if (f.pre_hidden.data()[i] <= 0.0) d_hidden.data()[i] = 0.0;
  Matrix a_dp = a.matrix * d_hidden;                  // N x B
  g.w0 = f.x_dropped.transpose() * a_dp + weight_decay * w0;
  return g;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: size mismatch");
  const auto n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

namespace {

std::optional<double> split_auc(const Matrix& z, std::span<const int> labels,
                                std::span<const NodeIndex> nodes) {
  std::vector<double> s;
  std::vector<int> y;
  for (NodeIndex i : nodes) {
    s.push_back(z(i, 1));
    y.push_back(labels[i]);
  }
  return auc(s, y);
}

struct AdamState {
  Matrix m0, v0, m1, v1;
  int step = 0;
};

void adam_update(Matrix& w, const Matrix& g, Matrix& m, Matrix& v, double lr, int step) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(b1, step);
  const double c2 = 1.0 - std::pow(b2, step);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] -= lr * (m.data()[i] / c1) / (std::sqrt(v.data()[i] / c2) + eps);
}

}  // namespace

GcnModel train(const Matrix& x, const NormalizedAdjacency& a, std::span<const int> labels,
               const Splits& splits, const TrainConfig& config) {
  if (splits.train.empty()) throw ValidationError("train: empty training split");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows())
    throw ValidationError("train: label count does not match feature rows");
  if (config.epochs < 0) throw ValidationError("train: epochs must be >= 0");
  GcnModel model = init_model(static_cast<int>(x.cols()), config);
  check_shapes(x, a, model.w0, model.w1);
  {
    bool has0 = false, has1 = false;
    for (NodeIndex i : splits.train) (labels[i] == 1 ? has1 : has0) = true;
    if (!(has0 && has1)) model.warnings.push_back("single-class training labels");
  }
  if (config.epochs == 0) return model;

  Rng rng(derive_seed(config.seed, "dropout"));
  const Mode mode = config.dropout > 0.0 ? Mode::Train : Mode::Eval;
  AdamState adam{Matrix::Zero(model.w0.rows(), model.w0.cols()),
                 Matrix::Zero(model.w0.rows(), model.w0.cols()),
                 Matrix::Zero(model.w1.rows(), model.w1.cols()),
                 Matrix::Zero(model.w1.rows(), model.w1.cols()), 0};
  double lr = config.learning_rate;
  Matrix best_w0 = model.w0, best_w1 = model.w1;
  std::optional<double> best_auc;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto g = compute_gradients(x, a, model.w0, model.w1, labels, splits.train,
                                     config.weight_decay, config.dropout, mode, &rng);
    if (config.optimizer == Optimizer::Adam) {
      ++adam.step;
      adam_update(model.w0, g.w0, adam.m0, adam.v0, lr, adam.step);
      adam_update(model.w1, g.w1, adam.m1, adam.v1, lr, adam.step);
    } else if (config.halve_lr_on_increase && mode == Mode::Eval) {
      for (int tries = 0; tries < 60; ++tries) {
        Matrix w0 = model.w0 - lr * g.w0;
        Matrix w1 = model.w1 - lr * g.w1;
        const auto z = forward_pass(x, a, w0, w1, 0.0, Mode::Eval, nullptr).probabilities;
        if (cross_entropy(z, labels, splits.train) <= g.loss) {
          model.w0 = std::move(w0);
          model.w1 = std::move(w1);
          break;
        }
        lr *= 0.5;
      }
    } else {
      model.w0 -= lr * g.w0;
      model.w1 -= lr * g.w1;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = g.loss;
    if (!splits.val.empty()) {
      const auto z = forward(x, a, model, Mode::Eval);
      rec.val_auc = split_auc(z, labels, splits.val);
    }
    model.history.push_back(rec);
    if (rec.val_auc && (!best_auc || *rec.val_auc > *best_auc)) {
      best_auc = rec.val_auc;
      best_epoch = epoch;
      best_w0 = model.w0;
      best_w1 = model.w1;
    }
  }
  if (best_auc) {
    model.w0 = std::move(best_w0);
    model.w1 = std::move(best_w1);
    model.best_epoch = best_epoch;
  } else {
    model.best_epoch = config.epochs;
  }
  return model;
}

GradCheckResult grad_check(const Matrix& x, const NormalizedAdjacency& a, const Matrix& w0,
                           const Matrix& w1, std::span<const int> labels,
                           std::span<const NodeIndex> mask, double weight_decay, double h,
                           const std::function<void(Gradients&)>& tamper) {
  auto g = compute_gradients(x, a, w0, w1, labels, mask, weight_decay, 0.0, Mode::Eval, nullptr);
  if (tamper) tamper(g);
  auto objective = [&](const Matrix& v0, const Matrix& v1) {
    const auto z = forward_pass(x, a, v0, v1, 0.0, Mode::Eval, nullptr).probabilities;
    return cross_entropy(z, labels, mask) + 0.5 * weight_decay * v0.squaredNorm();
  };
  GradCheckResult r;
  auto compare = [&](double analytic, double numeric) {
    const double abs_err = std::abs(analytic - numeric);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
    r.max_relative_error = std::max(r.max_relative_error, abs_err / denom);
  };
  Matrix p0 = w0, p1 = w1;
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    const double orig = p0.data()[i];
    p0.data()[i] = orig + h;
    const double up = objective(p0, p1);
    p0.data()[i] = orig - h;
    const double down = objective(p0, p1);
    p0.data()[i] = orig;
    compare(g.w0.data()[i], (up - down) / (2.0 * h));
  }
  for (Eigen::Index i = 0; i < p1.size(); ++i) {
    const double orig = p1.data()[i];
    p1.data()[i] = orig + h;
    const double up = objective(p0, p1);
    p1.data()[i] = orig - h;
    const double down = objective(p0, p1);
    p1.data()[i] = orig;
    compare(g.w1.data()[i], (up - down) / (2.0 * h));
  }
  return r;
}

}  // namespace sciflow
