#pragma once

// Two-layer graph convolutional network for binary node classification:
//
//   Z = softmax(Â · ReLU(Â · X · W0) · W1),   Â = D̃^{-1/2} (A + I) D̃^{-1/2}
//
// trained full-batch on the summed cross-entropy over the labelled rows.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sciflow/io.hpp"

namespace sciflow {

class Rng;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using NodeIndex = std::uint32_t;

inline constexpr int kClassCount = 2;

struct NormalizedAdjacency {
  SparseMatrix matrix;
  std::size_t edge_count = 0;  // distinct undirected edges, self loops excluded
};

// Undirected, unweighted; duplicate and reversed pairs collapse. Self loops
// come only from the +I term.
NormalizedAdjacency normalize_adjacency(std::size_t node_count,
                                        std::span<const std::pair<NodeIndex, NodeIndex>> edges);

enum class Optimizer { Adam, GradientDescent };

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double dropout = 0.5;
  int hidden = 16;
  double weight_decay = 5e-4;  // L2 on W0
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  // Gradient descent only: reject a step that raises the training loss and
  // retry it with half the learning rate.
  bool halve_lr_on_increase = false;

  json to_json() const;
  static TrainConfig from_json(const json& j);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_auc;
};

struct GcnModel {
  Matrix w0;  // F x B
  Matrix w1;  // B x 2
  TrainConfig config;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 = initial weights
  std::vector<std::string> warnings;

  json to_json() const;
  static GcnModel from_json(const json& j);
};

// Seeded Glorot-uniform initialization.
GcnModel init_model(int feature_count, const TrainConfig& config);

enum class Mode { Train, Eval };

// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardPass {
  Matrix x_dropped;
  Matrix pre_hidden;       // Â X_d W0
  Matrix hidden_mask;      // dropout scale per hidden unit (1 when disabled)
  Matrix hidden_dropped;   // ReLU(pre_hidden) ∘ hidden_mask
  Matrix probabilities;    // N x 2
};

// Train mode applies inverted dropout to X and to the hidden layer and
// needs an rng; Eval mode is deterministic.
ForwardPass forward_pass(const Matrix& x, const NormalizedAdjacency& a, const Matrix& w0,
                         const Matrix& w1, double dropout, Mode mode, Rng* rng);
Matrix forward(const Matrix& x, const NormalizedAdjacency& a, const GcnModel& model, Mode mode,
               Rng* rng = nullptr);

// Summed cross-entropy over `mask` with Z clamped at 1e-12; labels are class
// ids (0 or 1) per node.
double cross_entropy(const Matrix& probabilities, std::span<const int> labels,
                     std::span<const NodeIndex> mask);

struct Gradients {
  Matrix w0;
  Matrix w1;
  double loss = 0.0;       // cross-entropy part
  double objective = 0.0;  // loss + weight_decay/2 · ||W0||²
};

Gradients compute_gradients(const Matrix& x, const NormalizedAdjacency& a, const Matrix& w0,
                            const Matrix& w1, std::span<const int> labels,
                            std::span<const NodeIndex> mask, double weight_decay, double dropout,
                            Mode mode, Rng* rng);

struct Splits {
  std::vector<NodeIndex> train;
  std::vector<NodeIndex> val;
  std::vector<NodeIndex> test;
};

// Full-batch training; returns the snapshot with the best validation AUC
// (earliest on ties, last epoch when validation AUC is never defined).
GcnModel train(const Matrix& x, const NormalizedAdjacency& a, std::span<const int> labels,
               const Splits& splits, const TrainConfig& config);

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

// Analytic gradients of the objective against central differences with
// step h, dropout off. Relative error per entry is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const Matrix& x, const NormalizedAdjacency& a, const Matrix& w0,
                           const Matrix& w1, std::span<const int> labels,
                           std::span<const NodeIndex> mask, double weight_decay,
                           double h = 1e-5,
                           const std::function<void(Gradients&)>& tamper = {});

// Mann-Whitney AUC with ties counted as one half; nullopt unless both
// classes are present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace sciflow
