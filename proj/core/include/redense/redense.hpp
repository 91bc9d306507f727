#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "redense/linalg.hpp"
#include "redense/matrix.hpp"
#include "redense/nn.hpp"

namespace redense {

using linalg::RngSeed;

// Relative slack allowed on ||O||_F <= epsilon after rescaling.
inline constexpr double kConstraintSlack = 1e-12;
// Projections whose condition number exceeds this are resampled.
inline constexpr double kMaxProjectionCondition = 1e8;
// Round-off budget for L_n(O_0) against L_o.
inline constexpr double kInitLossTolerance = 1e-6;

// A frozen random ReLU layer with a trainable, norm-bounded output weight.
//
//   lifted(y) = [relu(R y), relu(-R y)]          (2m values)
//   logits(y) = O lifted(y)                      (O is Q x 2m)
//
// The lift is the ReLU lossless-flow construction: subtracting the second
// half of lifted(y) from the first recovers R y exactly. Starting from
// O_0 = [W R^+, -W R^+] therefore reproduces the base head W (up to the
// round-off in R^+ R), and epsilon = ||O_0||_F is the smallest ball that
// still contains that point.
class RedenseLayer {
 public:
  std::size_t n() const { return projection_.cols(); }
  std::size_t m() const { return projection_.rows(); }
  std::size_t classes() const { return weight_.rows(); }

  const Matrix& projection() const { return projection_; }
  const Matrix& weight() const { return weight_; }
  const Matrix& base_weight() const { return base_weight_; }
  double epsilon() const { return epsilon_; }
  RngSeed seed() const { return seed_; }
  // Number of times R was redrawn because it was ill-conditioned.
  std::size_t resamples() const { return resamples_; }

  // Replaces O. Throws if the shape changes or ||O||_F exceeds the ball.
  void set_weight(Matrix weight);

  // Rebuilds a layer from stored parts, re-checking every invariant.
  static RedenseLayer restore(Matrix projection, Matrix base_weight, Matrix weight,
                              double epsilon, RngSeed seed, std::size_t resamples = 0);

  friend RedenseLayer build(const Matrix& output_weight, std::size_t n, std::size_t m,
                            RngSeed seed);
  friend RedenseLayer build_with_projection(const Matrix& output_weight, Matrix projection,
                                            RngSeed seed);

 private:
  RedenseLayer() = default;

  Matrix projection_;   // R, m x n
  Matrix base_weight_;  // W, Q x n
  Matrix weight_;       // O, Q x 2m
  double epsilon_ = 0.0;
  RngSeed seed_;
  std::size_t resamples_ = 0;
};

// Samples R ~ N(0, 1)^{m x n} and initializes O = O_0. Requires m >= n and
// output_weight.cols() == n. If cond(R) > kMaxProjectionCondition, R is
// redrawn from seed + 1, seed + 2, ...
RedenseLayer build(const Matrix& output_weight, std::size_t n, std::size_t m, RngSeed seed);
// Same construction with a caller-supplied R.
RedenseLayer build_with_projection(const Matrix& output_weight, Matrix projection,
                                   RngSeed seed = {});

// [max(z, 0), max(-z, 0)] column-wise.
Matrix relu_split(const Matrix& z);
Matrix lfp_lift(const Matrix& projection, const Matrix& features);
Matrix lfp_lift(const RedenseLayer& layer, const Matrix& features);
// First m columns minus last m columns.
Matrix lfp_reconstruct(const Matrix& lifted, std::size_t m);

Matrix predict(const RedenseLayer& layer, const Matrix& features);

// Scales z onto the Frobenius ball of `radius` when it lies outside.
Matrix project_to_ball(Matrix z, double radius);

// Gradient of the summed softmax cross-entropy of `lifted * weight^T`
// with respect to `weight`.
Matrix objective_gradient(const Matrix& weight, const Matrix& lifted, const Matrix& targets);

// The same comparison measured in the loss the base model was trained with.
// Informational: the optimizer minimizes cross-entropy, so this pair carries
// no guarantee.
struct BaseLossComparison {
  nn::Loss loss;
  double old_loss = 0.0;
  double final_loss = 0.0;
};

struct GuaranteeReport {
  double old_loss = 0.0;    // L_o: cross-entropy of the base head
  double init_loss = 0.0;   // L_n(O_0)
  double final_loss = 0.0;  // L_n(O*) of the returned iterate
  double epsilon = 0.0;
  bool guarantee_holds = false;
  std::size_t best_epoch = 0;
  bool aborted = false;      // a non-finite loss stopped training early
  std::size_t last_epoch = 0;
  std::optional<BaseLossComparison> base;
};

// final_loss <= old_loss. When no iterate beat L_o the returned point is no
// worse than O_0, and O_0 reproduces L_o up to kInitLossTolerance; that case
// also counts as holding.
bool guarantee_check(const GuaranteeReport& report);

struct IterateRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double weight_norm = 0.0;
};

using IterateObserver = std::function<void(const IterateRecord&, const Matrix& weight)>;

struct RedenseOptions {
  nn::TrainConfig config = default_config();
  // When set, the report also compares old/new in this loss.
  std::optional<nn::Loss> base_loss;
  // Called for O_0 and after every epoch.
  IterateObserver observer;

  // Full-batch Adam, learning rate 1e-4, 100 epochs.
  static nn::TrainConfig default_config();
};

struct RedenseTrainResult {
  RedenseLayer layer;
  GuaranteeReport report;
  std::vector<IterateRecord> curve;  // epoch 0 is O_0
};

// Projected training of O on summed softmax cross-entropy. Each step is an
// SGD or Adam update followed by rescaling onto ||O||_F <= epsilon (Adam
// moments are kept across projections). The best iterate by full training
// loss, O_0 included, is returned.
RedenseTrainResult train(const RedenseLayer& layer, const Matrix& features,
                         const Matrix& targets, const RedenseOptions& options = {});

// Folds a head bias into the weight: features gain a trailing column of ones
// and the weight gains the bias as its last column, so
// features' * weight'^T == features * weight^T + bias.
struct HeadInputs {
  Matrix features;
  Matrix output_weight;
};
HeadInputs absorb_bias(const Matrix& features, const Matrix& output_weight,
                       std::span<const double> bias);

}  // namespace redense
