#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "redense/linalg.hpp"
#include "redense/matrix.hpp"

namespace redense::nn {

using linalg::RngSeed;

enum class ActivationKind { relu, leaky_relu, identity };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double slope = 0.01;  // leaky_relu only

  static Activation relu() { return {ActivationKind::relu, 0.0}; }
  static Activation leaky_relu(double slope) { return {ActivationKind::leaky_relu, slope}; }
  static Activation identity() { return {ActivationKind::identity, 0.0}; }

  double apply(double z) const;
  double derivative(double z) const;
  std::string name() const;
  static Activation parse(const std::string& name, double slope = 0.01);

  friend bool operator==(const Activation&, const Activation&) = default;
};

struct DenseLayer {
  Matrix weight;             // out x in
  std::vector<double> bias;  // out
  Activation activation;

  std::size_t inputs() const { return weight.cols(); }
  std::size_t outputs() const { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Hidden layers followed by the linear output head. The last hidden layer's
// activations are the features the head (and a ReDense layer) consume.
struct MlpModel {
  std::vector<DenseLayer> layers;
  Matrix output_weight;             // Q x n
  std::vector<double> output_bias;  // Q

  std::size_t input_width() const;
  std::size_t feature_width() const { return output_weight.cols(); }
  std::size_t classes() const { return output_weight.rows(); }

  // Throws DimensionError / NonFiniteError when the invariants do not hold.
  void validate() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

// Weights ~ N(0, 1/fan_in), biases zero. An empty `hidden` list gives a
// linear model whose features are the inputs themselves.
MlpModel make_mlp(std::size_t input_width, std::span<const std::size_t> hidden,
                  std::size_t classes, Activation activation, RngSeed seed);

enum class LossKind { softmax_cross_entropy, mean_square_error, poisson, huber };

// Every loss is a sum over samples. Cross-entropy works on logits directly;
// the other three act on softmax(logits) so all four share the probability
// simplex as codomain.
struct Loss {
  LossKind kind = LossKind::softmax_cross_entropy;
  double delta = 1.0;  // huber threshold

  static Loss cross_entropy() { return {LossKind::softmax_cross_entropy, 1.0}; }
  static Loss mse() { return {LossKind::mean_square_error, 1.0}; }
  static Loss poisson() { return {LossKind::poisson, 1.0}; }
  static Loss huber(double delta = 1.0);

  std::string name() const;
  // Accepts ce, mse, poisson, huber (and the long names).
  static Loss parse(const std::string& name, double delta = 1.0);

  friend bool operator==(const Loss&, const Loss&) = default;
};

inline constexpr double kPoissonLogFloor = 1e-12;

Matrix softmax_rows(const Matrix& logits);

// Huber penalty summed over a residual vector.
double huber_elementwise(std::span<const double> residual, double delta);

double loss_value(const Loss& loss, const Matrix& logits, const Matrix& targets);
// d(loss_value)/d(logits).
Matrix loss_grad(const Loss& loss, const Matrix& logits, const Matrix& targets);

enum class OptimizerKind { adam, sgd };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double weight_decay = 0.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamParams adam;
  RngSeed seed;
  // When false only the output head is updated.
  bool train_hidden = true;

  void validate() const;
};

std::string optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

// First and second moment buffers for one parameter block.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::size_t size) : first_(size, 0.0), second_(size, 0.0) {}

  // In-place bias-corrected Adam update of `params`.
  void step(std::span<double> params, std::span<const double> grad, double learning_rate,
            const AdamParams& hp);

  std::size_t steps() const { return steps_; }

 private:
  std::vector<double> first_;
  std::vector<double> second_;
  std::size_t steps_ = 0;
};

struct Dataset {
  Matrix inputs;   // J x P
  Matrix targets;  // J x Q

  std::size_t size() const { return inputs.rows(); }
  std::size_t input_width() const { return inputs.cols(); }
  std::size_t classes() const { return targets.cols(); }

  // Row counts agree and all values are finite; with `one_hot` also checks
  // that each target row is a unit basis vector.
  void validate(bool one_hot = true) const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct ForwardResult {
  Matrix logits;    // J x Q
  Matrix features;  // J x n
};

ForwardResult forward(const MlpModel& model, const Matrix& inputs);
Matrix extract_features(const MlpModel& model, const Matrix& inputs);

struct CurvePoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<CurvePoint> curve;  // epoch 0 is the untrained model
};

using EpochObserver = std::function<void(std::size_t epoch, const MlpModel& model, double loss)>;

// Mini-batch backprop over all layers plus the head. Batches are reshuffled
// every epoch from cfg.seed. Throws DivergenceError on a non-finite loss.
TrainResult train_base(MlpModel model, const Dataset& data, const Loss& loss,
                       const TrainConfig& cfg, const EpochObserver& observer = {});

struct Evaluation {
  double loss = 0.0;       // summed over samples
  double mean_loss = 0.0;  // loss / J, for logging
  double accuracy = 0.0;
};

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);
double accuracy(const Matrix& logits, const Matrix& targets);

Evaluation evaluate_logits(const Matrix& logits, const Matrix& targets, const Loss& loss);
Evaluation evaluate(const MlpModel& model, const Matrix& inputs, const Matrix& targets,
                    const Loss& loss);

}  // namespace redense::nn
