#include "redense/nn.hpp"

#include <cmath>
#include <numeric>

#include "redense/error.hpp"

namespace redense::nn {

using linalg::matmul;
using linalg::matmul_nt;
using linalg::matmul_tn;

double Activation::apply(double z) const {
  switch (kind) {
    case ActivationKind::relu: return z > 0.0 ? z : 0.0;
    case ActivationKind::leaky_relu: return z > 0.0 ? z : slope * z;
    case ActivationKind::identity: return z;
  }
  return z;
}

double Activation::derivative(double z) const {
  switch (kind) {
    case ActivationKind::relu: return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::leaky_relu: return z > 0.0 ? 1.0 : slope;
    case ActivationKind::identity: return 1.0;
  }
  return 1.0;
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::identity: return "identity";
  }
  return "unknown";
}

Activation Activation::parse(const std::string& name, double slope) {
  if (name == "relu") return relu();
  if (name == "leaky_relu" || name == "leaky") return leaky_relu(slope);
  if (name == "identity" || name == "linear") return identity();
  throw ConstraintError("unknown activation '" + name + "'");
}

std::size_t MlpModel::input_width() const {
  return layers.empty() ? output_weight.cols() : layers.front().inputs();
}

void MlpModel::validate() const {
  std::size_t width = input_width();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.inputs() != width) {
      throw DimensionError("layer " + std::to_string(l) + " expects " +
                           std::to_string(layer.inputs()) + " inputs but receives " +
                           std::to_string(width));
    }
    if (layer.bias.size() != layer.outputs()) {
      throw DimensionError("layer " + std::to_string(l) + " bias length mismatch");
    }
    require_finite(layer.weight, "layer " + std::to_string(l) + " weight");
    for (double b : layer.bias) {
      if (!std::isfinite(b)) throw NonFiniteError("layer " + std::to_string(l) + " bias");
    }
    width = layer.outputs();
  }
  if (output_weight.cols() != width) {
    throw DimensionError("output weight " + output_weight.shape_string() +
                         " does not match feature width " + std::to_string(width));
  }
  if (output_bias.size() != output_weight.rows()) {
    throw DimensionError("output bias length mismatch");
  }
  require_finite(output_weight, "output weight");
  for (double b : output_bias) {
    if (!std::isfinite(b)) throw NonFiniteError("output bias");
  }
}

MlpModel make_mlp(std::size_t input_width, std::span<const std::size_t> hidden,
                  std::size_t classes, Activation activation, RngSeed seed) {
  if (input_width == 0 || classes == 0) {
    throw ConstraintError("make_mlp: input width and class count must be positive");
  }
  MlpModel model;
  std::size_t fan_in = input_width;
  RngSeed layer_seed = seed;
  for (std::size_t width : hidden) {
    if (width == 0) throw ConstraintError("make_mlp: hidden widths must be positive");
    DenseLayer layer{linalg::sample_gaussian(width, fan_in, layer_seed),
                     std::vector<double>(width, 0.0), activation};
    layer.weight *= 1.0 / std::sqrt(static_cast<double>(fan_in));
    model.layers.push_back(std::move(layer));
    fan_in = width;
    layer_seed = layer_seed.next();
  }
  model.output_weight = linalg::sample_gaussian(classes, fan_in, layer_seed);
  model.output_weight *= 1.0 / std::sqrt(static_cast<double>(fan_in));
  model.output_bias.assign(classes, 0.0);
  return model;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConstraintError("learning rate must be positive and finite");
  }
  if (batch_size == 0) throw ConstraintError("batch size must be at least 1");
  if (!(weight_decay >= 0.0)) throw ConstraintError("weight decay must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConstraintError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConstraintError("Adam epsilon must be positive");
}

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ConstraintError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

void AdamState::step(std::span<double> params, std::span<const double> grad,
                     double learning_rate, const AdamParams& hp) {
  if (first_.size() != params.size() || grad.size() != params.size()) {
    throw DimensionError("AdamState::step: parameter block size changed");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(hp.beta1, t);
  const double correction2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_[i] = hp.beta1 * first_[i] + (1.0 - hp.beta1) * grad[i];
    second_[i] = hp.beta2 * second_[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    const double m_hat = first_[i] / correction1;
    const double v_hat = second_[i] / correction2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
  }
}

void Dataset::validate(bool one_hot) const {
  if (inputs.rows() != targets.rows()) {
    throw DimensionError("dataset: " + std::to_string(inputs.rows()) + " inputs but " +
                         std::to_string(targets.rows()) + " targets");
  }
  require_finite(inputs, "dataset inputs");
  require_finite(targets, "dataset targets");
  if (!one_hot) return;
  for (std::size_t j = 0; j < targets.rows(); ++j) {
    std::size_t ones = 0;
    for (double v : targets.row(j)) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1) {
      throw ConstraintError("dataset: target row " + std::to_string(j) + " is not one-hot");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  return {inputs.gather_rows(rows), targets.gather_rows(rows)};
}

namespace {

Matrix affine(const Matrix& x, const Matrix& weight, std::span<const double> bias) {
  Matrix z = matmul_nt(x, weight);
  for (std::size_t j = 0; j < z.rows(); ++j) {
    auto r = z.row(j);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += bias[k];
  }
  return z;
}

void activate_inplace(Matrix& z, const Activation& act) {
  if (act.kind == ActivationKind::identity) return;
  for (double& v : z.data()) v = act.apply(v);
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> sums(m.cols(), 0.0);
  for (std::size_t j = 0; j < m.rows(); ++j) {
    auto r = m.row(j);
    for (std::size_t k = 0; k < r.size(); ++k) sums[k] += r[k];
  }
  return sums;
}

void check_input_width(const MlpModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_width()) {
    throw DimensionError("forward: inputs " + inputs.shape_string() + " but model expects " +
                         std::to_string(model.input_width()) + " columns");
  }
}

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;
  Matrix head_weight;
  std::vector<double> head_bias;
};

// Backprop of the summed batch loss through every layer.
Gradients backprop(const MlpModel& model, const Matrix& x, const Matrix& t, const Loss& loss,
                   const TrainConfig& cfg) {
  const std::size_t depth = model.layers.size();
  std::vector<Matrix> pre(depth);
  std::vector<Matrix> post(depth);
  const Matrix* input = &x;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = model.layers[l];
    pre[l] = affine(*input, layer.weight, layer.bias);
    post[l] = pre[l];
    activate_inplace(post[l], layer.activation);
    input = &post[l];
  }
  const Matrix& features = depth == 0 ? x : post.back();
  const Matrix logits = affine(features, model.output_weight, model.output_bias);
  const Matrix g = loss_grad(loss, logits, t);

  Gradients out;
  out.head_weight = matmul_tn(g, features);
  out.head_bias = column_sums(g);
  if (cfg.weight_decay > 0.0) {
    Matrix decay = model.output_weight;
    out.head_weight += (decay *= cfg.weight_decay);
  }
  if (!cfg.train_hidden || depth == 0) return out;

  out.weight.resize(depth);
  out.bias.resize(depth);
  Matrix delta = matmul(g, model.output_weight);
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = model.layers[l];
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta.data()[i] *= layer.activation.derivative(pre[l].data()[i]);
    }
    const Matrix& below = l == 0 ? x : post[l - 1];
    out.weight[l] = matmul_tn(delta, below);
    out.bias[l] = column_sums(delta);
    if (cfg.weight_decay > 0.0) {
      Matrix decay = layer.weight;
      out.weight[l] += (decay *= cfg.weight_decay);
    }
    if (l > 0) delta = matmul(delta, layer.weight);
  }
  return out;
}

// Optimizer state for all parameter blocks in a fixed order.
class ModelOptimizer {
 public:
  ModelOptimizer(const MlpModel& model, const TrainConfig& cfg) : cfg_(cfg) {
    if (cfg.optimizer != OptimizerKind::adam) return;
    for (const auto& layer : model.layers) {
      states_.emplace_back(layer.weight.size());
      states_.emplace_back(layer.bias.size());
    }
    states_.emplace_back(model.output_weight.size());
    states_.emplace_back(model.output_bias.size());
  }

  void apply(MlpModel& model, const Gradients& g) {
    const std::size_t head = 2 * model.layers.size();
    if (cfg_.train_hidden) {
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        update(2 * l, model.layers[l].weight.data(), g.weight[l].data());
        update(2 * l + 1, model.layers[l].bias, g.bias[l]);
      }
    }
    update(head, model.output_weight.data(), g.head_weight.data());
    update(head + 1, model.output_bias, g.head_bias);
  }

 private:
  void update(std::size_t block, std::span<double> params, std::span<const double> grad) {
    if (cfg_.optimizer == OptimizerKind::adam) {
      states_[block].step(params, grad, cfg_.learning_rate, cfg_.adam);
      return;
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg_.learning_rate * grad[i];
  }

  const TrainConfig& cfg_;
  std::vector<AdamState> states_;
};

double full_loss(const MlpModel& model, const Dataset& data, const Loss& loss,
                 std::size_t epoch) {
  const Matrix logits = forward(model, data.inputs).logits;
  if (!logits.all_finite()) {
    throw DivergenceError("training diverged: non-finite logits at epoch " + std::to_string(epoch),
                          epoch);
  }
  const double value = loss_value(loss, logits, data.targets);
  if (!std::isfinite(value)) {
    throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch),
                          epoch);
  }
  return value;
}

}  // namespace

ForwardResult forward(const MlpModel& model, const Matrix& inputs) {
  check_input_width(model, inputs);
  Matrix features = inputs;
  for (const auto& layer : model.layers) {
    features = affine(features, layer.weight, layer.bias);
    activate_inplace(features, layer.activation);
  }
  Matrix logits = affine(features, model.output_weight, model.output_bias);
  return {std::move(logits), std::move(features)};
}

Matrix extract_features(const MlpModel& model, const Matrix& inputs) {
  return forward(model, inputs).features;
}

TrainResult train_base(MlpModel model, const Dataset& data, const Loss& loss,
                       const TrainConfig& cfg, const EpochObserver& observer) {
  cfg.validate();
  model.validate();
  data.validate(false);
  check_input_width(model, data.inputs);
  if (data.classes() != model.classes()) {
    throw DimensionError("train_base: targets have " + std::to_string(data.classes()) +
                         " columns but model has " + std::to_string(model.classes()) + " outputs");
  }
  if (data.size() == 0) throw ConstraintError("train_base: empty dataset");

  TrainResult result;
  const double initial = full_loss(model, data, loss, 0);
  result.curve.push_back({0, initial});
  if (observer) observer(0, model, initial);

  linalg::Rng rng(cfg.seed);
  ModelOptimizer optimizer(model, cfg);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> rows(order.data() + start, count);
      Gradients g;
      try {
        g = backprop(model, data.inputs.gather_rows(rows), data.targets.gather_rows(rows), loss,
                     cfg);
      } catch (const NonFiniteError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                  e.what(),
                              epoch);
      }
      optimizer.apply(model, g);
    }
    const double value = full_loss(model, data, loss, epoch);
    result.curve.push_back({epoch, value});
    if (observer) observer(epoch, model, value);
  }
  result.model = std::move(model);
  return result;
}

Evaluation evaluate(const MlpModel& model, const Matrix& inputs, const Matrix& targets,
                    const Loss& loss) {
  return evaluate_logits(forward(model, inputs).logits, targets, loss);
}

}  // namespace redense::nn
