#include "redense/redense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "redense/error.hpp"

namespace redense {

using linalg::frobenius_norm;
using linalg::matmul;
using linalg::matmul_nt;
using linalg::matmul_tn;

namespace {

constexpr std::size_t kMaxResamples = 16;

void require_ball(const Matrix& weight, double epsilon) {
  const double norm = frobenius_norm(weight);
  if (norm > epsilon * (1.0 + kConstraintSlack)) {
    throw ConstraintError("ReDense weight norm " + std::to_string(norm) +
                          " exceeds constraint radius " + std::to_string(epsilon));
  }
}

// O_0 = [W R^+, -W R^+].
Matrix initial_weight(const Matrix& base_weight, const linalg::Svd& decomposition,
                      std::size_t m, std::size_t n) {
  const Matrix pseudo = linalg::pinv(decomposition, m, n);  // n x m
  const Matrix half = matmul(base_weight, pseudo);          // Q x m
  Matrix negated = half;
  negated *= -1.0;
  return hconcat(half, negated);
}

void check_base_weight(const Matrix& output_weight, std::size_t n) {
  if (output_weight.cols() != n) {
    throw DimensionError("ReDense: output weight " + output_weight.shape_string() +
                         " does not have n = " + std::to_string(n) + " columns");
  }
  if (output_weight.rows() == 0) throw DimensionError("ReDense: output weight has no rows");
  require_finite(output_weight, "ReDense output weight");
}

void check_widths(std::size_t n, std::size_t m) {
  if (n == 0) throw ConstraintError("ReDense: feature width n must be positive");
  if (m < n) {
    throw ConstraintError("ReDense: we must have m >= n so R has full column rank, got m = " +
                          std::to_string(m) + " < n = " + std::to_string(n));
  }
}

double cross_entropy(const Matrix& logits, const Matrix& targets) {
  return nn::loss_value(nn::Loss::cross_entropy(), logits, targets);
}

}  // namespace

void RedenseLayer::set_weight(Matrix weight) {
  if (weight.rows() != weight_.rows() || weight.cols() != weight_.cols()) {
    throw DimensionError("ReDense weight must stay " + weight_.shape_string() + ", got " +
                         weight.shape_string());
  }
  require_finite(weight, "ReDense weight");
  require_ball(weight, epsilon_);
  weight_ = std::move(weight);
}

RedenseLayer RedenseLayer::restore(Matrix projection, Matrix base_weight, Matrix weight,
                                   double epsilon, RngSeed seed, std::size_t resamples) {
  check_widths(projection.cols(), projection.rows());
  check_base_weight(base_weight, projection.cols());
  require_finite(projection, "ReDense projection");
  if (weight.rows() != base_weight.rows() || weight.cols() != 2 * projection.rows()) {
    throw DimensionError("ReDense weight " + weight.shape_string() + " does not match Q = " +
                         std::to_string(base_weight.rows()) +
                         ", 2m = " + std::to_string(2 * projection.rows()));
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConstraintError("ReDense constraint radius must be positive and finite");
  }
  require_finite(weight, "ReDense weight");
  require_ball(weight, epsilon);

  RedenseLayer layer;
  layer.projection_ = std::move(projection);
  layer.base_weight_ = std::move(base_weight);
  layer.weight_ = std::move(weight);
  layer.epsilon_ = epsilon;
  layer.seed_ = seed;
  layer.resamples_ = resamples;
  return layer;
}

RedenseLayer build(const Matrix& output_weight, std::size_t n, std::size_t m, RngSeed seed) {
  check_widths(n, m);
  check_base_weight(output_weight, n);

  RngSeed current = seed;
  for (std::size_t attempt = 0; attempt <= kMaxResamples; ++attempt) {
    Matrix projection = linalg::sample_gaussian(m, n, current);
    const linalg::Svd decomposition = linalg::svd(projection);
    if (linalg::condition_number(decomposition) <= kMaxProjectionCondition) {
      Matrix weight = initial_weight(output_weight, decomposition, m, n);
      const double epsilon = frobenius_norm(weight);
      if (!(epsilon > 0.0)) {
        throw ConstraintError("ReDense: output weight is zero, constraint radius would be 0");
      }
      RedenseLayer layer;
      layer.projection_ = std::move(projection);
      layer.base_weight_ = output_weight;
      layer.weight_ = std::move(weight);
      layer.epsilon_ = epsilon;
      layer.seed_ = current;
      layer.resamples_ = attempt;
      return layer;
    }
    current = current.next();
  }
  throw ConstraintError("ReDense: could not draw a well-conditioned projection after " +
                        std::to_string(kMaxResamples) + " resamples");
}

RedenseLayer build_with_projection(const Matrix& output_weight, Matrix projection,
                                   RngSeed seed) {
  const std::size_t m = projection.rows();
  const std::size_t n = projection.cols();
  check_widths(n, m);
  check_base_weight(output_weight, n);
  const linalg::Svd decomposition = linalg::svd(projection);
  if (linalg::condition_number(decomposition) > kMaxProjectionCondition) {
    throw ConstraintError("ReDense: supplied projection is ill-conditioned");
  }
  Matrix weight = initial_weight(output_weight, decomposition, m, n);
  const double epsilon = frobenius_norm(weight);
  if (!(epsilon > 0.0)) {
    throw ConstraintError("ReDense: output weight is zero, constraint radius would be 0");
  }
  RedenseLayer layer;
  layer.projection_ = std::move(projection);
  layer.base_weight_ = output_weight;
  layer.weight_ = std::move(weight);
  layer.epsilon_ = epsilon;
  layer.seed_ = seed;
  return layer;
}

Matrix relu_split(const Matrix& z) {
  const std::size_t m = z.cols();
  Matrix out(z.rows(), 2 * m);
  for (std::size_t j = 0; j < z.rows(); ++j) {
    auto src = z.row(j);
    auto dst = out.row(j);
    for (std::size_t k = 0; k < m; ++k) {
      dst[k] = src[k] > 0.0 ? src[k] : 0.0;
      dst[m + k] = src[k] < 0.0 ? -src[k] : 0.0;
    }
  }
  return out;
}

Matrix lfp_lift(const Matrix& projection, const Matrix& features) {
  if (features.cols() != projection.cols()) {
    throw DimensionError("lfp_lift: features " + features.shape_string() +
                         " do not have n = " + std::to_string(projection.cols()) + " columns");
  }
  return relu_split(matmul_nt(features, projection));
}

Matrix lfp_lift(const RedenseLayer& layer, const Matrix& features) {
  return lfp_lift(layer.projection(), features);
}

Matrix lfp_reconstruct(const Matrix& lifted, std::size_t m) {
  if (lifted.cols() % 2 != 0) {
    throw DimensionError("lfp_reconstruct: odd column count " + std::to_string(lifted.cols()));
  }
  if (lifted.cols() != 2 * m) {
    throw DimensionError("lfp_reconstruct: expected 2m = " + std::to_string(2 * m) +
                         " columns, got " + std::to_string(lifted.cols()));
  }
  Matrix out(lifted.rows(), m);
  for (std::size_t j = 0; j < lifted.rows(); ++j) {
    auto src = lifted.row(j);
    auto dst = out.row(j);
    for (std::size_t k = 0; k < m; ++k) dst[k] = src[k] - src[m + k];
  }
  return out;
}

Matrix predict(const RedenseLayer& layer, const Matrix& features) {
  return matmul_nt(lfp_lift(layer, features), layer.weight());
}

Matrix project_to_ball(Matrix z, double radius) {
  const double norm = frobenius_norm(z);
  if (norm > radius) {
    for (double& v : z.data()) v = v / norm * radius;
  }
  return z;
}

Matrix objective_gradient(const Matrix& weight, const Matrix& lifted, const Matrix& targets) {
  const Matrix logits = matmul_nt(lifted, weight);
  const Matrix g = nn::loss_grad(nn::Loss::cross_entropy(), logits, targets);
  return matmul_tn(g, lifted);
}

bool guarantee_check(const GuaranteeReport& report) {
  if (report.final_loss <= report.old_loss) return true;
  const double scale = std::max(report.old_loss, 1e-12);
  return report.final_loss <= report.init_loss &&
         std::abs(report.init_loss - report.old_loss) / scale < kInitLossTolerance;
}

nn::TrainConfig RedenseOptions::default_config() {
  nn::TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.epochs = 100;
  cfg.batch_size = std::numeric_limits<std::size_t>::max();
  cfg.optimizer = nn::OptimizerKind::adam;
  return cfg;
}

RedenseTrainResult train(const RedenseLayer& layer, const Matrix& features,
                         const Matrix& targets, const RedenseOptions& options) {
  const nn::TrainConfig& cfg = options.config;
  cfg.validate();
  if (features.rows() != targets.rows()) {
    throw DimensionError("ReDense train: " + std::to_string(features.rows()) + " features but " +
                         std::to_string(targets.rows()) + " targets");
  }
  if (features.rows() == 0) throw ConstraintError("ReDense train: empty training set");
  if (targets.cols() != layer.classes()) {
    throw DimensionError("ReDense train: targets have " + std::to_string(targets.cols()) +
                         " columns, layer has " + std::to_string(layer.classes()) + " outputs");
  }
  require_finite(features, "ReDense features");
  require_finite(targets, "ReDense targets");

  const Matrix lifted = lfp_lift(layer, features);
  const double epsilon = layer.epsilon();

  GuaranteeReport report;
  report.epsilon = epsilon;
  const Matrix base_logits = matmul_nt(features, layer.base_weight());
  report.old_loss = cross_entropy(base_logits, targets);

  Matrix weight = layer.weight();
  report.init_loss = cross_entropy(matmul_nt(lifted, weight), targets);

  RedenseTrainResult result{layer, report, {}};
  Matrix best = weight;
  double best_loss = report.init_loss;

  auto record = [&](std::size_t epoch, double loss) {
    IterateRecord rec{epoch, loss, frobenius_norm(weight)};
    result.curve.push_back(rec);
    if (options.observer) options.observer(rec, weight);
  };
  record(0, report.init_loss);

  const std::size_t samples = features.rows();
  const std::size_t batch = std::min(cfg.batch_size, samples);
  const bool full_batch = batch == samples;
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  linalg::Rng rng(cfg.seed);
  nn::AdamState adam(weight.size());

  auto step = [&](const Matrix& batch_lifted, const Matrix& batch_targets) {
    const Matrix grad = objective_gradient(weight, batch_lifted, batch_targets);
    if (!grad.all_finite()) return false;
    Matrix z = weight;
    if (cfg.optimizer == nn::OptimizerKind::adam) {
      adam.step(z.data(), grad.data(), cfg.learning_rate, cfg.adam);
    } else {
      for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] -= cfg.learning_rate * grad.data()[i];
    }
    weight = project_to_ball(std::move(z), epsilon);
    return weight.all_finite();
  };

  std::size_t epoch = 1;
  for (; epoch <= cfg.epochs; ++epoch) {
    bool finite = true;
    if (full_batch) {
      finite = step(lifted, targets);
    } else {
      rng.shuffle(order);
      for (std::size_t start = 0; start < samples && finite; start += batch) {
        const std::size_t count = std::min(batch, samples - start);
        std::span<const std::size_t> rows(order.data() + start, count);
        finite = step(lifted.gather_rows(rows), targets.gather_rows(rows));
      }
    }
    Matrix logits;
    if (finite) {
      logits = matmul_nt(lifted, weight);
      finite = logits.all_finite();
    }
    const double loss = finite ? cross_entropy(logits, targets) : 0.0;
    if (!finite || !std::isfinite(loss)) {
      report.aborted = true;
      break;
    }
    record(epoch, loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = weight;
      report.best_epoch = epoch;
    }
  }
  report.last_epoch = epoch - 1;
  report.final_loss = best_loss;

  result.layer.set_weight(std::move(best));
  if (options.base_loss) {
    const Matrix final_logits = matmul_nt(lifted, result.layer.weight());
    report.base = BaseLossComparison{*options.base_loss,
                                     nn::loss_value(*options.base_loss, base_logits, targets),
                                     nn::loss_value(*options.base_loss, final_logits, targets)};
  }
  report.guarantee_holds = guarantee_check(report);
  result.report = report;
  return result;
}

HeadInputs absorb_bias(const Matrix& features, const Matrix& output_weight,
                       std::span<const double> bias) {
  if (output_weight.cols() != features.cols() || output_weight.rows() != bias.size()) {
    throw DimensionError("absorb_bias: features " + features.shape_string() + ", weight " +
                         output_weight.shape_string() + ", bias of " +
                         std::to_string(bias.size()));
  }
  Matrix bias_column(output_weight.rows(), 1,
                     std::vector<double>(bias.begin(), bias.end()));
  return {hconcat(features, Matrix(features.rows(), 1, 1.0)),
          hconcat(output_weight, bias_column)};
}

}  // namespace redense
