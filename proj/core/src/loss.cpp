#include <algorithm>
#include <cmath>

#include "redense/error.hpp"
#include "redense/nn.hpp"

namespace redense::nn {

namespace {

void check_inputs(const Matrix& logits, const Matrix& targets, const char* op) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw DimensionError(std::string(op) + ": logits " + logits.shape_string() +
                         " and targets " + targets.shape_string() + " differ in shape");
  }
  require_finite(logits, std::string(op) + " logits");
}

// Writes softmax(z) into p and returns log-sum-exp(z).
double softmax_row(std::span<const double> z, std::span<double> p) {
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - peak);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return peak + std::log(total);
}

double huber_scalar(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

}  // namespace

Loss Loss::huber(double delta) {
  if (!(delta > 0.0)) throw ConstraintError("huber loss: delta must be positive");
  return {LossKind::huber, delta};
}

std::string Loss::name() const {
  switch (kind) {
    case LossKind::softmax_cross_entropy: return "ce";
    case LossKind::mean_square_error: return "mse";
    case LossKind::poisson: return "poisson";
    case LossKind::huber: return "huber";
  }
  return "unknown";
}

Loss Loss::parse(const std::string& name, double delta) {
  if (name == "ce" || name == "cross_entropy" || name == "softmax_cross_entropy") {
    return cross_entropy();
  }
  if (name == "mse" || name == "mean_square_error") return mse();
  if (name == "poisson") return poisson();
  if (name == "huber") return huber(delta);
  throw ConstraintError("unknown loss '" + name + "' (expected ce, mse, poisson or huber)");
}

Matrix softmax_rows(const Matrix& logits) {
  require_finite(logits, "softmax logits");
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t j = 0; j < logits.rows(); ++j) softmax_row(logits.row(j), p.row(j));
  return p;
}

double huber_elementwise(std::span<const double> residual, double delta) {
  double sum = 0.0;
  for (double r : residual) sum += huber_scalar(r, delta);
  return sum;
}

double loss_value(const Loss& loss, const Matrix& logits, const Matrix& targets) {
  check_inputs(logits, targets, "loss_value");
  const std::size_t q = logits.cols();
  std::vector<double> p(q);
  double total = 0.0;
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    auto z = logits.row(j);
    auto t = targets.row(j);
    const double lse = softmax_row(z, p);
    switch (loss.kind) {
      case LossKind::softmax_cross_entropy:
        for (std::size_t k = 0; k < q; ++k) {
          if (t[k] != 0.0) total += t[k] * (lse - z[k]);
        }
        break;
      case LossKind::mean_square_error:
        for (std::size_t k = 0; k < q; ++k) total += 0.5 * (p[k] - t[k]) * (p[k] - t[k]);
        break;
      case LossKind::poisson:
        for (std::size_t k = 0; k < q; ++k) {
          total += p[k] - t[k] * std::log(p[k] + kPoissonLogFloor);
        }
        break;
      case LossKind::huber:
        for (std::size_t k = 0; k < q; ++k) total += huber_scalar(p[k] - t[k], loss.delta);
        break;
    }
  }
  return total;
}

Matrix loss_grad(const Loss& loss, const Matrix& logits, const Matrix& targets) {
  check_inputs(logits, targets, "loss_grad");
  const std::size_t q = logits.cols();
  Matrix grad(logits.rows(), q);
  std::vector<double> p(q);
  std::vector<double> dp(q);
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    auto t = targets.row(j);
    auto g = grad.row(j);
    softmax_row(logits.row(j), p);
    if (loss.kind == LossKind::softmax_cross_entropy) {
      double mass = 0.0;
      for (double v : t) mass += v;
      for (std::size_t k = 0; k < q; ++k) g[k] = p[k] * mass - t[k];
      continue;
    }
    // dL/dp, then back through the softmax Jacobian diag(p) - p p^T.
    for (std::size_t k = 0; k < q; ++k) {
      const double r = p[k] - t[k];
      switch (loss.kind) {
        case LossKind::mean_square_error: dp[k] = r; break;
        case LossKind::poisson: dp[k] = 1.0 - t[k] / (p[k] + kPoissonLogFloor); break;
        case LossKind::huber: dp[k] = std::clamp(r, -loss.delta, loss.delta); break;
        case LossKind::softmax_cross_entropy: break;
      }
    }
    double inner = 0.0;
    for (std::size_t k = 0; k < q; ++k) inner += p[k] * dp[k];
    for (std::size_t k = 0; k < q; ++k) g[k] = p[k] * (dp[k] - inner);
  }
  return grad;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

double accuracy(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw DimensionError("accuracy: logits " + logits.shape_string() + " vs targets " +
                         targets.shape_string());
  }
  if (logits.rows() == 0) throw ConstraintError("accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    if (argmax(logits.row(j)) == argmax(targets.row(j))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

Evaluation evaluate_logits(const Matrix& logits, const Matrix& targets, const Loss& loss) {
  if (logits.rows() == 0) throw ConstraintError("evaluate: empty dataset");
  Evaluation out;
  out.loss = loss_value(loss, logits, targets);
  out.mean_loss = out.loss / static_cast<double>(logits.rows());
  out.accuracy = accuracy(logits, targets);
  return out;
}

}  // namespace redense::nn
