#include "redense/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "redense/error.hpp"

namespace redense::linalg {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw ConstraintError("Rng::below: bound must be positive");
  // Largest multiple of bound that fits; values at or above it are rejected.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, a " + a.shape_string() + " b " +
                         b.shape_string());
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    const double* ai = a.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: a " + a.shape_string() + " cannot multiply transpose of b " +
                         b.shape_string());
  }
  return matmul(a, b.transposed());
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: transpose of a " + a.shape_string() + " cannot multiply b " +
                         b.shape_string());
  }
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.row(k).data();
    const double* bk = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

double frobenius_norm(const Matrix& a) {
  double sum = 0.0;
  for (double v : a.data()) sum += v * v;
  if (std::isfinite(sum) && sum > std::numeric_limits<double>::min()) return std::sqrt(sum);
  // Overflow or underflow in the squares: rescale by the largest entry.
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  sum = 0.0;
  for (double v : a.data()) sum += (v / scale) * (v / scale);
  return scale * std::sqrt(sum);
}

namespace {

// Fixed-order four-lane dot product; the lane split keeps results identical
// across runs while letting the compiler pipeline the multiplies.
double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// SVD of a tall (rows >= cols) matrix. Columns are stored contiguously in
// `w` so the pairwise rotations stream through memory.
Svd jacobi_tall(const Matrix& a, int max_sweeps) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<double> w(m * n);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) w[j * m + i] = a(i, j);
    v[j * n + j] = 1.0;
  }

  const double tol =
      std::max(1.0, std::sqrt(static_cast<double>(m))) * std::numeric_limits<double>::epsilon();
  double off = 0.0;
  int sweep = 0;
  bool converged = n < 2;
  for (; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      double* wp = &w[p * m];
      for (std::size_t q = p + 1; q < n; ++q) {
        double* wq = &w[q * m];
        const double alpha = dot(wp, wp, m);
        const double beta = dot(wq, wq, m);
        const double gamma = dot(wp, wq, m);
        if (alpha == 0.0 || beta == 0.0) continue;
        const double cosine = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, cosine);
        if (cosine <= tol) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(wp, wq, m, c, s);
        rotate(&v[p * n], &v[q * n], n, c, s);
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw SvdError("svd: Jacobi iteration did not converge after " + std::to_string(sweep) +
                       " sweeps (max column cosine " + std::to_string(off) + ")",
                   sweep, off);
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(&w[j * m], &w[j * m], m));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  Svd out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    const double sigma = norms[j];
    out.singular[k] = sigma;
    if (sigma > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = w[j * m + i] / sigma;
    }
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v[j * n + i];
  }
  return out;
}

}  // namespace

Svd svd(const Matrix& a, int max_sweeps) {
  require_finite(a, "svd input");
  if (a.rows() >= a.cols()) return jacobi_tall(a, max_sweeps);
  Svd t = jacobi_tall(a.transposed(), max_sweeps);
  return Svd{std::move(t.v), std::move(t.singular), std::move(t.u)};
}

Matrix pinv(const Svd& d, std::size_t rows, std::size_t cols) {
  const std::size_t k = d.singular.size();
  Matrix out(cols, rows);
  if (k == 0 || d.singular.front() == 0.0) return out;
  const double cutoff = static_cast<double>(std::max(rows, cols)) *
                        std::numeric_limits<double>::epsilon() * d.singular.front();
  // out = V diag(1/s) U^T, accumulated one singular triplet at a time.
  for (std::size_t s = 0; s < k; ++s) {
    const double sigma = d.singular[s];
    if (sigma < cutoff) break;
    const double inv = 1.0 / sigma;
    for (std::size_t i = 0; i < cols; ++i) {
      const double vi = d.v(i, s) * inv;
      if (vi == 0.0) continue;
      double* oi = out.row(i).data();
      for (std::size_t j = 0; j < rows; ++j) oi[j] += vi * d.u(j, s);
    }
  }
  return out;
}

Matrix pinv(const Matrix& a) { return pinv(svd(a), a.rows(), a.cols()); }

double condition_number(const Svd& d) {
  if (d.singular.empty()) return std::numeric_limits<double>::infinity();
  const double smallest = d.singular.back();
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return d.singular.front() / smallest;
}

Matrix sample_gaussian(std::size_t rows, std::size_t cols, RngSeed seed) {
  if (rows == 0 || cols == 0) {
    throw ConstraintError("sample_gaussian: rows and cols must be >= 1");
  }
  Rng rng(seed);
  Matrix out(rows, cols);
  for (double& x : out.data()) x = rng.normal();
  return out;
}

}  // namespace redense::linalg
