#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "redense/matrix.hpp"

namespace redense::linalg {

// Seed for every random stream in the library. Streams are produced by
// std::mt19937_64 (whose output sequence is fixed by the standard) and
// transformed with our own code, so a seed gives the same values on every
// conforming toolchain.
struct RngSeed {
  std::uint64_t value = 0;

  RngSeed next() const { return RngSeed{value + 1}; }
  friend bool operator==(RngSeed, RngSeed) = default;
};

class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via the Marsaglia polar method.
  double normal();
  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  // Fisher-Yates shuffle of `values` driven by below().
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// c = a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);

// Thin singular value decomposition a = U diag(S) V^T with
// k = min(rows, cols) singular values sorted in descending order.
struct Svd {
  Matrix u;                     // rows x k
  std::vector<double> singular; // k
  Matrix v;                     // cols x k
};

// One-sided (Hestenes) Jacobi SVD. Throws SvdError if the off-diagonal mass
// has not vanished after `max_sweeps` sweeps.
Svd svd(const Matrix& a, int max_sweeps = 80);

// Moore-Penrose pseudo-inverse. Singular values below
// max(rows, cols) * eps * sigma_max are treated as zero.
Matrix pinv(const Matrix& a);
Matrix pinv(const Svd& decomposition, std::size_t rows, std::size_t cols);

// sigma_max / sigma_min over the thin SVD; +inf for rank-deficient input.
double condition_number(const Svd& decomposition);

// rows x cols matrix of i.i.d. N(0, 1) entries, filled row by row.
Matrix sample_gaussian(std::size_t rows, std::size_t cols, RngSeed seed);

}  // namespace redense::linalg
