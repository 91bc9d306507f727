#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace redense {

// Base of every error thrown by the library. The CLI maps subclasses onto
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A precondition on a value (not a shape) was violated, e.g. m < n.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

// Non-finite values crossed an API boundary.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class SvdError : public Error {
 public:
  SvdError(const std::string& what, int sweeps, double off_diagonal)
      : Error(what), sweeps_(sweeps), off_diagonal_(off_diagonal) {}

  int sweeps() const noexcept { return sweeps_; }
  double off_diagonal() const noexcept { return off_diagonal_; }

 private:
  int sweeps_;
  double off_diagonal_;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch)
      : Error(what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

// Malformed file content. `offset` is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace redense
