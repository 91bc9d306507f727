#pragma once

// Little-endian byte encoding shared by the bundle and model formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "redense/error.hpp"
#include "redense/matrix.hpp"

namespace redense::detail {

class ByteWriter {
 public:
  void raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }

  void u32(std::uint32_t v) { little(v); }
  void u64(std::uint64_t v) { little(v); }
  void f64(double v) { little(std::bit_cast<std::uint64_t>(v)); }

  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.data()) f64(v);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  template <typename T>
  void little(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  std::uint64_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

  void expect_magic(std::string_view magic) {
    need(magic.size(), "magic");
    if (std::memcmp(bytes_.data() + offset_, magic.data(), magic.size()) != 0) {
      fail("bad magic, expected \"" + std::string(magic) + "\"");
    }
    offset_ += magic.size();
  }

  std::uint32_t u32() { return little<std::uint32_t>("u32"); }
  std::uint64_t u64() { return little<std::uint64_t>("u64"); }
  double f64() { return std::bit_cast<double>(little<std::uint64_t>("f64")); }

  std::string string() {
    const std::uint32_t size = u32();
    need(size, "string payload");
    std::string out(reinterpret_cast<const char*>(bytes_.data() + offset_), size);
    offset_ += size;
    return out;
  }

  Matrix matrix(const std::string& what) {
    const std::uint64_t start = offset_;
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (cols != 0 && rows > remaining() / 8 / cols) {
      throw FormatError(context_ + ": " + what + " declares " + std::to_string(rows) + " x " +
                            std::to_string(cols) + " but only " + std::to_string(remaining()) +
                            " payload bytes remain (truncated)",
                        offset_);
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = f64();
    Matrix out(rows, cols, std::move(values));
    if (!out.all_finite()) {
      throw FormatError(context_ + ": " + what + " contains NaN or infinite values", start);
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw FormatError(context_ + ": " + message, offset_);
  }

 private:
  void need(std::size_t size, const char* what) const {
    if (remaining() < size) {
      fail(std::string("truncated while reading ") + what + " (need " + std::to_string(size) +
           " bytes, have " + std::to_string(remaining()) + ")");
    }
  }

  template <typename T>
  T little(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(bytes_[offset_ + i]) << (8 * i);
    }
    offset_ += sizeof(T);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string context_;
  std::uint64_t offset_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace redense::detail
