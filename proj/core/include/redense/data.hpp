#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "redense/linalg.hpp"
#include "redense/matrix.hpp"
#include "redense/nn.hpp"

namespace redense::data {

using linalg::RngSeed;
using nn::Dataset;

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// J labels in [0, classes) to a J x classes one-hot matrix.
Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes);
std::vector<std::size_t> labels_of(const Matrix& one_hot_targets);

// Big-endian IDX image/label pair (MNIST layout). Pixels are scaled to
// [0, 1] and labels become 10-wide one-hot rows. `limit` keeps only the
// first `limit` samples.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> limit = std::nullopt);

// Header row, then one sample per line: features..., integer label.
// Classes = max label + 1 unless given.
Dataset load_csv(const std::filesystem::path& path,
                 std::optional<std::size_t> classes = std::nullopt);

// Features extracted from some trained model, its output head, and free-form
// metadata. The binary layout is:
//   "RDFB" | u32 version | matrix features | matrix targets | matrix weight |
//   u32 count | count x (string key, string value)
// where matrix = u64 rows, u64 cols, rows*cols f64 and string = u32 length +
// UTF-8 bytes, all little-endian.
struct FeatureBundle {
  Matrix features;       // J x n
  Matrix targets;        // J x Q
  Matrix output_weight;  // Q x n
  std::map<std::string, std::string> metadata;

  std::size_t samples() const { return features.rows(); }
  std::size_t width() const { return features.cols(); }
  std::size_t classes() const { return targets.cols(); }

  void validate() const;
  // Parsed "base_train_loss" entry if present.
  std::optional<double> base_train_loss() const;
};

inline constexpr char kBundleMagic[4] = {'R', 'D', 'F', 'B'};
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr const char* kBaseTrainLossKey = "base_train_loss";

void save_feature_bundle(const std::filesystem::path& path, const FeatureBundle& bundle);
FeatureBundle load_feature_bundle(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_feature_bundle(const FeatureBundle& bundle);
FeatureBundle decode_feature_bundle(const std::vector<std::uint8_t>& bytes);

enum class SyntheticKind { blobs, moons };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string synthetic_kind_name(SyntheticKind kind);

// Two-dimensional labelled data. Blobs puts class c around a point on a
// circle of radius 4 with isotropic Gaussian noise. Moons draws interleaved
// half circles: an upper arc for even c, a lower arc shifted by (1, 0.5)
// for odd c, and each pair of classes 3 units further along x. Class
// counts differ by at most one. Rows are shuffled.
Dataset gen_synthetic(SyntheticKind kind, std::size_t samples, std::size_t classes,
                      double noise, RngSeed seed);

struct SplitSpec {
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
  RngSeed seed;

  void validate() const;
};

struct Split {
  Dataset train;
  Dataset validation;
  Dataset test;
  // Row indices into the source dataset for each partition.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;
};

// Seeded shuffle, then floor(J * train_fraction) / floor(J * validation_fraction)
// / remainder. Throws ConstraintError if any partition is empty.
Split split(const Dataset& data, const SplitSpec& spec);

// Per-column mean/std fitted on one matrix and applied to others.
// Columns with zero spread are only centred.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& inputs);
  Matrix apply(const Matrix& inputs) const;
};

}  // namespace redense::data
