#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "redense/nn.hpp"
#include "redense/redense.hpp"

namespace redense::persist {

inline constexpr char kModelMagic[4] = {'R', 'D', 'N', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

// A trained MLP, a ReDense head, or both.
//
// Layout: "RDNM" | u32 version | u32 header length | JSON header |
// raw little-endian f64 parameter blocks. The header records every shape;
// the blocks follow in this order:
//   per hidden layer: weight (out x in), bias (out)
//   output weight (Q x n), output bias (Q)                 [if mlp present]
//   epsilon, R (m x n), base weight (Q x n), O (Q x 2m)      [if redense present]
struct ModelFile {
  std::optional<nn::MlpModel> mlp;
  nn::Loss loss;
  std::optional<RedenseLayer> redense;
  // The ReDense head consumes [features, 1] with the MLP's output bias folded
  // into its base weight (see absorb_bias).
  bool bias_absorbed = true;
};

std::vector<std::uint8_t> encode_model(const ModelFile& file);
ModelFile decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);

// FNV-1a over the encoded parameter blocks; equal for bit-identical models.
std::uint64_t parameter_checksum(const ModelFile& file);

struct CurveRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;

  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

// CSV with header epoch,train_loss,test_loss,test_accuracy and floats printed
// with 17 significant digits. Rejects empty curves and non-finite values.
void write_curve(const std::filesystem::path& path, const std::vector<CurveRow>& curve);
std::vector<CurveRow> read_curve(const std::filesystem::path& path);

}  // namespace redense::persist
