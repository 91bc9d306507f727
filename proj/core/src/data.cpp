#include "redense/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "redense/error.hpp"

namespace redense::data {

namespace detail_ns = redense::detail;

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
  Matrix out(labels.size(), classes);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] >= classes) {
      throw ConstraintError("one_hot: label " + std::to_string(labels[j]) + " out of range for " +
                            std::to_string(classes) + " classes");
    }
    out(j, labels[j]) = 1.0;
  }
  return out;
}

std::vector<std::size_t> labels_of(const Matrix& targets) {
  std::vector<std::size_t> labels(targets.rows());
  for (std::size_t j = 0; j < targets.rows(); ++j) labels[j] = nn::argmax(targets.row(j));
  return labels;
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& context) {
  if (bytes.size() < offset + 4) {
    throw FormatError(context + ": truncated header", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> limit) {
  const auto image_bytes = detail_ns::read_file(images);
  const auto label_bytes = detail_ns::read_file(labels);
  const std::string image_ctx = "IDX images " + images.string();
  const std::string label_ctx = "IDX labels " + labels.string();

  if (read_be32(image_bytes, 0, image_ctx) != kIdxImageMagic) {
    throw FormatError(image_ctx + ": bad magic, expected 0x00000803", 0);
  }
  if (read_be32(label_bytes, 0, label_ctx) != kIdxLabelMagic) {
    throw FormatError(label_ctx + ": bad magic, expected 0x00000801", 0);
  }
  const std::size_t count = read_be32(image_bytes, 4, image_ctx);
  const std::size_t height = read_be32(image_bytes, 8, image_ctx);
  const std::size_t width = read_be32(image_bytes, 12, image_ctx);
  const std::size_t label_count = read_be32(label_bytes, 4, label_ctx);
  if (count != label_count) {
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images but " +
                          std::to_string(label_count) + " labels",
                      4);
  }
  const std::size_t pixels = height * width;
  if (image_bytes.size() < 16 + count * pixels) {
    throw FormatError(image_ctx + ": truncated pixel payload, expected " +
                          std::to_string(count * pixels) + " bytes",
                      image_bytes.size());
  }
  if (label_bytes.size() < 8 + count) {
    throw FormatError(label_ctx + ": truncated label payload", label_bytes.size());
  }

  const std::size_t kept = limit ? std::min(*limit, count) : count;
  Dataset out{Matrix(kept, pixels), Matrix(kept, 10)};
  for (std::size_t j = 0; j < kept; ++j) {
    const std::uint8_t* src = image_bytes.data() + 16 + j * pixels;
    auto dst = out.inputs.row(j);
    for (std::size_t p = 0; p < pixels; ++p) dst[p] = static_cast<double>(src[p]) / 255.0;
    const std::uint8_t label = label_bytes[8 + j];
    if (label > 9) {
      throw FormatError(label_ctx + ": label " + std::to_string(label) + " outside 0..9", 8 + j);
    }
    out.targets(j, label) = 1.0;
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, std::optional<std::size_t> classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file " + path.string());
  const std::string ctx = "CSV " + path.string();

  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line)) throw FormatError(ctx + ": missing header row", 0);
  offset += line.size() + 1;

  std::vector<double> features;
  std::vector<std::size_t> labels;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      double v = 0.0;
      const char* begin = cell.data();
      const char* end = cell.data() + cell.size();
      while (begin < end && *begin == ' ') ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr == begin) {
        throw FormatError(ctx + ": cannot parse '" + cell + "' as a number", line_start);
      }
      if (!std::isfinite(v)) throw FormatError(ctx + ": non-finite value", line_start);
      row.push_back(v);
    }
    if (row.size() < 2) throw FormatError(ctx + ": need at least one feature and a label", line_start);
    if (first) {
      width = row.size() - 1;
      first = false;
    } else if (row.size() - 1 != width) {
      throw FormatError(ctx + ": ragged row", line_start);
    }
    const double label = row.back();
    if (label < 0.0 || label != std::floor(label)) {
      throw FormatError(ctx + ": label must be a non-negative integer", line_start);
    }
    labels.push_back(static_cast<std::size_t>(label));
    features.insert(features.end(), row.begin(), row.end() - 1);
  }
  if (labels.empty()) throw FormatError(ctx + ": no data rows", offset);

  const std::size_t q =
      classes ? *classes : *std::max_element(labels.begin(), labels.end()) + 1;
  return {Matrix(labels.size(), width, std::move(features)), one_hot(labels, q)};
}

void FeatureBundle::validate() const {
  if (features.rows() != targets.rows()) {
    throw DimensionError("feature bundle: " + std::to_string(features.rows()) +
                         " feature rows but " + std::to_string(targets.rows()) + " target rows");
  }
  if (output_weight.cols() != features.cols()) {
    throw DimensionError("feature bundle: output weight " + output_weight.shape_string() +
                         " does not match feature width " + std::to_string(features.cols()));
  }
  if (output_weight.rows() != targets.cols()) {
    throw DimensionError("feature bundle: output weight " + output_weight.shape_string() +
                         " does not match " + std::to_string(targets.cols()) + " classes");
  }
  require_finite(features, "feature bundle features");
  require_finite(targets, "feature bundle targets");
  require_finite(output_weight, "feature bundle output weight");
  if (metadata.count(kBaseTrainLossKey) != 0) {
    const auto value = base_train_loss();
    if (!value || !std::isfinite(*value) || *value < 0.0) {
      throw ConstraintError("feature bundle: base_train_loss must be a finite value >= 0");
    }
  }
}

std::optional<double> FeatureBundle::base_train_loss() const {
  const auto it = metadata.find(kBaseTrainLossKey);
  if (it == metadata.end()) return std::nullopt;
  double v = 0.0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::uint8_t> encode_feature_bundle(const FeatureBundle& bundle) {
  bundle.validate();
  detail_ns::ByteWriter out;
  out.raw(kBundleMagic, 4);
  out.u32(kBundleVersion);
  out.matrix(bundle.features);
  out.matrix(bundle.targets);
  out.matrix(bundle.output_weight);
  out.u32(static_cast<std::uint32_t>(bundle.metadata.size()));
  for (const auto& [key, value] : bundle.metadata) {
    out.string(key);
    out.string(value);
  }
  return out.take();
}

FeatureBundle decode_feature_bundle(const std::vector<std::uint8_t>& bytes) {
  detail_ns::ByteReader in(bytes, "feature bundle");
  in.expect_magic(std::string_view(kBundleMagic, 4));
  const std::uint32_t version = in.u32();
  if (version != kBundleVersion) in.fail("unsupported version " + std::to_string(version));
  FeatureBundle bundle;
  bundle.features = in.matrix("features");
  bundle.targets = in.matrix("targets");
  bundle.output_weight = in.matrix("output weight");
  const std::uint32_t entries = in.u32();
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string key = in.string();
    bundle.metadata[std::move(key)] = in.string();
  }
  if (in.remaining() != 0) in.fail("trailing bytes after metadata");
  bundle.validate();
  return bundle;
}

void save_feature_bundle(const std::filesystem::path& path, const FeatureBundle& bundle) {
  detail_ns::write_file(path, encode_feature_bundle(bundle));
}

FeatureBundle load_feature_bundle(const std::filesystem::path& path) {
  return decode_feature_bundle(detail_ns::read_file(path));
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "blobs") return SyntheticKind::blobs;
  if (name == "moons") return SyntheticKind::moons;
  throw ConstraintError("unknown synthetic dataset '" + name + "' (expected blobs or moons)");
}

std::string synthetic_kind_name(SyntheticKind kind) {
  return kind == SyntheticKind::blobs ? "blobs" : "moons";
}

Dataset gen_synthetic(SyntheticKind kind, std::size_t samples, std::size_t classes,
                      double noise, RngSeed seed) {
  if (classes < 2 || samples < classes) {
    throw ConstraintError("gen_synthetic: need samples >= classes >= 2");
  }
  if (!(noise >= 0.0)) throw ConstraintError("gen_synthetic: noise must be >= 0");

  linalg::Rng rng(seed);
  std::vector<std::size_t> labels;
  labels.reserve(samples);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t count = samples / classes + (c < samples % classes ? 1 : 0);
    labels.insert(labels.end(), count, c);
  }
  rng.shuffle(labels);

  Matrix inputs(samples, 2);
  for (std::size_t j = 0; j < samples; ++j) {
    const std::size_t c = labels[j];
    double x = 0.0;
    double y = 0.0;
    if (kind == SyntheticKind::blobs) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                           static_cast<double>(classes);
      x = 4.0 * std::cos(angle);
      y = 4.0 * std::sin(angle);
    } else {
      const double t = std::numbers::pi * rng.uniform();
      const double shift = 3.0 * static_cast<double>(c / 2);
      if (c % 2 == 0) {
        x = shift + std::cos(t);
        y = std::sin(t);
      } else {
        x = shift + 1.0 - std::cos(t);
        y = 0.5 - std::sin(t);
      }
    }
    inputs(j, 0) = x + noise * rng.normal();
    inputs(j, 1) = y + noise * rng.normal();
  }
  return {std::move(inputs), one_hot(labels, classes)};
}

void SplitSpec::validate() const {
  auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_unit(train_fraction) || !in_unit(validation_fraction)) {
    throw ConstraintError("split fractions must lie in (0, 1)");
  }
  if (train_fraction + validation_fraction > 1.0) {
    throw ConstraintError("split fractions must sum to at most 1");
  }
}

Split split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  const std::size_t total = data.size();
  // The small offset keeps e.g. 0.8 * 100 from flooring to 79.
  const auto part = [&](double fraction) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
  };
  const std::size_t train_count = part(spec.train_fraction);
  const std::size_t validation_count = part(spec.validation_fraction);
  if (train_count == 0 || validation_count == 0 || train_count + validation_count >= total) {
    throw ConstraintError("split: a partition would be empty (J = " + std::to_string(total) +
                          ", train " + std::to_string(train_count) + ", validation " +
                          std::to_string(validation_count) + ")");
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  linalg::Rng rng(spec.seed);
  rng.shuffle(order);

  Split out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  out.validation_rows.assign(
      order.begin() + static_cast<std::ptrdiff_t>(train_count),
      order.begin() + static_cast<std::ptrdiff_t>(train_count + validation_count));
  out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count + validation_count),
                       order.end());
  out.train = data.subset(out.train_rows);
  out.validation = data.subset(out.validation_rows);
  out.test = data.subset(out.test_rows);
  return out;
}

Standardizer Standardizer::fit(const Matrix& inputs) {
  if (inputs.rows() == 0) throw ConstraintError("Standardizer::fit: empty input");
  const double count = static_cast<double>(inputs.rows());
  Standardizer s{std::vector<double>(inputs.cols(), 0.0), std::vector<double>(inputs.cols(), 0.0)};
  for (std::size_t j = 0; j < inputs.rows(); ++j)
    for (std::size_t k = 0; k < inputs.cols(); ++k) s.mean[k] += inputs(j, k);
  for (double& m : s.mean) m /= count;
  for (std::size_t j = 0; j < inputs.rows(); ++j)
    for (std::size_t k = 0; k < inputs.cols(); ++k) {
      const double d = inputs(j, k) - s.mean[k];
      s.scale[k] += d * d;
    }
  for (double& v : s.scale) {
    v = std::sqrt(v / count);
    if (v == 0.0) v = 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& inputs) const {
  if (inputs.cols() != mean.size()) throw DimensionError("Standardizer::apply: width mismatch");
  Matrix out = inputs;
  for (std::size_t j = 0; j < out.rows(); ++j) {
    auto r = out.row(j);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = (r[k] - mean[k]) / scale[k];
  }
  return out;
}

}  // namespace redense::data
