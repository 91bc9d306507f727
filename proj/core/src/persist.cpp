#include "redense/persist.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "redense/error.hpp"

namespace redense::persist {

using nlohmann::json;

namespace {

void write_vector(detail::ByteWriter& out, std::span<const double> values) {
  for (double v : values) out.f64(v);
}

Matrix read_block(detail::ByteReader& in, std::size_t rows, std::size_t cols,
                  const std::string& what) {
  if (cols != 0 && rows > in.remaining() / 8 / cols) {
    in.fail("parameter block '" + what + "' of " + std::to_string(rows) + " x " +
            std::to_string(cols) + " exceeds remaining payload (shape header corrupt?)");
  }
  std::vector<double> values(rows * cols);
  for (double& v : values) v = in.f64();
  Matrix out(rows, cols, std::move(values));
  if (!out.all_finite()) in.fail("parameter block '" + what + "' contains non-finite values");
  return out;
}

std::vector<double> read_values(detail::ByteReader& in, std::size_t count,
                                const std::string& what) {
  return read_block(in, 1, count, what).values();
}

json make_header(const ModelFile& file) {
  json header;
  header["format"] = "redense-model";
  header["loss"] = {{"kind", file.loss.name()}, {"delta", file.loss.delta}};
  header["bias_absorbed"] = file.bias_absorbed;
  if (file.mlp) {
    const auto& mlp = *file.mlp;
    json layers = json::array();
    for (const auto& layer : mlp.layers) {
      layers.push_back({{"inputs", layer.inputs()},
                        {"outputs", layer.outputs()},
                        {"activation", layer.activation.name()},
                        {"slope", layer.activation.slope}});
    }
    header["mlp"] = {{"input_width", mlp.input_width()},
                     {"feature_width", mlp.feature_width()},
                     {"classes", mlp.classes()},
                     {"layers", layers}};
  }
  if (file.redense) {
    const auto& layer = *file.redense;
    header["redense"] = {{"n", layer.n()},
                         {"m", layer.m()},
                         {"classes", layer.classes()},
                         {"seed", layer.seed().value},
                         {"resamples", layer.resamples()}};
  }
  return header;
}

void write_parameters(detail::ByteWriter& out, const ModelFile& file) {
  if (file.mlp) {
    for (const auto& layer : file.mlp->layers) {
      write_vector(out, layer.weight.data());
      write_vector(out, layer.bias);
    }
    write_vector(out, file.mlp->output_weight.data());
    write_vector(out, file.mlp->output_bias);
  }
  if (file.redense) {
    out.f64(file.redense->epsilon());
    write_vector(out, file.redense->projection().data());
    write_vector(out, file.redense->base_weight().data());
    write_vector(out, file.redense->weight().data());
  }
}

template <typename T>
T field(const json& object, const char* key, detail::ByteReader& in) {
  if (!object.contains(key)) in.fail(std::string("model header lacks '") + key + "'");
  try {
    return object.at(key).get<T>();
  } catch (const json::exception& e) {
    in.fail(std::string("model header field '") + key + "': " + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelFile& file) {
  if (!file.mlp && !file.redense) throw ConstraintError("model file holds neither MLP nor ReDense");
  if (file.mlp) file.mlp->validate();
  detail::ByteWriter out;
  out.raw(kModelMagic, 4);
  out.u32(kModelVersion);
  out.string(make_header(file).dump());
  write_parameters(out, file);
  return out.take();
}

ModelFile decode_model(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "model file");
  in.expect_magic(std::string_view(kModelMagic, 4));
  const std::uint32_t version = in.u32();
  if (version != kModelVersion) in.fail("unsupported model version " + std::to_string(version));

  const std::uint64_t header_at = in.offset();
  json header;
  try {
    header = json::parse(in.string());
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file: header is not valid JSON: ") + e.what(), header_at);
  }
  if (!header.is_object() || header.value("format", "") != "redense-model") {
    throw FormatError("model file: header is not a redense-model descriptor", header_at);
  }

  ModelFile file;
  const json loss = header.value("loss", json::object());
  try {
    file.loss = nn::Loss::parse(field<std::string>(loss, "kind", in), field<double>(loss, "delta", in));
  } catch (const ConstraintError& e) {
    in.fail(e.what());
  }
  file.bias_absorbed = field<bool>(header, "bias_absorbed", in);

  if (header.contains("mlp")) {
    const json& spec = header["mlp"];
    nn::MlpModel mlp;
    std::size_t width = field<std::size_t>(spec, "input_width", in);
    for (const json& layer_spec : field<json>(spec, "layers", in)) {
      const auto inputs = field<std::size_t>(layer_spec, "inputs", in);
      const auto outputs = field<std::size_t>(layer_spec, "outputs", in);
      if (inputs != width) in.fail("layer widths in header do not chain");
      nn::Activation act;
      try {
        act = nn::Activation::parse(field<std::string>(layer_spec, "activation", in),
                                    field<double>(layer_spec, "slope", in));
      } catch (const ConstraintError& e) {
        in.fail(e.what());
      }
      nn::DenseLayer layer{read_block(in, outputs, inputs, "layer weight"),
                           read_values(in, outputs, "layer bias"), act};
      mlp.layers.push_back(std::move(layer));
      width = outputs;
    }
    if (field<std::size_t>(spec, "feature_width", in) != width) {
      in.fail("feature width in header does not match last layer");
    }
    const auto classes = field<std::size_t>(spec, "classes", in);
    mlp.output_weight = read_block(in, classes, width, "output weight");
    mlp.output_bias = read_values(in, classes, "output bias");
    file.mlp = std::move(mlp);
  }

  if (header.contains("redense")) {
    const json& spec = header["redense"];
    const auto n = field<std::size_t>(spec, "n", in);
    const auto m = field<std::size_t>(spec, "m", in);
    const auto classes = field<std::size_t>(spec, "classes", in);
    const RngSeed seed{field<std::uint64_t>(spec, "seed", in)};
    const auto resamples = field<std::size_t>(spec, "resamples", in);
    const double epsilon = in.f64();
    Matrix projection = read_block(in, m, n, "ReDense projection");
    Matrix base = read_block(in, classes, n, "ReDense base weight");
    Matrix weight = read_block(in, classes, 2 * m, "ReDense weight");
    try {
      file.redense = RedenseLayer::restore(std::move(projection), std::move(base),
                                           std::move(weight), epsilon, seed, resamples);
    } catch (const Error& e) {
      in.fail(std::string("invalid ReDense block: ") + e.what());
    }
  }
  if (!file.mlp && !file.redense) in.fail("model holds neither MLP nor ReDense block");
  if (in.remaining() != 0) in.fail("trailing bytes after parameter blocks");
  if (file.mlp) {
    try {
      file.mlp->validate();
    } catch (const Error& e) {
      in.fail(e.what());
    }
  }
  return file;
}

void save_model(const std::filesystem::path& path, const ModelFile& file) {
  detail::write_file(path, encode_model(file));
}

ModelFile load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path));
}

std::uint64_t parameter_checksum(const ModelFile& file) {
  detail::ByteWriter out;
  write_parameters(out, file);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : out.bytes()) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_curve(const std::filesystem::path& path, const std::vector<CurveRow>& curve) {
  if (curve.empty()) throw ConstraintError("write_curve: curve is empty");
  for (const auto& row : curve) {
    if (!std::isfinite(row.train_loss) || !std::isfinite(row.test_loss) ||
        !std::isfinite(row.test_accuracy)) {
      throw NonFiniteError("write_curve: non-finite entry at epoch " + std::to_string(row.epoch));
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,test_loss,test_accuracy\n";
  for (const auto& row : curve) {
    out << row.epoch << ',' << format_double(row.train_loss) << ','
        << format_double(row.test_loss) << ',' << format_double(row.test_accuracy) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<CurveRow> read_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line) || line != "epoch,train_loss,test_loss,test_accuracy") {
    throw FormatError("curve " + path.string() + ": unexpected header", 0);
  }
  offset += line.size() + 1;
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    const std::uint64_t start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    std::stringstream cells(line);
    std::string cell;
    std::vector<std::string> parts;
    while (std::getline(cells, cell, ',')) parts.push_back(cell);
    if (parts.size() != 4) throw FormatError("curve " + path.string() + ": expected 4 columns", start);
    CurveRow row;
    auto parse = [&](const std::string& s, auto& value) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError("curve " + path.string() + ": bad number '" + s + "'", start);
      }
    };
    parse(parts[0], row.epoch);
    parse(parts[1], row.train_loss);
    parse(parts[2], row.test_loss);
    parse(parts[3], row.test_accuracy);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace redense::persist
