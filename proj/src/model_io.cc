#include "mprt/model_io.h"

#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mprt/error.h"

namespace mprt {
namespace {

constexpr const char* kMagic = "mprt-model-manifest";

void WriteFloatsLE(std::ostream& out, const Tensor& t) {
  for (float v : t.values()) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    const char b[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8), static_cast<char>(bits >> 16),
                       static_cast<char>(bits >> 24)};
    out.write(b, 4);
  }
}

void ReadFloatsLE(std::istream& in, Tensor& t, const std::string& path) {
  std::vector<unsigned char> raw(t.size() * 4);
  Require(static_cast<bool>(in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))),
          ErrorCode::kFormat, path + ": truncated weight blob");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint32_t bits = std::uint32_t{raw[4 * i]} | (std::uint32_t{raw[4 * i + 1]} << 8) |
                               (std::uint32_t{raw[4 * i + 2]} << 16) | (std::uint32_t{raw[4 * i + 3]} << 24);
    t[i] = std::bit_cast<float>(bits);
  }
}

// Parses "key=value" integer attributes of a layer line.
int Attr(std::istringstream& line, const std::string& key, const std::string& where) {
  std::string token;
  Require(static_cast<bool>(line >> token), ErrorCode::kFormat, where + ": missing " + key);
  const auto eq = token.find('=');
  Require(eq != std::string::npos && token.substr(0, eq) == key, ErrorCode::kFormat,
          where + ": expected " + key + "=..., got '" + token + "'");
  try {
    return std::stoi(token.substr(eq + 1));
  } catch (const std::exception&) {
    Fail(ErrorCode::kFormat, where + ": bad integer for " + key);
  }
}

}  // namespace

void SaveModel(const Model& model, const std::string& prefix) {
  const std::filesystem::path weights_path = prefix + ".weights";
  std::ofstream manifest(prefix + ".manifest");
  std::ofstream weights(weights_path, std::ios::binary);
  Require(manifest.good() && weights.good(), ErrorCode::kIo, "cannot write model files at " + prefix);
  manifest << kMagic << ' ' << kModelFormatVersion << '\n';
  manifest << "input_shape";
  for (int d : model.input_shape()) manifest << ' ' << d;
  manifest << '\n' << "num_classes " << model.num_classes() << '\n';
  manifest << "weight_floats " << model.ParameterCount() << '\n';
  manifest << "weights_file " << weights_path.filename().string() << '\n';
  for (const auto& [key, value] : model.metadata()) {
    Require(key.find_first_of(" \t\n") == std::string::npos && value.find('\n') == std::string::npos,
            ErrorCode::kInvalidArgument, "metadata entry not serialisable: " + key);
    manifest << "meta " << key << ' ' << value << '\n';
  }
  for (const Layer& l : model.layers()) {
    manifest << "layer " << LayerKindName(l.kind);
    switch (l.kind) {
      case LayerKind::kDense:
        manifest << " out=" << l.weights.dim(0) << " in=" << l.weights.dim(1);
        break;
      case LayerKind::kConv2D:
        manifest << " out=" << l.weights.dim(0) << " in=" << l.weights.dim(1) << " kernel=" << l.weights.dim(2)
                 << " padding=" << l.padding;
        break;
      case LayerKind::kMaxPool2D:
        manifest << " size=" << l.pool_size;
        break;
      default:
        break;
    }
    manifest << '\n';
    if (l.has_params()) {
      WriteFloatsLE(weights, l.weights);
      WriteFloatsLE(weights, l.bias);
    }
  }
  Require(manifest.good() && weights.good(), ErrorCode::kIo, "model write failed at " + prefix);
}

Model LoadModel(const std::string& prefix) {
  const std::string manifest_path = prefix + ".manifest";
  std::ifstream manifest(manifest_path);
  Require(manifest.good(), ErrorCode::kIo, "cannot open " + manifest_path);
  std::string line;
  Require(static_cast<bool>(std::getline(manifest, line)), ErrorCode::kFormat, manifest_path + ": empty manifest");
  {
    std::istringstream head(line);
    std::string magic;
    int version = -1;
    head >> magic >> version;
    Require(magic == kMagic, ErrorCode::kFormat, manifest_path + ": not a model manifest");
    Require(version == kModelFormatVersion, ErrorCode::kVersionMismatch,
            manifest_path + ": format version " + std::to_string(version) + ", expected " +
                std::to_string(kModelFormatVersion));
  }
  Shape input_shape;
  int num_classes = -1;
  long long weight_floats = -1;
  std::string weights_file;
  Metadata meta;
  std::vector<Layer> layers;
  int line_no = 1;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = manifest_path + ":" + std::to_string(line_no);
    std::istringstream in(line);
    std::string key;
    in >> key;
    if (key == "input_shape") {
      int d;
      while (in >> d) input_shape.push_back(d);
    } else if (key == "num_classes") {
      in >> num_classes;
    } else if (key == "weight_floats") {
      in >> weight_floats;
    } else if (key == "weights_file") {
      in >> weights_file;
    } else if (key == "meta") {
      std::string mkey;
      in >> mkey;
      std::string value;
      std::getline(in, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      meta[mkey] = value;
    } else if (key == "layer") {
      std::string kind_name;
      in >> kind_name;
      const auto kind = ParseLayerKind(kind_name);
      Require(kind.has_value(), ErrorCode::kFormat, where + ": unknown layer kind '" + kind_name + "'");
      Layer l;
      if (*kind == LayerKind::kDense) {
        const int out = Attr(in, "out", where);
        l = Layer::Dense(Attr(in, "in", where), out);
      } else if (*kind == LayerKind::kConv2D) {
        const int out = Attr(in, "out", where);
        const int cin = Attr(in, "in", where);
        const int k = Attr(in, "kernel", where);
        l = Layer::Conv2D(cin, out, k, Attr(in, "padding", where));
      } else if (*kind == LayerKind::kMaxPool2D) {
        l = Layer::MaxPool(Attr(in, "size", where));
      } else {
        l = Layer::Of(*kind);
      }
      layers.push_back(std::move(l));
    } else {
      Fail(ErrorCode::kFormat, where + ": unknown manifest entry '" + key + "'");
    }
    Require(!in.bad(), ErrorCode::kFormat, where + ": malformed line");
  }
  Require(!input_shape.empty() && num_classes > 0 && weight_floats >= 0 && !weights_file.empty(),
          ErrorCode::kFormat, manifest_path + ": incomplete manifest");

  const std::filesystem::path blob_path = std::filesystem::path(manifest_path).parent_path() / weights_file;
  std::ifstream blob(blob_path, std::ios::binary);
  Require(blob.good(), ErrorCode::kIo, "cannot open " + blob_path.string());
  long long expected = 0;
  for (Layer& l : layers) {
    if (!l.has_params()) continue;
    ReadFloatsLE(blob, l.weights, blob_path.string());
    ReadFloatsLE(blob, l.bias, blob_path.string());
    expected += static_cast<long long>(l.weights.size() + l.bias.size());
  }
  Require(expected == weight_floats, ErrorCode::kFormat, manifest_path + ": weight count mismatch");
  Require(blob.peek() == std::char_traits<char>::eof(), ErrorCode::kFormat,
          blob_path.string() + ": trailing bytes in weight blob");
  return Model(std::move(input_shape), num_classes, std::move(layers), std::move(meta));
}

}  // namespace mprt
