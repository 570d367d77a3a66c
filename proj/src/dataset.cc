#include "mprt/dataset.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mprt/error.h"
#include "mprt/rng.h"

namespace mprt {
namespace {

struct Point {
  double x, y;
};

struct ClassTemplate {
  std::vector<std::pair<Point, Point>> strokes;
};

double SegmentDistanceSq(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len_sq = dx * dx + dy * dy;
  double t = len_sq > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = a.x + t * dx - p.x, qy = a.y + t * dy - p.y;
  return qx * qx + qy * qy;
}

constexpr int kAnchors = 4;
constexpr int kOrientations = 4;

// Every class draws short strokes at the same four anchors; classes differ
// only in stroke orientation, so location alone does not identify a class.
std::vector<ClassTemplate> MakeTemplates(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng(DeriveSeed(seed, {0x7e3a}));
  const double n = spec.image_size;
  const Point anchors[kAnchors] = {{n * 0.27, n * 0.27}, {n * 0.73 - 1, n * 0.27}, {n * 0.27, n * 0.73 - 1},
                                   {n * 0.73 - 1, n * 0.73 - 1}};
  const double half = n / 7.0;
  std::vector<std::array<int, kAnchors>> codes;
  auto distance = [](const std::array<int, kAnchors>& a, const std::array<int, kAnchors>& b) {
    int d = 0;
    for (int i = 0; i < kAnchors; ++i) d += a[i] != b[i];
    return d;
  };
  int attempts = 0;
  while (static_cast<int>(codes.size()) < spec.classes) {
    std::array<int, kAnchors> code;
    for (int& c : code) c = static_cast<int>(rng.Below(kOrientations));
    const int min_distance = ++attempts < 10000 ? 2 : 1;
    bool ok = true;
    for (const auto& other : codes) ok = ok && distance(code, other) >= min_distance;
    if (ok) codes.push_back(code);
  }
  std::vector<ClassTemplate> out(spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    for (int a = 0; a < kAnchors; ++a) {
      const double angle = codes[c][a] * 3.14159265358979323846 / kOrientations;
      const double dx = half * std::cos(angle), dy = half * std::sin(angle);
      out[c].strokes.push_back({{anchors[a].x - dx, anchors[a].y - dy}, {anchors[a].x + dx, anchors[a].y + dy}});
    }
  }
  return out;
}

Tensor RenderSample(const SyntheticSpec& spec, const ClassTemplate& t, Rng& rng) {
  constexpr double kStrokeWidth = 0.6;
  const int n = spec.image_size;
  const double sx = rng.Uniform(-spec.max_shift, spec.max_shift);
  const double sy = rng.Uniform(-spec.max_shift, spec.max_shift);
  const double amp = rng.Uniform(0.8, 1.2);
  const Point distractor = {rng.Uniform(0, n - 1), rng.Uniform(0, n - 1)};
  const double distractor_amp = rng.Uniform(0.0, 0.5);
  Tensor img({1, n, n});
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Point p{x - sx, y - sy};
      double v = 0.0;
      for (const auto& [a, b] : t.strokes)
        v = std::max(v, std::exp(-SegmentDistanceSq(p, a, b) / (2 * kStrokeWidth * kStrokeWidth)));
      v *= amp;
      const double dx = x - distractor.x, dy = y - distractor.y;
      v = std::max(v, distractor_amp * std::exp(-(dx * dx + dy * dy) / 2.0));
      v += spec.noise * rng.Normal();
      img[static_cast<std::size_t>(y) * n + x] = static_cast<float>(v);
    }
  }
  return img;
}

Dataset MakeSplit(const SyntheticSpec& spec, const std::vector<ClassTemplate>& templates, int n,
                  std::uint64_t seed, const std::string& split) {
  Rng rng(seed);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % spec.classes;
  for (int i = n - 1; i > 0; --i) std::swap(labels[i], labels[rng.Below(i + 1)]);
  Dataset d;
  d.num_classes = spec.classes;
  d.split = split;
  d.labels = labels;
  d.inputs.reserve(n);
  for (int label : labels) d.inputs.push_back(RenderSample(spec, templates[label], rng));
  return d;
}

std::uint32_t ReadBigEndian32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  Require(static_cast<bool>(in.read(reinterpret_cast<char*>(b), 4)), ErrorCode::kFormat,
          path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void WriteBigEndian32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset Dataset::Head(std::size_t n) const {
  Dataset d;
  d.num_classes = num_classes;
  d.split = split;
  n = std::min(n, size());
  d.inputs.assign(inputs.begin(), inputs.begin() + static_cast<std::ptrdiff_t>(n));
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return d;
}

void Dataset::Validate() const {
  Require(inputs.size() == labels.size(), ErrorCode::kInvalidArgument, "inputs and labels differ in length");
  Require(num_classes >= 2, ErrorCode::kInvalidArgument, "dataset needs at least two classes");
  for (std::size_t i = 0; i < size(); ++i) {
    Require(inputs[i].shape() == inputs[0].shape(), ErrorCode::kShapeMismatch, "ragged dataset shapes");
    Require(labels[i] >= 0 && labels[i] < num_classes, ErrorCode::kInvalidArgument,
            "label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(num_classes) + ")");
  }
}

DatasetSplits GenerateSynthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  Require(spec.classes >= 2, ErrorCode::kInvalidArgument, "synthetic data needs >= 2 classes");
  Require(spec.image_size >= 8, ErrorCode::kInvalidArgument, "synthetic images must be at least 8x8");
  Require(spec.train_samples >= 1 && spec.test_samples >= 1, ErrorCode::kInvalidArgument,
          "synthetic splits must be non-empty");
  Require(spec.noise >= 0 && spec.max_shift >= 0, ErrorCode::kInvalidArgument,
          "noise and shift must be non-negative");
  const auto templates = MakeTemplates(spec, seed);
  DatasetSplits out;
  out.train = MakeSplit(spec, templates, spec.train_samples, DeriveSeed(seed, {1}), "train");
  out.test = MakeSplit(spec, templates, spec.test_samples, DeriveSeed(seed, {2}), "test");
  return out;
}

Dataset ReadIdx(const std::string& images_path, const std::string& labels_path, int num_classes) {
  std::ifstream img(images_path, std::ios::binary);
  Require(img.good(), ErrorCode::kIo, "cannot open " + images_path);
  const std::uint32_t magic = ReadBigEndian32(img, images_path);
  Require(magic == 0x00000803 || magic == 0x00000D03, ErrorCode::kFormat,
          images_path + ": unsupported IDX image magic");
  const std::uint32_t count = ReadBigEndian32(img, images_path);
  const int h = static_cast<int>(ReadBigEndian32(img, images_path));
  const int w = static_cast<int>(ReadBigEndian32(img, images_path));
  Require(h > 0 && w > 0, ErrorCode::kFormat, images_path + ": empty image dimensions");

  std::ifstream lab(labels_path, std::ios::binary);
  Require(lab.good(), ErrorCode::kIo, "cannot open " + labels_path);
  Require(ReadBigEndian32(lab, labels_path) == 0x00000801, ErrorCode::kFormat,
          labels_path + ": unsupported IDX label magic");
  Require(ReadBigEndian32(lab, labels_path) == count, ErrorCode::kFormat,
          "image and label counts differ");

  Dataset d;
  d.split = "test";
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  std::vector<unsigned char> raw(pixels * (magic == 0x00000803 ? 1 : 4));
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    Require(static_cast<bool>(img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))),
            ErrorCode::kFormat, images_path + ": truncated image data");
    Tensor t({1, h, w});
    for (std::size_t p = 0; p < pixels; ++p) {
      if (magic == 0x00000803) {
        t[p] = raw[p] / 255.0f;
      } else {
        const std::uint32_t bits = (std::uint32_t{raw[4 * p]} << 24) | (std::uint32_t{raw[4 * p + 1]} << 16) |
                                   (std::uint32_t{raw[4 * p + 2]} << 8) | raw[4 * p + 3];
        t[p] = std::bit_cast<float>(bits);
      }
    }
    char label = 0;
    Require(static_cast<bool>(lab.read(&label, 1)), ErrorCode::kFormat, labels_path + ": truncated labels");
    d.inputs.push_back(std::move(t));
    d.labels.push_back(static_cast<unsigned char>(label));
    max_label = std::max(max_label, d.labels.back());
  }
  d.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  d.Validate();
  return d;
}

void WriteIdx(const Dataset& dataset, const std::string& images_path, const std::string& labels_path) {
  dataset.Validate();
  Require(!dataset.empty() && dataset.inputs[0].rank() == 3 && dataset.inputs[0].dim(0) == 1,
          ErrorCode::kInvalidArgument, "IDX export needs single-channel images");
  Require(dataset.num_classes <= 256, ErrorCode::kInvalidArgument, "IDX labels are single bytes");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  Require(img.good() && lab.good(), ErrorCode::kIo, "cannot write IDX files");
  WriteBigEndian32(img, 0x00000D03);
  WriteBigEndian32(img, static_cast<std::uint32_t>(dataset.size()));
  WriteBigEndian32(img, static_cast<std::uint32_t>(dataset.inputs[0].dim(1)));
  WriteBigEndian32(img, static_cast<std::uint32_t>(dataset.inputs[0].dim(2)));
  for (const Tensor& t : dataset.inputs)
    for (float v : t.values()) WriteBigEndian32(img, std::bit_cast<std::uint32_t>(v));
  WriteBigEndian32(lab, 0x00000801);
  WriteBigEndian32(lab, static_cast<std::uint32_t>(dataset.size()));
  for (int l : dataset.labels) lab.put(static_cast<char>(l));
  Require(img.good() && lab.good(), ErrorCode::kIo, "IDX write failed");
}

}  // namespace mprt
