#include "mprt/similarity.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "mprt/error.h"

namespace mprt {
namespace {

std::array<double, kSsimWindow * kSsimWindow> GaussianWindow() {
  std::array<double, kSsimWindow * kSsimWindow> w{};
  const int half = kSsimWindow / 2;
  double total = 0.0;
  for (int y = 0; y < kSsimWindow; ++y)
    for (int x = 0; x < kSsimWindow; ++x) {
      const double dy = y - half, dx = x - half;
      w[y * kSsimWindow + x] = std::exp(-(dx * dx + dy * dy) / (2 * kSsimSigma * kSsimSigma));
      total += w[y * kSsimWindow + x];
    }
  for (double& v : w) v /= total;
  return w;
}

struct Moments {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;

  void Add(double w, double a, double b) {
    sa += w * a;
    sb += w * b;
    saa += w * (a * a);
    sbb += w * (b * b);
    sab += w * (a * b);
  }

  double Ssim(double c1, double c2) const {
    const double var_a = saa - sa * sa;
    const double var_b = sbb - sb * sb;
    const double cov = sab - sa * sb;
    return ((2 * sa * sb + c1) * (2 * cov + c2)) / ((sa * sa + sb * sb + c1) * (var_a + var_b + c2));
  }
};

void CheckLengths(std::span<const float> a, std::span<const float> b) {
  Require(a.size() == b.size(), ErrorCode::kShapeMismatch, "similarity inputs differ in length");
  Require(a.size() >= 2, ErrorCode::kInvalidArgument, "similarity needs at least two values");
}

}  // namespace

std::string_view SimilarityName(SimilarityFn fn) {
  switch (fn) {
    case SimilarityFn::kSsim: return "SSIM";
    case SimilarityFn::kSpearman: return "Spearman";
    case SimilarityFn::kPearson: return "Pearson";
    case SimilarityFn::kMse: return "MSE";
  }
  return "Unknown";
}

std::optional<SimilarityFn> ParseSimilarity(std::string_view name) {
  for (auto fn : {SimilarityFn::kSsim, SimilarityFn::kSpearman, SimilarityFn::kPearson, SimilarityFn::kMse})
    if (SimilarityName(fn) == name) return fn;
  return std::nullopt;
}

double Ssim(const Tensor& a, const Tensor& b) {
  Require(a.shape() == b.shape(), ErrorCode::kShapeMismatch,
          "SSIM shape mismatch: " + ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  Require(a.rank() == 2 || a.rank() == 3, ErrorCode::kShapeMismatch, "SSIM needs [H, W] or [C, H, W] maps");
  const int channels = a.rank() == 3 ? a.dim(0) : 1;
  const int h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  const double range = static_cast<double>(std::max(a.Max(), b.Max())) - std::min(a.Min(), b.Min());
  if (range == 0.0) {
    Require(a == b, ErrorCode::kInvalidArgument, "SSIM value range is zero for differing inputs");
    return 1.0;
  }
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  double total = 0.0;
  for (int c = 0; c < channels; ++c) {
    const float* pa = a.data() + c * plane;
    const float* pb = b.data() + c * plane;
    if (h < kSsimWindow || w < kSsimWindow) {
      Moments m;
      const double weight = 1.0 / static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) m.Add(weight, pa[i], pb[i]);
      total += m.Ssim(c1, c2);
      continue;
    }
    static const auto window = GaussianWindow();
    double sum = 0.0;
    for (int y0 = 0; y0 + kSsimWindow <= h; ++y0)
      for (int x0 = 0; x0 + kSsimWindow <= w; ++x0) {
        Moments m;
        for (int dy = 0; dy < kSsimWindow; ++dy)
          for (int dx = 0; dx < kSsimWindow; ++dx) {
            const std::size_t i = static_cast<std::size_t>(y0 + dy) * w + x0 + dx;
            m.Add(window[dy * kSsimWindow + dx], pa[i], pb[i]);
          }
        sum += m.Ssim(c1, c2);
      }
    total += sum / static_cast<double>((h - kSsimWindow + 1) * (w - kSsimWindow + 1));
  }
  return total / channels;
}

std::vector<double> AverageRanks(std::span<const float> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

template <typename T>
double PearsonOf(const std::vector<T>& a, const std::vector<T>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  Require(saa > 0 && sbb > 0, ErrorCode::kZeroVariance, "correlation of a constant input is undefined");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double Pearson(std::span<const float> a, std::span<const float> b) {
  CheckLengths(a, b);
  return PearsonOf(std::vector<double>(a.begin(), a.end()), std::vector<double>(b.begin(), b.end()));
}

double Spearman(std::span<const float> a, std::span<const float> b) {
  CheckLengths(a, b);
  return PearsonOf(AverageRanks(a), AverageRanks(b));
}

double Mse(std::span<const float> a, std::span<const float> b) {
  Require(a.size() == b.size() && !a.empty(), ErrorCode::kShapeMismatch, "MSE inputs differ in length");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double Similarity(SimilarityFn fn, const Tensor& a, const Tensor& b) {
  Require(a.shape() == b.shape(), ErrorCode::kShapeMismatch, "similarity shape mismatch");
  switch (fn) {
    case SimilarityFn::kSsim: return Ssim(a, b);
    case SimilarityFn::kSpearman: return Spearman(a.values(), b.values());
    case SimilarityFn::kPearson: return Pearson(a.values(), b.values());
    case SimilarityFn::kMse: return Mse(a.values(), b.values());
  }
  Fail(ErrorCode::kInvalidArgument, "unknown similarity");
}

}  // namespace mprt
