#include "mprt/entropy.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mprt/error.h"

namespace mprt {

std::string_view BinRuleName(BinRule rule) {
  switch (rule) {
    case BinRule::kFixedCount: return "fixed";
    case BinRule::kFreedmanDiaconis: return "freedman_diaconis";
    case BinRule::kScott: return "scott";
  }
  return "unknown";
}

std::optional<BinRule> ParseBinRule(std::string_view name) {
  for (auto r : {BinRule::kFixedCount, BinRule::kFreedmanDiaconis, BinRule::kScott})
    if (BinRuleName(r) == name) return r;
  return std::nullopt;
}

double HistogramEntropy(std::span<const float> values, const HistogramOptions& options) {
  Require(!values.empty(), ErrorCode::kInvalidArgument, "entropy of an empty attribution");
  Require(options.rule == BinRule::kFixedCount, ErrorCode::kUnsupported,
          std::string("bin rule '") + std::string(BinRuleName(options.rule)) + "' is not supported");
  Require(options.bins >= 2, ErrorCode::kInvalidArgument, "histogram entropy needs at least 2 bins");
  double lo, hi;
  if (options.fixed_range) {
    std::tie(lo, hi) = *options.fixed_range;
    Require(hi >= lo, ErrorCode::kInvalidArgument, "fixed histogram range is reversed");
  } else {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  if (hi == lo) return 0.0;
  std::vector<std::size_t> counts(options.bins, 0);
  const double scale = options.bins / (hi - lo);
  for (float v : values) {
    const double t = std::floor((static_cast<double>(v) - lo) * scale);
    const int b = static_cast<int>(std::clamp(t, 0.0, static_cast<double>(options.bins - 1)));
    ++counts[b];
  }
  const double n = static_cast<double>(values.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double ModelOutputEntropy(std::span<const float> probabilities) {
  Require(!probabilities.empty(), ErrorCode::kInvalidArgument, "entropy of an empty distribution");
  double total = 0.0, h = 0.0;
  for (float p : probabilities) {
    Require(p >= -1e-4f, ErrorCode::kInvalidArgument, "negative probability");
    total += p;
    if (p > 0) h -= p * std::log2(static_cast<double>(p));
  }
  Require(std::fabs(total - 1.0) <= 1e-4, ErrorCode::kInvalidArgument,
          "probabilities sum to " + std::to_string(total) + ", not 1");
  return h;
}

}  // namespace mprt
