#ifndef MPRT_ENTROPY_H_
#define MPRT_ENTROPY_H_

#include <optional>
#include <span>
#include <string_view>
#include <utility>

namespace mprt {

enum class BinRule {
  kFixedCount,
  // Reserved names; both data-driven rules are rejected as unsupported.
  kFreedmanDiaconis,
  kScott,
};

std::string_view BinRuleName(BinRule rule);
std::optional<BinRule> ParseBinRule(std::string_view name);

struct HistogramOptions {
  int bins = 100;
  BinRule rule = BinRule::kFixedCount;
  // Bin edges over this range instead of [min(e), max(e)]; outside values
  // land in the edge bins.
  std::optional<std::pair<double, double>> fixed_range;
};

// Shannon entropy (natural log) of the histogram of values over `bins`
// equal-width bins spanning [min, max]. Constant input gives 0.
double HistogramEntropy(std::span<const float> values, const HistogramOptions& options = {});

// -sum p log2 p of a probability vector. Throws when the input is off the
// simplex by more than 1e-4.
double ModelOutputEntropy(std::span<const float> probabilities);

}  // namespace mprt

#endif  // MPRT_ENTROPY_H_
