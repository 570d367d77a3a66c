#ifndef MPRT_SIMILARITY_H_
#define MPRT_SIMILARITY_H_

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mprt/tensor.h"

namespace mprt {

enum class SimilarityFn { kSsim, kSpearman, kPearson, kMse };

std::string_view SimilarityName(SimilarityFn fn);
std::optional<SimilarityFn> ParseSimilarity(std::string_view name);

inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimSigma = 1.5;

// Mean SSIM over all valid 7x7 Gaussian (sigma 1.5) windows, with
// C1 = (0.01 R)^2, C2 = (0.03 R)^2 and R the joint value range of a and b.
// Maps smaller than 7x7 use one global window. Accepts [H, W] or [C, H, W]
// (channels averaged). Symmetric; ssim(a, a) == 1.
double Ssim(const Tensor& a, const Tensor& b);

// 1-based ranks with ties sharing their average rank.
std::vector<double> AverageRanks(std::span<const float> values);

// Throw kZeroVariance when either input is constant.
double Pearson(std::span<const float> a, std::span<const float> b);
double Spearman(std::span<const float> a, std::span<const float> b);
double Mse(std::span<const float> a, std::span<const float> b);

double Similarity(SimilarityFn fn, const Tensor& a, const Tensor& b);

}  // namespace mprt

#endif  // MPRT_SIMILARITY_H_
