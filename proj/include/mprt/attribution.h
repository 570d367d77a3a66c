#ifndef MPRT_ATTRIBUTION_H_
#define MPRT_ATTRIBUTION_H_

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mprt/model.h"

namespace mprt {

enum class MethodId {
  kGradient,
  kSaliency,
  kInputXGradient,
  kIntegratedGradients,
  kSmoothGrad,
  kGuidedBackprop,
  kGradCAM,
  kGradientSHAP,
  kLrpEpsilon,
  kLrpZPlus,
  kRandomBaseline,
};

std::string_view MethodName(MethodId method);
std::optional<MethodId> ParseMethod(std::string_view name);
const std::vector<MethodId>& AllMethods();

struct MethodConfig {
  MethodId method = MethodId::kGradient;
  int steps = 20;             // IntegratedGradients path steps.
  int samples = 20;           // SmoothGrad noise draws / GradientSHAP baselines.
  double noise_level = 0.1;   // Noise std as a fraction of the input's value range.
  double epsilon = 1e-6;      // LRP stabiliser.

  // Defaults per method: 20 IG steps with zero baseline, SmoothGrad with 20
  // draws at noise level 0.1, GradientSHAP with 5 samples.
  static MethodConfig Default(MethodId method);
  void Validate() const;
};

struct PreprocessFlags {
  bool abs_applied = false;
  bool positive_only = false;
  bool normalised = false;
};

struct Attribution {
  Tensor values;  // Same shape as the model input.
  MethodId method = MethodId::kGradient;
  int class_index = 0;
  PreprocessFlags flags;
};

// e = Phi(x, f, y; lambda). Deterministic given seed. Saliency and SmoothGrad
// return absolute values and GradCAM is rectified, as their definitions
// require; every other method is signed.
Attribution Explain(const Model& model, const Tensor& input, int class_index, const MethodConfig& config,
                    std::uint64_t seed);

// e / sqrt(mean(e^2)). Throws kAllZeroAttribution when e is all zero.
Tensor NormaliseSecondMoment(const Tensor& values);
Attribution NormaliseSecondMoment(const Attribution& attribution);

enum class SignPolicy {
  kMethodDefault,  // abs for Saliency/SmoothGrad, positive part for GradCAM, keep otherwise.
  kKeep,
  kAbs,
  kPositiveOnly,
};

struct PreprocessPolicy {
  SignPolicy sign = SignPolicy::kMethodDefault;
  bool normalise = false;
};

// The sign treatment a method mandates (kKeep when it has none).
SignPolicy MandatedSign(MethodId method);

// Applies the sign policy, then optional second-moment normalisation.
// Throws kInvalidArgument when the policy contradicts a method-mandated rule.
Attribution Preprocess(Attribution attribution, const PreprocessPolicy& policy);

}  // namespace mprt

#endif  // MPRT_ATTRIBUTION_H_
