#include "mprt/attribution.h"

#include <array>
#include <cmath>
#include <utility>

#include "mprt/error.h"
#include "mprt/lrp.h"
#include "mprt/rng.h"

namespace mprt {
namespace {

constexpr std::array<std::pair<MethodId, std::string_view>, 11> kMethodNames = {{
    {MethodId::kGradient, "Gradient"},
    {MethodId::kSaliency, "Saliency"},
    {MethodId::kInputXGradient, "InputXGradient"},
    {MethodId::kIntegratedGradients, "IntegratedGradients"},
    {MethodId::kSmoothGrad, "SmoothGrad"},
    {MethodId::kGuidedBackprop, "GuidedBackprop"},
    {MethodId::kGradCAM, "GradCAM"},
    {MethodId::kGradientSHAP, "GradientSHAP"},
    {MethodId::kLrpEpsilon, "LRP_Epsilon"},
    {MethodId::kLrpZPlus, "LRP_ZPlus"},
    {MethodId::kRandomBaseline, "RandomBaseline"},
}};

double InputRange(const Tensor& x) { return static_cast<double>(x.Max()) - x.Min(); }

Tensor IntegratedGradients(const Model& model, const Tensor& x, int cls, int steps) {
  std::vector<double> acc(x.size(), 0.0);
  Tensor point(x.shape());
  for (int s = 0; s < steps; ++s) {
    const float alpha = static_cast<float>((s + 0.5) / steps);
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = alpha * x[i];
    const Tensor g = InputGradient(model, point, cls);
    for (std::size_t i = 0; i < x.size(); ++i) acc[i] += g[i];
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x[i] * acc[i] / steps);
  return out;
}

Tensor SmoothGrad(const Model& model, const Tensor& x, int cls, const MethodConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const double sigma = cfg.noise_level * InputRange(x);
  std::vector<double> acc(x.size(), 0.0);
  Tensor noisy(x.shape());
  for (int s = 0; s < cfg.samples; ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) noisy[i] = x[i] + static_cast<float>(sigma * rng.Normal());
    const Tensor g = InputGradient(model, noisy, cls);
    for (std::size_t i = 0; i < x.size(); ++i) acc[i] += std::fabs(g[i]);
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(acc[i] / cfg.samples);
  return out;
}

Tensor GradientShap(const Model& model, const Tensor& x, int cls, const MethodConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const double sigma = cfg.noise_level * InputRange(x);
  std::vector<double> acc(x.size(), 0.0);
  Tensor baseline(x.shape()), point(x.shape());
  for (int s = 0; s < cfg.samples; ++s) {
    for (float& b : baseline.values()) b = static_cast<float>(sigma * rng.Normal());
    const float alpha = static_cast<float>(rng.Uniform());
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = baseline[i] + alpha * (x[i] - baseline[i]);
    const Tensor g = InputGradient(model, point, cls);
    for (std::size_t i = 0; i < x.size(); ++i) acc[i] += static_cast<double>(x[i] - baseline[i]) * g[i];
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(acc[i] / cfg.samples);
  return out;
}

Tensor GradCam(const Model& model, const Tensor& x, int cls) {
  std::optional<std::size_t> conv;
  for (std::size_t pos = 0; pos <= model.logit_position(); ++pos)
    if (model.layer(pos).kind == LayerKind::kConv2D) conv = pos;
  Require(conv.has_value(), ErrorCode::kUnsupported, "GradCAM requires a model with a Conv2D layer");
  const ForwardTrace trace = Forward(model, x);
  Tensor seed(trace.logits.shape());
  seed[cls] = 1.0f;
  const std::vector<Tensor> grads = Backward(model, trace, seed, BackwardRule::kStandard);
  const Tensor& act = trace.activations[*conv];
  const Tensor& grad = grads[*conv + 1];
  const int channels = act.dim(0), h = act.dim(1), w = act.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> cam(plane, 0.0);
  for (int k = 0; k < channels; ++k) {
    double weight = 0.0;
    for (std::size_t i = 0; i < plane; ++i) weight += grad[k * plane + i];
    weight /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) cam[i] += weight * act[k * plane + i];
  }
  // Nearest-neighbour upsampling to the input grid, replicated over channels.
  Tensor out(x.shape());
  const int in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  for (int c = 0; c < in_c; ++c)
    for (int y = 0; y < in_h; ++y)
      for (int xx = 0; xx < in_w; ++xx) {
        const int sy = y * h / in_h, sx = xx * w / in_w;
        const double v = cam[static_cast<std::size_t>(sy) * w + sx];
        out[(static_cast<std::size_t>(c) * in_h + y) * in_w + xx] = v > 0 ? static_cast<float>(v) : 0.0f;
      }
  return out;
}

}  // namespace

std::string_view MethodName(MethodId method) {
  for (const auto& [id, name] : kMethodNames)
    if (id == method) return name;
  return "Unknown";
}

std::optional<MethodId> ParseMethod(std::string_view name) {
  for (const auto& [id, n] : kMethodNames)
    if (n == name) return id;
  return std::nullopt;
}

const std::vector<MethodId>& AllMethods() {
  static const std::vector<MethodId> all = [] {
    std::vector<MethodId> v;
    for (const auto& [id, name] : kMethodNames) v.push_back(id);
    return v;
  }();
  return all;
}

MethodConfig MethodConfig::Default(MethodId method) {
  MethodConfig cfg;
  cfg.method = method;
  if (method == MethodId::kGradientSHAP) cfg.samples = 5;
  return cfg;
}

void MethodConfig::Validate() const {
  Require(steps >= 1, ErrorCode::kInvalidArgument, "steps must be >= 1");
  Require(samples >= 1, ErrorCode::kInvalidArgument, "samples must be >= 1");
  Require(noise_level >= 0, ErrorCode::kInvalidArgument, "noise_level must be >= 0");
  Require(epsilon > 0, ErrorCode::kInvalidArgument, "epsilon must be > 0");
}

Attribution Explain(const Model& model, const Tensor& input, int class_index, const MethodConfig& config,
                    std::uint64_t seed) {
  config.Validate();
  Require(class_index >= 0 && class_index < model.num_classes(), ErrorCode::kInvalidArgument,
          "class index " + std::to_string(class_index) + " out of range");
  Require(input.shape() == model.input_shape(), ErrorCode::kShapeMismatch, "input does not match the model");
  Attribution a;
  a.method = config.method;
  a.class_index = class_index;
  switch (config.method) {
    case MethodId::kGradient:
      a.values = InputGradient(model, input, class_index);
      break;
    case MethodId::kSaliency:
      a.values = InputGradient(model, input, class_index);
      for (float& v : a.values.values()) v = std::fabs(v);
      a.flags.abs_applied = true;
      break;
    case MethodId::kInputXGradient:
      a.values = InputGradient(model, input, class_index);
      for (std::size_t i = 0; i < input.size(); ++i) a.values[i] *= input[i];
      break;
    case MethodId::kIntegratedGradients:
      a.values = IntegratedGradients(model, input, class_index, config.steps);
      break;
    case MethodId::kSmoothGrad:
      a.values = SmoothGrad(model, input, class_index, config, seed);
      a.flags.abs_applied = true;
      break;
    case MethodId::kGuidedBackprop:
      a.values = InputGradient(model, input, class_index, BackwardRule::kGuidedReLU);
      break;
    case MethodId::kGradCAM:
      a.values = GradCam(model, input, class_index);
      a.flags.positive_only = true;
      break;
    case MethodId::kGradientSHAP:
      a.values = GradientShap(model, input, class_index, config, seed);
      break;
    case MethodId::kLrpEpsilon:
      a.values = Lrp(model, input, class_index, LrpRule::kEpsilon, config.epsilon);
      break;
    case MethodId::kLrpZPlus:
      a.values = Lrp(model, input, class_index, LrpRule::kZPlus, config.epsilon);
      break;
    case MethodId::kRandomBaseline: {
      Rng rng(seed);
      a.values = Tensor(input.shape());
      for (float& v : a.values.values()) v = static_cast<float>(rng.Uniform());
      break;
    }
  }
  Require(a.values.AllFinite(), ErrorCode::kNonFinite,
          std::string(MethodName(config.method)) + " produced non-finite values");
  return a;
}

Tensor NormaliseSecondMoment(const Tensor& values) {
  Require(!values.empty(), ErrorCode::kInvalidArgument, "cannot normalise an empty attribution");
  double sum_sq = 0.0;
  for (float v : values.values()) sum_sq += static_cast<double>(v) * v;
  Require(sum_sq > 0.0, ErrorCode::kAllZeroAttribution, "attribution is all zero; second moment undefined");
  const double scale = std::sqrt(sum_sq / static_cast<double>(values.size()));
  Tensor out(values.shape());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i] / scale);
  return out;
}

Attribution NormaliseSecondMoment(const Attribution& attribution) {
  Attribution out = attribution;
  out.values = NormaliseSecondMoment(attribution.values);
  out.flags.normalised = true;
  return out;
}

SignPolicy MandatedSign(MethodId method) {
  switch (method) {
    case MethodId::kSaliency:
    case MethodId::kSmoothGrad:
      return SignPolicy::kAbs;
    case MethodId::kGradCAM:
      return SignPolicy::kPositiveOnly;
    default:
      return SignPolicy::kKeep;
  }
}

Attribution Preprocess(Attribution attribution, const PreprocessPolicy& policy) {
  const SignPolicy mandated = MandatedSign(attribution.method);
  SignPolicy sign = policy.sign;
  if (sign == SignPolicy::kMethodDefault) sign = mandated;
  Require(mandated == SignPolicy::kKeep || sign == mandated, ErrorCode::kInvalidArgument,
          std::string(MethodName(attribution.method)) + " mandates a different sign treatment");
  if (sign == SignPolicy::kAbs) {
    for (float& v : attribution.values.values()) v = std::fabs(v);
    attribution.flags.abs_applied = true;
  } else if (sign == SignPolicy::kPositiveOnly) {
    for (float& v : attribution.values.values()) v = v > 0 ? v : 0.0f;
    attribution.flags.positive_only = true;
  }
  if (policy.normalise) attribution = NormaliseSecondMoment(attribution);
  return attribution;
}

}  // namespace mprt
