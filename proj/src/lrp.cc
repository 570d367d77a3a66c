#include "mprt/lrp.h"

#include "mprt/error.h"
#include "ops.h"

namespace mprt {
namespace {

constexpr double kZPlusStabiliser = 1e-9;

Tensor LinearRelevance(const Layer& layer, const Tensor& in, const Tensor& out, const Tensor& r,
                       LrpRule rule, double epsilon) {
  if (rule == LrpRule::kEpsilon) {
    Tensor s(out.shape());
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double z = out[k];
      s[k] = static_cast<float>(r[k] / (z + epsilon * (z >= 0 ? 1.0 : -1.0)));
    }
    Tensor rin = ops::LinearTranspose(layer, layer.weights, s, in.shape());
    for (std::size_t j = 0; j < rin.size(); ++j) rin[j] *= in[j];
    return rin;
  }
  Tensor w_pos = layer.weights, w_neg = layer.weights;
  for (float& v : w_pos.values()) v = v > 0 ? v : 0.0f;
  for (float& v : w_neg.values()) v = v < 0 ? v : 0.0f;
  Tensor x_pos = in, x_neg = in;
  for (float& v : x_pos.values()) v = v > 0 ? v : 0.0f;
  for (float& v : x_neg.values()) v = v < 0 ? v : 0.0f;
  Tensor z = ops::LinearForward(layer, w_pos, nullptr, x_pos);
  const Tensor z_neg = ops::LinearForward(layer, w_neg, nullptr, x_neg);
  Tensor s(z.shape());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double zk = static_cast<double>(z[k]) + z_neg[k];
    s[k] = zk > 0 ? static_cast<float>(r[k] / (zk + kZPlusStabiliser)) : 0.0f;
  }
  const Tensor c_pos = ops::LinearTranspose(layer, w_pos, s, in.shape());
  const Tensor c_neg = ops::LinearTranspose(layer, w_neg, s, in.shape());
  Tensor rin(in.shape());
  for (std::size_t j = 0; j < rin.size(); ++j) rin[j] = x_pos[j] * c_pos[j] + x_neg[j] * c_neg[j];
  return rin;
}

}  // namespace

Tensor PropagateRelevance(const Model& model, const ForwardTrace& trace, std::size_t pos, Tensor relevance,
                          LrpRule rule, double epsilon) {
  Require(pos <= model.logit_position(), ErrorCode::kInvalidArgument, "relevance must start at or below the logits");
  Require(relevance.shape() == model.output_shape(pos), ErrorCode::kShapeMismatch,
          "relevance shape " + ShapeString(relevance.shape()) + " does not match " + model.LayerName(pos));
  Require(epsilon > 0, ErrorCode::kInvalidArgument, "LRP epsilon must be positive");
  Tensor r = std::move(relevance);
  std::vector<Tensor> pending(model.num_layers());
  for (std::size_t p = pos + 1; p-- > 0;) {
    const Layer& l = model.layer(p);
    const Tensor& in = trace.LayerInput(p);
    const Tensor& out = trace.activations[p];
    switch (l.kind) {
      case LayerKind::kDense:
      case LayerKind::kConv2D:
        r = LinearRelevance(l, in, out, r, rule, epsilon);
        break;
      case LayerKind::kReLU:
        break;
      case LayerKind::kMaxPool2D:
        r = ops::MaxPoolRoute(in, l.pool_size, r);
        break;
      case LayerKind::kFlatten:
        r = r.Reshaped(in.shape());
        break;
      case LayerKind::kSkipEnd: {
        const std::size_t begin = static_cast<std::size_t>(model.skip_partner(p));
        const Tensor& branch = trace.activations[begin];
        Tensor skip(r.shape());
        for (std::size_t i = 0; i < r.size(); ++i) {
          const double total = out[i];
          const double denom = total + epsilon * (total >= 0 ? 1.0 : -1.0);
          skip[i] = static_cast<float>(branch[i] / denom * r[i]);
          r[i] = static_cast<float>(in[i] / denom * r[i]);
        }
        pending[begin] = std::move(skip);
        break;
      }
      case LayerKind::kSkipBegin:
        if (!pending[p].empty())
          for (std::size_t i = 0; i < r.size(); ++i) r[i] += pending[p][i];
        break;
      case LayerKind::kSoftmax:
        Fail(ErrorCode::kInvalidArgument, "softmax inside the relevance path");
    }
  }
  return r;
}

Tensor Lrp(const Model& model, const Tensor& input, int class_index, LrpRule rule, double epsilon) {
  Require(class_index >= 0 && class_index < model.num_classes(), ErrorCode::kInvalidArgument,
          "class index out of range");
  const ForwardTrace trace = Forward(model, input);
  Tensor r(trace.logits.shape());
  r[class_index] = trace.logits[class_index];
  return PropagateRelevance(model, trace, model.logit_position(), std::move(r), rule, epsilon);
}

}  // namespace mprt
