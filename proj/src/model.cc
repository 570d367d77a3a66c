#include "mprt/model.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "mprt/error.h"
#include "ops.h"

namespace mprt {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 8> kKindNames = {{
    {LayerKind::kDense, "dense"},
    {LayerKind::kConv2D, "conv2d"},
    {LayerKind::kReLU, "relu"},
    {LayerKind::kMaxPool2D, "maxpool2d"},
    {LayerKind::kFlatten, "flatten"},
    {LayerKind::kSkipBegin, "skip_begin"},
    {LayerKind::kSkipEnd, "skip_end"},
    {LayerKind::kSoftmax, "softmax"},
}};

}  // namespace

std::string_view LayerKindName(LayerKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<LayerKind> ParseLayerKind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

Layer Layer::Dense(int in, int out) {
  Layer l;
  l.kind = LayerKind::kDense;
  l.weights = Tensor({out, in});
  l.bias = Tensor({out});
  return l;
}

Layer Layer::Conv2D(int in_channels, int out_channels, int kernel, int padding) {
  Layer l;
  l.kind = LayerKind::kConv2D;
  l.weights = Tensor({out_channels, in_channels, kernel, kernel});
  l.bias = Tensor({out_channels});
  l.padding = padding;
  return l;
}

Layer Layer::Of(LayerKind kind) {
  Require(kind != LayerKind::kDense && kind != LayerKind::kConv2D, ErrorCode::kInvalidArgument,
          "parameterised layers need explicit shapes");
  Layer l;
  l.kind = kind;
  return l;
}

Layer Layer::MaxPool(int size) {
  Layer l = Of(LayerKind::kMaxPool2D);
  l.pool_size = size;
  return l;
}

Model::Model(Shape input_shape, int num_classes, std::vector<Layer> layers, Metadata metadata)
    : input_shape_(std::move(input_shape)),
      num_classes_(num_classes),
      layers_(std::move(layers)),
      metadata_(std::move(metadata)) {
  Validate();
}

void Model::Validate() {
  Require(num_classes_ >= 1, ErrorCode::kInvalidArgument, "model needs at least one class");
  Require(!layers_.empty(), ErrorCode::kInvalidArgument, "model has no layers");
  ShapeSize(input_shape_);
  output_shapes_.assign(layers_.size(), {});
  skip_partner_.assign(layers_.size(), -1);
  std::vector<std::size_t> open_skips;
  Shape shape = input_shape_;
  for (std::size_t pos = 0; pos < layers_.size(); ++pos) {
    Layer& l = layers_[pos];
    const std::string where = LayerName(pos) + ": ";
    if (!l.has_params()) {
      Require(l.weights.empty() && l.bias.empty(), ErrorCode::kInvalidArgument,
              where + "parameter-free layer carries parameters");
    }
    switch (l.kind) {
      case LayerKind::kDense: {
        Require(l.weights.rank() == 2, ErrorCode::kShapeMismatch, where + "dense weights must be 2-D");
        Require(shape.size() == 1 && shape[0] == l.weights.dim(1), ErrorCode::kShapeMismatch,
                where + "dense input " + ShapeString(shape) + " vs weights " + ShapeString(l.weights.shape()));
        Require(l.bias.shape() == Shape{l.weights.dim(0)}, ErrorCode::kShapeMismatch, where + "bad bias shape");
        shape = {l.weights.dim(0)};
        break;
      }
      case LayerKind::kConv2D: {
        Require(l.weights.rank() == 4 && l.weights.dim(2) == l.weights.dim(3), ErrorCode::kShapeMismatch,
                where + "conv weights must be [out, in, k, k]");
        Require(shape.size() == 3 && shape[0] == l.weights.dim(1), ErrorCode::kShapeMismatch,
                where + "conv input " + ShapeString(shape) + " vs weights " + ShapeString(l.weights.shape()));
        Require(l.bias.shape() == Shape{l.weights.dim(0)}, ErrorCode::kShapeMismatch, where + "bad bias shape");
        Require(l.padding >= 0, ErrorCode::kInvalidArgument, where + "negative padding");
        const int k = l.weights.dim(2);
        const int h = shape[1] + 2 * l.padding - k + 1;
        const int w = shape[2] + 2 * l.padding - k + 1;
        Require(h > 0 && w > 0, ErrorCode::kShapeMismatch, where + "kernel larger than padded input");
        shape = {l.weights.dim(0), h, w};
        break;
      }
      case LayerKind::kReLU:
        break;
      case LayerKind::kMaxPool2D:
        Require(l.pool_size >= 1 && shape.size() == 3 && shape[1] >= l.pool_size && shape[2] >= l.pool_size,
                ErrorCode::kShapeMismatch, where + "pool window does not fit " + ShapeString(shape));
        shape = {shape[0], shape[1] / l.pool_size, shape[2] / l.pool_size};
        break;
      case LayerKind::kFlatten:
        shape = {static_cast<int>(ShapeSize(shape))};
        break;
      case LayerKind::kSkipBegin:
        open_skips.push_back(pos);
        break;
      case LayerKind::kSkipEnd: {
        Require(!open_skips.empty(), ErrorCode::kInvalidArgument, where + "skip_end without skip_begin");
        const std::size_t begin = open_skips.back();
        open_skips.pop_back();
        Require(output_shapes_[begin] == shape, ErrorCode::kShapeMismatch,
                where + "skip branches disagree: " + ShapeString(output_shapes_[begin]) + " vs " +
                    ShapeString(shape));
        skip_partner_[begin] = static_cast<int>(pos);
        skip_partner_[pos] = static_cast<int>(begin);
        break;
      }
      case LayerKind::kSoftmax:
        Require(pos + 1 == layers_.size(), ErrorCode::kInvalidArgument, where + "softmax must be the last layer");
        Require(shape.size() == 1, ErrorCode::kShapeMismatch, where + "softmax needs a vector input");
        break;
    }
    output_shapes_[pos] = shape;
  }
  Require(open_skips.empty(), ErrorCode::kInvalidArgument, "unterminated skip_begin");
  logit_pos_ = layers_.back().kind == LayerKind::kSoftmax ? layers_.size() - 2 : layers_.size() - 1;
  Require(layers_.size() >= 2 || layers_.back().kind != LayerKind::kSoftmax, ErrorCode::kInvalidArgument,
          "model consists only of a softmax");
  Require(output_shapes_[logit_pos_] == Shape{num_classes_}, ErrorCode::kShapeMismatch,
          "model output " + ShapeString(output_shapes_[logit_pos_]) + " does not match " +
              std::to_string(num_classes_) + " classes");
}

std::string Model::LayerName(std::size_t pos) const {
  return std::string(LayerKindName(layers_.at(pos).kind)) + "_" + std::to_string(IndexOf(pos));
}

std::vector<std::size_t> Model::ParameterisedPositions() const {
  std::vector<std::size_t> out;
  for (std::size_t pos = 0; pos < layers_.size(); ++pos)
    if (layers_[pos].has_params()) out.push_back(pos);
  return out;
}

void Model::SetParams(std::size_t pos, Tensor weights, Tensor bias) {
  Layer& l = layers_.at(pos);
  Require(l.has_params(), ErrorCode::kInvalidArgument, LayerName(pos) + " has no parameters");
  Require(weights.shape() == l.weights.shape() && bias.shape() == l.bias.shape(), ErrorCode::kShapeMismatch,
          LayerName(pos) + ": parameter shape change");
  l.weights = std::move(weights);
  l.bias = std::move(bias);
}

Tensor& Model::MutableWeights(std::size_t pos) {
  Require(layers_.at(pos).has_params(), ErrorCode::kInvalidArgument, LayerName(pos) + " has no parameters");
  return layers_[pos].weights;
}

Tensor& Model::MutableBias(std::size_t pos) {
  Require(layers_.at(pos).has_params(), ErrorCode::kInvalidArgument, LayerName(pos) + " has no parameters");
  return layers_[pos].bias;
}

std::size_t Model::ParameterCount() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

bool Model::SameParameters(const Model& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != other.layers_[i].kind) return false;
    if (!(layers_[i].weights == other.layers_[i].weights)) return false;
    if (!(layers_[i].bias == other.layers_[i].bias)) return false;
  }
  return true;
}

Tensor Softmax(std::span<const float> logits) {
  Require(!logits.empty(), ErrorCode::kInvalidArgument, "softmax of empty vector");
  const float top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(static_cast<double>(logits[i]) - top);
    sum += e[i];
  }
  Tensor out({static_cast<int>(logits.size())});
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = static_cast<float>(e[i] / sum);
  return out;
}

ForwardTrace Forward(const Model& model, const Tensor& input) {
  Require(input.shape() == model.input_shape(), ErrorCode::kShapeMismatch,
          "input shape " + ShapeString(input.shape()) + " != model input " + ShapeString(model.input_shape()));
  Require(input.AllFinite(), ErrorCode::kNonFinite, "non-finite input");
  ForwardTrace trace;
  trace.input = input;
  trace.activations.reserve(model.num_layers());
  for (std::size_t pos = 0; pos < model.num_layers(); ++pos) {
    const Layer& l = model.layer(pos);
    const Tensor& in = trace.LayerInput(pos);
    Tensor out;
    switch (l.kind) {
      case LayerKind::kDense:
      case LayerKind::kConv2D:
        out = ops::LinearForward(l, l.weights, &l.bias, in);
        break;
      case LayerKind::kReLU:
        out = in;
        for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
        break;
      case LayerKind::kMaxPool2D:
        out = ops::MaxPoolForward(in, l.pool_size);
        break;
      case LayerKind::kFlatten:
        out = in.Reshaped({static_cast<int>(in.size())});
        break;
      case LayerKind::kSkipBegin:
        out = in;
        break;
      case LayerKind::kSkipEnd: {
        out = in;
        const Tensor& branch = trace.activations[model.skip_partner(pos)];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += branch[i];
        break;
      }
      case LayerKind::kSoftmax:
        out = Softmax(in.values());
        break;
    }
    Require(out.AllFinite(), ErrorCode::kNonFinite, "non-finite activation at " + model.LayerName(pos));
    trace.activations.push_back(std::move(out));
  }
  trace.logits = trace.activations[model.logit_position()];
  trace.probabilities = model.layers().back().kind == LayerKind::kSoftmax ? trace.activations.back()
                                                                         : Softmax(trace.logits.values());
  return trace;
}

int Predict(const Model& model, const Tensor& input) {
  const ForwardTrace trace = Forward(model, input);
  const auto logits = trace.logits.values();
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

ParamGrads::ParamGrads(const Model& model) : weights(model.num_layers()), bias(model.num_layers()) {
  for (std::size_t pos = 0; pos < model.num_layers(); ++pos) {
    const Layer& l = model.layer(pos);
    if (!l.has_params()) continue;
    weights[pos] = Tensor(l.weights.shape());
    bias[pos] = Tensor(l.bias.shape());
  }
}

void ParamGrads::Zero() {
  for (Tensor& t : weights) std::fill(t.values().begin(), t.values().end(), 0.0f);
  for (Tensor& t : bias) std::fill(t.values().begin(), t.values().end(), 0.0f);
}

std::vector<Tensor> Backward(const Model& model, const ForwardTrace& trace, const Tensor& output_grad,
                             BackwardRule rule, ParamGrads* params) {
  const std::size_t last = model.logit_position();
  Require(output_grad.shape() == model.output_shape(last), ErrorCode::kShapeMismatch,
          "output gradient shape " + ShapeString(output_grad.shape()));
  std::vector<Tensor> grads(last + 2);
  grads[last + 1] = output_grad;
  // Gradient arriving at a SkipBegin output through the skip branch.
  std::vector<Tensor> pending(model.num_layers());
  for (std::size_t p = last + 1; p-- > 0;) {
    const Layer& l = model.layer(p);
    const Tensor& g = grads[p + 1];
    const Tensor& in = trace.LayerInput(p);
    Tensor gin;
    switch (l.kind) {
      case LayerKind::kDense:
      case LayerKind::kConv2D:
        gin = ops::LinearTranspose(l, l.weights, g, in.shape());
        if (params) ops::AccumulateParamGrads(l, in, g, params->weights[p], params->bias[p]);
        break;
      case LayerKind::kReLU:
        gin = g;
        for (std::size_t i = 0; i < gin.size(); ++i) {
          const bool open = in[i] > 0.0f && (rule == BackwardRule::kStandard || gin[i] > 0.0f);
          if (!open) gin[i] = 0.0f;
        }
        break;
      case LayerKind::kMaxPool2D:
        gin = ops::MaxPoolRoute(in, l.pool_size, g);
        break;
      case LayerKind::kFlatten:
        gin = g.Reshaped(in.shape());
        break;
      case LayerKind::kSkipEnd:
        gin = g;
        pending[model.skip_partner(p)] = g;
        break;
      case LayerKind::kSkipBegin:
        gin = g;
        if (!pending[p].empty())
          for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += pending[p][i];
        break;
      case LayerKind::kSoftmax:
        Fail(ErrorCode::kInvalidArgument, "softmax inside the logit path");
    }
    grads[p] = std::move(gin);
  }
  return grads;
}

Tensor InputGradient(const Model& model, const Tensor& input, int class_index, BackwardRule rule) {
  Require(class_index >= 0 && class_index < model.num_classes(), ErrorCode::kInvalidArgument,
          "class index " + std::to_string(class_index) + " out of range [0, " +
              std::to_string(model.num_classes()) + ")");
  const ForwardTrace trace = Forward(model, input);
  Tensor seed(trace.logits.shape());
  seed[class_index] = 1.0f;
  return std::move(Backward(model, trace, seed, rule).front());
}

}  // namespace mprt
