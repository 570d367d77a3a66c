#ifndef MPRT_MODEL_H_
#define MPRT_MODEL_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mprt/tensor.h"

namespace mprt {

enum class LayerKind {
  kDense,
  kConv2D,
  kReLU,
  kMaxPool2D,
  kFlatten,
  kSkipBegin,
  kSkipEnd,
  kSoftmax,
};

std::string_view LayerKindName(LayerKind kind);
std::optional<LayerKind> ParseLayerKind(std::string_view name);

struct Layer {
  LayerKind kind = LayerKind::kReLU;
  // Dense: [out, in]. Conv2D: [out_channels, in_channels, k, k] (stride 1).
  Tensor weights;
  Tensor bias;
  int padding = 0;    // Conv2D only.
  int pool_size = 2;  // MaxPool2D window and stride.

  bool has_params() const { return kind == LayerKind::kDense || kind == LayerKind::kConv2D; }

  static Layer Dense(int in, int out);
  static Layer Conv2D(int in_channels, int out_channels, int kernel, int padding);
  static Layer Of(LayerKind kind);
  static Layer MaxPool(int size);
};

// Provenance such as training seed and accuracy. Ordered so that serialised
// output is deterministic.
using Metadata = std::map<std::string, std::string>;

// Feed-forward network f = f^L o ... o f^1. Layer indices are 1-based and
// follow list order. Shapes are checked once at construction; afterwards only
// parameter values may change (through SetParams / MutableParams) and only
// with the same shapes.
class Model {
 public:
  Model(Shape input_shape, int num_classes, std::vector<Layer> layers, Metadata metadata = {});

  const Shape& input_shape() const { return input_shape_; }
  int num_classes() const { return num_classes_; }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t pos) const { return layers_.at(pos); }

  // 1-based index of the layer at position pos.
  static int IndexOf(std::size_t pos) { return static_cast<int>(pos) + 1; }
  // Name such as "conv2d_3" used for stage labels and plots.
  std::string LayerName(std::size_t pos) const;

  const Shape& output_shape(std::size_t pos) const { return output_shapes_.at(pos); }
  // Position of the layer producing the logits (last non-softmax layer).
  std::size_t logit_position() const { return logit_pos_; }
  // Matching SkipEnd for a SkipBegin and vice versa; -1 otherwise.
  int skip_partner(std::size_t pos) const { return skip_partner_.at(pos); }
  // Positions of parameterised layers in forward order.
  std::vector<std::size_t> ParameterisedPositions() const;

  void SetParams(std::size_t pos, Tensor weights, Tensor bias);
  // Direct parameter access for optimisers; shape must not be changed.
  Tensor& MutableWeights(std::size_t pos);
  Tensor& MutableBias(std::size_t pos);

  const Metadata& metadata() const { return metadata_; }
  Metadata& mutable_metadata() { return metadata_; }

  std::size_t ParameterCount() const;
  bool SameParameters(const Model& other) const;

 private:
  void Validate();

  Shape input_shape_;
  int num_classes_;
  std::vector<Layer> layers_;
  Metadata metadata_;
  std::vector<Shape> output_shapes_;
  std::vector<int> skip_partner_;
  std::size_t logit_pos_ = 0;
};

struct ForwardTrace {
  Tensor input;
  // activations[pos] is the output of layer pos.
  std::vector<Tensor> activations;
  Tensor logits;
  Tensor probabilities;

  const Tensor& LayerInput(std::size_t pos) const { return pos == 0 ? input : activations[pos - 1]; }
};

ForwardTrace Forward(const Model& model, const Tensor& input);
Tensor Softmax(std::span<const float> logits);
int Predict(const Model& model, const Tensor& input);

enum class BackwardRule {
  kStandard,
  // ReLU passes signal only where both the forward input and the incoming
  // gradient are positive.
  kGuidedReLU,
};

// Per-position parameter gradients; entries for parameter-free layers stay
// empty.
struct ParamGrads {
  std::vector<Tensor> weights;
  std::vector<Tensor> bias;

  explicit ParamGrads(const Model& model);
  void Zero();
};

// Back-propagates output_grad (gradient w.r.t. the logits) through the model.
// Result has logit_position() + 2 entries: entry pos is the gradient w.r.t.
// the input of layer pos and the last entry is output_grad itself, so the
// gradient w.r.t. the output of layer pos is entry pos + 1. When params is
// non-null, parameter gradients are accumulated into it.
std::vector<Tensor> Backward(const Model& model, const ForwardTrace& trace,
                             const Tensor& output_grad, BackwardRule rule,
                             ParamGrads* params = nullptr);

// d logit[class_index] / d input.
Tensor InputGradient(const Model& model, const Tensor& input, int class_index,
                     BackwardRule rule = BackwardRule::kStandard);

}  // namespace mprt

#endif  // MPRT_MODEL_H_
