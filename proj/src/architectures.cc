#include "mprt/architectures.h"

#include <cmath>

#include "mprt/error.h"

namespace mprt {

std::string_view ArchitectureName(Architecture arch) {
  return arch == Architecture::kLeNet ? "lenet" : "mini_resnet";
}

std::optional<Architecture> ParseArchitecture(std::string_view name) {
  if (name == "lenet") return Architecture::kLeNet;
  if (name == "mini_resnet") return Architecture::kMiniResNet;
  return std::nullopt;
}

Model BuildModel(Architecture arch, const Shape& input_shape, int num_classes) {
  Require(input_shape.size() == 3 && input_shape[1] % 4 == 0 && input_shape[2] % 4 == 0 &&
              input_shape[1] >= 8 && input_shape[2] >= 8,
          ErrorCode::kInvalidArgument,
          "architectures need [C, H, W] inputs with H, W >= 8 and divisible by 4, got " +
              ShapeString(input_shape));
  const int c = input_shape[0];
  const int flat = (input_shape[1] / 4) * (input_shape[2] / 4);
  std::vector<Layer> layers;
  if (arch == Architecture::kLeNet) {
    layers.push_back(Layer::Conv2D(c, 6, 3, 1));
    layers.push_back(Layer::Of(LayerKind::kReLU));
    layers.push_back(Layer::MaxPool(2));
    layers.push_back(Layer::Conv2D(6, 12, 3, 1));
    layers.push_back(Layer::Of(LayerKind::kReLU));
    layers.push_back(Layer::MaxPool(2));
    layers.push_back(Layer::Of(LayerKind::kFlatten));
    layers.push_back(Layer::Dense(12 * flat, 32));
    layers.push_back(Layer::Of(LayerKind::kReLU));
    layers.push_back(Layer::Dense(32, num_classes));
  } else {
    layers.push_back(Layer::Conv2D(c, 8, 3, 1));
    layers.push_back(Layer::Of(LayerKind::kReLU));
    layers.push_back(Layer::MaxPool(2));
    layers.push_back(Layer::Of(LayerKind::kSkipBegin));
    layers.push_back(Layer::Conv2D(8, 8, 3, 1));
    layers.push_back(Layer::Of(LayerKind::kReLU));
    layers.push_back(Layer::Conv2D(8, 8, 3, 1));
    layers.push_back(Layer::Of(LayerKind::kSkipEnd));
    layers.push_back(Layer::Of(LayerKind::kReLU));
    layers.push_back(Layer::MaxPool(2));
    layers.push_back(Layer::Of(LayerKind::kFlatten));
    layers.push_back(Layer::Dense(8 * flat, 32));
    layers.push_back(Layer::Of(LayerKind::kReLU));
    layers.push_back(Layer::Dense(32, num_classes));
  }
  Metadata meta{{"architecture", std::string(ArchitectureName(arch))}};
  return Model(input_shape, num_classes, std::move(layers), std::move(meta));
}

int FanIn(const Shape& weight_shape) {
  Require(weight_shape.size() == 2 || weight_shape.size() == 4, ErrorCode::kInvalidArgument,
          "fan-in needs dense or conv weights");
  int fan_in = weight_shape[1];
  if (weight_shape.size() == 4) fan_in *= weight_shape[2] * weight_shape[3];
  return fan_in;
}

Tensor KaimingUniform(const Shape& weight_shape, Rng& rng) {
  const double bound = std::sqrt(6.0 / FanIn(weight_shape));
  Tensor w(weight_shape);
  for (float& v : w.values()) v = static_cast<float>(rng.Uniform(-bound, bound));
  return w;
}

void InitializeParameters(Model& model, std::uint64_t seed) {
  for (std::size_t pos : model.ParameterisedPositions()) {
    Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(Model::IndexOf(pos))}));
    const Layer& l = model.layer(pos);
    model.SetParams(pos, KaimingUniform(l.weights.shape(), rng), Tensor(l.bias.shape()));
  }
  model.mutable_metadata()["init"] = "kaiming_uniform_fan_in/zero_bias";
  model.mutable_metadata()["init_seed"] = std::to_string(seed);
}

}  // namespace mprt
