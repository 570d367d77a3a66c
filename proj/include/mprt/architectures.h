#ifndef MPRT_ARCHITECTURES_H_
#define MPRT_ARCHITECTURES_H_

#include <cstdint>
#include <optional>
#include <string_view>

#include "mprt/model.h"
#include "mprt/rng.h"

namespace mprt {

enum class Architecture {
  // conv-relu-pool x2, dense-relu-dense.
  kLeNet,
  // conv-relu-pool, one residual block of two convs, relu-pool, dense-relu-dense.
  kMiniResNet,
};

std::string_view ArchitectureName(Architecture arch);
std::optional<Architecture> ParseArchitecture(std::string_view name);

// Builds the layer stack with zero parameters. input_shape is [C, H, W] with
// H and W divisible by 4.
Model BuildModel(Architecture arch, const Shape& input_shape, int num_classes);

// Fan-in of a Dense ([out, in]) or Conv2D ([out, in, k, k]) weight tensor.
int FanIn(const Shape& weight_shape);

// He/Kaiming uniform: U(-b, b) with b = sqrt(6 / fan_in).
Tensor KaimingUniform(const Shape& weight_shape, Rng& rng);

// Kaiming-uniform weights and zero biases for every parameterised layer.
void InitializeParameters(Model& model, std::uint64_t seed);

}  // namespace mprt

#endif  // MPRT_ARCHITECTURES_H_
