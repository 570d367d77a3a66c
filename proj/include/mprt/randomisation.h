#ifndef MPRT_RANDOMISATION_H_
#define MPRT_RANDOMISATION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mprt/attribution.h"
#include "mprt/dataset.h"
#include "mprt/model.h"
#include "mprt/rng.h"

namespace mprt {

enum class RandomisationOrder {
  kTopDown,   // Parameterised layers L, L-1, ..., 1.
  kBottomUp,  // Parameterised layers 1, 2, ..., L.
  kFullOnly,  // Original and fully randomised states only.
};

enum class ReinitRule {
  // N(0, std(original)^2) for weights and biases; keeps each layer's scale.
  kScaledNormal,
  // He uniform on fan-in for weights, zero biases.
  kKaimingUniform,
};

std::string_view OrderName(RandomisationOrder order);
std::optional<RandomisationOrder> ParseOrder(std::string_view name);
std::string_view ReinitName(ReinitRule rule);
std::optional<ReinitRule> ParseReinit(std::string_view name);

struct RandomisationPlan {
  RandomisationOrder order = RandomisationOrder::kBottomUp;
  // Earlier randomisations persist into later stages. Only cumulative plans
  // are supported.
  bool cumulative = true;
  ReinitRule reinit = ReinitRule::kScaledNormal;
  std::uint64_t seed = 0;
};

struct ModelState {
  Model model;
  std::vector<int> randomised_layers;  // 1-based layer indices, ascending.
  std::string stage_label;             // "orig", a layer name, or "final".
  std::vector<std::string> warnings;
};

struct ReinitResult {
  Tensor values;
  bool fell_back = false;  // ScaledNormal on zero-variance input used KaimingUniform.
};

ReinitResult ReinitParams(const Tensor& weights, ReinitRule rule, Rng& rng);

// First state is the untouched original. Each further state randomises the
// next parameterised layer in plan order on top of the previous state; the
// last one is labelled "final". Every layer draws from a stream derived from
// (plan.seed, layer index), so the fully randomised state is the same model
// for every order.
std::vector<ModelState> RandomiseLayers(const Model& model, const RandomisationPlan& plan);

struct StageAccuracy {
  std::string stage_label;
  double accuracy = 0.0;
  std::size_t n_samples = 0;
};

std::vector<StageAccuracy> AccuracyUnderRandomisation(const std::vector<ModelState>& states,
                                                      const Dataset& dataset);

struct BinChangeRow {
  int bin = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_abs_change;  // Empty bins stay empty.
};

struct BinChangeTable {
  int layer_index = 0;
  RandomisationOrder order = RandomisationOrder::kBottomUp;
  double max_abs = 0.0;
  std::vector<BinChangeRow> rows;

  // Mean |e_hat - e| over all values (not over bins).
  double overall_mean_change = 0.0;
};

// Intermediate LRP explanation e_l: relevance placed on the output of layer
// layer_index (its activations, or the target logit for the output layer)
// and propagated to the input. Values |e_l| pooled over the dataset are
// sorted into `bins` equal-width bins over [0, max |e_l|]; each bin reports
// mean |e_hat_l - e_l| after randomising only the first (BottomUp) or only
// the last (TopDown) parameterised layer.
BinChangeTable BinChangeAnalysis(const Model& model, int layer_index, const MethodConfig& explainer,
                                 const Dataset& dataset, const RandomisationPlan& plan, int bins = 100);

}  // namespace mprt

#endif  // MPRT_RANDOMISATION_H_
