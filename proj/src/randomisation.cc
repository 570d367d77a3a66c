#include "mprt/randomisation.h"

#include <algorithm>
#include <cmath>

#include "mprt/architectures.h"
#include "mprt/error.h"
#include "mprt/lrp.h"
#include "mprt/train.h"

namespace mprt {
namespace {

double PopulationStd(const Tensor& t) {
  if (t.empty()) return 0.0;
  double mean = 0.0;
  for (float v : t.values()) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (float v : t.values()) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(t.size()));
}

void RandomiseLayer(Model& model, std::size_t pos, const RandomisationPlan& plan,
                    std::vector<std::string>& warnings) {
  Rng rng(DeriveSeed(plan.seed, {static_cast<std::uint64_t>(Model::IndexOf(pos))}));
  const Layer& l = model.layer(pos);
  ReinitResult w = ReinitParams(l.weights, plan.reinit, rng);
  if (w.fell_back)
    warnings.push_back(model.LayerName(pos) + ": zero-variance weights, fell back to kaiming_uniform");
  Tensor bias(l.bias.shape());
  const double bias_std = PopulationStd(l.bias);
  if (plan.reinit == ReinitRule::kScaledNormal && !w.fell_back && bias_std > 0)
    for (float& v : bias.values()) v = static_cast<float>(rng.Normal(0.0, bias_std));
  model.SetParams(pos, std::move(w.values), std::move(bias));
}

}  // namespace

std::string_view OrderName(RandomisationOrder order) {
  switch (order) {
    case RandomisationOrder::kTopDown: return "TopDown";
    case RandomisationOrder::kBottomUp: return "BottomUp";
    case RandomisationOrder::kFullOnly: return "FullOnly";
  }
  return "Unknown";
}

std::optional<RandomisationOrder> ParseOrder(std::string_view name) {
  for (auto o : {RandomisationOrder::kTopDown, RandomisationOrder::kBottomUp, RandomisationOrder::kFullOnly})
    if (OrderName(o) == name) return o;
  return std::nullopt;
}

std::string_view ReinitName(ReinitRule rule) {
  return rule == ReinitRule::kScaledNormal ? "ScaledNormal" : "KaimingUniform";
}

std::optional<ReinitRule> ParseReinit(std::string_view name) {
  for (auto r : {ReinitRule::kScaledNormal, ReinitRule::kKaimingUniform})
    if (ReinitName(r) == name) return r;
  return std::nullopt;
}

ReinitResult ReinitParams(const Tensor& weights, ReinitRule rule, Rng& rng) {
  Require(!weights.empty(), ErrorCode::kInvalidArgument, "cannot re-initialise empty weights");
  ReinitResult out;
  const double sd = rule == ReinitRule::kScaledNormal ? PopulationStd(weights) : 0.0;
  if (rule == ReinitRule::kKaimingUniform || sd == 0.0) {
    out.fell_back = rule == ReinitRule::kScaledNormal;
    out.values = KaimingUniform(weights.shape(), rng);
    return out;
  }
  out.values = Tensor(weights.shape());
  for (float& v : out.values.values()) v = static_cast<float>(rng.Normal(0.0, sd));
  return out;
}

std::vector<ModelState> RandomiseLayers(const Model& model, const RandomisationPlan& plan) {
  Require(plan.cumulative, ErrorCode::kUnsupported, "only cumulative randomisation is implemented");
  std::vector<std::size_t> order = model.ParameterisedPositions();
  Require(!order.empty(), ErrorCode::kInvalidArgument, "model has no parameterised layers");
  if (plan.order == RandomisationOrder::kTopDown) std::reverse(order.begin(), order.end());

  auto stamp = [&plan](ModelState state) {
    Metadata& meta = state.model.mutable_metadata();
    meta["randomisation_order"] = std::string(OrderName(plan.order));
    meta["randomisation_reinit"] = std::string(ReinitName(plan.reinit));
    meta["randomisation_seed"] = std::to_string(plan.seed);
    meta["randomisation_stage"] = state.stage_label;
    return state;
  };
  std::vector<ModelState> states;
  ModelState current{model, {}, "orig", {}};
  states.push_back(stamp(current));
  for (std::size_t i = 0; i < order.size(); ++i) {
    RandomiseLayer(current.model, order[i], plan, current.warnings);
    current.randomised_layers.push_back(Model::IndexOf(order[i]));
    std::sort(current.randomised_layers.begin(), current.randomised_layers.end());
    const bool last = i + 1 == order.size();
    if (plan.order == RandomisationOrder::kFullOnly && !last) continue;
    current.stage_label = last ? "final" : model.LayerName(order[i]);
    states.push_back(stamp(current));
  }
  return states;
}

std::vector<StageAccuracy> AccuracyUnderRandomisation(const std::vector<ModelState>& states,
                                                      const Dataset& dataset) {
  Require(!dataset.empty(), ErrorCode::kInvalidArgument, "accuracy needs a non-empty dataset");
  std::vector<StageAccuracy> out;
  for (const ModelState& s : states) out.push_back({s.stage_label, Accuracy(s.model, dataset), dataset.size()});
  return out;
}

namespace {

Tensor IntermediateExplanation(const Model& model, const Tensor& input, int label, std::size_t pos, LrpRule rule,
                               double epsilon) {
  const ForwardTrace trace = Forward(model, input);
  Tensor start;
  if (pos == model.logit_position()) {
    start = Tensor(trace.logits.shape());
    start[label] = trace.logits[label];
  } else {
    start = trace.activations[pos];
  }
  return PropagateRelevance(model, trace, pos, std::move(start), rule, epsilon);
}

}  // namespace

BinChangeTable BinChangeAnalysis(const Model& model, int layer_index, const MethodConfig& explainer,
                                 const Dataset& dataset, const RandomisationPlan& plan, int bins) {
  Require(explainer.method == MethodId::kLrpEpsilon || explainer.method == MethodId::kLrpZPlus,
          ErrorCode::kInvalidArgument, "intermediate explanations are defined for LRP methods only");
  Require(layer_index >= 1 && static_cast<std::size_t>(layer_index) <= model.logit_position() + 1,
          ErrorCode::kInvalidArgument, "layer index " + std::to_string(layer_index) + " out of range");
  Require(plan.order != RandomisationOrder::kFullOnly, ErrorCode::kInvalidArgument,
          "bin-change analysis randomises a single layer: use TopDown or BottomUp");
  Require(bins >= 1 && !dataset.empty(), ErrorCode::kInvalidArgument, "need >= 1 bin and a non-empty dataset");
  const std::size_t pos = static_cast<std::size_t>(layer_index - 1);
  const LrpRule rule = explainer.method == MethodId::kLrpEpsilon ? LrpRule::kEpsilon : LrpRule::kZPlus;

  const std::vector<ModelState> states = RandomiseLayers(model, plan);
  const Model& randomised = states.at(1).model;

  std::vector<float> original, changed;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Tensor e = IntermediateExplanation(model, dataset.inputs[i], dataset.labels[i], pos, rule, explainer.epsilon);
    const Tensor e_hat =
        IntermediateExplanation(randomised, dataset.inputs[i], dataset.labels[i], pos, rule, explainer.epsilon);
    for (std::size_t j = 0; j < e.size(); ++j) {
      original.push_back(std::fabs(e[j]));
      changed.push_back(std::fabs(e_hat[j] - e[j]));
    }
  }

  BinChangeTable table;
  table.layer_index = layer_index;
  table.order = plan.order;
  table.max_abs = *std::max_element(original.begin(), original.end());
  const double width = table.max_abs / bins;
  std::vector<double> sums(bins, 0.0);
  std::vector<std::size_t> counts(bins, 0);
  double total = 0.0;
  for (std::size_t j = 0; j < original.size(); ++j) {
    int b = table.max_abs > 0 ? static_cast<int>(original[j] / table.max_abs * bins) : 0;
    b = std::clamp(b, 0, bins - 1);
    sums[b] += changed[j];
    ++counts[b];
    total += changed[j];
  }
  table.overall_mean_change = total / static_cast<double>(original.size());
  for (int b = 0; b < bins; ++b) {
    BinChangeRow row;
    row.bin = b;
    row.lower = b * width;
    row.upper = (b + 1) * width;
    row.count = counts[b];
    if (counts[b] > 0) row.mean_abs_change = sums[b] / static_cast<double>(counts[b]);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace mprt
