#ifndef MPRT_CONFIG_H_
#define MPRT_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mprt/attribution.h"
#include "mprt/dataset.h"
#include "mprt/entropy.h"
#include "mprt/metaeval.h"
#include "mprt/metrics.h"
#include "mprt/randomisation.h"
#include "mprt/similarity.h"
#include "mprt/train.h"

namespace mprt {

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "idx"
  SyntheticSpec synthetic;
  std::string train_images, train_labels, test_images, test_labels;  // IDX paths.
};

// Hyperparameters shared by every method; SmoothGrad and GradientSHAP draw
// different sample counts.
struct MethodParams {
  int ig_steps = 20;
  int smoothgrad_samples = 20;
  int shap_samples = 5;
  double noise_level = 0.1;
  double epsilon = 1e-6;

  MethodConfig For(MethodId method) const;
};

// Explicit seeds win; absent ones derive from the base seed.
struct SeedConfig {
  std::optional<std::uint64_t> data, train, randomisation, explain, metaeval;
};

struct ResolvedSeeds {
  std::uint64_t data = 0, train = 0, randomisation = 0, explain = 0, metaeval = 0;
};

struct SmprtConfig {
  int num_samples = 50;
  double noise_level = 0.2;
  std::vector<MethodId> methods;  // Empty: the experiment method list.
  std::size_t samples = 50;       // Test samples for the curves.
  // AUC against N for one method on every model; empty list disables.
  MethodId convergence_method = MethodId::kGradient;
  std::vector<int> convergence_n = {1, 50, 300};
  std::size_t convergence_samples = 50;
};

struct EmprtConfig {
  HistogramOptions histogram;
  bool curve = true;
  Aggregation aggregation = Aggregation::kMean;
};

struct BinChangeConfig {
  MethodId method = MethodId::kLrpEpsilon;
  int bins = 100;
  std::size_t samples = 20;
  std::vector<int> layers;  // 1-based; empty: every parameterised layer.
};

struct MetaEvalSettings {
  std::map<std::string, std::vector<MethodId>> method_sets;
  std::vector<MetricId> metrics = {MetricId::kMprt, MetricId::kEmprt};
  std::size_t samples = 50;
  MetaEvalConfig perturbation;  // k, iterations, severities; seed comes from SeedConfig.
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir = "out";
  DatasetConfig dataset;
  std::vector<TrainConfig> models;
  std::vector<MethodId> methods;
  MethodParams method_params;
  std::vector<MetricId> metrics = {MetricId::kMprt, MetricId::kSmprt, MetricId::kEmprt};
  std::size_t eval_samples = 100;
  SeedConfig seeds;
  std::vector<RandomisationOrder> orders = {RandomisationOrder::kBottomUp, RandomisationOrder::kTopDown};
  ReinitRule reinit = ReinitRule::kScaledNormal;
  bool cumulative = true;
  MprtOptions mprt;  // seed and threads are filled from the experiment.
  SmprtConfig smprt;
  EmprtConfig emprt;
  BinChangeConfig bin_change;
  MetaEvalSettings metaeval;

  // Built-in defaults: LeNet and mini-ResNet, all methods, method sets M4 and
  // M3 for meta-evaluation.
  static ExperimentConfig Default();
  ResolvedSeeds Seeds() const;
  void Validate() const;
};

// Strict parsing: unknown keys and unknown enum names are errors. Missing
// keys keep their defaults.
ExperimentConfig ParseConfig(std::string_view json_text);
ExperimentConfig LoadConfig(const std::string& path);

// Canonical JSON of the fully resolved config (sorted keys, seeds resolved).
// output_dir and threads are left out because they do not change results.
std::string CanonicalConfigJson(const ExperimentConfig& config);
// FNV-1a 64 of the canonical JSON as 16 hex digits.
std::string ConfigHash(const ExperimentConfig& config);
std::uint64_t Fnv1a64(std::string_view bytes);

}  // namespace mprt

#endif  // MPRT_CONFIG_H_
