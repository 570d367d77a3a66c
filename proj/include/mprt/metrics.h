#ifndef MPRT_METRICS_H_
#define MPRT_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mprt/attribution.h"
#include "mprt/dataset.h"
#include "mprt/entropy.h"
#include "mprt/error.h"
#include "mprt/randomisation.h"
#include "mprt/similarity.h"

namespace mprt {

enum class MetricId { kMprt, kSmprt, kEmprt };

std::string_view MetricName(MetricId metric);  // "MPRT", "sMPRT", "eMPRT"
std::optional<MetricId> ParseMetric(std::string_view name);

enum class Orientation { kHigherIsBetter, kLowerIsBetter };

// eMPRT rewards a rise in complexity; MPRT and sMPRT reward low similarity.
Orientation MetricOrientation(MetricId metric);

struct StageScore {
  std::string stage_label;
  double mean = 0.0;
  double std = 0.0;  // Sample standard deviation; 0 when n < 2.
  std::size_t n = 0;
};

struct CurveResult {
  MetricId metric = MetricId::kMprt;
  MethodId method = MethodId::kGradient;
  std::vector<StageScore> stages;
  RandomisationPlan plan;
};

struct QualityEstimate {
  double value = 0.0;
  MetricId metric = MetricId::kMprt;
  MethodId method = MethodId::kGradient;
  std::size_t sample_id = 0;
  std::uint64_t seed = 0;
};

struct SampleFailure {
  std::size_t sample_id = 0;
  std::string stage_label;
  ErrorCode code = ErrorCode::kInvalidArgument;
  std::string message;
};

struct MprtOptions {
  SimilarityFn similarity = SimilarityFn::kSsim;
  bool normalise = true;
  // RandomBaseline draws a fresh attribution at every stage. With this off it
  // reuses the original draw and trivially scores 1.
  bool redraw_random_baseline = true;
  std::uint64_t seed = 0;  // Explanation seed (RandomBaseline, SmoothGrad, ...).
  int threads = 1;
};

struct SmprtOptions {
  int num_samples = 50;
  double noise_level = 0.2;  // Noise std as a fraction of x_max - x_min.
};

struct MprtResult {
  CurveResult curve;
  // One per sample: similarity at the last (fully randomised) stage.
  std::vector<QualityEstimate> estimates;
  std::vector<SampleFailure> failures;
};

// Explains every sample at its label. Stage 0 of `states` must be the
// original model. A sample whose original explanation fails is dropped from
// every stage; later failures only drop that stage.
MprtResult RunMprt(const std::vector<ModelState>& states, const RandomisationPlan& plan, const Dataset& dataset,
                   const MethodConfig& explainer, const MprtOptions& options = {});
MprtResult RunMprt(const Model& model, const Dataset& dataset, const MethodConfig& explainer,
                   const RandomisationPlan& plan, const MprtOptions& options = {});

MprtResult RunSmprt(const std::vector<ModelState>& states, const RandomisationPlan& plan, const Dataset& dataset,
                    const MethodConfig& explainer, const MprtOptions& options, const SmprtOptions& smooth);
MprtResult RunSmprt(const Model& model, const Dataset& dataset, const MethodConfig& explainer,
                    const RandomisationPlan& plan, const MprtOptions& options = {}, const SmprtOptions& smooth = {});

enum class Aggregation { kMean, kMedian };

std::string_view AggregationName(Aggregation aggregation);
std::optional<Aggregation> ParseAggregation(std::string_view name);

struct EmprtOptions {
  HistogramOptions histogram;
  // Also explain every BottomUp stage and record complexity and model output
  // entropy per stage.
  bool curve = false;
  Aggregation aggregation = Aggregation::kMean;
  bool redraw_random_baseline = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct EmprtResult {
  std::vector<QualityEstimate> estimates;
  std::vector<SampleFailure> failures;
  std::size_t degenerate = 0;  // Samples with constant original attribution.
  double aggregate = 0.0;      // Mean or median of estimates; NaN when none.
  std::optional<CurveResult> complexity_curve;
  std::vector<StageScore> model_entropy;  // Bits, per curve stage.
};

// (xi_randomised - xi_original) / xi_original. Throws kDegenerateComplexity
// when xi_original is 0.
double EmprtScore(double xi_original, double xi_randomised);

// The plan supplies reinit rule and seed; its order is ignored (FullOnly for
// the score, BottomUp for the curve).
EmprtResult RunEmprt(const Model& model, const Dataset& dataset, const MethodConfig& explainer,
                     const RandomisationPlan& plan, const EmprtOptions& options = {});
// Scores against states.front() and states.back().
EmprtResult RunEmprt(const std::vector<ModelState>& states, const RandomisationPlan& plan, const Dataset& dataset,
                     const MethodConfig& explainer, const EmprtOptions& options = {});

double Aggregate(std::span<const double> values, Aggregation aggregation);
double MeanEstimate(const std::vector<QualityEstimate>& estimates);

inline constexpr std::string_view kAucOrientation = "lower_is_more_faithful";

// Trapezoidal area under the stage means with unit spacing.
double CurveAuc(const CurveResult& curve);
double CurveAuc(std::span<const double> means);

struct RankedMethod {
  MethodId method = MethodId::kGradient;
  double score = 0.0;
  int rank = 0;  // 1 is best.
  bool tied = false;
};

std::vector<RankedMethod> RankMethods(const std::vector<std::pair<MethodId, double>>& scores, MetricId metric);

}  // namespace mprt

#endif  // MPRT_METRICS_H_
