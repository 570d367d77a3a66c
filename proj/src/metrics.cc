#include "mprt/metrics.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>

#include "mprt/parallel.h"

namespace mprt {
namespace {

constexpr std::uint64_t kNoiseTag = 0x6e6f697365;

std::uint64_t ExplainSeed(std::uint64_t seed, std::size_t sample, std::size_t draw, std::size_t stage) {
  return DeriveSeed(seed, {sample, draw, stage});
}

// Stage index that seeds the explanation: RandomBaseline gets a fresh draw
// per stage when redrawing, every other method reuses the stage-0 seed.
std::size_t SeedStage(MethodId method, bool redraw, std::size_t stage) {
  return method == MethodId::kRandomBaseline && redraw ? stage : 0;
}

Tensor SignPreprocessed(const Model& model, const Tensor& input, int cls, const MethodConfig& explainer,
                        std::uint64_t seed) {
  return Preprocess(Explain(model, input, cls, explainer, seed), {}).values;
}

StageScore Summarise(std::string label, const std::vector<double>& values) {
  StageScore s;
  s.stage_label = std::move(label);
  s.n = values.size();
  if (values.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

struct SampleOutcome {
  std::vector<std::optional<double>> scores;
  std::vector<SampleFailure> failures;
};

using StageExplainer = std::function<Tensor(std::size_t stage)>;

// Shared MPRT/sMPRT loop: explain(stage) yields the sign-processed (and for
// sMPRT averaged) attribution; normalisation and similarity happen here.
MprtResult RunSimilarityCurve(MetricId metric, const std::vector<ModelState>& states, const RandomisationPlan& plan,
                              const Dataset& dataset, const MethodConfig& explainer, const MprtOptions& options,
                              const std::function<StageExplainer(std::size_t sample)>& make_explainer) {
  Require(!states.empty(), ErrorCode::kInvalidArgument, "no model states to evaluate");
  Require(!dataset.empty(), ErrorCode::kInvalidArgument, "empty dataset");
  explainer.Validate();
  const std::size_t stages = states.size();
  std::vector<SampleOutcome> outcomes(dataset.size());
  ParallelFor(dataset.size(), options.threads, [&](std::size_t i) {
    SampleOutcome& out = outcomes[i];
    out.scores.assign(stages, std::nullopt);
    const StageExplainer explain = make_explainer(i);
    auto prepare = [&](std::size_t s) {
      Tensor e = explain(s);
      return options.normalise ? NormaliseSecondMoment(e) : e;
    };
    Tensor original;
    try {
      original = prepare(0);
      out.scores[0] = Similarity(options.similarity, original, original);
    } catch (const Error& err) {
      out.failures.push_back({i, states[0].stage_label, err.code(), err.what()});
      return;
    }
    for (std::size_t s = 1; s < stages; ++s) {
      try {
        out.scores[s] = Similarity(options.similarity, original, prepare(s));
      } catch (const Error& err) {
        out.failures.push_back({i, states[s].stage_label, err.code(), err.what()});
      }
    }
  });

  MprtResult result;
  result.curve.metric = metric;
  result.curve.method = explainer.method;
  result.curve.plan = plan;
  for (std::size_t s = 0; s < stages; ++s) {
    std::vector<double> values;
    for (const auto& out : outcomes)
      if (out.scores[s]) values.push_back(*out.scores[s]);
    result.curve.stages.push_back(Summarise(states[s].stage_label, values));
  }
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& final_score = outcomes[i].scores.back();
    if (final_score) result.estimates.push_back({*final_score, metric, explainer.method, i, options.seed});
    for (const auto& f : outcomes[i].failures) result.failures.push_back(f);
  }
  return result;
}

}  // namespace

std::string_view MetricName(MetricId metric) {
  switch (metric) {
    case MetricId::kMprt: return "MPRT";
    case MetricId::kSmprt: return "sMPRT";
    case MetricId::kEmprt: return "eMPRT";
  }
  return "unknown";
}

std::optional<MetricId> ParseMetric(std::string_view name) {
  for (auto m : {MetricId::kMprt, MetricId::kSmprt, MetricId::kEmprt})
    if (MetricName(m) == name) return m;
  return std::nullopt;
}

Orientation MetricOrientation(MetricId metric) {
  return metric == MetricId::kEmprt ? Orientation::kHigherIsBetter : Orientation::kLowerIsBetter;
}

MprtResult RunMprt(const std::vector<ModelState>& states, const RandomisationPlan& plan, const Dataset& dataset,
                   const MethodConfig& explainer, const MprtOptions& options) {
  return RunSimilarityCurve(MetricId::kMprt, states, plan, dataset, explainer, options, [&](std::size_t i) {
    return StageExplainer([&, i](std::size_t s) {
      const std::uint64_t seed =
          ExplainSeed(options.seed, i, 0, SeedStage(explainer.method, options.redraw_random_baseline, s));
      return SignPreprocessed(states[s].model, dataset.inputs[i], dataset.labels[i], explainer, seed);
    });
  });
}

MprtResult RunMprt(const Model& model, const Dataset& dataset, const MethodConfig& explainer,
                   const RandomisationPlan& plan, const MprtOptions& options) {
  return RunMprt(RandomiseLayers(model, plan), plan, dataset, explainer, options);
}

MprtResult RunSmprt(const std::vector<ModelState>& states, const RandomisationPlan& plan, const Dataset& dataset,
                    const MethodConfig& explainer, const MprtOptions& options, const SmprtOptions& smooth) {
  Require(smooth.num_samples >= 1, ErrorCode::kInvalidArgument, "sMPRT needs N >= 1");
  Require(smooth.noise_level >= 0.0, ErrorCode::kInvalidArgument, "sMPRT noise level must be >= 0");
  const std::size_t draws = static_cast<std::size_t>(smooth.num_samples);
  auto make = [&](std::size_t i) {
    const Tensor& x = dataset.inputs[i];
    const double sigma = smooth.noise_level * (static_cast<double>(x.Max()) - x.Min());
    // The same noisy copies serve every stage.
    auto noisy = std::make_shared<std::vector<Tensor>>();
    for (std::size_t j = 0; j < draws; ++j) {
      Tensor copy = x;
      if (sigma > 0) {
        Rng rng(DeriveSeed(options.seed, {i, j, kNoiseTag}));
        for (float& v : copy.values()) v = static_cast<float>(v + rng.Normal(0.0, sigma));
      }
      noisy->push_back(std::move(copy));
    }
    return StageExplainer([&, i, noisy](std::size_t s) {
      std::vector<double> sum;
      Shape shape;
      for (std::size_t j = 0; j < draws; ++j) {
        const std::uint64_t seed =
            ExplainSeed(options.seed, i, j, SeedStage(explainer.method, options.redraw_random_baseline, s));
        const Tensor e = SignPreprocessed(states[s].model, (*noisy)[j], dataset.labels[i], explainer, seed);
        if (sum.empty()) {
          sum.assign(e.size(), 0.0);
          shape = e.shape();
        }
        for (std::size_t k = 0; k < e.size(); ++k) sum[k] += e.data()[k];
      }
      Tensor mean(shape);
      for (std::size_t k = 0; k < sum.size(); ++k)
        mean.data()[k] = static_cast<float>(sum[k] / static_cast<double>(draws));
      return mean;
    });
  };
  return RunSimilarityCurve(MetricId::kSmprt, states, plan, dataset, explainer, options, make);
}

MprtResult RunSmprt(const Model& model, const Dataset& dataset, const MethodConfig& explainer,
                    const RandomisationPlan& plan, const MprtOptions& options, const SmprtOptions& smooth) {
  return RunSmprt(RandomiseLayers(model, plan), plan, dataset, explainer, options, smooth);
}

std::string_view AggregationName(Aggregation aggregation) {
  return aggregation == Aggregation::kMean ? "mean" : "median";
}

std::optional<Aggregation> ParseAggregation(std::string_view name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "median") return Aggregation::kMedian;
  return std::nullopt;
}

double EmprtScore(double xi_original, double xi_randomised) {
  Require(xi_original != 0.0, ErrorCode::kDegenerateComplexity,
          "original attribution has zero complexity (constant attribution)");
  return (xi_randomised - xi_original) / xi_original;
}

EmprtResult RunEmprt(const std::vector<ModelState>& states, const RandomisationPlan& plan, const Dataset& dataset,
                     const MethodConfig& explainer, const EmprtOptions& options) {
  Require(states.size() >= 2, ErrorCode::kInvalidArgument, "eMPRT needs an original and a randomised state");
  Require(!dataset.empty(), ErrorCode::kInvalidArgument, "empty dataset");
  explainer.Validate();
  const std::size_t stages = states.size();
  struct Outcome {
    std::vector<std::optional<double>> xi;
    std::vector<std::optional<double>> model_entropy;
    std::optional<double> score;
    std::vector<SampleFailure> failures;
    bool degenerate = false;
  };
  std::vector<Outcome> outcomes(dataset.size());
  ParallelFor(dataset.size(), options.threads, [&](std::size_t i) {
    Outcome& out = outcomes[i];
    out.xi.assign(stages, std::nullopt);
    out.model_entropy.assign(stages, std::nullopt);
    const Tensor& x = dataset.inputs[i];
    for (std::size_t s = 0; s < stages; ++s) {
      if (!options.curve && s != 0 && s != stages - 1) continue;
      try {
        if (options.curve)
          out.model_entropy[s] = ModelOutputEntropy(Forward(states[s].model, x).probabilities.values());
        const std::uint64_t seed =
            ExplainSeed(options.seed, i, 0, SeedStage(explainer.method, options.redraw_random_baseline, s));
        out.xi[s] = HistogramEntropy(SignPreprocessed(states[s].model, x, dataset.labels[i], explainer, seed).values(),
                                     options.histogram);
      } catch (const Error& err) {
        out.failures.push_back({i, states[s].stage_label, err.code(), err.what()});
        if (s == 0) return;
      }
    }
    if (!out.xi.front() || !out.xi.back()) return;
    try {
      out.score = EmprtScore(*out.xi.front(), *out.xi.back());
    } catch (const Error& err) {
      out.degenerate = true;
      out.failures.push_back({i, states.back().stage_label, err.code(), err.what()});
    }
  });

  EmprtResult result;
  std::vector<double> values;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].score) {
      result.estimates.push_back({*outcomes[i].score, MetricId::kEmprt, explainer.method, i, options.seed});
      values.push_back(*outcomes[i].score);
    }
    if (outcomes[i].degenerate) ++result.degenerate;
    for (const auto& f : outcomes[i].failures) result.failures.push_back(f);
  }
  result.aggregate = Aggregate(values, options.aggregation);
  if (options.curve) {
    CurveResult curve;
    curve.metric = MetricId::kEmprt;
    curve.method = explainer.method;
    curve.plan = plan;
    for (std::size_t s = 0; s < stages; ++s) {
      std::vector<double> xi, entropy;
      for (const auto& out : outcomes) {
        if (out.xi[s]) xi.push_back(*out.xi[s]);
        if (out.model_entropy[s]) entropy.push_back(*out.model_entropy[s]);
      }
      curve.stages.push_back(Summarise(states[s].stage_label, xi));
      result.model_entropy.push_back(Summarise(states[s].stage_label, entropy));
    }
    result.complexity_curve = std::move(curve);
  }
  return result;
}

EmprtResult RunEmprt(const Model& model, const Dataset& dataset, const MethodConfig& explainer,
                     const RandomisationPlan& plan, const EmprtOptions& options) {
  RandomisationPlan effective = plan;
  effective.order = options.curve ? RandomisationOrder::kBottomUp : RandomisationOrder::kFullOnly;
  return RunEmprt(RandomiseLayers(model, effective), effective, dataset, explainer, options);
}

double Aggregate(std::span<const double> values, Aggregation aggregation) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (aggregation == Aggregation::kMean)
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  return sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

double MeanEstimate(const std::vector<QualityEstimate>& estimates) {
  std::vector<double> values;
  for (const auto& e : estimates) values.push_back(e.value);
  return Aggregate(values, Aggregation::kMean);
}

double CurveAuc(std::span<const double> means) {
  Require(means.size() >= 2, ErrorCode::kInvalidArgument, "AUC needs at least two stages");
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < means.size(); ++i) area += 0.5 * (means[i] + means[i + 1]);
  return area;
}

double CurveAuc(const CurveResult& curve) {
  std::vector<double> means;
  for (const auto& s : curve.stages) means.push_back(s.mean);
  return CurveAuc(means);
}

std::vector<RankedMethod> RankMethods(const std::vector<std::pair<MethodId, double>>& scores, MetricId metric) {
  Require(scores.size() >= 2, ErrorCode::kInvalidArgument, "ranking needs at least two methods");
  std::vector<RankedMethod> ranked;
  for (const auto& [method, score] : scores) {
    Require(std::isfinite(score), ErrorCode::kNonFinite,
            "non-finite score for " + std::string(MethodName(method)));
    ranked.push_back({method, score, 0, false});
  }
  const bool descending = MetricOrientation(metric) == Orientation::kHigherIsBetter;
  std::sort(ranked.begin(), ranked.end(), [&](const RankedMethod& a, const RankedMethod& b) {
    if (a.score != b.score) return descending ? a.score > b.score : a.score < b.score;
    return MethodName(a.method) < MethodName(b.method);
  });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    ranked[i].rank = static_cast<int>(i) + 1;
    if ((i > 0 && ranked[i - 1].score == ranked[i].score) ||
        (i + 1 < ranked.size() && ranked[i + 1].score == ranked[i].score))
      ranked[i].tied = true;
  }
  return ranked;
}

}  // namespace mprt
