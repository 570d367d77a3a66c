#include "mprt/metaeval.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mprt/parallel.h"
#include "mprt/train.h"

namespace mprt {
namespace {

constexpr std::uint64_t kScoreTag = 0x5c0e;

class MprtEstimator : public QualityEstimator {
 public:
  MprtEstimator(ReinitRule reinit, const MprtOptions& options, std::optional<SmprtOptions> smooth)
      : reinit_(reinit), options_(options), smooth_(smooth) {}

  MetricId metric() const override { return smooth_ ? MetricId::kSmprt : MetricId::kMprt; }

  ScoreMatrix Score(const Model& model, const Dataset& dataset, const std::vector<MethodConfig>& methods,
                    std::uint64_t seed) const override {
    const RandomisationPlan plan{RandomisationOrder::kFullOnly, true, reinit_, seed};
    const auto states = RandomiseLayers(model, plan);
    MprtOptions options = options_;
    options.seed = seed;
    ScoreMatrix out;
    for (const MethodConfig& method : methods) {
      const MprtResult r = smooth_ ? RunSmprt(states, plan, dataset, method, options, *smooth_)
                                   : RunMprt(states, plan, dataset, method, options);
      auto& row = out.emplace_back(dataset.size());
      for (const auto& e : r.estimates) row[e.sample_id] = e.value;
    }
    return out;
  }

 private:
  ReinitRule reinit_;
  MprtOptions options_;
  std::optional<SmprtOptions> smooth_;
};

class EmprtEstimator : public QualityEstimator {
 public:
  EmprtEstimator(ReinitRule reinit, const EmprtOptions& options) : reinit_(reinit), options_(options) {
    options_.curve = false;
  }

  MetricId metric() const override { return MetricId::kEmprt; }

  ScoreMatrix Score(const Model& model, const Dataset& dataset, const std::vector<MethodConfig>& methods,
                    std::uint64_t seed) const override {
    const RandomisationPlan plan{RandomisationOrder::kFullOnly, true, reinit_, seed};
    const auto states = RandomiseLayers(model, plan);
    EmprtOptions options = options_;
    options.seed = seed;
    ScoreMatrix out;
    for (const MethodConfig& method : methods) {
      const EmprtResult r = RunEmprt(states, plan, dataset, method, options);
      auto& row = out.emplace_back(dataset.size());
      for (const auto& e : r.estimates) row[e.sample_id] = e.value;
    }
    return out;
  }

 private:
  ReinitRule reinit_;
  EmprtOptions options_;
};

// Pairs (a[i], b[i]) where both are present.
void PairwiseComplete(const std::vector<std::optional<double>>& a, const std::vector<std::optional<double>>& b,
                      std::vector<double>* x, std::vector<double>* y) {
  x->clear();
  y->clear();
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] && b[i]) {
      x->push_back(*a[i]);
      y->push_back(*b[i]);
    }
  }
}

double MeanOf(const std::vector<std::optional<double>>& v, std::size_t* n) {
  double sum = 0.0;
  *n = 0;
  for (const auto& x : v)
    if (x) {
      sum += *x;
      ++*n;
    }
  return *n ? sum / static_cast<double>(*n) : 0.0;
}

int Sign(double v) { return (v > 0) - (v < 0); }

// Exact null distribution of W+ for n untied ranks: counts[w] subsets of
// {1..n} summing to w.
std::vector<double> WilcoxonCounts(int n) {
  const int max_sum = n * (n + 1) / 2;
  std::vector<double> counts(max_sum + 1, 0.0);
  counts[0] = 1.0;
  for (int r = 1; r <= n; ++r)
    for (int w = max_sum; w >= r; --w) counts[w] += counts[w - r];
  return counts;
}

MetaEvalVector MeanVector(const std::vector<MetaEvalVector>& vs) {
  MetaEvalVector m;
  for (const auto& v : vs) {
    m.iac_nr += v.iac_nr;
    m.iac_ar += v.iac_ar;
    m.iec_nr += v.iec_nr;
    m.iec_ar += v.iec_ar;
  }
  const double n = static_cast<double>(vs.size());
  m.iac_nr /= n;
  m.iac_ar /= n;
  m.iec_nr /= n;
  m.iec_ar /= n;
  return m;
}

void ValidateSpec(const PerturbationSpec& spec, PerturbationTest test) {
  Require(spec.test == test, ErrorCode::kInvalidArgument,
          std::string("perturbation spec is for ") + std::string(PerturbationTestName(spec.test)) + ", expected " +
              std::string(PerturbationTestName(test)));
}

}  // namespace

std::string_view PerturbationTestName(PerturbationTest test) {
  return test == PerturbationTest::kInput ? "IPT" : "MPT";
}

std::string_view SeverityName(Severity severity) { return severity == Severity::kMinor ? "NR" : "AR"; }

Dataset PerturbInputs(const Dataset& dataset, const PerturbationSpec& spec, int k) {
  ValidateSpec(spec, PerturbationTest::kInput);
  Require(spec.alpha <= spec.beta, ErrorCode::kInvalidArgument, "input perturbation needs alpha <= beta");
  Dataset out = dataset;
  if (spec.alpha == 0.0 && spec.beta == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Rng rng(DeriveSeed(spec.seed, {static_cast<std::uint64_t>(k), i}));
    for (float& v : out.inputs[i].values()) v = static_cast<float>(v + rng.Uniform(spec.alpha, spec.beta));
  }
  return out;
}

Model PerturbModel(const Model& model, const PerturbationSpec& spec, int k) {
  ValidateSpec(spec, PerturbationTest::kModel);
  Require(spec.sigma >= 0.0, ErrorCode::kInvalidArgument, "weight noise sigma must be >= 0");
  Model out = model;
  if (spec.mu == 1.0 && spec.sigma == 0.0) return out;
  for (std::size_t pos : out.ParameterisedPositions()) {
    Rng rng(DeriveSeed(spec.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(Model::IndexOf(pos))}));
    for (float& w : out.MutableWeights(pos).values()) w = static_cast<float>(w * rng.Normal(spec.mu, spec.sigma));
    for (float& b : out.MutableBias(pos).values()) b = static_cast<float>(b * rng.Normal(spec.mu, spec.sigma));
  }
  out.mutable_metadata()["perturbation"] = std::string(SeverityName(spec.severity));
  return out;
}

std::unique_ptr<QualityEstimator> MakeMprtEstimator(ReinitRule reinit, const MprtOptions& options) {
  return std::make_unique<MprtEstimator>(reinit, options, std::nullopt);
}

std::unique_ptr<QualityEstimator> MakeSmprtEstimator(ReinitRule reinit, const MprtOptions& options,
                                                     const SmprtOptions& smooth) {
  return std::make_unique<MprtEstimator>(reinit, options, smooth);
}

std::unique_ptr<QualityEstimator> MakeEmprtEstimator(ReinitRule reinit, const EmprtOptions& options) {
  return std::make_unique<EmprtEstimator>(reinit, options);
}

double WilcoxonSignedRankP(std::span<const double> x, std::span<const double> y) {
  Require(x.size() == y.size(), ErrorCode::kShapeMismatch, "Wilcoxon test needs paired samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w_plus += rank[i];
  const double nn = static_cast<double>(n);
  if (n <= 25 && !ties) {
    const auto counts = WilcoxonCounts(static_cast<int>(n));
    const double total = std::ldexp(1.0, static_cast<int>(n));
    const int w = static_cast<int>(std::lround(w_plus));
    double cdf = 0.0, sf = 0.0;
    for (int v = 0; v <= w; ++v) cdf += counts[v];
    for (std::size_t v = w; v < counts.size(); ++v) sf += counts[v];
    return std::min(1.0, 2.0 * std::min(cdf, sf) / total);
  }
  const double mean = nn * (nn + 1) / 4.0;
  const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  if (var <= 0) return 1.0;
  const double z = (w_plus - mean) / std::sqrt(var);
  return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

MetaEvalVector ComputeMetaEvalVector(const TestScores& scores, Orientation orientation) {
  const std::size_t methods = scores.unperturbed.size();
  Require(methods >= 2, ErrorCode::kInvalidArgument, "at least 2 methods required");
  Require(!scores.minor.empty() && scores.minor.size() == scores.disruptive.size(), ErrorCode::kInvalidArgument,
          "meta-evaluation needs matching Minor and Disruptive repetitions");
  MetaEvalVector m;
  std::vector<double> x, y;
  double iac_nr = 0, iac_ar = 0, iec_ar = 0;
  std::size_t cells = 0;
  for (std::size_t k = 0; k < scores.minor.size(); ++k) {
    for (std::size_t j = 0; j < methods; ++j) {
      PairwiseComplete(scores.unperturbed[j], scores.minor[k][j], &x, &y);
      iac_nr += WilcoxonSignedRankP(x, y);
      PairwiseComplete(scores.unperturbed[j], scores.disruptive[k][j], &x, &y);
      iac_ar += 1.0 - WilcoxonSignedRankP(x, y);
      std::size_t n_base = 0, n_disr = 0;
      const double base = MeanOf(scores.unperturbed[j], &n_base);
      const double disr = MeanOf(scores.disruptive[k][j], &n_disr);
      if (n_base && n_disr)
        iec_ar += orientation == Orientation::kHigherIsBetter ? disr < base : disr > base;
      ++cells;
    }
  }
  m.iac_nr = iac_nr / static_cast<double>(cells);
  m.iac_ar = iac_ar / static_cast<double>(cells);
  m.iec_ar = iec_ar / static_cast<double>(cells);

  double iec_nr = 0;
  for (const ScoreMatrix& minor : scores.minor) {
    const std::size_t samples = scores.unperturbed[0].size();
    double preserved = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < samples; ++i) {
      bool complete = true;
      for (std::size_t j = 0; j < methods; ++j) complete = complete && scores.unperturbed[j][i] && minor[j][i];
      if (!complete) continue;
      std::size_t kept = 0, pairs = 0;
      for (std::size_t a = 0; a < methods; ++a)
        for (std::size_t b = a + 1; b < methods; ++b, ++pairs)
          kept += Sign(*scores.unperturbed[a][i] - *scores.unperturbed[b][i]) == Sign(*minor[a][i] - *minor[b][i]);
      preserved += static_cast<double>(kept) / static_cast<double>(pairs);
      ++counted;
    }
    iec_nr += counted ? preserved / static_cast<double>(counted) : 0.0;
  }
  m.iec_nr = iec_nr / static_cast<double>(scores.minor.size());
  return m;
}

void MetaEvalConfig::Validate() const {
  Require(k >= 2, ErrorCode::kInvalidArgument, "meta-evaluation needs K >= 2");
  Require(iterations >= 1, ErrorCode::kInvalidArgument, "meta-evaluation needs at least one iteration");
  ValidateSpec(input_minor, PerturbationTest::kInput);
  ValidateSpec(input_disruptive, PerturbationTest::kInput);
  ValidateSpec(model_minor, PerturbationTest::kModel);
  ValidateSpec(model_disruptive, PerturbationTest::kModel);
  const double minor_in = std::max(std::fabs(input_minor.alpha), std::fabs(input_minor.beta));
  const double disr_in = std::max(std::fabs(input_disruptive.alpha), std::fabs(input_disruptive.beta));
  Require(minor_in < disr_in, ErrorCode::kInvalidArgument, "Minor input noise must be smaller than Disruptive");
  Require(std::fabs(model_minor.sigma) < std::fabs(model_disruptive.sigma), ErrorCode::kInvalidArgument,
          "Minor weight noise must be smaller than Disruptive");
}

MetaEvalReport MetaEvaluate(const std::vector<const QualityEstimator*>& estimators,
                            const std::vector<MethodConfig>& methods, const std::string& method_set,
                            const Model& model, const Dataset& dataset, const MetaEvalConfig& config,
                            int threads) {
  Require(methods.size() >= 2, ErrorCode::kInvalidArgument, "at least 2 methods required");
  Require(!estimators.empty(), ErrorCode::kInvalidArgument, "no quality estimators given");
  Require(!dataset.empty(), ErrorCode::kInvalidArgument, "empty dataset");
  config.Validate();
  const std::size_t n_est = estimators.size();
  const std::size_t k_count = static_cast<std::size_t>(config.k);

  MetaEvalReport report;
  std::vector<std::vector<IterationResult>> per_estimator(n_est);
  std::vector<bool> degenerate(n_est, false);
  const double chance = 1.0 / dataset.num_classes;
  report.accuracy_original = Accuracy(model, dataset);
  double acc_minor = 0, acc_disr = 0;

  for (int it = 0; it < config.iterations; ++it) {
    const std::uint64_t it_seed = DeriveSeed(config.seed, {static_cast<std::uint64_t>(it)});
    const std::uint64_t score_seed = DeriveSeed(it_seed, {kScoreTag});
    auto seeded = [&](PerturbationSpec spec) {
      spec.seed = DeriveSeed(it_seed, {static_cast<std::uint64_t>(spec.test), static_cast<std::uint64_t>(spec.severity)});
      return spec;
    };
    const PerturbationSpec specs[4] = {seeded(config.input_minor), seeded(config.input_disruptive),
                                       seeded(config.model_minor), seeded(config.model_disruptive)};

    // Condition 0 is unperturbed; then (spec s, repetition k) at 1 + s*K + k.
    const std::size_t conditions = 1 + 4 * k_count;
    std::vector<std::vector<ScoreMatrix>> scores(conditions, std::vector<ScoreMatrix>(n_est));
    std::vector<double> accuracy(conditions, report.accuracy_original);
    ParallelFor(conditions, threads, [&](std::size_t c) {
      if (c == 0) {
        for (std::size_t e = 0; e < n_est; ++e) scores[c][e] = estimators[e]->Score(model, dataset, methods, score_seed);
        return;
      }
      const PerturbationSpec& spec = specs[(c - 1) / k_count];
      const int k = static_cast<int>((c - 1) % k_count);
      if (spec.test == PerturbationTest::kInput) {
        const Dataset perturbed = PerturbInputs(dataset, spec, k);
        for (std::size_t e = 0; e < n_est; ++e)
          scores[c][e] = estimators[e]->Score(model, perturbed, methods, score_seed);
      } else {
        const Model perturbed = PerturbModel(model, spec, k);
        accuracy[c] = Accuracy(perturbed, dataset);
        for (std::size_t e = 0; e < n_est; ++e)
          scores[c][e] = estimators[e]->Score(perturbed, dataset, methods, score_seed);
      }
    });

    for (std::size_t k = 0; k < k_count; ++k) {
      const double minor = accuracy[1 + 2 * k_count + k];
      const double disr = accuracy[1 + 3 * k_count + k];
      acc_minor += minor;
      acc_disr += disr;
      const std::string where = "iteration " + std::to_string(it) + " k=" + std::to_string(k);
      if (std::fabs(minor - report.accuracy_original) > config.minor_accuracy_tolerance)
        report.warnings.push_back("Minor model perturbation moved accuracy from " +
                                  std::to_string(report.accuracy_original) + " to " + std::to_string(minor) +
                                  " (" + where + ")");
      if (disr > chance + config.disruptive_accuracy_margin)
        report.warnings.push_back("Disruptive model perturbation left accuracy at " + std::to_string(disr) + " (" +
                                  where + ")");
    }

    for (std::size_t e = 0; e < n_est; ++e) {
      TestScores ipt, mpt;
      ipt.unperturbed = mpt.unperturbed = scores[0][e];
      for (std::size_t k = 0; k < k_count; ++k) {
        ipt.minor.push_back(scores[1 + k][e]);
        ipt.disruptive.push_back(scores[1 + k_count + k][e]);
        mpt.minor.push_back(scores[1 + 2 * k_count + k][e]);
        mpt.disruptive.push_back(scores[1 + 3 * k_count + k][e]);
      }
      std::optional<double> first;
      bool all_equal = true, any = false;
      for (const auto& row : scores[0][e])
        for (const auto& v : row)
          if (v) {
            any = true;
            if (!first) first = v;
            all_equal = all_equal && *v == *first;
          }
      if (!any || all_equal) degenerate[e] = true;
      const Orientation orientation = estimators[e]->orientation();
      per_estimator[e].push_back({ComputeMetaEvalVector(ipt, orientation), ComputeMetaEvalVector(mpt, orientation)});
    }
  }

  const double reps = static_cast<double>(config.iterations) * static_cast<double>(k_count);
  report.accuracy_minor = acc_minor / reps;
  report.accuracy_disruptive = acc_disr / reps;
  for (std::size_t e = 0; e < n_est; ++e) {
    MCScore s;
    s.metric = estimators[e]->name();
    s.method_set = method_set;
    s.iterations = per_estimator[e];
    std::vector<MetaEvalVector> ipts, mpts;
    std::vector<double> mcs;
    for (const auto& r : s.iterations) {
      ipts.push_back(r.ipt);
      mpts.push_back(r.mpt);
      mcs.push_back(r.mc());
    }
    s.ipt = MeanVector(ipts);
    s.mpt = MeanVector(mpts);
    s.value = std::accumulate(mcs.begin(), mcs.end(), 0.0) / static_cast<double>(mcs.size());
    double ss = 0;
    for (double v : mcs) ss += (v - s.value) * (v - s.value);
    s.std = std::sqrt(ss / static_cast<double>(mcs.size()));
    if (degenerate[e]) s.flags.push_back("degenerate score distribution (all unperturbed scores identical)");
    report.scores.push_back(std::move(s));
  }
  return report;
}

}  // namespace mprt
