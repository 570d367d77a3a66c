#ifndef MPRT_METAEVAL_H_
#define MPRT_METAEVAL_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mprt/metrics.h"

namespace mprt {

enum class PerturbationTest { kInput, kModel };
enum class Severity { kMinor, kDisruptive };

std::string_view PerturbationTestName(PerturbationTest test);  // "IPT", "MPT"
std::string_view SeverityName(Severity severity);              // "NR", "AR"

struct PerturbationSpec {
  PerturbationTest test = PerturbationTest::kInput;
  Severity severity = Severity::kMinor;
  double alpha = -0.01;  // Input noise delta ~ U(alpha, beta).
  double beta = 0.01;
  double mu = 1.0;  // Weight noise nu ~ N(mu, sigma^2), multiplicative.
  double sigma = 0.005;
  std::uint64_t seed = 0;
};

// x + delta, delta i.i.d. U(alpha, beta) per element; stream from (seed, k).
Dataset PerturbInputs(const Dataset& dataset, const PerturbationSpec& spec, int k);
// Every weight and bias multiplied elementwise by nu ~ N(mu, sigma^2).
Model PerturbModel(const Model& model, const PerturbationSpec& spec, int k);

// Per-sample scores for one perturbation condition: scores[m][i] for method m
// and sample i, empty where the sample failed.
using ScoreMatrix = std::vector<std::vector<std::optional<double>>>;

class QualityEstimator {
 public:
  virtual ~QualityEstimator() = default;
  virtual MetricId metric() const = 0;
  virtual ScoreMatrix Score(const Model& model, const Dataset& dataset, const std::vector<MethodConfig>& methods,
                            std::uint64_t seed) const = 0;
  std::string name() const { return std::string(MetricName(metric())); }
  Orientation orientation() const { return MetricOrientation(metric()); }
};

// Final-stage similarity of MPRT/sMPRT under a FullOnly plan, and the eMPRT
// complexity rise. `seed` drives both randomisation and explanations.
std::unique_ptr<QualityEstimator> MakeMprtEstimator(ReinitRule reinit, const MprtOptions& options);
std::unique_ptr<QualityEstimator> MakeSmprtEstimator(ReinitRule reinit, const MprtOptions& options,
                                                     const SmprtOptions& smooth);
std::unique_ptr<QualityEstimator> MakeEmprtEstimator(ReinitRule reinit, const EmprtOptions& options);

// Two-sided Wilcoxon signed-rank p-value for paired samples. Zero
// differences are dropped; all-zero differences give 1. Exact null
// distribution for n <= 25 without tied magnitudes, otherwise the normal
// approximation with tie correction and no continuity correction.
double WilcoxonSignedRankP(std::span<const double> x, std::span<const double> y);

struct MetaEvalVector {
  double iac_nr = 0.0;
  double iac_ar = 0.0;
  double iec_nr = 0.0;
  double iec_ar = 0.0;

  double mc() const { return (iac_nr + iac_ar + iec_nr + iec_ar) / 4.0; }
};

struct TestScores {
  ScoreMatrix unperturbed;
  std::vector<ScoreMatrix> minor;       // One per k.
  std::vector<ScoreMatrix> disruptive;  // One per k.
};

// IAC_NR: mean over (method, k) of the Wilcoxon p between unperturbed and
// Minor scores. IAC_AR: mean of 1 - p under Disruptive. IEC_NR: per sample,
// the fraction of method pairs whose order (<, =, >) survives Minor
// perturbation, averaged over samples and k. IEC_AR: fraction of (method, k)
// cells whose mean Disruptive score is strictly worse than the unperturbed
// mean. Samples missing in either condition are dropped pairwise.
MetaEvalVector ComputeMetaEvalVector(const TestScores& scores, Orientation orientation);

struct MetaEvalConfig {
  int k = 5;
  int iterations = 3;
  std::uint64_t seed = 0;
  PerturbationSpec input_minor{PerturbationTest::kInput, Severity::kMinor, -0.01, 0.01, 1.0, 0.0, 0};
  PerturbationSpec input_disruptive{PerturbationTest::kInput, Severity::kDisruptive, -2.0, 2.0, 1.0, 0.0, 0};
  PerturbationSpec model_minor{PerturbationTest::kModel, Severity::kMinor, 0.0, 0.0, 1.0, 0.005, 0};
  PerturbationSpec model_disruptive{PerturbationTest::kModel, Severity::kDisruptive, 0.0, 0.0, 1.0, 2.0, 0};
  // Accuracy gates for the model perturbations, in accuracy units.
  double minor_accuracy_tolerance = 0.10;
  double disruptive_accuracy_margin = 0.10;

  void Validate() const;
};

struct IterationResult {
  MetaEvalVector ipt;
  MetaEvalVector mpt;
  double mc() const { return (ipt.mc() + mpt.mc()) / 2.0; }
};

struct MCScore {
  std::string metric;
  std::string method_set;
  MetaEvalVector ipt;  // Component means over iterations.
  MetaEvalVector mpt;
  double value = 0.0;  // Mean over IPT, MPT and iterations.
  double std = 0.0;    // Population std of per-iteration MC.
  std::vector<IterationResult> iterations;
  std::vector<std::string> flags;
};

struct MetaEvalReport {
  std::vector<MCScore> scores;  // One per estimator, in input order.
  // Accuracy of the original and perturbed models on the dataset, k-averaged.
  double accuracy_original = 0.0;
  double accuracy_minor = 0.0;
  double accuracy_disruptive = 0.0;
  std::vector<std::string> warnings;
};

// Runs every estimator on the same perturbation draws. Throws
// kInvalidArgument with "at least 2 methods required" for fewer than two
// methods.
MetaEvalReport MetaEvaluate(const std::vector<const QualityEstimator*>& estimators,
                            const std::vector<MethodConfig>& methods, const std::string& method_set,
                            const Model& model, const Dataset& dataset, const MetaEvalConfig& config,
                            int threads = 1);

}  // namespace mprt

#endif  // MPRT_METAEVAL_H_
