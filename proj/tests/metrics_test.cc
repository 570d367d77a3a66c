#include "mprt/metrics.h"

#include <cmath>

#include "gtest/gtest.h"
#include "test_util.h"

namespace mprt {
namespace {

RandomisationPlan Plan(RandomisationOrder order, std::uint64_t seed = 2) {
  RandomisationPlan plan;
  plan.order = order;
  plan.seed = seed;
  return plan;
}

MethodConfig Config(MethodId method) { return MethodConfig::Default(method); }

const Dataset& Samples() {
  static const Dataset d = testing::SmallData().test.Head(8);
  return d;
}

TEST(MetricNameTest, RoundTripAndOrientation) {
  for (auto m : {MetricId::kMprt, MetricId::kSmprt, MetricId::kEmprt}) EXPECT_EQ(ParseMetric(MetricName(m)), m);
  EXPECT_EQ(MetricOrientation(MetricId::kEmprt), Orientation::kHigherIsBetter);
  EXPECT_EQ(MetricOrientation(MetricId::kMprt), Orientation::kLowerIsBetter);
  EXPECT_EQ(MetricOrientation(MetricId::kSmprt), Orientation::kLowerIsBetter);
}

TEST(MprtTest, CurveShapeAndSelfSimilarity) {
  const Model& model = testing::TrainedLeNet();
  for (SimilarityFn fn : {SimilarityFn::kSsim, SimilarityFn::kSpearman}) {
    MprtOptions opts;
    opts.similarity = fn;
    const MprtResult r = RunMprt(model, Samples(), Config(MethodId::kGradient), Plan(RandomisationOrder::kBottomUp), opts);
    ASSERT_EQ(r.curve.stages.size(), model.ParameterisedPositions().size() + 1);
    EXPECT_EQ(r.curve.stages.front().stage_label, "orig");
    EXPECT_EQ(r.curve.stages.front().mean, 1.0);
    EXPECT_EQ(r.curve.stages.front().std, 0.0);
    EXPECT_EQ(r.curve.stages.back().stage_label, "final");
    EXPECT_EQ(r.estimates.size(), Samples().size());
    for (const auto& q : r.estimates) {
      EXPECT_GE(q.value, -1.0);
      EXPECT_LE(q.value, 1.0);
      EXPECT_EQ(q.metric, MetricId::kMprt);
    }
    EXPECT_LT(r.curve.stages.back().mean, 0.5);
  }
}

TEST(MprtTest, RandomBaselineSeedPolicy) {
  const Model& model = testing::TrainedLeNet();
  MprtOptions reuse;
  reuse.redraw_random_baseline = false;
  const auto same = RunMprt(model, Samples(), Config(MethodId::kRandomBaseline), Plan(RandomisationOrder::kBottomUp), reuse);
  for (const auto& stage : same.curve.stages) EXPECT_EQ(stage.mean, 1.0) << stage.stage_label;
  const auto redrawn = RunMprt(model, Samples(), Config(MethodId::kRandomBaseline), Plan(RandomisationOrder::kBottomUp));
  for (std::size_t s = 1; s < redrawn.curve.stages.size(); ++s) EXPECT_LT(std::fabs(redrawn.curve.stages[s].mean), 0.2);
}

TEST(MprtTest, DeterministicAcrossThreadCounts) {
  const Model& model = testing::TrainedResNet();
  MprtOptions one, four;
  four.threads = 4;
  const auto a = RunMprt(model, Samples(), Config(MethodId::kSmoothGrad), Plan(RandomisationOrder::kTopDown), one);
  const auto b = RunMprt(model, Samples(), Config(MethodId::kSmoothGrad), Plan(RandomisationOrder::kTopDown), four);
  ASSERT_EQ(a.estimates.size(), b.estimates.size());
  for (std::size_t i = 0; i < a.estimates.size(); ++i) EXPECT_EQ(a.estimates[i].value, b.estimates[i].value);
}

TEST(MprtTest, FailedOriginalExplanationDropsTheSample) {
  // Zero weights give an all-zero gradient, which cannot be normalised.
  Model model = testing::LinearModel({{0, 0}, {0, 0}}, {0, 0});
  Dataset d;
  d.num_classes = 2;
  d.inputs = {Tensor({2}, {1, 2})};
  d.labels = {0};
  MprtOptions opts;
  opts.similarity = SimilarityFn::kPearson;
  const auto r = RunMprt(model, d, Config(MethodId::kGradient), Plan(RandomisationOrder::kBottomUp), opts);
  EXPECT_TRUE(r.estimates.empty());
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].code, ErrorCode::kAllZeroAttribution);
  EXPECT_EQ(r.curve.stages[0].n, 0u);
}

TEST(SmprtTest, OneNoiselessSampleEqualsMprtForEveryMethod) {
  SmprtOptions smooth;
  smooth.num_samples = 1;
  smooth.noise_level = 0;
  for (const Model* model : {&testing::TrainedLeNet(), &testing::TrainedResNet()}) {
    for (MethodId m : AllMethods()) {
      MprtOptions opts;
      opts.seed = 11;
      const auto mprt = RunMprt(*model, Samples().Head(3), Config(m), Plan(RandomisationOrder::kBottomUp), opts);
      const auto smprt =
          RunSmprt(*model, Samples().Head(3), Config(m), Plan(RandomisationOrder::kBottomUp), opts, smooth);
      ASSERT_EQ(mprt.curve.stages.size(), smprt.curve.stages.size());
      for (std::size_t s = 0; s < mprt.curve.stages.size(); ++s) {
        EXPECT_EQ(mprt.curve.stages[s].n, smprt.curve.stages[s].n);
        if (mprt.curve.stages[s].n > 0)
          EXPECT_NEAR(mprt.curve.stages[s].mean, smprt.curve.stages[s].mean, 1e-6) << MethodName(m);
      }
      EXPECT_EQ(smprt.curve.metric, MetricId::kSmprt);
    }
  }
}

TEST(SmprtTest, RejectsZeroSamples) {
  SmprtOptions smooth;
  smooth.num_samples = 0;
  EXPECT_THROW(RunSmprt(testing::TrainedLeNet(), Samples(), Config(MethodId::kGradient),
                        Plan(RandomisationOrder::kBottomUp), {}, smooth),
               Error);
}

TEST(EmprtScoreTest, Arithmetic) {
  EXPECT_EQ(EmprtScore(2.0, 3.0), 0.5);
  EXPECT_EQ(EmprtScore(2.0, 2.0), 0.0);
  EXPECT_EQ(EmprtScore(2.0, 0.0), -1.0);
  try {
    EmprtScore(0.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateComplexity);
  }
}

TEST(EmprtTest, RandomBaselineScoresNearZero) {
  const Dataset data = testing::SmallData().test.Head(100);
  const auto r = RunEmprt(testing::TrainedLeNet(), data, Config(MethodId::kRandomBaseline),
                          Plan(RandomisationOrder::kFullOnly));
  EXPECT_EQ(r.estimates.size(), 100u);
  EXPECT_LT(std::fabs(r.aggregate), 0.05);
  for (const auto& q : r.estimates) EXPECT_GE(q.value, -1.0);
}

TEST(EmprtTest, DegenerateOriginalIsCountedAndExcluded) {
  Model model = testing::LinearModel({{1, 1, 1, 1}, {1, -1, 1, -1}}, {0, 0});
  Dataset d;
  d.num_classes = 2;
  d.inputs = {Tensor({4}, {1, 2, 3, 4}), Tensor({4}, {1, 2, 3, 4})};
  d.labels = {0, 1};
  const auto r = RunEmprt(model, d, Config(MethodId::kGradient), Plan(RandomisationOrder::kFullOnly));
  EXPECT_EQ(r.degenerate, 1u);
  EXPECT_EQ(r.estimates.size(), 1u);
  EXPECT_EQ(r.estimates[0].sample_id, 1u);
}

TEST(EmprtTest, ScaleInvariantUnderModelRescaling) {
  // Scaling the last layer scales every attribution of a ReLU net, original
  // and randomised alike, without changing any histogram.
  const Model& model = testing::TrainedLeNet();
  Model scaled = model;
  const std::size_t last = model.ParameterisedPositions().back();
  for (float& w : scaled.MutableWeights(last).values()) w *= 4.0f;
  for (float& b : scaled.MutableBias(last).values()) b *= 4.0f;
  const auto a = RunEmprt(model, Samples(), Config(MethodId::kGradient), Plan(RandomisationOrder::kFullOnly));
  const auto b = RunEmprt(scaled, Samples(), Config(MethodId::kGradient), Plan(RandomisationOrder::kFullOnly));
  ASSERT_EQ(a.estimates.size(), b.estimates.size());
  for (std::size_t i = 0; i < a.estimates.size(); ++i) EXPECT_NEAR(a.estimates[i].value, b.estimates[i].value, 1e-9);
}

TEST(EmprtTest, CurveModeRecordsComplexityAndModelEntropy) {
  EmprtOptions opts;
  opts.curve = true;
  const Model& model = testing::TrainedLeNet();
  const auto r = RunEmprt(model, Samples(), Config(MethodId::kLrpEpsilon), Plan(RandomisationOrder::kFullOnly), opts);
  ASSERT_TRUE(r.complexity_curve.has_value());
  const std::size_t stages = model.ParameterisedPositions().size() + 1;
  EXPECT_EQ(r.complexity_curve->stages.size(), stages);
  ASSERT_EQ(r.model_entropy.size(), stages);
  EXPECT_GT(r.model_entropy.back().mean, r.model_entropy.front().mean);
  for (const auto& s : r.complexity_curve->stages) EXPECT_LE(s.mean, std::log(100.0));
  EXPECT_FALSE(RunEmprt(model, Samples(), Config(MethodId::kLrpEpsilon), Plan(RandomisationOrder::kFullOnly))
                   .complexity_curve.has_value());
}

TEST(EmprtTest, AggregationModes) {
  const std::vector<double> v = {0.1, 0.2, 0.9};
  EXPECT_DOUBLE_EQ(Aggregate(v, Aggregation::kMean), 0.4);
  EXPECT_DOUBLE_EQ(Aggregate(v, Aggregation::kMedian), 0.2);
  EXPECT_DOUBLE_EQ(Aggregate(std::vector<double>{1, 2, 3, 4}, Aggregation::kMedian), 2.5);
  EXPECT_TRUE(std::isnan(Aggregate(std::vector<double>{}, Aggregation::kMean)));
}

TEST(CurveAucTest, Examples) {
  EXPECT_DOUBLE_EQ(CurveAuc(std::vector<double>{1, 1, 1, 1, 1}), 4.0);
  EXPECT_DOUBLE_EQ(CurveAuc(std::vector<double>{1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(CurveAuc(std::vector<double>{1, 0.5, 0}), 1.0);
  EXPECT_THROW(CurveAuc(std::vector<double>{1}), Error);
}

TEST(RankMethodsTest, OrientationAndTies) {
  auto r = RankMethods({{MethodId::kGradient, 0.1}, {MethodId::kSaliency, 0.8}}, MetricId::kEmprt);
  EXPECT_EQ(r[0].method, MethodId::kSaliency);
  EXPECT_EQ(r[0].rank, 1);
  r = RankMethods({{MethodId::kGradient, 0.1}, {MethodId::kSaliency, 0.8}}, MetricId::kMprt);
  EXPECT_EQ(r[0].method, MethodId::kGradient);
  r = RankMethods({{MethodId::kSaliency, 0.3}, {MethodId::kGradCAM, 0.3}, {MethodId::kGradient, 0.5}},
                  MetricId::kEmprt);
  EXPECT_EQ(r[0].method, MethodId::kGradient);
  EXPECT_FALSE(r[0].tied);
  EXPECT_EQ(r[1].method, MethodId::kGradCAM);
  EXPECT_EQ(r[2].method, MethodId::kSaliency);
  EXPECT_TRUE(r[1].tied);
  EXPECT_TRUE(r[2].tied);
  EXPECT_THROW(RankMethods({{MethodId::kGradient, 0.1}}, MetricId::kMprt), Error);
}

}  // namespace
}  // namespace mprt
