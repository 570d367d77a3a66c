#include "mprt/attribution.h"

#include <cmath>
#include <numeric>

#include "gtest/gtest.h"
#include "mprt/error.h"
#include "mprt/similarity.h"
#include "test_util.h"

namespace mprt {
namespace {

using testing::LinearModel;
using testing::RandomModel;
using testing::RandomTensor;

MethodConfig Config(MethodId method) { return MethodConfig::Default(method); }

double Sum(const Tensor& t) { return std::accumulate(t.values().begin(), t.values().end(), 0.0); }

TEST(MethodNameTest, RoundTrip) {
  EXPECT_EQ(AllMethods().size(), 11u);
  for (MethodId m : AllMethods()) EXPECT_EQ(ParseMethod(MethodName(m)), m);
  EXPECT_FALSE(ParseMethod("Occlusion").has_value());
}

TEST(ExplainTest, GradientOfLinearModelIsTheWeightRow) {
  Model model = LinearModel({{1, -2, 3}, {4, 5, -6}}, {0.5f, 0});
  const Attribution a = Explain(model, Tensor({3}, {0.3f, 0.1f, -2}), 1, Config(MethodId::kGradient), 0);
  EXPECT_EQ(a.values, Tensor({3}, {4, 5, -6}));
  EXPECT_EQ(a.class_index, 1);
}

TEST(ExplainTest, InputXGradientOfLinearModel) {
  Model model = LinearModel({{1, -2, 3}}, {0});
  const Attribution a = Explain(model, Tensor({3}, {2, 1, -1}), 0, Config(MethodId::kInputXGradient), 0);
  EXPECT_EQ(a.values, Tensor({3}, {2, -2, -3}));
}

TEST(ExplainTest, ShapesMatchInputForEveryMethod) {
  for (auto arch : {Architecture::kLeNet, Architecture::kMiniResNet}) {
    Model model = RandomModel(arch, {1, 8, 8}, 10, 2);
    const Tensor x = RandomTensor({1, 8, 8}, 4);
    for (MethodId m : AllMethods()) {
      const Attribution a = Explain(model, x, 3, Config(m), 9);
      EXPECT_EQ(a.values.shape(), x.shape()) << MethodName(m);
      EXPECT_TRUE(a.values.AllFinite()) << MethodName(m);
      EXPECT_EQ(a.method, m);
    }
  }
}

TEST(ExplainTest, DeterministicGivenSeed) {
  Model model = RandomModel(Architecture::kLeNet, {1, 8, 8}, 10, 2);
  const Tensor x = RandomTensor({1, 8, 8}, 4);
  for (MethodId m : {MethodId::kSmoothGrad, MethodId::kGradientSHAP, MethodId::kRandomBaseline}) {
    EXPECT_EQ(Explain(model, x, 1, Config(m), 5).values, Explain(model, x, 1, Config(m), 5).values);
    EXPECT_NE(Explain(model, x, 1, Config(m), 5).values, Explain(model, x, 1, Config(m), 6).values);
  }
}

TEST(ExplainTest, RejectsBadArguments) {
  Model model = LinearModel({{1, 2}}, {0});
  EXPECT_THROW(Explain(model, Tensor({2}), 1, Config(MethodId::kGradient), 0), Error);
  EXPECT_THROW(Explain(model, Tensor({3}), 0, Config(MethodId::kGradient), 0), Error);
  MethodConfig bad = Config(MethodId::kIntegratedGradients);
  bad.steps = 0;
  EXPECT_THROW(Explain(model, Tensor({2}), 0, bad, 0), Error);
  bad = Config(MethodId::kLrpEpsilon);
  bad.epsilon = 0;
  EXPECT_THROW(Explain(model, Tensor({2}), 0, bad, 0), Error);
}

TEST(ExplainTest, GradCamNeedsAConvLayer) {
  Model model = LinearModel({{1, 2}}, {0});
  try {
    Explain(model, Tensor({2}), 0, Config(MethodId::kGradCAM), 0);
    FAIL() << "expected unsupported";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupported);
  }
}

TEST(ExplainTest, SaliencyAndGradCamAreNonNegative) {
  Model model = RandomModel(Architecture::kMiniResNet, {1, 8, 8}, 10, 3);
  const Tensor x = RandomTensor({1, 8, 8}, 1);
  for (MethodId m : {MethodId::kSaliency, MethodId::kSmoothGrad, MethodId::kGradCAM}) {
    const Attribution a = Explain(model, x, 2, Config(m), 1);
    EXPECT_GE(a.values.Min(), 0.0f) << MethodName(m);
  }
}

TEST(ExplainTest, SmoothGradWithOneNoiselessSampleIsSaliency) {
  for (auto arch : {Architecture::kLeNet, Architecture::kMiniResNet}) {
    Model model = RandomModel(arch, {1, 8, 8}, 10, 6);
    MethodConfig cfg = Config(MethodId::kSmoothGrad);
    cfg.samples = 1;
    cfg.noise_level = 0;
    for (int s = 0; s < 5; ++s) {
      const Tensor x = RandomTensor({1, 8, 8}, 20 + s);
      EXPECT_EQ(Explain(model, x, s, cfg, s).values, Explain(model, x, s, Config(MethodId::kSaliency), 0).values);
    }
  }
}

TEST(ExplainTest, RandomBaselineIsUniformOnUnitInterval) {
  Model model = LinearModel({std::vector<float>(10000, 1.0f)}, {0});
  const Attribution a = Explain(model, Tensor({10000}), 0, Config(MethodId::kRandomBaseline), 3);
  EXPECT_GE(a.values.Min(), 0.0f);
  EXPECT_LT(a.values.Max(), 1.0f);
  EXPECT_NEAR(Sum(a.values) / 10000, 0.5, 0.01);
  int below_quarter = 0;
  for (float v : a.values.values()) below_quarter += v < 0.25f;
  EXPECT_NEAR(below_quarter / 10000.0, 0.25, 0.015);
}

TEST(IntegratedGradientsTest, CompletenessOnTrainedModels) {
  MethodConfig cfg = Config(MethodId::kIntegratedGradients);
  cfg.steps = 100;
  const auto& data = testing::SmallData().test;
  for (const Model* model : {&testing::TrainedLeNet(), &testing::TrainedResNet()}) {
    const Tensor zero(model->input_shape());
    for (std::size_t i = 0; i < 20; ++i) {
      const int y = data.labels[i];
      const double delta = Forward(*model, data.inputs[i]).logits[y] - Forward(*model, zero).logits[y];
      const double total = Sum(Explain(*model, data.inputs[i], y, cfg, 0).values);
      EXPECT_LE(std::fabs(total - delta), 0.02 * std::fabs(delta) + 1e-4) << "sample " << i;
    }
  }
}

TEST(GradientShapTest, ApproachesIntegratedGradientsWithZeroBaseline) {
  Model model = RandomModel(Architecture::kLeNet, {1, 8, 8}, 10, 8);
  const Tensor x = RandomTensor({1, 8, 8}, 8);
  MethodConfig shap = Config(MethodId::kGradientSHAP);
  shap.samples = 500;
  shap.noise_level = 0;
  MethodConfig ig = Config(MethodId::kIntegratedGradients);
  ig.steps = 100;
  const Tensor a = Explain(model, x, 4, shap, 1).values;
  const Tensor b = Explain(model, x, 4, ig, 0).values;
  EXPECT_GT(Pearson(a.values(), b.values()), 0.95);
}

TEST(LrpTest, EpsilonConservesRelevanceOnBiasFreeNets) {
  for (auto arch : {Architecture::kLeNet, Architecture::kMiniResNet}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Model model = RandomModel(arch, {1, 8, 8}, 10, seed, /*with_bias=*/false);
      const Tensor x = RandomTensor({1, 8, 8}, seed + 30);
      const int y = int(seed);
      const double logit = Forward(model, x).logits[y];
      const double total = Sum(Explain(model, x, y, Config(MethodId::kLrpEpsilon), 0).values);
      EXPECT_LE(std::fabs(total - logit), 0.05 * std::fabs(logit) + 1e-3) << ArchitectureName(arch);
    }
  }
}

TEST(LrpTest, EpsilonOnLinearModelIsInputTimesWeight) {
  Model model = LinearModel({{1, -2, 3}}, {0});
  const Attribution a = Explain(model, Tensor({3}, {2, 1, 1}), 0, Config(MethodId::kLrpEpsilon), 0);
  EXPECT_NEAR(a.values[0], 2, 1e-5);
  EXPECT_NEAR(a.values[1], -2, 1e-5);
  EXPECT_NEAR(a.values[2], 3, 1e-5);
}

TEST(LrpTest, ZPlusKeepsOnlyPositiveContributions) {
  Model model = LinearModel({{1, -2, 3}}, {0});
  const Attribution a = Explain(model, Tensor({3}, {2, 1, 1}), 0, Config(MethodId::kLrpZPlus), 0);
  EXPECT_GT(a.values[0], 0);
  EXPECT_EQ(a.values[1], 0);
  EXPECT_GT(a.values[2], 0);
}

TEST(NormaliseTest, HandExample) {
  const Tensor out = NormaliseSecondMoment(Tensor({2}, {3, 4}));
  EXPECT_NEAR(out[0], 0.8485, 1e-4);
  EXPECT_NEAR(out[1], 1.1314, 1e-4);
}

TEST(NormaliseTest, UnitSecondMomentIdempotentAndScaleInvariant) {
  Tensor e = RandomTensor({50}, 3, -1, 1);
  const Tensor n = NormaliseSecondMoment(e);
  double sq = 0;
  for (float v : n.values()) sq += double(v) * v;
  EXPECT_NEAR(sq / 50, 1.0, 1e-5);
  const Tensor again = NormaliseSecondMoment(n);
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_NEAR(again[i], n[i], 1e-6);
  Tensor scaled = e;
  for (float& v : scaled.values()) v *= 10;
  const Tensor ns = NormaliseSecondMoment(scaled);
  for (std::size_t i = 0; i < n.size(); ++i) {
    EXPECT_NEAR(ns[i], n[i], 1e-6);
    EXPECT_EQ(std::signbit(ns[i]), std::signbit(n[i]));
  }
}

TEST(NormaliseTest, AllZeroIsAnError) {
  try {
    NormaliseSecondMoment(Tensor({4}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAllZeroAttribution);
  }
}

TEST(PreprocessTest, DefaultPolicyFollowsTheMethod) {
  Model model = RandomModel(Architecture::kLeNet, {1, 8, 8}, 10, 4);
  const Tensor x = RandomTensor({1, 8, 8}, 4);
  const Attribution lrp = Preprocess(Explain(model, x, 0, Config(MethodId::kLrpEpsilon), 0), {});
  EXPECT_LT(lrp.values.Min(), 0.0f);
  EXPECT_FALSE(lrp.flags.abs_applied);
  const Attribution cam = Preprocess(Explain(model, x, 0, Config(MethodId::kGradCAM), 0), {});
  EXPECT_GE(cam.values.Min(), 0.0f);
  EXPECT_TRUE(cam.flags.positive_only);
  const Attribution grad =
      Preprocess(Explain(model, x, 0, Config(MethodId::kGradient), 0), {SignPolicy::kAbs, true});
  EXPECT_GE(grad.values.Min(), 0.0f);
  EXPECT_TRUE(grad.flags.abs_applied);
  EXPECT_TRUE(grad.flags.normalised);
}

TEST(PreprocessTest, ConflictingPolicyIsRejected) {
  Model model = RandomModel(Architecture::kLeNet, {1, 8, 8}, 10, 4);
  const Tensor x = RandomTensor({1, 8, 8}, 4);
  const Attribution sal = Explain(model, x, 0, Config(MethodId::kSaliency), 0);
  EXPECT_THROW(Preprocess(sal, {SignPolicy::kKeep, false}), Error);
  const Attribution cam = Explain(model, x, 0, Config(MethodId::kGradCAM), 0);
  EXPECT_THROW(Preprocess(cam, {SignPolicy::kAbs, false}), Error);
  EXPECT_EQ(MandatedSign(MethodId::kSmoothGrad), SignPolicy::kAbs);
  EXPECT_EQ(MandatedSign(MethodId::kGradCAM), SignPolicy::kPositiveOnly);
  EXPECT_EQ(MandatedSign(MethodId::kGuidedBackprop), SignPolicy::kKeep);
}

}  // namespace
}  // namespace mprt
