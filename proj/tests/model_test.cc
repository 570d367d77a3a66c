#include "mprt/model.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gtest/gtest.h"
#include "mprt/architectures.h"
#include "mprt/error.h"
#include "mprt/model_io.h"
#include "test_util.h"

namespace mprt {
namespace {

using testing::CheckInputGradient;
using testing::LinearModel;
using testing::RandomModel;
using testing::RandomTensor;

TEST(ForwardTest, ZeroWeightsGiveUniformProbabilities) {
  Model model = LinearModel({{0, 0}, {0, 0}, {0, 0}, {0, 0}}, {0, 0, 0, 0});
  const ForwardTrace trace = Forward(model, Tensor({2}, {3.0f, -1.0f}));
  for (float v : trace.logits.values()) EXPECT_EQ(v, 0.0f);
  for (float p : trace.probabilities.values()) EXPECT_FLOAT_EQ(p, 0.25f);
}

TEST(ForwardTest, IdentityDense) {
  Model model = LinearModel({{1, 0}, {0, 1}}, {0, 0});
  const ForwardTrace trace = Forward(model, Tensor({2}, {1.0f, 2.0f}));
  EXPECT_EQ(trace.logits[0], 1.0f);
  EXPECT_EQ(trace.logits[1], 2.0f);
}

TEST(ForwardTest, RejectsWrongInputShape) {
  Model model = LinearModel({{1, 0}, {0, 1}}, {0, 0});
  EXPECT_THROW(Forward(model, Tensor({3})), Error);
}

TEST(ForwardTest, NonFiniteActivationIsAnError) {
  Model model = LinearModel({{1e30f, 1e30f}, {0, 1}}, {0, 0});
  try {
    Forward(model, Tensor({2}, {1e30f, 1e30f}));
    FAIL() << "expected a non-finite error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(ForwardTest, ProbabilitiesOnSimplex) {
  for (auto arch : {Architecture::kLeNet, Architecture::kMiniResNet}) {
    Model model = RandomModel(arch, {1, 8, 8}, 10, 5);
    for (int s = 0; s < 5; ++s) {
      const ForwardTrace trace = Forward(model, RandomTensor({1, 8, 8}, s));
      double sum = 0;
      for (float p : trace.probabilities.values()) {
        EXPECT_GE(p, 0.0f);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-5);
      EXPECT_EQ(trace.activations.size(), model.num_layers());
    }
  }
}

TEST(ForwardTest, SkipBlockAddsBranches) {
  Layer conv = Layer::Conv2D(1, 1, 3, 1);
  for (float& w : conv.weights.values()) w = 0.0f;
  conv.weights[4] = 2.0f;  // Centre tap: branch output is 2x.
  Model model({1, 4, 4}, 16,
              {Layer::Of(LayerKind::kSkipBegin), conv, Layer::Of(LayerKind::kSkipEnd), Layer::Of(LayerKind::kFlatten)});
  const Tensor x = RandomTensor({1, 4, 4}, 1);
  const ForwardTrace trace = Forward(model, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(trace.logits[i], 3.0f * x[i]);
  const Tensor g = InputGradient(model, x, 5);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_FLOAT_EQ(g[i], i == 5 ? 3.0f : 0.0f);
}

TEST(ModelTest, ValidatesStructure) {
  EXPECT_THROW(Model({2}, 2, {Layer::Dense(3, 2)}), Error);
  EXPECT_THROW(Model({2}, 3, {Layer::Dense(2, 2)}), Error);
  EXPECT_THROW(Model({2}, 2, {Layer::Of(LayerKind::kSkipBegin), Layer::Dense(2, 2)}), Error);
  EXPECT_THROW(Model({2}, 2, {Layer::Of(LayerKind::kSoftmax), Layer::Dense(2, 2)}), Error);
}

TEST(ModelTest, LayerNamesUseOneBasedIndices) {
  Model model = BuildModel(Architecture::kLeNet, {1, 8, 8}, 10);
  EXPECT_EQ(model.LayerName(0), "conv2d_1");
  const auto params = model.ParameterisedPositions();
  EXPECT_EQ(params.size(), 4u);
  EXPECT_EQ(model.LayerName(params.back()), "dense_" + std::to_string(params.back() + 1));
}

TEST(GradientTest, LinearModelGradientIsWeightRow) {
  Model model = LinearModel({{0.5f, -2.0f, 3.0f}, {1.0f, 1.0f, 1.0f}}, {0.1f, 0.2f});
  const Tensor g = InputGradient(model, Tensor({3}, {4.0f, 5.0f, 6.0f}), 0);
  EXPECT_EQ(g[0], 0.5f);
  EXPECT_EQ(g[1], -2.0f);
  EXPECT_EQ(g[2], 3.0f);
}

TEST(GradientTest, InvalidClassIndex) {
  Model model = LinearModel({{1, 0}, {0, 1}}, {0, 0});
  EXPECT_THROW(InputGradient(model, Tensor({2}), 2), Error);
  EXPECT_THROW(InputGradient(model, Tensor({2}), -1), Error);
}

TEST(GradientTest, GuidedReluFullyGated) {
  Layer first = Layer::Dense(2, 2);
  first.weights = Tensor({2, 2}, {1, 0, 0, 1});
  first.bias = Tensor({2}, {-10, -10});
  Layer second = Layer::Dense(2, 1);
  second.weights = Tensor({1, 2}, {1, 1});
  Model model({2}, 1, {first, Layer::Of(LayerKind::kReLU), second});
  const Tensor g = InputGradient(model, Tensor({2}, {1, 2}), 0, BackwardRule::kGuidedReLU);
  for (float v : g.values()) EXPECT_EQ(v, 0.0f);
}

TEST(GradientTest, GuidedReluDropsNegativeBackwardSignal) {
  Layer first = Layer::Dense(2, 2);
  first.weights = Tensor({2, 2}, {1, 0, 0, 1});
  Layer second = Layer::Dense(2, 1);
  second.weights = Tensor({1, 2}, {1, -1});
  Model model({2}, 1, {first, Layer::Of(LayerKind::kReLU), second});
  const Tensor x({2}, {1, 2});
  const Tensor standard = InputGradient(model, x, 0);
  const Tensor guided = InputGradient(model, x, 0, BackwardRule::kGuidedReLU);
  EXPECT_EQ(standard[1], -1.0f);
  EXPECT_EQ(guided[0], 1.0f);
  EXPECT_EQ(guided[1], 0.0f);
}

TEST(GradientTest, TwoLayerNetMatchesFiniteDifferences) {
  Model model({6}, 3, {Layer::Dense(6, 8), Layer::Of(LayerKind::kReLU), Layer::Dense(8, 3)});
  InitializeParameters(model, 11);
  const auto check = CheckInputGradient(model, RandomTensor({6}, 2, -1, 1), 1, 1e-3, 1e-3);
  EXPECT_GE(check.fraction(), 0.99) << "worst " << check.worst_relative_error;
}

class LayerKindGradientTest : public ::testing::TestWithParam<Architecture> {};

TEST_P(LayerKindGradientTest, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Model model = RandomModel(GetParam(), {1, 16, 16}, 10, seed);
    const auto check = CheckInputGradient(model, RandomTensor({1, 16, 16}, seed + 100), int(seed) % 10, 1e-3, 1e-3);
    EXPECT_GE(check.fraction(), 0.99) << "seed " << seed << " worst " << check.worst_relative_error;
  }
}

INSTANTIATE_TEST_SUITE_P(Architectures, LayerKindGradientTest,
                         ::testing::Values(Architecture::kLeNet, Architecture::kMiniResNet),
                         [](const auto& info) { return std::string(ArchitectureName(info.param)); });

TEST(ArchitectureTest, KaimingUniformBound) {
  Rng rng(1);
  const Tensor w = KaimingUniform({16, 8, 3, 3}, rng);
  const float bound = static_cast<float>(std::sqrt(6.0 / 72));
  for (float v : w.values()) {
    EXPECT_LE(v, bound);
    EXPECT_GE(v, -bound);
  }
  EXPECT_EQ(FanIn({16, 8, 3, 3}), 72);
  EXPECT_EQ(FanIn({10, 32}), 32);
}

TEST(ArchitectureTest, InitializationIsDeterministic) {
  Model a = BuildModel(Architecture::kMiniResNet, {1, 8, 8}, 10);
  Model b = a;
  InitializeParameters(a, 4);
  InitializeParameters(b, 4);
  EXPECT_TRUE(a.SameParameters(b));
  InitializeParameters(b, 5);
  EXPECT_FALSE(a.SameParameters(b));
}

class ModelIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("mprt_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string Prefix() const { return (dir_ / "model").string(); }

  std::filesystem::path dir_;
};

TEST_F(ModelIoTest, RoundTripIsBitExact) {
  Model model = RandomModel(Architecture::kMiniResNet, {1, 8, 8}, 10, 3);
  model.mutable_metadata()["note"] = "round trip";
  SaveModel(model, Prefix());
  const Model loaded = LoadModel(Prefix());
  EXPECT_TRUE(model.SameParameters(loaded));
  EXPECT_EQ(model.metadata(), loaded.metadata());
  EXPECT_EQ(model.input_shape(), loaded.input_shape());
  ASSERT_EQ(model.num_layers(), loaded.num_layers());
  for (std::size_t i = 0; i < model.num_layers(); ++i) EXPECT_EQ(model.layer(i).kind, loaded.layer(i).kind);
}

TEST_F(ModelIoTest, TruncatedWeightsFail) {
  SaveModel(RandomModel(Architecture::kLeNet, {1, 8, 8}, 10, 3), Prefix());
  const auto weights = Prefix() + ".weights";
  std::filesystem::resize_file(weights, std::filesystem::file_size(weights) - 3);
  try {
    LoadModel(Prefix());
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
}

TEST_F(ModelIoTest, UnknownLayerKindIsNamed) {
  SaveModel(RandomModel(Architecture::kLeNet, {1, 8, 8}, 10, 3), Prefix());
  const auto manifest = Prefix() + ".manifest";
  std::ifstream in(manifest);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  in.close();
  text.replace(text.find("layer relu"), 10, "layer gelu");
  std::ofstream(manifest) << text;
  try {
    LoadModel(Prefix());
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gelu"), std::string::npos) << e.what();
  }
}

TEST_F(ModelIoTest, VersionMismatch) {
  SaveModel(RandomModel(Architecture::kLeNet, {1, 8, 8}, 10, 3), Prefix());
  const auto manifest = Prefix() + ".manifest";
  std::ifstream in(manifest);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  in.close();
  text.replace(0, text.find('\n'), "mprt-model-manifest 99");
  std::ofstream(manifest) << text;
  try {
    LoadModel(Prefix());
    FAIL() << "expected a version error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
  }
}

TEST_F(ModelIoTest, MissingFileIsAnError) { EXPECT_THROW(LoadModel(Prefix() + "_absent"), Error); }

}  // namespace
}  // namespace mprt
