#include "mprt/train.h"

#include <cstdlib>

#include "gtest/gtest.h"
#include "mprt/error.h"
#include "test_util.h"

namespace mprt {
namespace {

TEST(TrainTest, LeNetLearnsSmallSyntheticData) {
  const Model& model = testing::TrainedLeNet();
  EXPECT_GT(Accuracy(model, testing::SmallData().test), 0.90);
  EXPECT_GE(Accuracy(model, testing::SmallData().train), 0.90);
  EXPECT_EQ(model.metadata().at("epochs"), "20");
  EXPECT_EQ(std::strtod(model.metadata().at("test_accuracy").c_str(), nullptr),
            Accuracy(model, testing::SmallData().test));
}

TEST(TrainTest, ZeroEpochsReturnsInitialModel) {
  TrainConfig config;
  config.epochs = 0;
  const auto& data = testing::SmallData();
  const Model trained = Train(config, data.train, 9);
  const Model initial = InitialModel(config, data.train.inputs[0].shape(), data.train.num_classes, 9);
  EXPECT_TRUE(trained.SameParameters(initial));
}

TEST(TrainTest, DeterministicGivenSeed) {
  TrainConfig config;
  config.epochs = 1;
  const Dataset subset = testing::SmallData().train.Head(200);
  const Model a = Train(config, subset, 4);
  const Model b = Train(config, subset, 4);
  EXPECT_TRUE(a.SameParameters(b));
  const Model c = Train(config, subset, 5);
  EXPECT_FALSE(a.SameParameters(c));
}

TEST(TrainTest, DivergenceIsReported) {
  TrainConfig config;
  config.epochs = 3;
  config.learning_rate = 1e6;
  try {
    Train(config, testing::SmallData().train.Head(200), 1);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kTrainingDiverged || e.code() == ErrorCode::kNonFinite) << e.what();
  }
}

TEST(TrainTest, EmptyDatasetRejected) {
  Dataset empty;
  empty.num_classes = 10;
  EXPECT_THROW(Train(TrainConfig{}, empty, 1), Error);
}

}  // namespace
}  // namespace mprt
