#include "mprt/dataset.h"

#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "mprt/error.h"

namespace mprt {
namespace {

SyntheticSpec SmallSpec() {
  SyntheticSpec spec;
  spec.image_size = 8;
  spec.train_samples = 103;
  spec.test_samples = 50;
  return spec;
}

TEST(SyntheticTest, SameSeedSameData) {
  const auto a = GenerateSynthetic(SmallSpec(), 5);
  const auto b = GenerateSynthetic(SmallSpec(), 5);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train.inputs[i], b.train.inputs[i]);
    EXPECT_EQ(a.train.labels[i], b.train.labels[i]);
  }
  const auto c = GenerateSynthetic(SmallSpec(), 6);
  EXPECT_FALSE(a.train.inputs[0] == c.train.inputs[0]);
}

TEST(SyntheticTest, ClassBalanced) {
  const auto data = GenerateSynthetic(SmallSpec(), 1);
  std::vector<int> counts(10, 0);
  for (int label : data.train.labels) ++counts[label];
  for (int c : counts) {
    EXPECT_GE(c, 103 / 10);
    EXPECT_LE(c, 103 / 10 + 1);
  }
  EXPECT_EQ(data.train.split, "train");
  EXPECT_EQ(data.test.split, "test");
  EXPECT_NO_THROW(data.train.Validate());
}

TEST(SyntheticTest, SplitsAreDisjointDraws) {
  const auto data = GenerateSynthetic(SmallSpec(), 1);
  for (const auto& a : data.test.inputs)
    for (const auto& b : data.train.inputs) ASSERT_FALSE(a == b);
}

TEST(SyntheticTest, InvalidSpecs) {
  SyntheticSpec spec = SmallSpec();
  spec.classes = 1;
  EXPECT_THROW(GenerateSynthetic(spec, 1), Error);
  spec = SmallSpec();
  spec.image_size = 4;
  EXPECT_THROW(GenerateSynthetic(spec, 1), Error);
}

TEST(DatasetTest, ValidateRejectsBadLabels) {
  Dataset d;
  d.num_classes = 2;
  d.inputs = {Tensor({2}), Tensor({2})};
  d.labels = {0, 2};
  EXPECT_THROW(d.Validate(), Error);
  d.labels = {0, 1};
  EXPECT_NO_THROW(d.Validate());
  d.inputs[1] = Tensor({3});
  EXPECT_THROW(d.Validate(), Error);
}

TEST(DatasetTest, HeadTruncates) {
  const auto data = GenerateSynthetic(SmallSpec(), 1);
  EXPECT_EQ(data.test.Head(7).size(), 7u);
  EXPECT_EQ(data.test.Head(1000).size(), data.test.size());
}

class IdxTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("mprt_idx_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(IdxTest, FloatRoundTrip) {
  const auto data = GenerateSynthetic(SmallSpec(), 2);
  const auto images = (dir_ / "images.idx").string(), labels = (dir_ / "labels.idx").string();
  WriteIdx(data.test, images, labels);
  const Dataset loaded = ReadIdx(images, labels);
  ASSERT_EQ(loaded.size(), data.test.size());
  EXPECT_EQ(loaded.num_classes, 10);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded.inputs[i], data.test.inputs[i]);
    EXPECT_EQ(loaded.labels[i], data.test.labels[i]);
  }
}

TEST_F(IdxTest, ReadsUbyteImages) {
  const auto images = (dir_ / "u8.idx").string(), labels = (dir_ / "l8.idx").string();
  {
    std::ofstream out(images, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    const unsigned char pixels[] = {0, 255, 51, 102, 255, 255, 0, 0};
    out.write(reinterpret_cast<const char*>(pixels), sizeof(pixels));
  }
  {
    std::ofstream out(labels, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 1, 0, 0, 0, 2, 3, 1};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
  }
  const Dataset d = ReadIdx(images, labels);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.inputs[0].shape(), (Shape{1, 2, 2}));
  EXPECT_FLOAT_EQ(d.inputs[0][1], 1.0f);
  EXPECT_FLOAT_EQ(d.inputs[0][2], 0.2f);
  EXPECT_EQ(d.labels[0], 3);
  EXPECT_EQ(d.num_classes, 4);
}

TEST_F(IdxTest, BadMagicFails) {
  const auto images = (dir_ / "bad.idx").string();
  std::ofstream(images, std::ios::binary) << "garbage!";
  EXPECT_THROW(ReadIdx(images, images), Error);
}

}  // namespace
}  // namespace mprt
