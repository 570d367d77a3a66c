#include "mprt/similarity.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "gtest/gtest.h"
#include "mprt/error.h"
#include "test_util.h"

namespace mprt {
namespace {

using testing::RandomTensor;

// Separable-filter SSIM: blur a, b, a*a, b*b, a*b with a 1-D Gaussian along
// rows then columns, keep valid positions, combine per pixel.
double FilterSsim(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
  const int k = 7;
  std::vector<double> g(k);
  double total = 0;
  for (int i = 0; i < k; ++i) total += g[i] = std::exp(-(i - 3) * (i - 3) / (2 * 1.5 * 1.5));
  for (double& v : g) v /= total;
  auto blur = [&](const std::vector<double>& x) {
    const int oh = h - k + 1, ow = w - k + 1;
    std::vector<double> rows(std::size_t(h) * ow), out(std::size_t(oh) * ow);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < ow; ++c)
        for (int i = 0; i < k; ++i) rows[std::size_t(r) * ow + c] += g[i] * x[std::size_t(r) * w + c + i];
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c)
        for (int i = 0; i < k; ++i) out[std::size_t(r) * ow + c] += g[i] * rows[std::size_t(r + i) * ow + c];
    return out;
  };
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const double range = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end())) -
                       std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  const auto ma = blur(a), mb = blur(b), maa = blur(aa), mbb = blur(bb), mab = blur(ab);
  double sum = 0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double va = maa[i] - ma[i] * ma[i], vb = mbb[i] - mb[i] * mb[i], cov = mab[i] - ma[i] * mb[i];
    sum += (2 * ma[i] * mb[i] + c1) * (2 * cov + c2) / ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
  }
  return sum / ma.size();
}

std::vector<double> AsDouble(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

TEST(SsimTest, MatchesSeparableFilterOracle) {
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 7 + trial, w = 16 - trial / 2;
    const Tensor a = RandomTensor({h, w}, 100 + trial, -1, 1);
    Tensor b = RandomTensor({h, w}, 200 + trial, -1, 1);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.6f * a[i] + 0.4f * b[i];
    EXPECT_NEAR(Ssim(a, b), FilterSsim(AsDouble(a), AsDouble(b), h, w), 1e-9) << trial;
  }
}

TEST(SsimTest, IdentityIsExactlyOne) {
  const Tensor a = RandomTensor({1, 16, 16}, 1, -2, 3);
  EXPECT_EQ(Ssim(a, a), 1.0);
  const Tensor small = RandomTensor({4, 4}, 2);
  EXPECT_EQ(Ssim(small, small), 1.0);
}

TEST(SsimTest, Symmetric) {
  const Tensor a = RandomTensor({16, 16}, 3), b = RandomTensor({16, 16}, 4);
  EXPECT_EQ(Ssim(a, b), Ssim(b, a));
}

TEST(SsimTest, NegationOfZeroMeanFieldIsNegative) {
  Tensor a = RandomTensor({5, 5}, 5, -1, 1);
  double mean = 0;
  for (float v : a.values()) mean += v;
  for (float& v : a.values()) v -= float(mean / a.size());
  Tensor neg = a;
  for (float& v : neg.values()) v = -v;
  EXPECT_LT(Ssim(a, neg), 0.0);
  const Tensor tiny({2, 2}, {1, -1, -1, 1});
  const Tensor tiny_neg({2, 2}, {-1, 1, 1, -1});
  // Means 0, variances 1, covariance -1, R = 2 so C2 = 0.06^2.
  EXPECT_NEAR(Ssim(tiny, tiny_neg), (-2 + 0.0036) / (2 + 0.0036), 1e-12);
  Tensor board({16, 16}), board_neg({16, 16});
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      board[r * 16 + c] = (r + c) % 2 ? 1.0f : -1.0f;
      board_neg[r * 16 + c] = -board[r * 16 + c];
    }
  EXPECT_LT(Ssim(board, board_neg), -0.99);
}

TEST(SsimTest, IndependentUniformFieldsAreNearZero) {
  double sum = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double s = Ssim(RandomTensor({32, 32}, 2 * trial), RandomTensor({32, 32}, 2 * trial + 1));
    EXPECT_LT(std::fabs(s), 0.2);
    sum += s;
  }
  EXPECT_LT(std::fabs(sum / 100), 0.05);
}

TEST(SsimTest, Errors) {
  EXPECT_THROW(Ssim(Tensor({8, 8}), Tensor({8, 9})), Error);
  EXPECT_THROW(Ssim(Tensor({64}), Tensor({64})), Error);
  EXPECT_EQ(Ssim(Tensor({8, 8}, 2.0f), Tensor({8, 8}, 2.0f)), 1.0);
}

std::vector<double> NaiveRanks(const std::vector<float>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (float v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

double NaivePearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

bool Constant(const std::vector<float>& x) { return std::all_of(x.begin(), x.end(), [&](float v) { return v == x[0]; }); }

TEST(SpearmanTest, ExhaustiveAgainstNaiveRanks) {
  std::size_t checked = 0;
  for (int n = 2; n <= 6; ++n) {
    std::vector<std::vector<float>> all;
    std::vector<float> x(n, 1);
    std::function<void(int)> fill = [&](int i) {
      if (i == n) {
        all.push_back(x);
        return;
      }
      for (int v = 1; v <= 4; ++v) {
        x[i] = float(v);
        fill(i + 1);
      }
    };
    fill(0);
    std::vector<std::vector<double>> ranks;
    for (const auto& a : all) ranks.push_back(NaiveRanks(a));
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (Constant(all[i])) {
        EXPECT_THROW(Spearman(all[i], all[0]), Error);
        continue;
      }
      for (std::size_t j = 0; j < all.size(); ++j) {
        if (Constant(all[j])) continue;
        const double expected = NaivePearson(ranks[i], ranks[j]);
        const double got = Spearman(all[i], all[j]);
        if (std::fabs(got - expected) > 1e-12) ADD_FAILURE() << "mismatch at n=" << n << " pair " << i << "," << j;
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 12u * 12 + 60u * 60 + 252u * 252 + 1020u * 1020 + 4092u * 4092);
}

TEST(SpearmanTest, SelfAndReversed) {
  const std::vector<float> x = {0.3f, -1, 2, 5, 4};
  EXPECT_DOUBLE_EQ(Spearman(x, x), 1.0);
  std::vector<float> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  std::vector<float> reversed(sorted.rbegin(), sorted.rend());
  EXPECT_DOUBLE_EQ(Spearman(sorted, reversed), -1.0);
}

TEST(SpearmanTest, AverageRanksWithTies) {
  const std::vector<float> x = {10, 20, 10, 30};
  EXPECT_EQ(AverageRanks(x), (std::vector<double>{1.5, 3, 1.5, 4}));
}

TEST(PearsonTest, ExactLinearity) {
  const std::vector<float> a = {1, 2, 3}, b = {2, 4, 6}, c = {3, 2, 1};
  EXPECT_DOUBLE_EQ(Pearson(a, b), 1.0);
  EXPECT_DOUBLE_EQ(Pearson(a, c), -1.0);
  const std::vector<float> flat = {1, 1, 1};
  try {
    Pearson(a, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVariance);
  }
  EXPECT_THROW(Pearson(std::vector<float>{1}, std::vector<float>{1}), Error);
  EXPECT_THROW(Pearson(a, std::vector<float>{1, 2}), Error);
}

TEST(MseTest, Values) {
  const std::vector<float> a = {1, 2, 3}, b = {1, 4, 0};
  EXPECT_DOUBLE_EQ(Mse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(Mse(a, b), 13.0 / 3);
}

TEST(SimilarityTest, DispatchAndSelfSimilarity) {
  const Tensor a = RandomTensor({1, 16, 16}, 9, -1, 1);
  for (auto fn : {SimilarityFn::kSsim, SimilarityFn::kSpearman, SimilarityFn::kPearson})
    EXPECT_NEAR(Similarity(fn, a, a), 1.0, 1e-12) << SimilarityName(fn);
  EXPECT_EQ(Similarity(SimilarityFn::kMse, a, a), 0.0);
  for (auto fn : {SimilarityFn::kSsim, SimilarityFn::kSpearman, SimilarityFn::kPearson, SimilarityFn::kMse})
    EXPECT_EQ(ParseSimilarity(SimilarityName(fn)), fn);
  EXPECT_FALSE(ParseSimilarity("HOG").has_value());
}

}  // namespace
}  // namespace mprt
