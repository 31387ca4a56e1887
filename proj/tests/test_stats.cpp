#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "jssl/error.hpp"
#include "jssl/stats.hpp"

using namespace jssl;

namespace {

std::vector<EvalRecord> records(const std::vector<double>& ssim, int R = 4) {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < ssim.size(); ++i)
    out.push_back({"s" + std::to_string(i), R, "X", ssim[i], 10.0 * ssim[i], 1.0 - ssim[i]});
  return out;
}

}  // namespace

TEST(Stats, IdenticalSamplesGiveUnitPValue) {
  const std::vector<double> a{0.1, 0.5, 0.3, 0.9, 0.7, 0.2};
  const PairedTestResult r = paired_test(a, a);
  EXPECT_EQ(r.t_p_value, 1.0);
  EXPECT_EQ(r.w_p_value, 1.0);
  EXPECT_EQ(r.w_statistic, 0.0);
  EXPECT_EQ(r.n_nonzero, 0u);
  EXPECT_FALSE(r.w_significant);
}

TEST(Stats, ClearShiftIsSignificant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 0.05);
  std::vector<double> a(30), b(30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    b[i] = 0.5 + nd(rng);
    a[i] = b[i] + 0.2 + nd(rng) * 0.2;
  }
  const PairedTestResult r = paired_test(a, b);
  EXPECT_LT(r.t_p_value, 1e-3);
  EXPECT_LT(r.w_p_value, 1e-3);
  EXPECT_TRUE(r.w_significant);
  EXPECT_GT(r.mean_diff, 0.0);
}

TEST(Stats, MatchesReferenceValues) {
  // Reference: SciPy ttest_1samp and wilcoxon(method="approx", correction=False).
  const std::vector<double> d{0.3, -0.1, 0.4, 0.25, -0.05, 0.6, 0.2, 0.1};
  const std::vector<double> zero(d.size(), 0.0);
  const PairedTestResult r = paired_test(d, zero);
  EXPECT_NEAR(r.t_p_value, 0.035366850157849135, 1e-10);
  EXPECT_DOUBLE_EQ(r.w_statistic, 3.5);
  EXPECT_NEAR(r.w_p_value, 0.04206273335676607, 1e-10);

  const std::vector<double> d2{1, 1, -2, 2, 3, -3, 4, 5};
  const PairedTestResult r2 = paired_test(d2, std::vector<double>(d2.size(), 0.0));
  EXPECT_DOUBLE_EQ(r2.w_statistic, 9.0);
  EXPECT_NEAR(r2.w_p_value, 0.2059032107320684, 1e-10);
}

TEST(Stats, SignedRankSumsMatchBruteForce) {
  const std::vector<double> d{1, -2, 3, -4, 5, 6};
  const PairedTestResult r = paired_test(d, std::vector<double>(d.size(), 0.0));
  // Magnitudes are distinct, so the rank of |d_i| is the count of magnitudes <= |d_i|.
  double wp = 0.0, wm = 0.0;
  for (double x : d) {
    double rank = 0.0;
    for (double y : d) rank += std::fabs(y) <= std::fabs(x);
    (x > 0 ? wp : wm) += rank;
  }
  EXPECT_EQ(r.w_plus, wp);
  EXPECT_EQ(r.w_statistic, std::min(wp, wm));
  const double m = 6.0;
  EXPECT_NEAR(r.w_z, (wp - m * (m + 1) / 4) / std::sqrt(m * (m + 1) * (2 * m + 1) / 24), 1e-14);
}

TEST(Stats, WilcoxonInvariantToMonotoneRescaling) {
  const std::vector<double> d{0.3, -0.1, 0.4, 0.25, -0.05, 0.6, 0.2, 0.15};
  std::vector<double> cubed;
  for (double x : d) cubed.push_back(x * x * x * 7.0);
  const std::vector<double> zero(d.size(), 0.0);
  const PairedTestResult a = paired_test(d, zero), b = paired_test(cubed, zero);
  EXPECT_EQ(a.w_statistic, b.w_statistic);
  EXPECT_EQ(a.w_p_value, b.w_p_value);
}

TEST(Stats, AverageRanksShareTies) {
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0, 3.0};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0}));
}

TEST(Stats, ConstantShiftGivesZeroPValue) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6}, b{0, 1, 2, 3, 4, 5};
  const PairedTestResult r = paired_test(a, b);
  EXPECT_TRUE(std::isinf(r.t_statistic));
  EXPECT_EQ(r.t_p_value, 0.0);
}

TEST(Stats, RecordsAlignByIdAndAcceleration) {
  const auto a = records({0.6, 0.7, 0.8, 0.65, 0.75, 0.9});
  auto b = records({0.5, 0.6, 0.7, 0.6, 0.7, 0.8});
  std::reverse(b.begin(), b.end());
  const PairedTestResult r = paired_test(a, b, "ssim");
  EXPECT_NEAR(r.mean_diff, (0.1 + 0.1 + 0.1 + 0.05 + 0.05 + 0.1) / 6.0, 1e-12);
  EXPECT_EQ(r.w_plus, 21.0);
  EXPECT_NEAR(paired_test(a, b, "nmse").mean_diff, -r.mean_diff, 1e-12);
}

TEST(Stats, Errors) {
  const auto a = records({0.6, 0.7, 0.8, 0.65, 0.75, 0.9});
  auto b = a;
  b[2].id = "other";
  EXPECT_THROW(paired_test(a, b, "ssim"), ConfigError);
  EXPECT_THROW(paired_test(a, records({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, 8), "ssim"), ConfigError);
  EXPECT_THROW(paired_test(a, a, "hfen"), ConfigError);
  const std::vector<double> short_a{1, 2, 3}, short_b{1, 2, 3};
  EXPECT_THROW(paired_test(short_a, short_b), ConfigError);
}

TEST(Stats, ConstantShiftOnTwentySamples) {
  std::vector<double> a, b;
  for (int i = 0; i < 20; ++i) {
    b.push_back(0.25 + 0.03125 * i);
    a.push_back(b.back() + 0.0625);
  }
  const PairedTestResult r = paired_test(a, b);
  EXPECT_LT(r.t_p_value, 1e-3);
  EXPECT_LT(r.w_p_value, 1e-3);
  // All 20 differences tie: W+ = 210, variance 20*21*41/24 - (20^3 - 20)/48.
  EXPECT_NEAR(r.w_z, 105.0 / std::sqrt(717.5 - 166.25), 1e-12);
}

TEST(Stats, CommonShiftLeavesPValuesUnchanged) {
  const std::vector<double> a{0.5, 0.625, 0.25, 0.875, 0.75, 0.375, 0.5, 0.125};
  const std::vector<double> b{0.375, 0.5, 0.375, 0.5, 0.625, 0.125, 0.625, 0.0};
  std::vector<double> as, bs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    as.push_back(a[i] + 2.0);
    bs.push_back(b[i] + 2.0);
  }
  const PairedTestResult x = paired_test(a, b), y = paired_test(as, bs);
  EXPECT_EQ(x.w_p_value, y.w_p_value);
  EXPECT_EQ(x.t_p_value, y.t_p_value);
}
