#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jssl/error.hpp"
#include "jssl/theory.hpp"

using namespace jssl;

namespace {

double norm2(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

}  // namespace

TEST(Prop1, CollapsedMixtureMatchesBothFormulas) {
  MixtureSpec s;
  s.mu1 = s.mu2 = 0.3;
  s.sigma1 = s.sigma2 = 1.5;
  s.N = 10;
  s.K = 1000;
  s.seed = 4;
  const Prop1Result r = prop1_simulate(s);
  EXPECT_NEAR(r.analytic_mse_xbar, 2.25 / 10.0, 1e-15);
  EXPECT_NEAR(r.analytic_mse_xtilde, 2.25 / 1010.0, 1e-15);
  EXPECT_LT(std::fabs(r.mse_xbar - r.analytic_mse_xbar), 3 * r.se_xbar);
  EXPECT_LT(std::fabs(r.mse_xtilde - r.analytic_mse_xtilde), 3 * r.se_xtilde);
}

TEST(Prop1, PoolingWinsUnderTheCondition) {
  MixtureSpec s;  // (0 - 0.1)^2 = 0.01 < 0.5 / 10
  s.seed = 1;
  ASSERT_LT((s.mu1 - s.mu2) * (s.mu1 - s.mu2), 0.5 * s.sigma1 * s.sigma1 / s.N);
  const Prop1Result r = prop1_simulate(s);
  EXPECT_LT(r.mse_xtilde, r.mse_xbar);
  EXPECT_LT(std::fabs(r.mse_xbar - r.analytic_mse_xbar), 3 * r.se_xbar);
  EXPECT_LT(std::fabs(r.mse_xtilde - r.analytic_mse_xtilde), 3 * r.se_xtilde);
}

TEST(Prop1, PoolingLosesWhenMeansAreFarApart) {
  MixtureSpec s;
  s.mu2 = 10.0;
  s.K = 100;
  s.seed = 2;
  const Prop1Result r = prop1_simulate(s);
  EXPECT_GT(r.analytic_mse_xtilde, r.analytic_mse_xbar);
  EXPECT_GT(r.mse_xtilde, r.mse_xbar);
}

TEST(Prop1, DeviationShrinksAtRootTrialsRate) {
  auto mean_dev = [](std::size_t trials) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MixtureSpec s;
      s.K = 100;
      s.trials = trials;
      s.seed = seed;
      const Prop1Result r = prop1_simulate(s);
      acc += std::fabs(r.mse_xbar - r.analytic_mse_xbar);
    }
    return acc / 20.0;
  };
  const double ratio = mean_dev(1000) / mean_dev(4000);
  EXPECT_GT(ratio, 1.0);
  EXPECT_LT(ratio, 4.0);
}

TEST(Prop1, RejectsInvalidSpec) {
  MixtureSpec s;
  s.sigma1 = 0.0;
  EXPECT_THROW(prop1_simulate(s), ConfigError);
  s = {};
  s.trials = 10;
  EXPECT_THROW(prop1_simulate(s), ConfigError);
}

TEST(Prop2, ZeroBiasWhenModelsAgree) {
  RegressionSpec s;
  s.trials = 20000;
  s.seed = 3;
  const Prop2Result r = prop2_simulate(s, {0.7, -1.2});
  EXPECT_EQ(r.analytic_bias, 0.0);
  EXPECT_LT(std::fabs(r.bias_hat), 3 * r.bias_se);
}

TEST(Prop2, BiasMatchesWeightGap) {
  RegressionSpec s;
  s.w_tilde = {1.2, -0.3};
  s.seed = 5;
  const std::vector<double> x{1.0, 1.0};
  const Prop2Result r = prop2_simulate(s, x);
  EXPECT_NEAR(r.analytic_bias, 0.4, 1e-12);
  EXPECT_LT(std::fabs(r.bias_hat - r.analytic_bias), 0.05 * std::fabs(r.analytic_bias));
}

TEST(Prop2, MeanPredictionIsLinearInQuery) {
  RegressionSpec s;
  s.w_tilde = {0.4, 0.9};
  s.trials = 5000;
  s.seed = 6;
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0}, c{2.5, -1.5};
  const double pa = prop2_simulate(s, a).mean_prediction;
  const double pb = prop2_simulate(s, b).mean_prediction;
  const double pc = prop2_simulate(s, c).mean_prediction;
  EXPECT_NEAR(pc, 2.5 * pa - 1.5 * pb, 1e-12);
}

TEST(Prop2, VarianceMatchesInverseWishartMean) {
  RegressionSpec s;
  s.seed = 7;
  const std::vector<double> x{1.0, 1.0};
  const Prop2Result r = prop2_simulate(s, x);
  EXPECT_NEAR(r.exact_var, 0.25 * norm2(x) / 47.0, 1e-15);
  EXPECT_LT(std::fabs(r.var_hat / r.exact_var - 1.0), 0.05);
}

TEST(Prop2, LargeSampleVarianceMatchesStatedForm) {
  RegressionSpec s;
  s.K = 200;
  s.trials = 50000;
  s.seed = 8;
  const std::vector<double> x{1.0, -2.0};
  const Prop2Result r = prop2_simulate(s, x);
  EXPECT_NEAR(r.analytic_var, 0.25 * norm2(x) / 200.0, 1e-15);
  EXPECT_LT(std::fabs(r.var_hat / r.analytic_var - 1.0), 0.05);
}

TEST(Prop2, StatedVarianceUnderestimatesAtSmallK) {
  RegressionSpec s;
  s.seed = 9;
  const Prop2Result r = prop2_simulate(s, {1.0, 1.0});
  EXPECT_GT(r.var_hat / r.analytic_var - 1.0, 0.05);
}

TEST(Prop2, RiskWithinBoundAcrossRandomSpecs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dp(2, 5), dk(20, 120);
  std::uniform_real_distribution<double> scale(0.5, 2.0), coef(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    RegressionSpec s;
    s.p = dp(rng);
    s.K = dk(rng);
    s.sigma = scale(rng);
    s.eps = scale(rng);
    s.eps_tilde = scale(rng);
    s.w.resize(s.p);
    s.w_tilde.resize(s.p);
    for (std::size_t j = 0; j < s.p; ++j) {
      s.w[j] = coef(rng);
      s.w_tilde[j] = s.w[j] + 0.5 * coef(rng);
    }
    s.trials = 2000;
    s.seed = 100 + i;
    const Prop2Result r = prop2_simulate(s, std::vector<double>(s.p, 1.0));
    EXPECT_LE(r.risk_hat, r.risk_bound * 1.05) << "spec " << i << " p=" << s.p << " K=" << s.K;
  }
}

TEST(Prop2, Deterministic) {
  RegressionSpec s;
  s.trials = 3000;
  s.seed = 12;
  const Prop2Result a = prop2_simulate(s, {1.0, 2.0});
  const Prop2Result b = prop2_simulate(s, {1.0, 2.0});
  EXPECT_EQ(a.var_hat, b.var_hat);
  EXPECT_EQ(a.risk_hat, b.risk_hat);
  EXPECT_EQ(a.mean_prediction, b.mean_prediction);
  MixtureSpec m;
  m.K = 50;
  m.seed = 12;
  EXPECT_EQ(prop1_simulate(m).mse_xtilde, prop1_simulate(m).mse_xtilde);
}

TEST(Prop2, RejectsInvalidSpec) {
  RegressionSpec s;
  s.K = 2;
  EXPECT_THROW(prop2_simulate(s, {1.0, 1.0}), ConfigError);
  s = {};
  s.w_tilde = {1.0};
  EXPECT_THROW(prop2_simulate(s, {1.0, 1.0}), ConfigError);
  s = {};
  EXPECT_THROW(prop2_simulate(s, {1.0}), ConfigError);
}

TEST(Theory, ReportsContainBothVarianceForms) {
  MixtureSpec m;
  m.K = 50;
  RegressionSpec s;
  s.trials = 1000;
  const std::vector<double> x{1.0, 1.0};
  const Prop1Result r1 = prop1_simulate(m);
  const Prop2Result r2 = prop2_simulate(s, x);
  const std::string csv = theory_csv(r1, r2);
  EXPECT_NE(csv.find("prop2_variance,"), std::string::npos);
  EXPECT_NE(csv.find("prop2_variance_exact,"), std::string::npos);
  EXPECT_NE(theory_table(m, r1, s, x, r2).find("K-p-1"), std::string::npos);
}
