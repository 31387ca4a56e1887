#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jssl {

struct MixtureSpec {
  double mu1 = 0.0, mu2 = 0.1;
  double sigma1 = 1.0, sigma2 = 1.0;
  std::size_t N = 10, K = 10000;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
};

struct Prop1Result {
  double mse_xbar = 0, mse_xtilde = 0;
  /// Monte-Carlo standard errors of the two MSE estimates.
  double se_xbar = 0, se_xtilde = 0;
  double analytic_mse_xbar = 0, analytic_mse_xtilde = 0;
};

/// Squared errors of the target-only mean and the pooled mean against mu1,
/// with N draws from N(mu1, sigma1^2) and K from N(mu2, sigma2^2) per trial.
Prop1Result prop1_simulate(const MixtureSpec& spec);
void check_spec(const MixtureSpec& spec);

struct RegressionSpec {
  std::size_t p = 2;
  double sigma = 1.0;        // x ~ N(0, sigma^2 I)
  double eps = 0.5;          // noise of the evaluation model y
  double eps_tilde = 0.5;    // noise of the training model y~
  std::vector<double> w{1.0, -0.5};
  std::vector<double> w_tilde{1.0, -0.5};
  std::size_t K = 50;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
};

struct Prop2Result {
  double bias_hat = 0, bias_se = 0;
  double var_hat = 0;
  /// Mean over trials of E_(x,y)[(w_hat^T x - y)^2] = sigma^2 ||w_hat - w||^2 + eps^2.
  double risk_hat = 0, risk_se = 0;
  double analytic_bias = 0;
  /// eps~^2 ||x||^2 / (sigma^2 K), the stated closed form.
  double analytic_var = 0;
  /// eps~^2 ||x||^2 / (sigma^2 (K - p - 1)), the inverse-Wishart mean.
  double exact_var = 0;
  double risk_bound = 0;
  double mean_prediction = 0;
  std::size_t resampled = 0;
};

/// Least-squares fits of w~ on K training pairs per trial (Householder QR);
/// statistics of the prediction at `x_query`.
Prop2Result prop2_simulate(const RegressionSpec& spec, const std::vector<double>& x_query);
void check_spec(const RegressionSpec& spec);

/// Human-readable comparison table and CSV of both simulations.
std::string theory_table(const MixtureSpec& m, const Prop1Result& r1, const RegressionSpec& s,
                         const std::vector<double>& x, const Prop2Result& r2);
std::string theory_csv(const Prop1Result& r1, const Prop2Result& r2);

}  // namespace jssl
