#include "jssl/theory.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "jssl/error.hpp"
#include "jssl/rng.hpp"

namespace jssl {

void check_spec(const MixtureSpec& s) {
  if (!(s.sigma1 > 0.0 && s.sigma2 > 0.0)) throw ConfigError("mixture spec: sigmas must be positive");
  if (s.N < 1 || s.K < 1) throw ConfigError("mixture spec: N and K must be positive");
  if (s.trials < 1000) throw ConfigError("mixture spec: trials must be >= 1000");
}

Prop1Result prop1_simulate(const MixtureSpec& s) {
  check_spec(s);
  std::mt19937_64 rng(derive_seed(s.seed, {0x9901}));
  std::normal_distribution<double> d1(s.mu1, s.sigma1), d2(s.mu2, s.sigma2);
  double sb = 0, sb2 = 0, st = 0, st2 = 0;
  for (std::size_t t = 0; t < s.trials; ++t) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < s.N; ++i) a += d1(rng);
    for (std::size_t i = 0; i < s.K; ++i) b += d2(rng);
    const double xbar = a / static_cast<double>(s.N);
    const double xtilde = (a + b) / static_cast<double>(s.N + s.K);
    const double eb = (xbar - s.mu1) * (xbar - s.mu1), et = (xtilde - s.mu1) * (xtilde - s.mu1);
    sb += eb;
    sb2 += eb * eb;
    st += et;
    st2 += et * et;
  }
  const double n = static_cast<double>(s.trials);
  Prop1Result r;
  r.mse_xbar = sb / n;
  r.mse_xtilde = st / n;
  r.se_xbar = std::sqrt(std::max(0.0, sb2 / n - r.mse_xbar * r.mse_xbar) / (n - 1.0));
  r.se_xtilde = std::sqrt(std::max(0.0, st2 / n - r.mse_xtilde * r.mse_xtilde) / (n - 1.0));
  const double N = static_cast<double>(s.N), K = static_cast<double>(s.K);
  const double pi = N / (N + K), dm = s.mu1 - s.mu2;
  r.analytic_mse_xbar = s.sigma1 * s.sigma1 / N;
  r.analytic_mse_xtilde = (1 - pi) * (1 - pi) * dm * dm +
                          (pi * s.sigma1 * s.sigma1 + (1 - pi) * s.sigma2 * s.sigma2 + pi * (1 - pi) * dm * dm) / (N + K);
  return r;
}

void check_spec(const RegressionSpec& s) {
  if (s.p < 1) throw ConfigError("regression spec: p must be positive");
  if (s.K <= s.p) throw ConfigError("regression spec: K must exceed p");
  if (!(s.sigma > 0.0 && s.eps > 0.0 && s.eps_tilde > 0.0)) throw ConfigError("regression spec: scales must be positive");
  if (s.w.size() != s.p || s.w_tilde.size() != s.p) throw ConfigError("regression spec: w and w~ must have length p");
  if (s.trials < 2) throw ConfigError("regression spec: need at least two trials");
}

Prop2Result prop2_simulate(const RegressionSpec& s, const std::vector<double>& xq) {
  check_spec(s);
  if (xq.size() != s.p) throw ConfigError("prop2: query point must have length p");
  const auto p = static_cast<Eigen::Index>(s.p), K = static_cast<Eigen::Index>(s.K);
  const Eigen::Map<const Eigen::VectorXd> w(s.w.data(), p), wt(s.w_tilde.data(), p), x(xq.data(), p);
  std::mt19937_64 rng(derive_seed(s.seed, {0x9902}));
  std::normal_distribution<double> nx(0.0, s.sigma), ne(0.0, s.eps_tilde);
  Eigen::MatrixXd X(K, p);
  Eigen::VectorXd y(K);
  double sy = 0, sr = 0, sr2 = 0;
  Prop2Result r;
  // Welford for the prediction variance.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t t = 0; t < s.trials; ++t) {
    Eigen::VectorXd what;
    for (;;) {
      for (Eigen::Index i = 0; i < K; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = nx(rng);
        y(i) = X.row(i).dot(wt) + ne(rng);
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
      if (qr.rank() == p) {
        what = qr.solve(y);
        break;
      }
      ++r.resampled;
      std::fprintf(stderr, "prop2: rank-deficient design in trial %zu, resampling\n", t);
    }
    const double pred = what.dot(x);
    sy += pred;
    const double delta = pred - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (pred - mean);
    const double risk = s.sigma * s.sigma * (what - w).squaredNorm() + s.eps * s.eps;
    sr += risk;
    sr2 += risk * risk;
  }
  const double n = static_cast<double>(s.trials);
  r.mean_prediction = sy / n;
  r.bias_hat = r.mean_prediction - w.dot(x);
  r.var_hat = m2 / (n - 1.0);
  r.bias_se = std::sqrt(r.var_hat / n);
  r.risk_hat = sr / n;
  r.risk_se = std::sqrt(std::max(0.0, sr2 / n - r.risk_hat * r.risk_hat) / (n - 1.0));
  const double pd = static_cast<double>(s.p), Kd = static_cast<double>(s.K);
  const double s2 = s.sigma * s.sigma, et2 = s.eps_tilde * s.eps_tilde;
  r.analytic_bias = (wt - w).dot(x);
  r.analytic_var = et2 * x.squaredNorm() / (s2 * Kd);
  r.exact_var = et2 * x.squaredNorm() / (s2 * (Kd - pd - 1.0));
  r.risk_bound = pd * s2 * (wt - w).squaredNorm() + pd * et2 / Kd + s.eps * s.eps;
  return r;
}

std::string theory_table(const MixtureSpec& m, const Prop1Result& r1, const RegressionSpec& s,
                         const std::vector<double>& x, const Prop2Result& r2) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "Proposition 1 (mu1=%g mu2=%g sigma1=%g sigma2=%g N=%zu K=%zu trials=%zu)\n", m.mu1, m.mu2,
                m.sigma1, m.sigma2, m.N, m.K, m.trials);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-12s %14s %14s %12s\n", "estimator", "simulated", "analytic", "std.err");
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-12s %14.6g %14.6g %12.3g\n", "x_bar", r1.mse_xbar, r1.analytic_mse_xbar, r1.se_xbar);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-12s %14.6g %14.6g %12.3g\n", "x_tilde", r1.mse_xtilde, r1.analytic_mse_xtilde,
                r1.se_xtilde);
  os << buf;
  std::string xs;
  for (double v : x) xs += (xs.empty() ? "" : ",") + std::to_string(v);
  std::snprintf(buf, sizeof buf, "Proposition 2 (p=%zu sigma=%g eps=%g eps~=%g K=%zu trials=%zu x=[%s])\n", s.p, s.sigma,
                s.eps, s.eps_tilde, s.K, s.trials, xs.c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-12s %14s %14s\n", "quantity", "simulated", "closed form");
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-12s %14.6g %14.6g\n", "bias", r2.bias_hat, r2.analytic_bias);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-12s %14.6g %14.6g  (K-p-1 form %.6g)\n", "variance", r2.var_hat, r2.analytic_var,
                r2.exact_var);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-12s %14.6g %14.6g  (bound)\n", "risk", r2.risk_hat, r2.risk_bound);
  os << buf;
  return os.str();
}

std::string theory_csv(const Prop1Result& r1, const Prop2Result& r2) {
  std::ostringstream os;
  char buf[256];
  os << "quantity,simulated,analytic,std_err\n";
  std::snprintf(buf, sizeof buf, "prop1_mse_xbar,%.17g,%.17g,%.17g\n", r1.mse_xbar, r1.analytic_mse_xbar, r1.se_xbar);
  os << buf;
  std::snprintf(buf, sizeof buf, "prop1_mse_xtilde,%.17g,%.17g,%.17g\n", r1.mse_xtilde, r1.analytic_mse_xtilde,
                r1.se_xtilde);
  os << buf;
  std::snprintf(buf, sizeof buf, "prop2_bias,%.17g,%.17g,%.17g\n", r2.bias_hat, r2.analytic_bias, r2.bias_se);
  os << buf;
  std::snprintf(buf, sizeof buf, "prop2_variance,%.17g,%.17g,\n", r2.var_hat, r2.analytic_var);
  os << buf;
  std::snprintf(buf, sizeof buf, "prop2_variance_exact,%.17g,%.17g,\n", r2.var_hat, r2.exact_var);
  os << buf;
  std::snprintf(buf, sizeof buf, "prop2_risk,%.17g,%.17g,%.17g\n", r2.risk_hat, r2.risk_bound, r2.risk_se);
  os << buf;
  return os.str();
}

}  // namespace jssl
