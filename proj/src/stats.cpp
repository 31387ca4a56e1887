#include "jssl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "jssl/error.hpp"

namespace jssl {

double metric_value(const EvalRecord& r, const std::string& metric) {
  if (metric == "ssim") return r.ssim;
  if (metric == "psnr") return r.psnr;
  if (metric == "nmse") return r.nmse;
  throw ConfigError("unknown metric '" + metric + "'");
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

PairedTestResult paired_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw ConfigError("paired_test: samples differ in length");
  if (a.size() < 6) throw ConfigError("paired_test: need at least 6 pairs");
  PairedTestResult r;
  r.n = a.size();
  std::vector<double> d(r.n);
  for (std::size_t i = 0; i < r.n; ++i) {
    d[i] = a[i] - b[i];
    if (!std::isfinite(d[i])) throw NumericalError("paired_test: non-finite difference");
  }
  const double n = static_cast<double>(r.n);
  r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - r.mean_diff) * (v - r.mean_diff);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    r.t_statistic = r.mean_diff == 0.0 ? 0.0 : std::copysign(INFINITY, r.mean_diff);
    r.t_p_value = r.mean_diff == 0.0 ? 1.0 : 0.0;
  } else {
    r.t_statistic = r.mean_diff / (sd / std::sqrt(n));
    const boost::math::students_t dist(n - 1.0);
    r.t_p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic)));
  }

  std::vector<double> nz;
  for (double v : d)
    if (v != 0.0) nz.push_back(v);
  r.n_nonzero = nz.size();
  if (!nz.empty()) {
    std::vector<double> mag(nz.size());
    for (std::size_t i = 0; i < nz.size(); ++i) mag[i] = std::fabs(nz[i]);
    const auto ranks = average_ranks(mag);
    double wp = 0.0, wm = 0.0;
    for (std::size_t i = 0; i < nz.size(); ++i) (nz[i] > 0 ? wp : wm) += ranks[i];
    r.w_plus = wp;
    r.w_statistic = std::min(wp, wm);
    const double m = static_cast<double>(nz.size());
    double var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0;
    // Tie correction: sum over tie groups of (t^3 - t) / 48.
    std::sort(mag.begin(), mag.end());
    for (std::size_t i = 0; i < mag.size();) {
      std::size_t j = i;
      while (j < mag.size() && mag[j] == mag[i]) ++j;
      const double t = static_cast<double>(j - i);
      var -= (t * t * t - t) / 48.0;
      i = j;
    }
    if (var > 0.0) {
      r.w_z = (wp - m * (m + 1.0) / 4.0) / std::sqrt(var);
      r.w_p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::fabs(r.w_z)));
    }
  }
  r.t_p_value = std::min(1.0, r.t_p_value);
  r.w_p_value = std::min(1.0, r.w_p_value);
  r.t_significant = r.t_p_value < alpha;
  r.w_significant = r.w_p_value < alpha;
  return r;
}

PairedTestResult paired_test(const std::vector<EvalRecord>& a, const std::vector<EvalRecord>& b,
                             const std::string& metric, double alpha) {
  std::map<std::pair<std::string, int>, double> mb;
  for (const auto& r : b)
    if (!mb.emplace(std::make_pair(r.id, r.acceleration), metric_value(r, metric)).second)
      throw ConfigError("paired_test: duplicate record " + r.id);
  if (a.size() != b.size()) throw ConfigError("paired_test: record sets differ in size");
  std::vector<double> va, vb;
  for (const auto& r : a) {
    auto it = mb.find({r.id, r.acceleration});
    if (it == mb.end())
      throw ConfigError("paired_test: no partner for " + r.id + " at R=" + std::to_string(r.acceleration));
    va.push_back(metric_value(r, metric));
    vb.push_back(it->second);
  }
  return paired_test(va, vb, alpha);
}

}  // namespace jssl
