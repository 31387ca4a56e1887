#pragma once

#include <span>
#include <string>
#include <vector>

#include "jssl/trainer.hpp"

namespace jssl {

struct PairedTestResult {
  std::size_t n = 0;          // pairs
  std::size_t n_nonzero = 0;  // pairs with a nonzero difference
  double mean_diff = 0.0;     // mean of a - b
  double t_statistic = 0.0;
  double t_p_value = 1.0;
  /// min(W+, W-) over nonzero differences.
  double w_statistic = 0.0;
  double w_plus = 0.0;
  double w_z = 0.0;
  double w_p_value = 1.0;
  bool t_significant = false;
  bool w_significant = false;
};

/// Two-sided paired t-test and Wilcoxon signed-rank test (normal
/// approximation, zeros dropped, average ranks and tie-corrected variance)
/// on a - b. All-zero differences give p = 1 and statistic 0.
PairedTestResult paired_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

/// Pairs records by (id, R). Requires identical keys and n >= 6.
PairedTestResult paired_test(const std::vector<EvalRecord>& a, const std::vector<EvalRecord>& b,
                             const std::string& metric, double alpha = 0.05);

/// "ssim", "psnr" or "nmse".
double metric_value(const EvalRecord& r, const std::string& metric);

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace jssl
