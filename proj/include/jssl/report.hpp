#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jssl/trainer.hpp"

namespace jssl {

struct SummaryRow {
  std::string setup;
  int acceleration = 0;
  std::size_t n = 0;
  double ssim_mean = 0, ssim_std = 0;
  double psnr_mean = 0, psnr_std = 0;
  double nmse_mean = 0, nmse_std = 0;
  /// Metrics for which this row is the best SSL-based setup at its R.
  std::vector<std::string> best;
};

/// Mean and sample standard deviation per (setup, R); setups in the canonical
/// order (unknown labels after them, sorted), R ascending.
std::vector<SummaryRow> summarize(const std::vector<EvalRecord>& records);

std::string summary_csv(const std::vector<SummaryRow>& rows);
/// Plain-text table with mean +- std and '*' on the best SSL-based setup.
std::string summary_table(const std::vector<SummaryRow>& rows);

/// Images side by side, each scaled by its own reference maximum and
/// clamped to [0, 1]. All images must share one shape.
void write_image_strip(const std::filesystem::path& path, const std::vector<Tensor>& images,
                       const std::vector<double>& scales);

/// summary.csv, summary.txt and, for setups with kept images, one strip per
/// (setup, R) named `<setup>_R<R>.pgm` plus `ground_truth.pgm`.
void write_report(const std::filesystem::path& out_dir, const std::map<std::string, EvalResult>& results);

}  // namespace jssl
