#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "jssl/tensor.hpp"

namespace jssl {

enum class Phase { train, inference };
enum class MaskScheme { equispaced, random_uniform };

std::string scheme_name(MaskScheme s);
MaskScheme parse_scheme(const std::string& s);

struct SamplingMask {
  Tensor grid;  // (nx, ny) of 0/1
  std::optional<double> acceleration;
  std::optional<double> acs_fraction;
  std::uint64_t seed = 0;
  std::string scheme;

  std::size_t nx() const { return grid.dim(0); }
  std::size_t ny() const { return grid.dim(1); }
  std::size_t count() const;
  /// Number of columns with at least one sampled entry.
  std::size_t sampled_columns() const;
};

SamplingMask full_mask(std::size_t nx, std::size_t ny);

struct PartitionSpec {
  double q = 0.5;
  double sigma = 3.5;
  std::size_t acs_window = 4;
  std::uint64_t seed = 0;
};

struct Partition {
  SamplingMask theta;
  SamplingMask lambda;
  /// |Theta| / |M| when the ratio was first reached, before the ACS window moved.
  double ratio_before_window = 0.0;
  std::size_t draws = 0;
  bool used_fallback = false;
};

/// {2: 0.16, 4: 0.08, 8: 0.04, 12: 0.03, 16: 0.02}; R = 2 only at inference.
double acs_fraction_for(int acceleration, Phase phase);

/// round-half-away-from-zero(acs_fraction * ny).
std::size_t acs_column_count(std::size_t ny, double acs_fraction);
/// First column of the centered ACS band of `count` columns.
std::size_t acs_column_start(std::size_t ny, std::size_t count);
/// Column budget round(ny / R).
std::size_t column_budget(std::size_t ny, double acceleration);

SamplingMask make_equispaced_mask(std::size_t nx, std::size_t ny, double acceleration,
                                  double acs_fraction, std::uint64_t seed);
SamplingMask make_random_uniform_mask(std::size_t nx, std::size_t ny, double acceleration,
                                      double acs_fraction, std::uint64_t seed);
SamplingMask make_mask(MaskScheme scheme, std::size_t nx, std::size_t ny, double acceleration,
                       double acs_fraction, std::uint64_t seed);

/// Binary grid of the ACS band of `m` (all zeros when no ACS fraction is set).
Tensor acs_band(const SamplingMask& m);

Partition gaussian_partition(const SamplingMask& m, const PartitionSpec& spec);

enum class RatioMode { fixed, range };
double sample_partition_ratio(RatioMode mode, std::uint64_t seed);

/// Mask TNSR plus `<path>.json` sidecar {acceleration, acs_fraction, seed, scheme}.
void save_mask(const std::filesystem::path& path, const SamplingMask& m);
SamplingMask load_mask(const std::filesystem::path& path);
std::string mask_sidecar_json(const SamplingMask& m);

/// Binary PGM (P5), 0 -> black, 1 -> white.
void write_mask_pgm(const std::filesystem::path& path, const Tensor& grid);

}  // namespace jssl
