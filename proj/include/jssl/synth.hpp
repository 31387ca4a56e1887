#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jssl/tensor.hpp"

namespace jssl {

enum class Family { proxy_a, proxy_b, target };
std::string family_name(Family f);
Family parse_family(const std::string& s);

struct FamilyParams {
  std::size_t min_ellipses, max_ellipses;  // inner structures
  double body_lo, body_hi;                 // body intensity
  double inner_lo, inner_hi;               // inner intensity
  double body_ax_lo, body_ax_hi;           // body semi-axes (FOV units)
  double body_ay_lo, body_ay_hi;
  double inner_size_lo, inner_size_hi;     // inner semi-axis
  double inner_ecc_lo, inner_ecc_hi;       // axis ratio
  double max_rotation;                     // radians, symmetric
};

/// Documented constants per family.
const FamilyParams& family_params(Family f);

struct PhantomSpec {
  Family family = Family::proxy_a;
  std::size_t nx = 64, ny = 64;
  std::uint64_t seed = 0;
};

/// Painted ellipses (later ones overwrite) with a smooth quadratic phase.
/// Magnitude in [0, 1]. Shape (nx, ny, 2).
Tensor make_phantom(const PhantomSpec& spec);

/// Complex Gaussian blobs around the FOV, RSS-normalized. Shape (nc, nx, ny, 2).
Tensor make_coil_maps(std::size_t nc, std::size_t nx, std::size_t ny, std::uint64_t seed);

enum class Split { train, val, test };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct SampleRecord {
  std::string id;
  Family family;
  Split split;
  std::string kspace_path;  // relative to the data root
  std::string maps_path;
  std::string gt_path;
  std::size_t n_coils = 0;
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  std::size_t nx = 64, ny = 64, n_coils = 4;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  /// family -> split -> count
  std::map<Family, std::map<Split, std::size_t>> counts;

  /// proxy_a 200 + proxy_b 200 train; target 100 / 30 / 30.
  static DatasetConfig desk_default();
};

struct DatasetManifest {
  DatasetConfig config;
  std::vector<SampleRecord> records;

  std::vector<SampleRecord> select(Split split, std::initializer_list<Family> families = {}) const;
};

struct Sample {
  SampleRecord record;
  Tensor kspace;  // fully sampled (nc, nx, ny, 2)
  Tensor gt;      // RSS image (nx, ny)
  Tensor maps;
};

/// Writes `root/<split>/<id>.{y,gt,S}.tnsr` and `root/manifest.json`.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& root);
/// The manifest in memory without touching the file system.
DatasetManifest plan_dataset(const DatasetConfig& config);
Sample synthesize(const SampleRecord& record, const DatasetConfig& config);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& root);
Sample load_sample(const std::filesystem::path& root, const SampleRecord& record);

/// Training records of `family` repeated `factor` times; others unchanged.
DatasetManifest oversample(const DatasetManifest& m, Family family, std::size_t factor);

/// Permutation of [0, n) for an epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

}  // namespace jssl
