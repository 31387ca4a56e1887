#include "jssl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"
#include "jssl/error.hpp"
#include "jssl/mri_ops.hpp"
#include "jssl/rng.hpp"
#include "jssl/tnsr_io.hpp"

namespace jssl {

std::string family_name(Family f) {
  switch (f) {
    case Family::proxy_a: return "proxy_a";
    case Family::proxy_b: return "proxy_b";
    case Family::target: return "target";
  }
  return "unknown";
}

Family parse_family(const std::string& s) {
  if (s == "proxy_a") return Family::proxy_a;
  if (s == "proxy_b") return Family::proxy_b;
  if (s == "target") return Family::target;
  throw ConfigError("unknown family '" + s + "'");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

const FamilyParams& family_params(Family f) {
  // Bright round head with many small structures.
  static const FamilyParams a{5, 8, 0.45, 0.60, 0.70, 1.00, 0.70, 0.85, 0.75, 0.90,
                              0.06, 0.18, 1.0, 1.6, std::numbers::pi / 6};
  // Elongated limb-like structures.
  static const FamilyParams b{2, 4, 0.35, 0.50, 0.60, 0.90, 0.35, 0.50, 0.80, 0.92,
                              0.10, 0.30, 2.5, 4.0, std::numbers::pi / 10};
  // Dim wide body with a few small bright organs.
  static const FamilyParams t{3, 6, 0.12, 0.22, 0.50, 0.80, 0.80, 0.92, 0.50, 0.65,
                              0.05, 0.14, 1.0, 1.8, std::numbers::pi};
  switch (f) {
    case Family::proxy_a: return a;
    case Family::proxy_b: return b;
    case Family::target: return t;
  }
  return a;
}

namespace {

struct Ellipse {
  double cx, cy, ax, ay, rot, value;
};

void paint(std::vector<double>& img, std::size_t nx, std::size_t ny, const Ellipse& e) {
  const double c = std::cos(e.rot), s = std::sin(e.rot);
  for (std::size_t i = 0; i < nx; ++i) {
    const double px = 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(nx) - 1.0;
    for (std::size_t j = 0; j < ny; ++j) {
      const double py = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(ny) - 1.0;
      const double dx = px - e.cx, dy = py - e.cy;
      const double u = (c * dx + s * dy) / e.ax, v = (-s * dx + c * dy) / e.ay;
      if (u * u + v * v <= 1.0) img[i * ny + j] = e.value;
    }
  }
}

}  // namespace

Tensor make_phantom(const PhantomSpec& spec) {
  if (spec.nx < 32 || spec.ny < 32) throw ConfigError("make_phantom: extents must be >= 32");
  const FamilyParams& fp = family_params(spec.family);
  std::mt19937_64 rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(spec.family), 1}));
  auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  std::vector<double> mag(spec.nx * spec.ny, 0.0);
  const Ellipse body{U(-0.05, 0.05), U(-0.05, 0.05), U(fp.body_ax_lo, fp.body_ax_hi),
                     U(fp.body_ay_lo, fp.body_ay_hi), U(-fp.max_rotation, fp.max_rotation) * 0.2,
                     U(fp.body_lo, fp.body_hi)};
  paint(mag, spec.nx, spec.ny, body);
  const auto n = std::uniform_int_distribution<std::size_t>(fp.min_ellipses, fp.max_ellipses)(rng);
  for (std::size_t k = 0; k < n; ++k) {
    // Centers inside the body.
    const double r = std::sqrt(U(0.0, 1.0)) * 0.6, th = U(0.0, 2.0 * std::numbers::pi);
    const double size = U(fp.inner_size_lo, fp.inner_size_hi);
    const double ecc = U(fp.inner_ecc_lo, fp.inner_ecc_hi);
    Ellipse e{body.cx + r * body.ax * std::cos(th), body.cy + r * body.ay * std::sin(th), size,
              size * ecc, U(-fp.max_rotation, fp.max_rotation), U(fp.inner_lo, fp.inner_hi)};
    paint(mag, spec.nx, spec.ny, e);
  }
  double coef[6];
  for (auto& c : coef) c = U(-0.4, 0.4);
  Tensor out({spec.nx, spec.ny, 2});
  for (std::size_t i = 0; i < spec.nx; ++i) {
    const double px = 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(spec.nx) - 1.0;
    for (std::size_t j = 0; j < spec.ny; ++j) {
      const double py = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(spec.ny) - 1.0;
      const double phase = coef[0] + coef[1] * px + coef[2] * py + coef[3] * px * py +
                           coef[4] * px * px + coef[5] * py * py;
      const double m = std::clamp(mag[i * spec.ny + j], 0.0, 1.0);
      out[2 * (i * spec.ny + j)] = m * std::cos(phase);
      out[2 * (i * spec.ny + j) + 1] = m * std::sin(phase);
    }
  }
  return out;
}

Tensor make_coil_maps(std::size_t nc, std::size_t nx, std::size_t ny, std::uint64_t seed) {
  if (nc < 2) throw ConfigError("make_coil_maps: need at least two coils");
  std::mt19937_64 rng(derive_seed(seed, {0xC011}));
  auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  Tensor s({nc, nx, ny, 2});
  const std::size_t plane = nx * ny;
  for (std::size_t c = 0; c < nc; ++c) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(nc) + U(-0.3, 0.3);
    const double rad = U(0.8, 1.1), width = U(1.0, 1.4);
    const double cx = rad * std::cos(ang), cy = rad * std::sin(ang);
    const double p0 = U(-std::numbers::pi, std::numbers::pi), px_ = U(-0.8, 0.8), py_ = U(-0.8, 0.8);
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(nx) - 1.0;
      for (std::size_t j = 0; j < ny; ++j) {
        const double y = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(ny) - 1.0;
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double a = std::exp(-d2 / (2.0 * width * width));
        const double ph = p0 + px_ * x + py_ * y;
        s[2 * (c * plane + i * ny + j)] = a * std::cos(ph);
        s[2 * (c * plane + i * ny + j) + 1] = a * std::sin(ph);
      }
    }
  }
  for (std::size_t p = 0; p < plane; ++p) {
    double e = 0.0;
    for (std::size_t c = 0; c < nc; ++c)
      e += s[2 * (c * plane + p)] * s[2 * (c * plane + p)] + s[2 * (c * plane + p) + 1] * s[2 * (c * plane + p) + 1];
    const double r = std::sqrt(e);
    for (std::size_t c = 0; c < nc; ++c) {
      s[2 * (c * plane + p)] /= r;
      s[2 * (c * plane + p) + 1] /= r;
    }
  }
  return s;
}

DatasetConfig DatasetConfig::desk_default() {
  DatasetConfig c;
  c.counts[Family::proxy_a][Split::train] = 200;
  c.counts[Family::proxy_b][Split::train] = 200;
  c.counts[Family::target][Split::train] = 100;
  c.counts[Family::target][Split::val] = 30;
  c.counts[Family::target][Split::test] = 30;
  return c;
}

std::vector<SampleRecord> DatasetManifest::select(Split split, std::initializer_list<Family> families) const {
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (r.split != split) continue;
    if (families.size() && std::find(families.begin(), families.end(), r.family) == families.end()) continue;
    out.push_back(r);
  }
  return out;
}

DatasetManifest plan_dataset(const DatasetConfig& config) {
  if (config.nx < 32 || config.ny < 32) throw ConfigError("dataset extents must be >= 32");
  if (config.n_coils < 2) throw ConfigError("dataset needs at least two coils");
  if (!(config.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  DatasetManifest m;
  m.config = config;
  for (const auto& [family, splits] : config.counts)
    for (const auto& [split, count] : splits)
      for (std::size_t i = 0; i < count; ++i) {
        SampleRecord r;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04zu", i);
        r.id = family_name(family) + "_" + split_name(split) + "_" + buf;
        r.family = family;
        r.split = split;
        const std::string base = split_name(split) + "/" + r.id;
        r.kspace_path = base + ".y.tnsr";
        r.gt_path = base + ".gt.tnsr";
        r.maps_path = base + ".S.tnsr";
        r.n_coils = config.n_coils;
        r.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(family), static_cast<std::uint64_t>(split), i});
        m.records.push_back(std::move(r));
      }
  return m;
}

Sample synthesize(const SampleRecord& record, const DatasetConfig& config) {
  Sample s;
  s.record = record;
  const Tensor x = make_phantom({record.family, config.nx, config.ny, record.seed});
  s.maps = make_coil_maps(config.n_coils, config.nx, config.ny, derive_seed(record.seed, {2}));
  const Tensor full({config.nx, config.ny}, 1.0);
  s.kspace = simulate_acquisition(x, full, s.maps, config.noise_sigma, derive_seed(record.seed, {3}));
  s.gt = rss_reconstruct(s.kspace);
  return s;
}

namespace {

nlohmann::json config_json(const DatasetConfig& c) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [f, splits] : c.counts)
    for (const auto& [s, n] : splits) counts[family_name(f)][split_name(s)] = n;
  return {{"nx", c.nx}, {"ny", c.ny}, {"n_coils", c.n_coils}, {"noise_sigma", c.noise_sigma},
          {"seed", c.seed}, {"counts", counts}};
}

}  // namespace

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["config"] = config_json(m.config);
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& r : m.records)
    splits[split_name(r.split)].push_back({{"id", r.id}, {"family", family_name(r.family)},
                                           {"kspace", r.kspace_path}, {"maps", r.maps_path},
                                           {"gt", r.gt_path}, {"n_coils", r.n_coils},
                                           {"seed", r.seed}});
  j["splits"] = splits;
  return j.dump(2) + "\n";
}

DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& root) {
  DatasetManifest m = plan_dataset(config);
  for (const auto& r : m.records) {
    const Sample s = synthesize(r, config);
    write_tensor(root / r.kspace_path, s.kspace);
    write_tensor(root / r.gt_path, s.gt);
    write_tensor(root / r.maps_path, s.maps);
  }
  write_text(root / "manifest.json", manifest_to_json(m));
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    const auto& c = j.at("config");
    m.config.nx = c.at("nx").get<std::size_t>();
    m.config.ny = c.at("ny").get<std::size_t>();
    m.config.n_coils = c.at("n_coils").get<std::size_t>();
    m.config.noise_sigma = c.at("noise_sigma").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& [f, splits] : c.at("counts").items())
      for (const auto& [s, n] : splits.items()) m.config.counts[parse_family(f)][parse_split(s)] = n.get<std::size_t>();
    // Records in the order they were planned.
    const DatasetManifest planned = plan_dataset(m.config);
    for (const auto& r : planned.records) {
      bool found = false;
      for (const auto& e : j.at("splits").at(split_name(r.split)))
        if (e.at("id").get<std::string>() == r.id) {
          SampleRecord rec = r;
          rec.kspace_path = e.at("kspace").get<std::string>();
          rec.maps_path = e.at("maps").get<std::string>();
          rec.gt_path = e.at("gt").get<std::string>();
          rec.seed = e.at("seed").get<std::uint64_t>();
          m.records.push_back(rec);
          found = true;
          break;
        }
      if (!found) throw IoError(path.string() + ": record " + r.id + " missing");
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return m;
}

Sample load_sample(const std::filesystem::path& root, const SampleRecord& record) {
  Sample s;
  s.record = record;
  s.kspace = read_tensor(root / record.kspace_path);
  s.gt = read_tensor(root / record.gt_path);
  s.maps = read_tensor(root / record.maps_path);
  return s;
}

DatasetManifest oversample(const DatasetManifest& m, Family family, std::size_t factor) {
  if (factor < 1) throw ConfigError("oversample factor must be >= 1");
  bool present = false;
  for (const auto& r : m.records) present = present || r.family == family;
  if (!present) throw ConfigError("oversample: no records of family " + family_name(family));
  DatasetManifest out;
  out.config = m.config;
  for (const auto& r : m.records) {
    const std::size_t reps = (r.family == family && r.split == Split::train) ? factor : 1;
    for (std::size_t k = 0; k < reps; ++k) out.records.push_back(r);
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, {0xE90C, epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace jssl
