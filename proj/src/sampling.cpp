#include "jssl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "jssl/error.hpp"
#include "jssl/tnsr_io.hpp"

namespace jssl {

std::string scheme_name(MaskScheme s) {
  return s == MaskScheme::equispaced ? "equispaced" : "random_uniform";
}

MaskScheme parse_scheme(const std::string& s) {
  if (s == "equispaced") return MaskScheme::equispaced;
  if (s == "random_uniform" || s == "random-uniform" || s == "random") return MaskScheme::random_uniform;
  throw ConfigError("unknown mask scheme '" + s + "'");
}

std::size_t SamplingMask::count() const {
  std::size_t n = 0;
  for (double v : grid.data()) n += v != 0.0;
  return n;
}

std::size_t SamplingMask::sampled_columns() const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < ny(); ++j)
    for (std::size_t i = 0; i < nx(); ++i)
      if (grid[i * ny() + j] != 0.0) {
        ++n;
        break;
      }
  return n;
}

SamplingMask full_mask(std::size_t nx, std::size_t ny) {
  SamplingMask m;
  m.grid = Tensor({nx, ny}, 1.0);
  m.acceleration = 1.0;
  m.acs_fraction = 1.0;
  m.scheme = "full";
  return m;
}

double acs_fraction_for(int acceleration, Phase phase) {
  switch (acceleration) {
    case 2:
      if (phase == Phase::train) throw ConfigError("acceleration 2 is only used at inference");
      return 0.16;
    case 4: return 0.08;
    case 8: return 0.04;
    case 12: return 0.03;
    case 16: return 0.02;
    default: throw ConfigError("unsupported acceleration " + std::to_string(acceleration));
  }
}

std::size_t acs_column_count(std::size_t ny, double acs_fraction) {
  if (!(acs_fraction >= 0.0 && acs_fraction <= 1.0))
    throw ConfigError("acs_fraction must lie in [0, 1]");
  return static_cast<std::size_t>(std::lround(acs_fraction * static_cast<double>(ny)));
}

std::size_t acs_column_start(std::size_t ny, std::size_t count) { return ny / 2 - count / 2; }

std::size_t column_budget(std::size_t ny, double acceleration) {
  if (!(acceleration >= 1.0)) throw ConfigError("acceleration must be >= 1");
  return static_cast<std::size_t>(std::lround(static_cast<double>(ny) / acceleration));
}

namespace {

struct Columns {
  std::vector<char> taken;
  std::size_t acs = 0;
  std::size_t budget = 0;
};

Columns start_columns(std::size_t nx, std::size_t ny, double acceleration, double acs_fraction) {
  if (nx == 0 || ny == 0) throw ConfigError("mask extents must be positive");
  Columns c;
  c.acs = acs_column_count(ny, acs_fraction);
  c.budget = column_budget(ny, acceleration);
  if (c.acs > c.budget)
    throw ConfigError("ACS band of " + std::to_string(c.acs) + " columns exceeds the budget of " +
                      std::to_string(c.budget) + " columns at R=" + std::to_string(acceleration));
  c.taken.assign(ny, 0);
  const std::size_t s = acs_column_start(ny, c.acs);
  for (std::size_t j = s; j < s + c.acs; ++j) c.taken[j] = 1;
  return c;
}

SamplingMask finish(const Columns& c, std::size_t nx, double acceleration, double acs_fraction,
                    std::uint64_t seed, MaskScheme scheme) {
  const std::size_t ny = c.taken.size();
  SamplingMask m;
  m.grid = Tensor({nx, ny});
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) m.grid[i * ny + j] = c.taken[j] ? 1.0 : 0.0;
  m.acceleration = acceleration;
  m.acs_fraction = acs_fraction;
  m.seed = seed;
  m.scheme = scheme_name(scheme);
  return m;
}

std::size_t union_count(const std::vector<char>& acs, double offset, double stride,
                        std::vector<char>* out) {
  std::vector<char> t = acs;
  for (double p = offset; p < static_cast<double>(t.size()); p += stride)
    t[static_cast<std::size_t>(p)] = 1;
  const auto total = static_cast<std::size_t>(std::count(t.begin(), t.end(), 1));
  if (out) *out = std::move(t);
  return total;
}

}  // namespace

SamplingMask make_equispaced_mask(std::size_t nx, std::size_t ny, double acceleration,
                                  double acs_fraction, std::uint64_t seed) {
  Columns c = start_columns(nx, ny, acceleration, acs_fraction);
  if (c.acs < c.budget) {
    std::mt19937_64 rng(seed);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    // Real-valued stride ny/m; pick the line count m whose union with the ACS
    // band lands closest to the budget.
    const double target = static_cast<double>(ny) / acceleration;
    std::size_t best_m = 1;
    double best_gap = static_cast<double>(ny) + 1.0;
    for (std::size_t m = 1; m <= ny; ++m) {
      const double stride = static_cast<double>(ny) / static_cast<double>(m);
      const auto total = static_cast<double>(union_count(c.taken, u * stride, stride, nullptr));
      const double gap = std::fabs(total - target);
      if (gap < best_gap) {
        best_gap = gap;
        best_m = m;
      }
      if (total > target + 1.0) break;
    }
    const double stride = static_cast<double>(ny) / static_cast<double>(best_m);
    union_count(c.taken, u * stride, stride, &c.taken);
  }
  return finish(c, nx, acceleration, acs_fraction, seed, MaskScheme::equispaced);
}

SamplingMask make_random_uniform_mask(std::size_t nx, std::size_t ny, double acceleration,
                                      double acs_fraction, std::uint64_t seed) {
  Columns c = start_columns(nx, ny, acceleration, acs_fraction);
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < ny; ++j)
    if (!c.taken[j]) free.push_back(j);
  std::mt19937_64 rng(seed);
  std::shuffle(free.begin(), free.end(), rng);
  for (std::size_t k = 0; k < c.budget - c.acs; ++k) c.taken[free[k]] = 1;
  return finish(c, nx, acceleration, acs_fraction, seed, MaskScheme::random_uniform);
}

SamplingMask make_mask(MaskScheme scheme, std::size_t nx, std::size_t ny, double acceleration,
                       double acs_fraction, std::uint64_t seed) {
  return scheme == MaskScheme::equispaced
             ? make_equispaced_mask(nx, ny, acceleration, acs_fraction, seed)
             : make_random_uniform_mask(nx, ny, acceleration, acs_fraction, seed);
}

Tensor acs_band(const SamplingMask& m) {
  Tensor band(m.grid.shape());
  if (!m.acs_fraction) return band;
  const std::size_t n = acs_column_count(m.ny(), *m.acs_fraction);
  const std::size_t s = acs_column_start(m.ny(), n);
  for (std::size_t i = 0; i < m.nx(); ++i)
    for (std::size_t j = s; j < s + n; ++j) band[i * m.ny() + j] = 1.0;
  return band;
}

Partition gaussian_partition(const SamplingMask& m, const PartitionSpec& spec) {
  if (!(spec.q > 0.0 && spec.q < 1.0)) throw ConfigError("partition ratio q must lie in (0, 1)");
  if (!(spec.sigma > 0.0)) throw ConfigError("partition sigma must be positive");
  const std::size_t total = m.count();
  if (total == 0) throw ConfigError("cannot partition an empty mask");
  if (spec.acs_window * spec.acs_window > total)
    throw ConfigError("ACS window larger than the number of sampled positions");

  const std::size_t nx = m.nx(), ny = m.ny();
  const double cx = static_cast<double>(nx / 2), cy = static_cast<double>(ny / 2);
  Tensor theta(m.grid.shape());
  std::size_t count = 0;
  auto reached = [&] { return static_cast<double>(count) / static_cast<double>(total) >= spec.q; };

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gx(cx, spec.sigma), gy(cy, spec.sigma);
  Partition out;
  const std::size_t limit = 100 * total;
  while (!reached() && out.draws < limit) {
    ++out.draws;
    const double rx = std::round(gx(rng)), ry = std::round(gy(rng));
    if (rx < 0 || ry < 0 || rx >= static_cast<double>(nx) || ry >= static_cast<double>(ny)) continue;
    const std::size_t k = static_cast<std::size_t>(rx) * ny + static_cast<std::size_t>(ry);
    if (m.grid[k] == 0.0 || theta[k] != 0.0) continue;
    theta[k] = 1.0;
    ++count;
  }
  if (!reached()) {
    // Gaussian-weighted sampling without replacement over M \ Theta (Gumbel top-k).
    out.used_fallback = true;
    std::vector<std::pair<double, std::size_t>> keys;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        const std::size_t k = i * ny + j;
        if (m.grid[k] == 0.0 || theta[k] != 0.0) continue;
        const double dx = static_cast<double>(i) - cx, dy = static_cast<double>(j) - cy;
        const double logw = -(dx * dx + dy * dy) / (2.0 * spec.sigma * spec.sigma);
        const double g = -std::log(-std::log(std::max(u(rng), 1e-300)));
        keys.emplace_back(logw + g, k);
      }
    std::sort(keys.begin(), keys.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t r = 0; r < keys.size() && !reached(); ++r) {
      theta[keys[r].second] = 1.0;
      ++count;
    }
  }
  out.ratio_before_window = static_cast<double>(count) / static_cast<double>(total);

  Tensor lambda(m.grid.shape());
  for (std::size_t k = 0; k < lambda.size(); ++k) lambda[k] = (m.grid[k] != 0.0 && theta[k] == 0.0) ? 1.0 : 0.0;
  const std::size_t w = spec.acs_window;
  if (w > 0) {
    const std::size_t r0 = nx / 2 - std::min(nx / 2, w / 2), c0 = ny / 2 - std::min(ny / 2, w / 2);
    for (std::size_t i = r0; i < std::min(nx, r0 + w); ++i)
      for (std::size_t j = c0; j < std::min(ny, c0 + w); ++j) {
        const std::size_t k = i * ny + j;
        if (m.grid[k] == 0.0) continue;
        theta[k] = 0.0;
        lambda[k] = 1.0;
      }
  }
  out.theta = m;
  out.theta.grid = std::move(theta);
  out.theta.scheme = m.scheme + "/theta";
  out.lambda = m;
  out.lambda.grid = std::move(lambda);
  out.lambda.scheme = m.scheme + "/lambda";
  return out;
}

double sample_partition_ratio(RatioMode mode, std::uint64_t seed) {
  if (mode == RatioMode::fixed) return 0.5;
  std::mt19937_64 rng(seed);
  const int k = std::uniform_int_distribution<int>(3, 8)(rng);
  return static_cast<double>(k) / 10.0;
}

std::string mask_sidecar_json(const SamplingMask& m) {
  nlohmann::json j;
  j["acceleration"] = m.acceleration ? nlohmann::json(*m.acceleration) : nlohmann::json(nullptr);
  j["acs_fraction"] = m.acs_fraction ? nlohmann::json(*m.acs_fraction) : nlohmann::json(nullptr);
  j["seed"] = m.seed;
  j["scheme"] = m.scheme;
  return j.dump(2) + "\n";
}

void save_mask(const std::filesystem::path& path, const SamplingMask& m) {
  write_tensor(path, m.grid);
  write_text(path.string() + ".json", mask_sidecar_json(m));
}

SamplingMask load_mask(const std::filesystem::path& path) {
  SamplingMask m;
  m.grid = read_tensor(path);
  if (m.grid.ndim() != 2) throw IoError(path.string() + ": mask must be 2-D");
  for (double v : m.grid.data())
    if (v != 0.0 && v != 1.0) throw IoError(path.string() + ": mask entries must be 0 or 1");
  const auto side = path.string() + ".json";
  if (std::filesystem::exists(side)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(side));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(side + ": " + e.what());
    }
    if (j.contains("acceleration") && !j["acceleration"].is_null()) m.acceleration = j["acceleration"].get<double>();
    if (j.contains("acs_fraction") && !j["acs_fraction"].is_null()) m.acs_fraction = j["acs_fraction"].get<double>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.scheme = j.value("scheme", std::string());
  }
  return m;
}

void write_mask_pgm(const std::filesystem::path& path, const Tensor& grid) {
  if (grid.ndim() != 2) throw ShapeError("write_mask_pgm: expected a 2-D grid");
  std::string s = "P5\n" + std::to_string(grid.dim(1)) + " " + std::to_string(grid.dim(0)) + "\n255\n";
  for (double v : grid.data()) s.push_back(static_cast<char>(v != 0.0 ? 255 : 0));
  write_text(path, s);
}

}  // namespace jssl
