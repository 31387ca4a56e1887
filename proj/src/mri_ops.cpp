#include "jssl/mri_ops.hpp"

#include <random>

namespace jssl {

void check_image(const char* op, const Tensor& x) {
  if (x.ndim() != 3 || x.dim(2) != 2)
    throw ShapeError(std::string(op) + ": expected complex image (nx, ny, 2), got " +
                     to_string(x.shape()));
}

void check_kspace(const char* op, const Tensor& y) {
  if (y.ndim() != 4 || y.dim(3) != 2)
    throw ShapeError(std::string(op) + ": expected multi-coil data (nc, nx, ny, 2), got " +
                     to_string(y.shape()));
}

void check_maps(const char* op, const Tensor& y, const Tensor& s) {
  check_kspace(op, y);
  check_kspace(op, s);
  if (y.shape() != s.shape())
    throw ShapeError(std::string(op) + ": data " + to_string(y.shape()) + " and maps " +
                     to_string(s.shape()) + " disagree");
}

void check_mask(const char* op, const Tensor& y, const Tensor& grid) {
  if (grid.ndim() != 2 || y.ndim() < 3 || y.dim(y.ndim() - 3) != grid.dim(0) ||
      y.dim(y.ndim() - 2) != grid.dim(1))
    throw ShapeError(std::string(op) + ": mask " + to_string(grid.shape()) +
                     " does not match data " + to_string(y.shape()));
}

Tensor complement(const Tensor& grid) {
  Tensor out(grid.shape());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = 1.0 - grid[i];
  return out;
}

Tensor simulate_acquisition(const Tensor& x, const Tensor& grid, const Tensor& s,
                            double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("simulate_acquisition: noise_sigma must be >= 0");
  Tensor y = forward_operator(x, grid, s);
  if (noise_sigma == 0.0) return y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise_sigma);
  const std::size_t plane = grid.size();
  for (std::size_t c = 0; c < y.dim(0); ++c)
    for (std::size_t j = 0; j < plane; ++j) {
      if (grid[j] == 0.0) continue;
      const std::size_t k = 2 * (c * plane + j);
      y[k] += n(rng);
      y[k + 1] += n(rng);
    }
  return y;
}

}  // namespace jssl
