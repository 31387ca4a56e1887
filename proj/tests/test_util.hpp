#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "jssl/tensor.hpp"

namespace jssl::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

/// Centered orthonormal 2-D DFT of one (nx, ny, 2) plane by direct summation.
inline Tensor direct_dft2c(const Tensor& a, bool forward) {
  const std::size_t nx = a.dim(0), ny = a.dim(1);
  const double sign = forward ? -1.0 : 1.0;
  Tensor out(a.shape());
  const double scale = 1.0 / std::sqrt(static_cast<double>(nx * ny));
  // Centered index c maps to frequency c - n/2; spatial index likewise.
  for (std::size_t kx = 0; kx < nx; ++kx)
    for (std::size_t ky = 0; ky < ny; ++ky) {
      std::complex<double> acc = 0.0;
      const double fx = static_cast<double>(kx) - static_cast<double>(nx / 2);
      const double fy = static_cast<double>(ky) - static_cast<double>(ny / 2);
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) {
          const double px = static_cast<double>(x) - static_cast<double>(nx / 2);
          const double py = static_cast<double>(y) - static_cast<double>(ny / 2);
          const double ang = sign * 2.0 * M_PI * (fx * px / nx + fy * py / ny);
          const std::complex<double> v(a[2 * (x * ny + y)], a[2 * (x * ny + y) + 1]);
          acc += v * std::polar(1.0, ang);
        }
      out[2 * (kx * ny + ky)] = acc.real() * scale;
      out[2 * (kx * ny + ky) + 1] = acc.imag() * scale;
    }
  return out;
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1e-300, std::max(std::fabs(a), std::fabs(b))); }

}  // namespace jssl::testing

namespace jssl::testing {

/// Random complex maps normalized so that sum_k |S_k|^2 = 1 at every pixel.
inline Tensor random_maps(std::size_t nc, std::size_t nx, std::size_t ny, std::mt19937_64& rng) {
  Tensor s = random_tensor({nc, nx, ny, 2}, rng);
  const std::size_t plane = nx * ny;
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0;
    for (std::size_t c = 0; c < nc; ++c)
      acc += s[2 * (c * plane + p)] * s[2 * (c * plane + p)] + s[2 * (c * plane + p) + 1] * s[2 * (c * plane + p) + 1];
    const double r = std::sqrt(acc);
    for (std::size_t c = 0; c < nc; ++c) {
      s[2 * (c * plane + p)] /= r;
      s[2 * (c * plane + p) + 1] /= r;
    }
  }
  return s;
}

inline Tensor random_grid(std::size_t nx, std::size_t ny, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  Tensor g({nx, ny});
  for (auto& v : g.data()) v = b(rng) ? 1.0 : 0.0;
  return g;
}

inline std::complex<double> cat(const Tensor& t, std::size_t flat) { return {t[2 * flat], t[2 * flat + 1]}; }

}  // namespace jssl::testing
