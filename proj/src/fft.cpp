#include "fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>
#include <vector>

namespace jssl::detail {
namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

struct Plan {
  std::size_t n = 0;
  // Power-of-two sizes: bit-reversal permutation and n/2 twiddles.
  std::vector<std::size_t> bitrev;
  std::vector<double> tw_re, tw_im;
  // Other sizes: dense n x n DFT matrix.
  std::vector<double> mat_re, mat_im;
};

Plan make_plan(std::size_t n) {
  Plan p;
  p.n = n;
  const double two_pi = 2.0 * std::numbers::pi;
  if (is_pow2(n)) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    p.bitrev.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
      p.bitrev[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double ang = -two_pi * static_cast<double>(k) / static_cast<double>(n);
      p.tw_re.push_back(std::cos(ang));
      p.tw_im.push_back(std::sin(ang));
    }
  } else {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        const double ang = -two_pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
        p.mat_re.push_back(std::cos(ang));
        p.mat_im.push_back(std::sin(ang));
      }
  }
  return p;
}

const Plan& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, Plan> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_plan(n)).first;
  return it->second;
}

void butterfly(double* __restrict ar, double* __restrict ai, double* __restrict br, double* __restrict bi,
               std::size_t m, double wr, double wi) {
  for (std::size_t c = 0; c < m; ++c) {
    const double vr = br[c] * wr - bi[c] * wi;
    const double vi = br[c] * wi + bi[c] * wr;
    br[c] = ar[c] - vr;
    bi[c] = ai[c] - vi;
    ar[c] += vr;
    ai[c] += vi;
  }
}

// Unnormalized DFT along axis 0 of an n x m split-complex array, all m
// columns at once so the inner loops run over contiguous memory.
void dft_axis0(double* re, double* im, std::size_t n, std::size_t m, bool forward,
               std::vector<double>& scratch) {
  if (n <= 1) return;
  const Plan& p = plan_for(n);
  const double sgn = forward ? 1.0 : -1.0;
  if (!p.bitrev.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = p.bitrev[i];
      if (j > i) {
        std::swap_ranges(re + i * m, re + (i + 1) * m, re + j * m);
        std::swap_ranges(im + i * m, im + (i + 1) * m, im + j * m);
      }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2, step = n / len;
      for (std::size_t start = 0; start < n; start += len)
        for (std::size_t k = 0; k < half; ++k) {
          const double wr = p.tw_re[k * step], wi = sgn * p.tw_im[k * step];
          butterfly(re + (start + k) * m, im + (start + k) * m, re + (start + k + half) * m,
                    im + (start + k + half) * m, m, wr, wi);
        }
    }
    return;
  }
  scratch.assign(2 * n * m, 0.0);
  double* orr = scratch.data();
  double* oi = orr + n * m;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const double wr = p.mat_re[j * n + k], wi = sgn * p.mat_im[j * n + k];
      const double* xr = re + k * m;
      const double* xi = im + k * m;
      double* yr = orr + j * m;
      double* yi = oi + j * m;
      for (std::size_t c = 0; c < m; ++c) {
        yr[c] += wr * xr[c] - wi * xi[c];
        yi[c] += wr * xi[c] + wi * xr[c];
      }
    }
  std::copy(orr, orr + n * m, re);
  std::copy(oi, oi + n * m, im);
}

}  // namespace

void fft2c_plane(std::span<const double> in, std::span<double> out, std::size_t nx,
                 std::size_t ny, bool forward) {
  thread_local std::vector<double> a, b, scratch;
  const std::size_t n = nx * ny;
  a.resize(2 * n);
  b.resize(2 * n);
  double* are = a.data();
  double* aim = are + n;
  double* bre = b.data();
  double* bim = bre + n;
  const std::size_t hx = nx / 2, hy = ny / 2;
  // ifftshift into split layout [nx][ny].
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t si = i + hx < nx ? i + hx : i + hx - nx;
    const double* row = in.data() + 2 * si * ny;
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t sj = j + hy < ny ? j + hy : j + hy - ny;
      are[i * ny + j] = row[2 * sj];
      aim[i * ny + j] = row[2 * sj + 1];
    }
  }
  dft_axis0(are, aim, nx, ny, forward, scratch);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      bre[j * nx + i] = are[i * ny + j];
      bim[j * nx + i] = aim[i * ny + j];
    }
  dft_axis0(bre, bim, ny, nx, forward, scratch);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  // fftshift back out of the transposed layout [ny][nx].
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t si = i >= hx ? i - hx : i + nx - hx;
    double* row = out.data() + 2 * i * ny;
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t s = (j >= hy ? j - hy : j + ny - hy) * nx + si;
      row[2 * j] = bre[s] * scale;
      row[2 * j + 1] = bim[s] * scale;
    }
  }
}

}  // namespace jssl::detail
