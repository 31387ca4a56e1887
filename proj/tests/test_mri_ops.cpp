#include <gtest/gtest.h>

#include "jssl/mri_ops.hpp"
#include "jssl/sampling.hpp"
#include "test_util.hpp"

using namespace jssl;
using namespace jssl::testing;

namespace {

/// Per-coil direct DFT of (nc, nx, ny, 2) data.
Tensor direct_coils(const Tensor& y, bool forward) {
  std::vector<Tensor> out;
  for (std::size_t c = 0; c < y.dim(0); ++c)
    out.push_back(reshape(direct_dft2c(reshape(slice(y, 0, c, 1), {y.dim(1), y.dim(2), 2}), forward),
                          {1, y.dim(1), y.dim(2), 2}));
  return concat(out, 0);
}

}  // namespace

TEST(MriOps, RssSingleCoilIsModulus) {
  std::mt19937_64 rng(1);
  Tensor m = random_tensor({1, 8, 8, 2}, rng);
  Tensor img = rss_reconstruct(fft2c(m));
  EXPECT_LT(max_abs_diff(img, complex_abs(reshape(m, {8, 8, 2}))), 1e-10);
  EXPECT_EQ(max_abs(rss_reconstruct(Tensor({2, 8, 8, 2}))), 0.0);
}

TEST(MriOps, RssMatchesDirectDft) {
  std::mt19937_64 rng(2);
  Tensor y = random_tensor({4, 16, 16, 2}, rng);
  Tensor coils = direct_coils(y, false);
  Tensor oracle({16, 16});
  for (std::size_t p = 0; p < 256; ++p) {
    double acc = 0;
    for (std::size_t c = 0; c < 4; ++c) acc += std::norm(cat(coils, c * 256 + p));
    oracle[p] = std::sqrt(acc);
  }
  EXPECT_LT(max_abs_diff(rss_reconstruct(y), oracle), 1e-9);
}

TEST(MriOps, SenseRecoversImage) {
  std::mt19937_64 rng(3);
  Tensor s = random_maps(3, 12, 10, rng);
  Tensor x = to_complex(random_tensor({12, 10}, rng, 0.0, 1.0));
  Tensor y = fft2c(expand_coils(x, s));
  EXPECT_LT(max_abs_diff(sense_reconstruct(y, s), complex_abs(x)), 1e-9);
  EXPECT_EQ(max_abs(sense_reconstruct(Tensor(s.shape()), s)), 0.0);
  EXPECT_THROW(sense_reconstruct(y, slice(s, 0, 0, 2)), ShapeError);
}

TEST(MriOps, SenseMatchesLoopOracle) {
  std::mt19937_64 rng(4);
  Tensor s = random_maps(2, 6, 7, rng);
  Tensor y = random_tensor({2, 6, 7, 2}, rng);
  Tensor coils = direct_coils(y, false);
  Tensor oracle({6, 7});
  for (std::size_t p = 0; p < 42; ++p) {
    std::complex<double> acc = 0;
    for (std::size_t c = 0; c < 2; ++c) acc += std::conj(cat(s, c * 42 + p)) * cat(coils, c * 42 + p);
    oracle[p] = std::abs(acc);
  }
  EXPECT_LT(max_abs_diff(sense_reconstruct(y, s), oracle), 1e-12);
}

TEST(MriOps, ApplyMask) {
  std::mt19937_64 rng(5);
  Tensor y = random_tensor({2, 8, 6, 2}, rng), z = random_tensor({2, 8, 6, 2}, rng);
  EXPECT_EQ(apply_mask(y, Tensor({8, 6}, 1.0)), y);
  EXPECT_EQ(apply_mask(y, Tensor({8, 6})), Tensor(y.shape()));
  Tensor g = random_grid(8, 6, 0.4, rng);
  EXPECT_EQ(apply_mask(apply_mask(y, g), g), apply_mask(y, g));
  EXPECT_EQ(apply_mask(y + z, g), apply_mask(y, g) + apply_mask(z, g));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t p = 0; p < 48; ++p) {
      const auto v = cat(apply_mask(y, g), c * 48 + p);
      if (g[p] == 0.0) EXPECT_EQ(v, std::complex<double>(0, 0));
      else EXPECT_EQ(v, cat(y, c * 48 + p));
    }
  EXPECT_THROW(apply_mask(y, Tensor({6, 8})), ShapeError);
}

TEST(MriOps, ForwardOperatorComposition) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({8, 8, 2}, rng);
  Tensor g = random_grid(8, 8, 0.5, rng);
  Tensor s = random_maps(3, 8, 8, rng);
  EXPECT_EQ(max_abs(forward_operator(Tensor({8, 8, 2}), g, s)), 0.0);
  Tensor ones({1, 8, 8, 2});
  for (std::size_t p = 0; p < 64; ++p) ones[2 * p] = 1.0;
  EXPECT_LT(max_abs_diff(forward_operator(x, Tensor({8, 8}, 1.0), ones), reshape(fft2c(x), {1, 8, 8, 2})), 1e-15);
  // Independent path: explicit per-coil products, direct DFT, explicit masking.
  Tensor oracle({3, 8, 8, 2});
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor ci({8, 8, 2});
    for (std::size_t p = 0; p < 64; ++p) {
      const auto v = cat(x, p) * cat(s, c * 64 + p);
      ci[2 * p] = v.real();
      ci[2 * p + 1] = v.imag();
    }
    Tensor k = direct_dft2c(ci, true);
    for (std::size_t p = 0; p < 64; ++p) {
      oracle[2 * (c * 64 + p)] = k[2 * p] * g[p];
      oracle[2 * (c * 64 + p) + 1] = k[2 * p + 1] * g[p];
    }
  }
  EXPECT_LT(max_abs_diff(forward_operator(x, g, s), oracle), 1e-12);
}

TEST(MriOps, AdjointIdentity) {
  std::mt19937_64 rng(7);
  Tensor ones({1, 6, 6, 2});
  for (std::size_t p = 0; p < 36; ++p) ones[2 * p] = 1.0;
  Tensor y1 = random_tensor({1, 6, 6, 2}, rng);
  EXPECT_LT(max_abs_diff(adjoint_operator(y1, Tensor({6, 6}, 1.0), ones), ifft2c(reshape(y1, {6, 6, 2}))), 1e-15);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nc = 1 + trial % 4, nx = 4 + trial % 9, ny = 4 + (trial * 7) % 11;
    Tensor s = random_maps(nc, nx, ny, rng);
    Tensor g = random_grid(nx, ny, 0.3 + 0.05 * (trial % 10), rng);
    Tensor x = random_tensor({nx, ny, 2}, rng), y = random_tensor({nc, nx, ny, 2}, rng);
    const double lhs = re_inner(forward_operator(x, g, s), y);
    const double rhs = re_inner(x, adjoint_operator(y, g, s));
    EXPECT_LT(rel_err(lhs, rhs), 1e-10) << trial;
  }
  EXPECT_EQ(max_abs(adjoint_operator(Tensor({2, 6, 6, 2}), Tensor({6, 6}, 1.0), random_maps(2, 6, 6, rng))), 0.0);
}

TEST(MriOps, OperatorNormAtMostOne) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor s = random_maps(4, 10, 10, rng);
    Tensor g = random_grid(10, 10, 0.6, rng);
    Tensor x = random_tensor({10, 10, 2}, rng);
    EXPECT_LE(norm2(forward_operator(x, g, s)), norm2(x) * (1 + 1e-12));
  }
}

TEST(MriOps, RssEqualsSenseForUnitPhaseSingleCoil) {
  std::mt19937_64 rng(9);
  Tensor s({1, 8, 8, 2});
  std::uniform_real_distribution<double> ph(-M_PI, M_PI);
  for (std::size_t p = 0; p < 64; ++p) {
    const double a = ph(rng);
    s[2 * p] = std::cos(a);
    s[2 * p + 1] = std::sin(a);
  }
  Tensor y = random_tensor({1, 8, 8, 2}, rng);
  EXPECT_LT(max_abs_diff(rss_reconstruct(y), sense_reconstruct(y, s)), 1e-9);
}

TEST(MriOps, SimulateAcquisition) {
  std::mt19937_64 rng(10);
  Tensor s = random_maps(2, 8, 8, rng);
  Tensor x = random_tensor({8, 8, 2}, rng);
  Tensor g = random_grid(8, 8, 0.5, rng);
  EXPECT_EQ(simulate_acquisition(x, g, s, 0.0, 1), forward_operator(x, g, s));
  Tensor a = simulate_acquisition(x, g, s, 0.1, 42), b = simulate_acquisition(x, g, s, 0.1, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, simulate_acquisition(x, g, s, 0.1, 43));
  Tensor clean = forward_operator(x, g, s);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t p = 0; p < 64; ++p)
      if (g[p] == 0.0) EXPECT_EQ(cat(a, c * 64 + p), std::complex<double>(0, 0));
  EXPECT_THROW(simulate_acquisition(x, g, s, -1.0, 1), ConfigError);
}

TEST(MriOps, NoiseStd) {
  std::mt19937_64 rng(11);
  Tensor s = random_maps(4, 64, 64, rng);
  Tensor x({64, 64, 2});
  Tensor g({64, 64}, 1.0);
  const double sigma = 0.1;
  double acc = 0;
  std::size_t n = 0;
  for (std::uint64_t seed = 5; n < 100000; ++seed) {
    Tensor y = simulate_acquisition(x, g, s, sigma, seed);
    for (double v : y.data()) acc += v * v;
    n += y.size();
  }
  EXPECT_NEAR(std::sqrt(acc / static_cast<double>(n)), sigma, 0.02 * sigma);
}

TEST(MriOps, DcOperator) {
  std::mt19937_64 rng(12);
  Tensor w1 = random_tensor({2, 6, 6, 2}, rng), w2 = random_tensor({2, 6, 6, 2}, rng);
  Tensor g = random_grid(6, 6, 0.5, rng);
  EXPECT_EQ(dc_operator(w1, w2, Tensor({6, 6}, 1.0)), w1);
  EXPECT_EQ(dc_operator(w1, w2, Tensor({6, 6})), w2);
  Tensor d = dc_operator(w1, w2, g);
  EXPECT_EQ(apply_mask(d, g), apply_mask(w1, g));
  EXPECT_EQ(dc_operator(w1, d, g), d);
  EXPECT_THROW(dc_operator(w1, random_tensor({1, 6, 6, 2}, rng), g), ShapeError);
}

TEST(MriOps, VariableFormsMatchTensorForms) {
  std::mt19937_64 rng(13);
  Tensor s = random_maps(2, 6, 6, rng);
  Tensor x = random_tensor({6, 6, 2}, rng);
  Tensor g = random_grid(6, 6, 0.5, rng);
  Tape t;
  auto xv = t.leaf(x);
  auto sv = t.constant(s);
  EXPECT_EQ(forward_operator(xv, g, sv).value(), forward_operator(x, g, s));
  Tensor y = forward_operator(x, g, s);
  auto yv = t.constant(y);
  EXPECT_EQ(adjoint_operator(yv, g, sv).value(), adjoint_operator(y, g, s));
  EXPECT_EQ(rss_reconstruct(yv).value(), rss_reconstruct(y));
  EXPECT_LT(grad_check([&](Tape& tp, const Variable& v) {
              return sum(square(adjoint_operator(forward_operator(v, g, tp.constant(s)), g, tp.constant(s))));
            }, x, 1e-6), 1e-7);
}
