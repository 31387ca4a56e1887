#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "jssl/autodiff.hpp"
#include "jssl/error.hpp"
#include "jssl/tensor.hpp"
#include "jssl/tnsr_io.hpp"
#include "test_util.hpp"

using namespace jssl;
using jssl::testing::random_tensor;

TEST(Tensor, AddExample) {
  Tensor a({2}, {1, 2}), b({2}, {3, 4});
  EXPECT_EQ(add(a, b).vec(), (std::vector<double>{4, 6}));
}

TEST(Tensor, ShapeErrorNamesOp) {
  Tensor a({2}), b({3});
  try {
    add(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[3]"), std::string::npos);
  }
}

TEST(Tensor, RejectsNonFiniteExternal) {
  EXPECT_THROW(Tensor::from_external({2}, {1.0, std::nan("")}), Error);
  EXPECT_THROW(Tensor::from_external({1}, {INFINITY}), Error);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor(Shape{0, 2}), ShapeError);
}

TEST(Tensor, FftMatchesDirectDft) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {8u, 6u, 5u}) {
    Tensor a = random_tensor({n, n + 2, 2}, rng);
    EXPECT_LT(max_abs_diff(fft2c(a), jssl::testing::direct_dft2c(a, true)), 1e-12) << n;
    EXPECT_LT(max_abs_diff(ifft2c(a), jssl::testing::direct_dft2c(a, false)), 1e-12) << n;
  }
}

TEST(Tensor, FftRoundTrip) {
  std::mt19937_64 rng(2);
  Tensor a = random_tensor({8, 8, 2}, rng);
  EXPECT_LT(max_abs_diff(ifft2c(fft2c(a)), a), 1e-10);
  Tensor b = random_tensor({3, 7, 10, 2}, rng);
  EXPECT_LT(max_abs_diff(fft2c(ifft2c(b)), b), 1e-10);
}

TEST(Tensor, FftUnitary) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor({16, 12, 2}, rng), b = random_tensor({16, 12, 2}, rng);
    // Real inner product over (re, im) equals Re<a, b>.
    EXPECT_NEAR(dot(fft2c(a), fft2c(b)), dot(a, b), 1e-10);
  }
}

TEST(Tensor, ConvMatchesLoop) {
  std::mt19937_64 rng(4);
  Tensor in = random_tensor({2, 7, 6}, rng), w = random_tensor({3, 2, 3, 3}, rng),
         b = random_tensor({3}, rng);
  for (std::size_t d : {1u, 2u}) {
    Tensor out = conv2d(in, w, &b, d);
    const std::size_t oh = 7 - 2 * d, ow = 6 - 2 * d;
    ASSERT_EQ(out.shape(), (Shape{3, oh, ow}));
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b[o];
          for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t p = 0; p < 3; ++p)
              for (std::size_t q = 0; q < 3; ++q)
                acc += w[((o * 2 + c) * 3 + p) * 3 + q] * in[(c * 7 + i + d * p) * 6 + j + d * q];
          EXPECT_NEAR(out[(o * oh + i) * ow + j], acc, 1e-13);
        }
  }
}

TEST(Tensor, PadModes) {
  Tensor a({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  // Reflect excludes the edge sample, replicate repeats it.
  Tensor r = pad(a, 2, PadMode::reflect);
  ASSERT_EQ(r.shape(), (Shape{7, 7}));
  EXPECT_EQ(slice(r, 0, 2, 1).vec(), (std::vector<double>{3, 2, 1, 2, 3, 2, 1}));
  EXPECT_EQ(slice(r, 0, 0, 1).vec(), (std::vector<double>{9, 8, 7, 8, 9, 8, 7}));
  Tensor p = pad(a, 1, PadMode::replicate);
  EXPECT_EQ(slice(p, 0, 0, 1).vec(), (std::vector<double>{1, 1, 2, 3, 3}));
  EXPECT_EQ(crop(pad(a, 2, PadMode::zero), 2, 2, 3, 3), a);
  EXPECT_EQ(sum(pad(a, 2, PadMode::zero)).item(), 45.0);
}

TEST(Tensor, ComplexOps) {
  Tensor a({1, 2}, {1, 2}), b({1, 2}, {3, -1});
  EXPECT_EQ(complex_mul(a, b).vec(), (std::vector<double>{5, 5}));
  EXPECT_EQ(complex_conj(a).vec(), (std::vector<double>{1, -2}));
  EXPECT_NEAR(complex_abs(Tensor({1, 2}, {3, 4})).item(), 5.0, 0);
}

TEST(Tnsr, RoundTripBitExact) {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({3, 4, 5, 2}, rng, -1e3, 1e3);
  a[0] = -0.0;
  a[1] = 1e-310;
  const auto path = std::filesystem::temp_directory_path() / "jssl_test_rt.tnsr";
  write_tensor(path, a);
  Tensor b = read_tensor(path);
  EXPECT_EQ(a.shape(), b.shape());
  EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), 8 * a.size()), 0);
  std::filesystem::remove(path);
}

TEST(Tnsr, HeaderLayout) {
  const auto bytes = encode_tensor(Tensor({2}, {1.0, -2.0}));
  ASSERT_EQ(bytes.size(), 4u + 1 + 1 + 8 + 16);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TNSR");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 1);
  EXPECT_EQ(bytes[6], 2);
  // 1.0 = 0x3FF0000000000000 little-endian.
  EXPECT_EQ(bytes[14 + 7], 0x3F);
  EXPECT_EQ(bytes[14 + 6], 0xF0);
}

TEST(Tnsr, RejectsCorruptInput) {
  auto bytes = encode_tensor(Tensor({2}, {1.0, 2.0}));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_tensor(bad), IoError);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode_tensor(bad), IoError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(decode_tensor(bad), IoError);
  EXPECT_THROW(read_tensor("/nonexistent/x.tnsr"), IoError);
}
