#include <gtest/gtest.h>

#include "jssl/autodiff.hpp"
#include "jssl/error.hpp"
#include "test_util.hpp"

using namespace jssl;
using jssl::testing::random_tensor;

TEST(Autodiff, ReluBackward) {
  Tape t;
  auto x = t.leaf(Tensor({2}, {-1, 2}));
  auto y = relu(x);
  EXPECT_EQ(y.value().vec(), (std::vector<double>{0, 2}));
  auto g = t.backward(sum(y));
  EXPECT_EQ(g[x].vec(), (std::vector<double>{0, 1}));
  Tape t0;
  auto z = t0.leaf(Tensor({1}, {0.0}));
  EXPECT_EQ(t0.backward(sum(relu(z)))[z].item(), 0.0);
}

TEST(Autodiff, SquareAndMean) {
  Tape t;
  auto w = t.leaf(Tensor({1}, {3.0}));
  EXPECT_EQ(t.backward(sum(square(w)))[w].item(), 6.0);
  auto v = t.leaf(Tensor({4}, {1, 2, 3, 4}));
  EXPECT_EQ(t.backward(mean(v))[v].vec(), (std::vector<double>(4, 0.25)));
}

TEST(Autodiff, NonScalarLossRejected) {
  Tape t;
  auto v = t.leaf(Tensor({2}));
  EXPECT_THROW(t.backward(v), ShapeError);
}

TEST(Autodiff, UnreachableLeafGetsZero) {
  Tape t;
  auto a = t.leaf(Tensor({3}, 1.0));
  auto b = t.leaf(Tensor({2, 2}, 1.0));
  auto g = t.backward(sum(a));
  EXPECT_FALSE(g.reached(b));
  EXPECT_EQ(g[b], Tensor({2, 2}));
}

TEST(Autodiff, TopologicalOrder) {
  Tape t;
  auto a = t.leaf(Tensor({2}, 1.0));
  auto b = exp(a) * a + sqrt(square(a));
  for (std::size_t id = 0; id < t.size(); ++id)
    for (auto in : t.inputs(id)) EXPECT_LT(in, id);
  EXPECT_EQ(b.id(), t.size() - 1);
}

TEST(Autodiff, QuadraticGradCheck) {
  std::mt19937_64 rng(1);
  const double err = grad_check([](Tape&, const Variable& x) { return sum(square(x)); },
                                random_tensor({5}, rng), 1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(Autodiff, CompositeGradCheck) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Tensor> pt{random_tensor({4, 3}, rng), random_tensor({3, 2}, rng, 0.5, 1.5)};
    const double err = grad_check(
        [](Tape&, std::span<const Variable> v) {
          return sum(sigmoid(matmul(v[0], v[1])) * square(matmul(v[0], v[1]))) +
                 mean(exp(v[0] * 0.3 - 0.1));
        },
        pt, 1e-5);
    EXPECT_LT(err, 1e-4);
  }
}

TEST(Autodiff, EveryOpGradCheck) {
  std::mt19937_64 rng(3);
  Tensor grid({4, 5});
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = (i % 3 == 0) ? 1.0 : 0.0;
  std::vector<Tensor> pt{random_tensor({2, 4, 5, 2}, rng), random_tensor({2, 4, 5, 2}, rng),
                         random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng),
                         random_tensor({1}, rng, 0.5, 1.0)};
  auto builder = [&](Tape&, std::span<const Variable> v) {
    auto a = v[0], b = v[1];
    auto c = complex_mul(a, complex_conj(b));
    auto f = ifft2c(mask_apply(fft2c(c), grid)) + scale(a, v[4]);
    auto img = slice(reshape(permute(f, {0, 3, 1, 2}), {4, 4, 5}), 0, 1, 2);
    auto padded = pad(img, 2, PadMode::reflect);
    auto rp = pad(img, 1, PadMode::replicate);
    auto conv = conv2d(padded, v[2], &v[3], 2);
    auto conv2 = conv2d(rp, v[2], nullptr, 1);
    auto m = crop(conv, 1, 1, 2, 3);
    std::vector<Variable> parts{relu(m), abs(crop(conv2, 0, 0, 2, 3))};
    auto cat = concat(parts, 0);
    auto mag = complex_abs(a + 2.0);
    auto red = sum_axis(broadcast_axis(mag, 1, 3), 1);
    return mean(square(cat)) + sum(sqrt(red * red + 1.0)) + sum(div(mag, mag + 3.0)) +
           sum(to_complex(mag) - a) - sum(sub(a, b)) * 0.5;
  };
  EXPECT_LT(grad_check(builder, pt, 1e-6), 1e-6);
}

TEST(Autodiff, Linearity) {
  std::mt19937_64 rng(4);
  Tensor x0 = random_tensor({6}, rng);
  auto f = [](const Variable& x) { return sum(sigmoid(x) * x); };
  auto g = [](const Variable& x) { return mean(exp(x * 0.5)); };
  const double a = 1.7, b = -0.4;
  Tape t1;
  auto x1 = t1.leaf(x0);
  Tensor lhs = t1.backward(a * f(x1) + b * g(x1))[x1];
  Tape t2;
  auto x2 = t2.leaf(x0);
  Tensor gf = t2.backward(f(x2))[x2];
  Tape t3;
  auto x3 = t3.leaf(x0);
  Tensor gg = t3.backward(g(x3))[x3];
  EXPECT_LT(max_abs_diff(lhs, a * gf + b * gg), 1e-14);
}

TEST(Autodiff, ConvInputGradIsFlippedCorrelation) {
  std::mt19937_64 rng(5);
  Tensor in = random_tensor({1, 5, 5}, rng), w = random_tensor({1, 1, 3, 3}, rng);
  Tensor seed = random_tensor({1, 3, 3}, rng);
  Tape t;
  auto x = t.leaf(in);
  auto wv = t.constant(w);
  auto loss = sum(conv2d(x, wv, nullptr) * t.constant(seed));
  Tensor g = t.backward(loss)[x];
  // Full correlation of the seed with the flipped kernel.
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      double acc = 0;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
          const int si = i - 2 + p, sj = j - 2 + q;
          if (si < 0 || sj < 0 || si >= 3 || sj >= 3) continue;
          acc += seed[si * 3 + sj] * w[(2 - p) * 3 + (2 - q)];
        }
      EXPECT_NEAR(g[i * 5 + j], acc, 1e-14);
    }
}

TEST(Autodiff, Deterministic) {
  auto run = [] {
    std::mt19937_64 rng(9);
    Tape t;
    auto x = t.leaf(random_tensor({3, 6, 6}, rng));
    auto w = t.leaf(random_tensor({2, 3, 3, 3}, rng));
    auto loss = mean(square(relu(conv2d(x, w, nullptr))));
    auto g = t.backward(loss);
    return std::make_pair(loss.value(), g[w]);
  };
  EXPECT_EQ(run(), run());
}

TEST(Autodiff, MixedTapesRejected) {
  Tape a, b;
  auto x = a.leaf(Tensor({1}));
  auto y = b.leaf(Tensor({1}));
  EXPECT_THROW(add(x, y), Error);
}
