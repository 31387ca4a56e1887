#pragma once

#include <optional>
#include <span>

#include "jssl/autodiff.hpp"
#include "jssl/error.hpp"
#include "jssl/recon.hpp"
#include "jssl/tensor.hpp"

// Metrics and losses. Templates accept T = Tensor or T = Variable. In every
// two-argument metric the reference argument is named in the comment.

namespace jssl {

constexpr std::size_t kSsimWindow = 7;
constexpr double kSsimGamma1 = 0.01;
constexpr double kSsimGamma2 = 0.03;
constexpr std::size_t kLogSize = 15;
constexpr double kLogSigma = 2.5;

/// 15 x 15 Laplacian-of-Gaussian kernel, shape (1, 1, 15, 15), zero sum.
const Tensor& log_kernel();

void check_images(const char* op, const Tensor& a, const Tensor& b, std::size_t min_extent);

/// Data range L of the SSIM constants: max(b) - min(b), or 1 for a constant b.
double ssim_data_range(const Tensor& reference);

/// Mean SSIM over 7x7 uniform windows, stride 1, unbiased local (co)variances.
/// Reference b sets L unless `data_range` is given.
template <class T>
T ssim(const T& a, const T& b, std::optional<double> data_range = std::nullopt) {
  check_images("ssim", value_of(a), value_of(b), kSsimWindow);
  const double L = data_range ? *data_range : ssim_data_range(value_of(b));
  const double c1 = (kSsimGamma1 * L) * (kSsimGamma1 * L);
  const double c2 = (kSsimGamma2 * L) * (kSsimGamma2 * L);
  const double n = static_cast<double>(kSsimWindow * kSsimWindow);
  const Shape s3{1, value_of(a).dim(0), value_of(a).dim(1)};
  const T w = lift(a, Tensor({1, 1, kSsimWindow, kSsimWindow}, 1.0 / n));
  auto box = [&](const T& v) { return conv2d(v, w, nullptr); };
  const T a3 = reshape(a, s3), b3 = reshape(b, s3);
  const T mu_a = box(a3), mu_b = box(b3);
  const T mu_ab = mu_a * mu_b;
  const double k = n / (n - 1.0);
  const T var_a = (box(square(a3)) - square(mu_a)) * k;
  const T var_b = (box(square(b3)) - square(mu_b)) * k;
  const T cov = (box(a3 * b3) - mu_ab) * k;
  const T num = (mu_ab * 2.0 + c1) * (cov * 2.0 + c2);
  const T den = (square(mu_a) + square(mu_b) + c1) * (var_a + var_b + c2);
  return mean(num / den);
}

/// LoG response with reflect padding, shape (1, nx, ny).
template <class T>
T log_filter(const T& a) {
  const Tensor& x = value_of(a);
  return conv2d(pad(reshape(a, {1, x.dim(0), x.dim(1)}), kLogSize / 2, PadMode::reflect),
                lift(a, log_kernel()), nullptr);
}

/// ||G(a) - G(b)||_k / ||G(b)||_k with reference b; k in {1, 2}.
template <class T>
T hfen(const T& a, const T& b, int k) {
  check_images("hfen", value_of(a), value_of(b), kLogSize / 2 + 1);
  if (k != 1 && k != 2) throw ConfigError("hfen: norm order must be 1 or 2");
  const T gb = log_filter(b);
  const T d = log_filter(a) - gb;
  const T den = k == 1 ? sum(abs(gb)) : sqrt(sum(square(gb)));
  const Tensor& bv = value_of(b);
  const double floor = 1e-12 * (k == 1 ? sum(abs(bv)).item() : norm2(bv));
  if (value_of(den).item() <= floor) throw NumericalError("hfen: reference has zero LoG response");
  const T num = k == 1 ? sum(abs(d)) : sqrt(sum(square(d)));
  return num / den;
}

/// ||a - b||_2^2 / ||a||_2^2 with reference a.
template <class T>
T nmse(const T& a, const T& b) {
  require_same_shape("nmse", value_of(a), value_of(b));
  const T den = sum(square(a));
  if (value_of(den).item() == 0.0) throw NumericalError("nmse: zero-norm reference");
  return sum(square(a - b)) / den;
}

/// ||a - b||_1 / ||a||_1 with reference a.
template <class T>
T nmae(const T& a, const T& b) {
  require_same_shape("nmae", value_of(a), value_of(b));
  const T den = sum(abs(a));
  if (value_of(den).item() == 0.0) throw NumericalError("nmae: zero-norm reference");
  return sum(abs(a - b)) / den;
}

/// Mean absolute error.
template <class T>
T l1(const T& a, const T& b) {
  require_same_shape("l1", value_of(a), value_of(b));
  return mean(abs(a - b));
}

/// 10 log10(max(gt)^2 / mse).
double psnr(const Tensor& gt, const Tensor& pred);

/// 2 (1 - SSIM(pred, gt)) + 2 L1 + HFEN1 + HFEN2 on real images.
template <class T>
T image_loss(const T& gt, const T& pred) {
  const T s = ssim(pred, gt);
  return (s * -1.0 + 1.0) * 2.0 + l1(pred, gt) * 2.0 + hfen(pred, gt, 1) + hfen(pred, gt, 2);
}

/// 2 (NMSE + NMAE) over the real view of complex data.
template <class T>
T kspace_loss(const T& gt, const T& pred) {
  return (nmse(gt, pred) + nmae(gt, pred)) * 2.0;
}

/// Supervised loss, mean over the batch. Each sample's mask subsamples its
/// fully-sampled k-space to form the model input.
Variable sl_loss(Tape& tape, std::span<const ProxySample> batch, const ReconFn& model);

/// Self-supervised loss, mean over the batch. Lambda is the model input and
/// Theta the k-space target.
Variable ssl_loss(Tape& tape, std::span<const TargetSample> batch, const ReconFn& model);

/// sl_loss + ssl_loss; an empty side contributes nothing.
Variable jssl_loss(Tape& tape, std::span<const ProxySample> proxy,
                   std::span<const TargetSample> target, const ReconFn& model);

/// Checks Theta, Lambda partition M.
void check_partition(const TargetSample& s);

}  // namespace jssl
