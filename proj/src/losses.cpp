#include "jssl/losses.hpp"

#include <cmath>

#include "jssl/mri_ops.hpp"

namespace jssl {

const Tensor& log_kernel() {
  static const Tensor k = [] {
    const int h = static_cast<int>(kLogSize / 2);
    const double s2 = kLogSigma * kLogSigma;
    Tensor g({1, 1, kLogSize, kLogSize});
    double gsum = 0.0;
    for (int i = -h; i <= h; ++i)
      for (int j = -h; j <= h; ++j) {
        const double v = std::exp(-(i * i + j * j) / (2.0 * s2));
        g[(i + h) * kLogSize + (j + h)] = v;
        gsum += v;
      }
    Tensor out(g.shape());
    double osum = 0.0;
    for (int i = -h; i <= h; ++i)
      for (int j = -h; j <= h; ++j) {
        const std::size_t idx = (i + h) * kLogSize + (j + h);
        out[idx] = g[idx] / gsum * (i * i + j * j - 2.0 * s2) / (s2 * s2);
        osum += out[idx];
      }
    const double shift = osum / static_cast<double>(out.size());
    for (auto& v : out.data()) v -= shift;
    return out;
  }();
  return k;
}

void check_images(const char* op, const Tensor& a, const Tensor& b, std::size_t min_extent) {
  require_same_shape(op, a, b);
  if (a.ndim() != 2 || a.dim(0) < min_extent || a.dim(1) < min_extent)
    throw ShapeError(std::string(op) + ": expected 2-D images with extents >= " +
                     std::to_string(min_extent) + ", got " + to_string(a.shape()));
}

double ssim_data_range(const Tensor& reference) {
  const double L = max_value(reference) - min_value(reference);
  return L > 0.0 ? L : 1.0;
}

double psnr(const Tensor& gt, const Tensor& pred) {
  require_same_shape("psnr", gt, pred);
  double mse = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) mse += (gt[i] - pred[i]) * (gt[i] - pred[i]);
  mse /= static_cast<double>(gt.size());
  const double peak = max_value(gt);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

void check_partition(const TargetSample& s) {
  const Tensor& m = s.mask.grid;
  require_same_shape("ssl_loss", m, s.theta.grid);
  require_same_shape("ssl_loss", m, s.lambda.grid);
  std::size_t nt = 0, nl = 0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double t = s.theta.grid[k], l = s.lambda.grid[k];
    if (t * l != 0.0) throw ConfigError("ssl_loss: Theta and Lambda overlap in sample " + s.id);
    if (t + l != m[k]) throw ConfigError("ssl_loss: Theta and Lambda do not cover M in sample " + s.id);
    nt += t != 0.0;
    nl += l != 0.0;
  }
  if (nt == 0 || nl == 0) throw ConfigError("ssl_loss: empty partition in sample " + s.id);
}

namespace {

Variable sl_term(Tape& tape, const ProxySample& s, const ReconFn& model) {
  if (s.gt.size() == 0 || s.kspace.ndim() != 4)
    throw ConfigError("sl_loss: sample " + s.id + " lacks ground truth");
  const Tensor& m = s.mask.grid;
  const Tensor y_sub = apply_mask(s.kspace, m);
  const ReconOutput out = model(tape, y_sub, s.mask);
  const Variable y_hat = dc_operator(tape.constant(y_sub), fft2c(expand_coils(out.image, out.maps)), m);
  return image_loss(tape.constant(s.gt), complex_abs(out.image)) +
         kspace_loss(tape.constant(s.kspace), y_hat);
}

Variable ssl_term(Tape& tape, const TargetSample& s, const ReconFn& model) {
  check_partition(s);
  const Tensor& theta = s.theta.grid;
  const Tensor& lambda = s.lambda.grid;
  const Tensor y_theta = apply_mask(s.kspace, theta);
  const Tensor y_lambda = apply_mask(s.kspace, lambda);
  const ReconOutput out = model(tape, y_lambda, s.lambda);
  const Variable y_pred = fft2c(expand_coils(out.image, out.maps));
  const Variable y_tl = apply_mask(dc_operator(tape.constant(y_lambda), y_pred, lambda), theta);
  return kspace_loss(tape.constant(y_theta), y_tl) +
         image_loss(tape.constant(rss_reconstruct(y_theta)), complex_abs(out.image));
}

template <class S, class F>
Variable batch_mean(Tape& tape, std::span<const S> batch, F term) {
  Variable acc = term(tape, batch[0]);
  for (std::size_t i = 1; i < batch.size(); ++i) acc = acc + term(tape, batch[i]);
  return acc * (1.0 / static_cast<double>(batch.size()));
}

}  // namespace

Variable sl_loss(Tape& tape, std::span<const ProxySample> batch, const ReconFn& model) {
  if (batch.empty()) throw ConfigError("sl_loss: empty batch");
  return batch_mean(tape, batch, [&](Tape& t, const ProxySample& s) { return sl_term(t, s, model); });
}

Variable ssl_loss(Tape& tape, std::span<const TargetSample> batch, const ReconFn& model) {
  if (batch.empty()) throw ConfigError("ssl_loss: empty batch");
  return batch_mean(tape, batch, [&](Tape& t, const TargetSample& s) { return ssl_term(t, s, model); });
}

Variable jssl_loss(Tape& tape, std::span<const ProxySample> proxy,
                   std::span<const TargetSample> target, const ReconFn& model) {
  if (proxy.empty() && target.empty()) throw ConfigError("jssl_loss: both batches are empty");
  if (target.empty()) return sl_loss(tape, proxy, model);
  if (proxy.empty()) return ssl_loss(tape, target, model);
  return sl_loss(tape, proxy, model) + ssl_loss(tape, target, model);
}

}  // namespace jssl
