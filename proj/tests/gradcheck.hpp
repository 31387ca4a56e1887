#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "jssl/losses.hpp"
#include "jssl/mri_ops.hpp"
#include "jssl/models.hpp"
#include "jssl/synth.hpp"

namespace jssl::testing {

enum class LossKind { sl, ssl, jssl };

inline const char* loss_kind_name(LossKind k) {
  return k == LossKind::sl ? "SL" : k == LossKind::ssl ? "SSL" : "JSSL";
}

struct GradProblem {
  ModelConfig cfg;
  ParamMap params;
  std::vector<ProxySample> proxy;
  std::vector<TargetSample> target;
  LossKind loss = LossKind::jssl;

  double value(const ParamMap& p) const {
    Model m(cfg, p);
    Tape tape;
    return evaluate(tape, m).value().item();
  }

  Variable evaluate(Tape& tape, Model& m) const {
    const ReconFn f = m.recon_fn();
    if (loss == LossKind::sl) return sl_loss(tape, proxy, f);
    if (loss == LossKind::ssl) return ssl_loss(tape, target, f);
    return jssl_loss(tape, proxy, target, f);
  }
};

// 16 x 16 phantoms, 2 coils, R = 2 with a 4-column ACS band. Parameters are
// jittered so no residual branch sits at its zero initialization.
inline GradProblem make_grad_problem(ModelKind kind, LossKind loss, std::uint64_t seed) {
  GradProblem g;
  g.loss = loss;
  g.cfg.kind = kind;
  g.cfg.T = 2;
  g.cfg.T_x = 2;
  g.cfg.channels = 4;
  g.cfg.depth = 3;
  g.cfg.sme_channels = 2;
  g.params = init_params(g.cfg, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (auto& [name, t] : g.params)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += jitter(rng);

  const std::size_t n = 16;
  auto sample = [&](Family f, std::uint64_t s, Tensor& y, Tensor& gt) {
    // 2 x 2 block means of a 32 x 32 phantom.
    const Tensor big = make_phantom({f, 2 * n, 2 * n, s});
    Tensor x({n, n, 2});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < 2; ++c) {
          double acc = 0.0;
          for (std::size_t di = 0; di < 2; ++di)
            for (std::size_t dj = 0; dj < 2; ++dj) acc += big[((2 * i + di) * 2 * n + 2 * j + dj) * 2 + c];
          x[(i * n + j) * 2 + c] = 0.25 * acc;
        }
    const Tensor maps = make_coil_maps(2, n, n, s + 100);
    y = fft2c(expand_coils(x, maps));
    gt = rss_reconstruct(y);
  };
  const SamplingMask m = make_mask(MaskScheme::equispaced, n, n, 2.0, 0.25, seed);
  for (std::uint64_t i = 0; i < 2; ++i) {
    ProxySample p;
    p.id = "p" + std::to_string(i);
    sample(Family::proxy_a, seed + i, p.kspace, p.gt);
    p.mask = m;
    g.proxy.push_back(p);

    TargetSample t;
    t.id = "t" + std::to_string(i);
    Tensor full, gt;
    sample(Family::target, seed + 10 + i, full, gt);
    t.mask = m;
    t.kspace = apply_mask(full, m.grid);
    PartitionSpec ps;
    ps.acs_window = 2;
    ps.seed = seed + i;
    const Partition part = gaussian_partition(m, ps);
    t.theta = part.theta;
    t.lambda = part.lambda;
    g.target.push_back(t);
  }
  return g;
}

struct GradCheckResult {
  std::size_t coords = 0;
  double worst_rel = 0.0;
  std::string worst_where;
};

// Central differences on `coords` parameter entries drawn uniformly over all
// parameters. Relative error |a - n| / max(|a|, |n|, floor). ReLU and abs
// kinks make a stencil straddle a corner now and then, so each coordinate is
// scored against the closest of the central differences at h, h / 10 and
// h / 100. A wrong analytic gradient misses all three.
inline GradCheckResult grad_check(const GradProblem& g, std::size_t coords, std::uint64_t seed,
                                  double h = 1e-5, double floor = 1e-7,
                                  double analytic_scale = 1.0) {
  Model m(g.cfg, g.params);
  Tape tape;
  const Variable l = g.evaluate(tape, m);
  const Gradients grads = tape.backward(l);
  ParamMap analytic;
  for (const auto& [name, v] : m.bind(tape)) analytic.emplace(name, grads[v]);

  std::vector<std::pair<std::string, std::size_t>> all;
  for (const auto& [name, t] : g.params)
    for (std::size_t i = 0; i < t.size(); ++i) all.emplace_back(name, i);
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(coords, all.size()));

  GradCheckResult r;
  ParamMap p = g.params;
  for (const auto& [name, i] : all) {
    const double x0 = p.at(name)[i];
    const double a = analytic_scale * analytic.at(name)[i];
    double rel = std::numeric_limits<double>::infinity();
    for (double step : {h, h / 10.0, h / 100.0}) {
      p.at(name)[i] = x0 + step;
      const double up = g.value(p);
      p.at(name)[i] = x0 - step;
      const double down = g.value(p);
      p.at(name)[i] = x0;
      const double fd = (up - down) / (2.0 * step);
      rel = std::min(rel, std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), floor}));
    }
    if (rel > r.worst_rel) {
      r.worst_rel = rel;
      r.worst_where = name + "[" + std::to_string(i) + "]";
    }
    ++r.coords;
  }
  return r;
}

}  // namespace jssl::testing
