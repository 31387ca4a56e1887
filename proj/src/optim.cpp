#include "jssl/optim.hpp"

#include <cmath>

#include "jssl/error.hpp"

namespace jssl {

AdamState adam_init(const ParamMap& params) {
  AdamState s;
  for (const auto& [name, t] : params) {
    s.m.emplace(name, Tensor(t.shape()));
    s.v.emplace(name, Tensor(t.shape()));
  }
  return s;
}

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state, double lr, const AdamConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto g = grads.find(name);
    auto& m = state.m.at(name);
    auto& v = state.v.at(name);
    if (g != grads.end() && g->second.shape() != p.shape())
      throw ShapeError("adam_step: gradient of " + name + " has the wrong shape");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g == grads.end() ? 0.0 : g->second[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

double lr_at(std::uint64_t iter, double lr0, double decay, std::uint64_t every) {
  if (every == 0) throw ConfigError("lr decay interval must be positive");
  return lr0 * std::pow(decay, static_cast<double>(iter / every));
}

}  // namespace jssl
