#pragma once

#include <cstdint>

#include "jssl/models.hpp"

namespace jssl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamMap m;
  ParamMap v;
  std::uint64_t step = 0;
};

/// Zero moments shaped like `params`.
AdamState adam_init(const ParamMap& params);

/// One bias-corrected Adam update in place. Missing gradients count as zero.
void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

/// lr0 * decay^floor(iter / every).
double lr_at(std::uint64_t iter, double lr0, double decay, std::uint64_t every);

}  // namespace jssl
