#pragma once

#include <functional>
#include <string>

#include "jssl/autodiff.hpp"
#include "jssl/sampling.hpp"

namespace jssl {

/// What a reconstruction model hands to the losses: the complex image
/// estimate (nx, ny, 2) and the maps it used (nc, nx, ny, 2).
struct ReconOutput {
  Variable image;
  Variable maps;
};

/// Maps subsampled k-space and its mask to a reconstruction on `tape`.
using ReconFn = std::function<ReconOutput(Tape& tape, const Tensor& kspace, const SamplingMask& mask)>;

/// Supervised sample: fully-sampled k-space, its RSS image and a mask.
struct ProxySample {
  std::string id;
  Tensor kspace;
  Tensor gt;
  SamplingMask mask;
};

/// Self-supervised sample: subsampled k-space on M with a partition of M.
struct TargetSample {
  std::string id;
  Tensor kspace;
  SamplingMask mask;
  SamplingMask theta;
  SamplingMask lambda;
};

}  // namespace jssl
