#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jssl/autodiff.hpp"
#include "jssl/recon.hpp"
#include "jssl/sampling.hpp"

namespace jssl {

enum class ModelKind { vsharp, image_refiner, kspace_gd };
std::string model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::vsharp;
  std::size_t T = 4;     // outer iterations (vsharp, kspace_gd)
  std::size_t T_x = 4;   // inner x-step iterations (vsharp)
  std::size_t channels = 8;
  std::size_t depth = 3;  // conv layers per denoiser / CNN
  std::size_t sme_channels = 4;
  bool use_sme = true;
  double mu_init = 1.0;
  double eta_init = 0.1;
  double kgd_eta_init = 1.0;
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

using ParamMap = std::map<std::string, Tensor>;
using BoundParams = std::map<std::string, Variable>;

/// Deterministic initialization. Final layers of residual branches, the u0
/// initializer and the SME output layer start at zero.
ParamMap init_params(const ModelConfig& cfg, std::uint64_t seed);
std::size_t param_count(const ParamMap& params);
BoundParams bind_params(Tape& tape, const ParamMap& params, bool trainable = true);

/// ACS-only coil images divided by their RSS. Pixels whose RSS is below
/// 1e-12 of the maximum get zero maps; all-zero data gives all-zero maps.
Tensor estimate_sensitivities(const Tensor& kspace, const SamplingMask& mask);

/// Residual per-coil conv net followed by RSS renormalization.
Variable sme_refine(const Variable& initial, const BoundParams& p, const ModelConfig& cfg);

/// (nx, ny, 2) <-> (2, nx, ny).
Variable to_channels(const Variable& x);
Variable from_channels(const Variable& x);

/// 3x3 conv layers "<prefix>.w<i>", "<prefix>.b<i>" with zero "same" padding and ReLU between.
Variable conv_stack(const Variable& in, const BoundParams& p, const std::string& prefix, std::size_t layers);

/// Effective x-step size (2 / (1 + mu)) sigmoid(raw).
Variable vsharp_step_size(const Variable& raw, const Variable& mu);

/// Unrolled ADMM. `x_objective`, when given, receives the x-step objective
/// 0.5 ||A x - y||^2 + 0.5 mu ||x - z + u / mu||^2 before and after every inner step.
Variable vsharp_forward(const Variable& kspace, const Tensor& grid, const Variable& maps,
                        const BoundParams& p, const ModelConfig& cfg,
                        std::vector<std::vector<double>>* x_objective = nullptr);

Variable image_refiner_forward(const Variable& x_tilde, const BoundParams& p, const ModelConfig& cfg);

Variable kspace_gd_forward(const Variable& kspace, const Tensor& grid, const Variable& maps,
                           const BoundParams& p, const ModelConfig& cfg);

/// Maps (from the ACS of `mask`, refined by the SME) and the model's image.
ReconOutput model_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg,
                          const Tensor& kspace, const SamplingMask& mask);

/// Parameters plus a per-tape binding cache, so every call on one tape shares
/// the same parameter leaves.
class Model {
 public:
  Model(ModelConfig cfg, ParamMap params);

  const ModelConfig& config() const { return cfg_; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }

  const BoundParams& bind(Tape& tape);
  ReconFn recon_fn();

 private:
  ModelConfig cfg_;
  ParamMap params_;
  std::uint64_t bound_tape_ = 0;
  BoundParams bound_;
};

enum class InferenceMode { sl, ssl, jssl };

/// SL / JSSL: |f(x~)|. SSL: |R_S F^-1 DC_M(y~, F E_S f(x~))|.
Tensor infer(InferenceMode mode, const Tensor& kspace, const SamplingMask& mask, const ReconFn& model);

struct Checkpoint {
  ModelConfig cfg;
  ParamMap params;
  ParamMap adam_m;
  ParamMap adam_v;
  std::uint64_t step = 0;
  std::string meta_json = "{}";
};

/// `dir/manifest.json` plus one TNSR file per tensor.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace jssl
