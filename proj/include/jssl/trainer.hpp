#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jssl/models.hpp"
#include "jssl/optim.hpp"
#include "jssl/recon.hpp"
#include "jssl/synth.hpp"

namespace jssl {

enum class Setup { ssl, ssl_all, sl, sl_all, sl_proxy, jssl };
/// "SSL", "SSL_ALL", "SL", "SL_ALL", "SL_PROXY", "JSSL".
std::string setup_name(Setup s);
/// Accepts the display names and the lower-case dashed forms (ssl-all, ...).
Setup parse_setup(const std::string& s);
/// Lower-case dashed form used on the command line.
std::string setup_flag(Setup s);
const std::vector<Setup>& all_setups();
InferenceMode inference_mode(Setup s);

/// Scheme used to subsample a family: proxy_a random, proxy_b and target equispaced.
MaskScheme family_scheme(Family f);

struct TrainConfig {
  Setup setup = Setup::jssl;
  ModelConfig model;
  std::vector<int> accelerations{4, 8};
  RatioMode ratio_mode = RatioMode::range;
  double partition_sigma = 3.5;
  std::size_t acs_window = 4;
  std::size_t target_oversample = 2;
  double lr = 0.003;
  AdamConfig adam;
  double lr_decay = 0.8;
  std::uint64_t decay_every = 2000;
  std::size_t batch_size = 2;
  std::uint64_t max_iters = 5000;
  std::uint64_t log_every = 10;
  std::uint64_t val_every = 250;
  std::size_t val_samples = 0;  // 0 = all validation samples
  std::uint64_t seed = 0;
};

std::string train_config_to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});

/// Synthetic samples in memory, addressable by id.
struct Dataset {
  DatasetManifest manifest;
  std::map<std::string, Sample> samples;

  const Sample& at(const std::string& id) const;
};

Dataset load_dataset(const std::filesystem::path& root);
/// Synthesizes every record without touching the file system.
Dataset materialize(const DatasetManifest& manifest);

struct Batch {
  std::vector<ProxySample> proxy;   // supervised
  std::vector<TargetSample> target;  // self-supervised
  /// Ids in draw order, for inspection.
  std::vector<std::string> ids;
};

/// Deterministic batches as a function of (seed, iteration).
class BatchStream {
 public:
  BatchStream(const TrainConfig& cfg, const Dataset& data);

  Batch at(std::uint64_t iter) const;
  std::size_t supervised_pool() const { return sup_.size(); }
  std::size_t self_supervised_pool() const { return ssl_.size(); }

 private:
  struct Slot {
    std::vector<SampleRecord> pool;
    std::size_t per_batch = 0;
    std::uint64_t tag = 0;
  };
  const SampleRecord& pick(const std::vector<SampleRecord>& pool, std::uint64_t tag,
                           std::uint64_t position) const;
  SamplingMask draw_mask(const SampleRecord& r, std::uint64_t iter, std::uint64_t tag, std::size_t b) const;

  TrainConfig cfg_;
  const Dataset* data_;
  std::vector<SampleRecord> sup_;
  std::vector<SampleRecord> ssl_;
  std::size_t sup_per_batch_ = 0;
  std::size_t ssl_per_batch_ = 0;
};

BatchStream build_batches(const TrainConfig& cfg, const Dataset& data);

/// The setup's loss for one batch on `tape`.
Variable batch_loss(Tape& tape, const Batch& batch, const ReconFn& model);

struct LogEntry {
  std::uint64_t iter;
  double loss;
  double lr;
};

struct ValidationEntry {
  std::uint64_t iter;
  double ssim;
};

struct TrainResult {
  std::vector<LogEntry> log;
  std::vector<ValidationEntry> validation;
  double best_val_ssim = -1.0;
  std::uint64_t best_iter = 0;
  Checkpoint best;
  Checkpoint last;
};

struct TrainOptions {
  /// When set, `best/` and `last/` checkpoints and `train_log.json` are written here.
  std::optional<std::filesystem::path> out_dir;
  /// Continue from this checkpoint (params, Adam moments, step).
  std::optional<Checkpoint> resume;
  /// Called after every logged step.
  std::function<void(const LogEntry&)> on_log;
};

/// Parameters a fresh training run starts from.
ParamMap initial_params(const TrainConfig& cfg);

/// Adam on the setup's loss for cfg.max_iters steps. Throws NumericalError
/// naming the iteration on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& opts = {});

/// Mean SSIM over the validation split at every configured acceleration.
double validation_ssim(const TrainConfig& cfg, const Dataset& data, const ReconFn& model);

struct EvalRecord {
  std::string id;
  int acceleration;
  std::string setup;
  double ssim;
  double psnr;
  double nmse;
};

struct EvalOptions {
  Split split = Split::test;
  std::vector<int> accelerations{4, 8};
  std::uint64_t seed = 0;
  std::size_t max_samples = 0;  // 0 = all
  /// Keep reconstructions of the first `keep_images` samples.
  std::size_t keep_images = 0;
  /// Worker threads for the checkpoint overload; results do not depend on it.
  std::size_t threads = 1;
};

struct EvalResult {
  std::vector<EvalRecord> records;
  /// (id, R) -> reconstruction, for the kept samples.
  std::map<std::pair<std::string, int>, Tensor> images;
  std::map<std::string, Tensor> ground_truth;
};

/// Subsamples each target sample of the split at every R with the inference
/// ACS schedule, infers in `mode` and scores against the RSS ground truth.
/// Runs on the calling thread.
EvalResult evaluate(const ReconFn& model, InferenceMode mode, const std::string& setup_label,
                    const Dataset& data, const EvalOptions& opts);
/// Evaluates a checkpoint in its setup's inference mode.
EvalResult evaluate(const Checkpoint& ck, Setup setup, const Dataset& data, const EvalOptions& opts);

/// A*(y~) with ACS-estimated maps; the untrained baseline.
ReconFn zero_filled_model();

/// Mask used at evaluation for sample index i and acceleration R.
SamplingMask eval_mask(const Dataset& data, std::size_t index, int acceleration, std::uint64_t seed);

std::string records_to_csv(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> records_from_csv(const std::string& text);

/// Installs allocator settings that avoid repeated page faults on the
/// large short-lived buffers of a training step (glibc only; no-op elsewhere).
void tune_allocator();

}  // namespace jssl
