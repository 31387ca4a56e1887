#include "jssl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "json.hpp"
#include "jssl/error.hpp"
#include "jssl/losses.hpp"
#include "jssl/mri_ops.hpp"
#include "jssl/rng.hpp"
#include "jssl/tnsr_io.hpp"

namespace jssl {

std::string setup_name(Setup s) {
  switch (s) {
    case Setup::ssl: return "SSL";
    case Setup::ssl_all: return "SSL_ALL";
    case Setup::sl: return "SL";
    case Setup::sl_all: return "SL_ALL";
    case Setup::sl_proxy: return "SL_PROXY";
    case Setup::jssl: return "JSSL";
  }
  return "unknown";
}

std::string setup_flag(Setup s) {
  std::string n = setup_name(s);
  for (auto& c : n) c = c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return n;
}

Setup parse_setup(const std::string& s) {
  std::string n = s;
  for (auto& c : n) c = c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (Setup x : all_setups())
    if (setup_flag(x) == n) return x;
  throw ConfigError("unknown setup '" + s + "'");
}

const std::vector<Setup>& all_setups() {
  static const std::vector<Setup> v{Setup::ssl, Setup::ssl_all, Setup::sl, Setup::sl_all, Setup::sl_proxy, Setup::jssl};
  return v;
}

InferenceMode inference_mode(Setup s) {
  switch (s) {
    case Setup::ssl:
    case Setup::ssl_all: return InferenceMode::ssl;
    case Setup::jssl: return InferenceMode::jssl;
    default: return InferenceMode::sl;
  }
}

MaskScheme family_scheme(Family f) {
  return f == Family::proxy_a ? MaskScheme::random_uniform : MaskScheme::equispaced;
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::json j{{"setup", setup_name(c.setup)},
                   {"model", nlohmann::json::parse(config_to_json(c.model))},
                   {"accelerations", c.accelerations},
                   {"ratio_mode", c.ratio_mode == RatioMode::range ? "range" : "fixed"},
                   {"partition_sigma", c.partition_sigma},
                   {"acs_window", c.acs_window},
                   {"target_oversample", c.target_oversample},
                   {"lr", c.lr},
                   {"beta1", c.adam.beta1},
                   {"beta2", c.adam.beta2},
                   {"eps", c.adam.eps},
                   {"lr_decay", c.lr_decay},
                   {"decay_every", c.decay_every},
                   {"batch_size", c.batch_size},
                   {"max_iters", c.max_iters},
                   {"log_every", c.log_every},
                   {"val_every", c.val_every},
                   {"val_samples", c.val_samples},
                   {"seed", c.seed}};
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig c) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (k == "setup") c.setup = parse_setup(v.get<std::string>());
      else if (k == "model") {
        auto m = nlohmann::json::parse(config_to_json(c.model));
        for (const auto& [mk, mv] : v.items()) {
          if (!m.contains(mk)) throw ConfigError("unknown model config key '" + mk + "'");
          m[mk] = mv;
        }
        c.model = config_from_json(m.dump());
      } else if (k == "accelerations") c.accelerations = v.get<std::vector<int>>();
      else if (k == "ratio_mode") {
        const auto s = v.get<std::string>();
        if (s != "range" && s != "fixed") throw ConfigError("ratio_mode must be 'range' or 'fixed'");
        c.ratio_mode = s == "range" ? RatioMode::range : RatioMode::fixed;
      } else if (k == "partition_sigma") c.partition_sigma = v.get<double>();
      else if (k == "acs_window") c.acs_window = v.get<std::size_t>();
      else if (k == "target_oversample") c.target_oversample = v.get<std::size_t>();
      else if (k == "lr") c.lr = v.get<double>();
      else if (k == "beta1") c.adam.beta1 = v.get<double>();
      else if (k == "beta2") c.adam.beta2 = v.get<double>();
      else if (k == "eps") c.adam.eps = v.get<double>();
      else if (k == "lr_decay") c.lr_decay = v.get<double>();
      else if (k == "decay_every") c.decay_every = v.get<std::uint64_t>();
      else if (k == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (k == "max_iters") c.max_iters = v.get<std::uint64_t>();
      else if (k == "log_every") c.log_every = v.get<std::uint64_t>();
      else if (k == "val_every") c.val_every = v.get<std::uint64_t>();
      else if (k == "val_samples") c.val_samples = v.get<std::size_t>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown train config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

const Sample& Dataset::at(const std::string& id) const {
  auto it = samples.find(id);
  if (it == samples.end()) throw ConfigError("dataset has no sample '" + id + "'");
  return it->second;
}

Dataset load_dataset(const std::filesystem::path& root) {
  Dataset d;
  d.manifest = load_manifest(root);
  for (const auto& r : d.manifest.records)
    if (!d.samples.count(r.id)) d.samples.emplace(r.id, load_sample(root, r));
  return d;
}

Dataset materialize(const DatasetManifest& manifest) {
  Dataset d;
  d.manifest = manifest;
  for (const auto& r : manifest.records)
    if (!d.samples.count(r.id)) d.samples.emplace(r.id, synthesize(r, manifest.config));
  return d;
}

namespace {

constexpr std::uint64_t kSupTag = 0x5u;
constexpr std::uint64_t kSslTag = 0x55u;

void check_config(const TrainConfig& cfg) {
  if (cfg.accelerations.empty()) throw ConfigError("train config: no accelerations");
  for (int r : cfg.accelerations) acs_fraction_for(r, Phase::train);
  if (cfg.batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (cfg.setup == Setup::jssl && cfg.batch_size < 2)
    throw ConfigError("train config: JSSL needs batch_size >= 2 (one proxy and one target sample)");
  if (cfg.target_oversample < 1) throw ConfigError("train config: target_oversample must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("train config: lr must be positive");
  if (cfg.decay_every == 0 || cfg.log_every == 0 || cfg.val_every == 0)
    throw ConfigError("train config: decay_every, log_every and val_every must be positive");
}

}  // namespace

BatchStream::BatchStream(const TrainConfig& cfg, const Dataset& data) : cfg_(cfg), data_(&data) {
  check_config(cfg);
  const auto proxy = data.manifest.select(Split::train, {Family::proxy_a, Family::proxy_b});
  const auto target = data.manifest.select(Split::train, {Family::target});
  std::vector<SampleRecord> target_os;
  for (const auto& r : target)
    for (std::size_t k = 0; k < cfg.target_oversample; ++k) target_os.push_back(r);
  auto join = [](std::vector<SampleRecord> a, const std::vector<SampleRecord>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const std::string name = setup_name(cfg.setup);
  auto need = [&](const std::vector<SampleRecord>& pool, const char* what) {
    if (pool.empty()) throw ConfigError("setup " + name + " needs " + what + " training samples");
  };
  switch (cfg.setup) {
    case Setup::ssl: need(target, "target"); ssl_ = target; break;
    case Setup::ssl_all: need(proxy, "proxy"); need(target, "target"); ssl_ = join(proxy, target_os); break;
    case Setup::sl: need(target, "target"); sup_ = target; break;
    case Setup::sl_all: need(proxy, "proxy"); need(target, "target"); sup_ = join(proxy, target_os); break;
    case Setup::sl_proxy: need(proxy, "proxy"); sup_ = proxy; break;
    case Setup::jssl: need(proxy, "proxy"); need(target, "target"); sup_ = proxy; ssl_ = target_os; break;
  }
  if (cfg.setup == Setup::jssl) {
    sup_per_batch_ = (cfg.batch_size + 1) / 2;
    ssl_per_batch_ = cfg.batch_size / 2;
  } else if (sup_.empty()) {
    ssl_per_batch_ = cfg.batch_size;
  } else {
    sup_per_batch_ = cfg.batch_size;
  }
}

const SampleRecord& BatchStream::pick(const std::vector<SampleRecord>& pool, std::uint64_t tag,
                                      std::uint64_t position) const {
  const std::size_t n = pool.size();
  const auto order = epoch_order(n, derive_seed(cfg_.seed, {tag}), position / n);
  return pool[order[position % n]];
}

SamplingMask BatchStream::draw_mask(const SampleRecord& r, std::uint64_t iter, std::uint64_t tag,
                                    std::size_t b) const {
  std::mt19937_64 rng(derive_seed(cfg_.seed, {iter, tag, b, 0}));
  const int R = cfg_.accelerations[std::uniform_int_distribution<std::size_t>(0, cfg_.accelerations.size() - 1)(rng)];
  const auto& cfgd = data_->manifest.config;
  return make_mask(family_scheme(r.family), cfgd.nx, cfgd.ny, R, acs_fraction_for(R, Phase::train),
                   derive_seed(cfg_.seed, {iter, tag, b, 3}));
}

Batch BatchStream::at(std::uint64_t iter) const {
  Batch batch;
  for (std::size_t b = 0; b < sup_per_batch_; ++b) {
    const auto& r = pick(sup_, kSupTag, iter * sup_per_batch_ + b);
    const Sample& s = data_->at(r.id);
    batch.proxy.push_back({r.id, s.kspace, s.gt, draw_mask(r, iter, kSupTag, b)});
    batch.ids.push_back(r.id);
  }
  for (std::size_t b = 0; b < ssl_per_batch_; ++b) {
    const auto& r = pick(ssl_, kSslTag, iter * ssl_per_batch_ + b);
    const Sample& s = data_->at(r.id);
    SamplingMask m = draw_mask(r, iter, kSslTag, b);
    PartitionSpec spec;
    spec.q = sample_partition_ratio(cfg_.ratio_mode, derive_seed(cfg_.seed, {iter, kSslTag, b, 1}));
    spec.sigma = cfg_.partition_sigma;
    spec.acs_window = cfg_.acs_window;
    spec.seed = derive_seed(cfg_.seed, {iter, kSslTag, b, 2});
    Partition p = gaussian_partition(m, spec);
    Tensor y = apply_mask(s.kspace, m.grid);
    batch.target.push_back({r.id, std::move(y), std::move(m), std::move(p.theta), std::move(p.lambda)});
    batch.ids.push_back(r.id);
  }
  return batch;
}

BatchStream build_batches(const TrainConfig& cfg, const Dataset& data) { return BatchStream(cfg, data); }

Variable batch_loss(Tape& tape, const Batch& batch, const ReconFn& model) {
  if (batch.target.empty()) return sl_loss(tape, batch.proxy, model);
  if (batch.proxy.empty()) return ssl_loss(tape, batch.target, model);
  return jssl_loss(tape, batch.proxy, batch.target, model);
}

void tune_allocator() {
#ifdef __GLIBC__
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

SamplingMask eval_mask(const Dataset& data, std::size_t index, int acceleration, std::uint64_t seed) {
  const auto& c = data.manifest.config;
  return make_mask(family_scheme(Family::target), c.nx, c.ny, acceleration,
                   acs_fraction_for(acceleration, Phase::inference),
                   derive_seed(seed, {0xE7A1, index, static_cast<std::uint64_t>(acceleration)}));
}

namespace {

struct EvalSlot {
  std::vector<EvalRecord> records;
  std::vector<Tensor> images;
};

EvalResult evaluate_with(const std::function<ReconFn()>& make_model, InferenceMode mode,
                         const std::string& setup_label, const Dataset& data, const EvalOptions& opts) {
  std::vector<SampleRecord> recs;
  std::set<std::string> seen;
  for (const auto& r : data.manifest.select(opts.split, {Family::target}))
    if (seen.insert(r.id).second) recs.push_back(r);
  if (opts.max_samples && recs.size() > opts.max_samples) recs.resize(opts.max_samples);
  for (const auto& r : recs)
    if (data.at(r.id).gt.ndim() != 2) throw ConfigError("sample " + r.id + " has no ground truth");

  std::vector<EvalSlot> slots(recs.size());
  auto run = [&](const ReconFn& model, std::size_t i) {
    const Sample& s = data.at(recs[i].id);
    for (int R : opts.accelerations) {
      const SamplingMask m = eval_mask(data, i, R, opts.seed);
      Tensor pred = infer(mode, apply_mask(s.kspace, m.grid), m, model);
      EvalRecord rec{recs[i].id, R, setup_label, ssim(pred, s.gt).item(), psnr(s.gt, pred),
                     nmse(s.gt, pred).item()};
      if (!std::isfinite(rec.ssim) || !std::isfinite(rec.nmse) || std::isnan(rec.psnr))
        throw NumericalError("non-finite metric for " + recs[i].id + " at R=" + std::to_string(R));
      slots[i].records.push_back(rec);
      if (i < opts.keep_images) slots[i].images.push_back(std::move(pred));
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(opts.threads, 1), std::max<std::size_t>(recs.size(), 1));
  if (workers == 1) {
    const ReconFn model = make_model();
    for (std::size_t i = 0; i < recs.size(); ++i) run(model, i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          const ReconFn model = make_model();
          for (std::size_t i; (i = next++) < recs.size();) run(model, i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = recs.size();
        }
      });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvalResult out;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    out.records.insert(out.records.end(), slots[i].records.begin(), slots[i].records.end());
    if (i < opts.keep_images) {
      out.ground_truth[recs[i].id] = data.at(recs[i].id).gt;
      for (std::size_t k = 0; k < opts.accelerations.size(); ++k)
        out.images[{recs[i].id, opts.accelerations[k]}] = slots[i].images[k];
    }
  }
  return out;
}

}  // namespace

EvalResult evaluate(const ReconFn& model, InferenceMode mode, const std::string& setup_label,
                    const Dataset& data, const EvalOptions& opts) {
  EvalOptions serial = opts;
  serial.threads = 1;
  return evaluate_with([&] { return model; }, mode, setup_label, data, serial);
}

EvalResult evaluate(const Checkpoint& ck, Setup setup, const Dataset& data, const EvalOptions& opts) {
  // Models cache per-tape bindings, so each worker owns one.
  std::mutex mu;
  std::vector<std::unique_ptr<Model>> models;
  auto make = [&]() -> ReconFn {
    std::lock_guard<std::mutex> lock(mu);
    models.push_back(std::make_unique<Model>(ck.cfg, ck.params));
    return models.back()->recon_fn();
  };
  return evaluate_with(make, inference_mode(setup), setup_name(setup), data, opts);
}

ReconFn zero_filled_model() {
  return [](Tape& tape, const Tensor& kspace, const SamplingMask& mask) {
    const Variable maps = tape.constant(estimate_sensitivities(kspace, mask));
    return ReconOutput{adjoint_operator(tape.constant(kspace), mask.grid, maps), maps};
  };
}

double validation_ssim(const TrainConfig& cfg, const Dataset& data, const ReconFn& model) {
  EvalOptions o;
  o.split = Split::val;
  o.accelerations = cfg.accelerations;
  o.seed = derive_seed(cfg.seed, {0xA1});
  o.max_samples = cfg.val_samples;
  const auto res = evaluate(model, inference_mode(cfg.setup), setup_name(cfg.setup), data, o);
  if (res.records.empty()) throw ConfigError("no validation samples");
  double s = 0.0;
  for (const auto& r : res.records) s += r.ssim;
  return s / static_cast<double>(res.records.size());
}

namespace {

Checkpoint snapshot(const TrainConfig& cfg, const Model& model, const AdamState& st, double best_val,
                    std::uint64_t best_iter) {
  Checkpoint ck;
  ck.cfg = model.config();
  ck.params = model.params();
  ck.adam_m = st.m;
  ck.adam_v = st.v;
  ck.step = st.step;
  nlohmann::json meta{{"setup", setup_name(cfg.setup)},
                      {"train_config", nlohmann::json::parse(train_config_to_json(cfg))},
                      {"best_val_ssim", best_val},
                      {"best_iter", best_iter}};
  ck.meta_json = meta.dump();
  return ck;
}

std::string log_json(const TrainResult& r) {
  nlohmann::json j;
  j["log"] = nlohmann::json::array();
  for (const auto& e : r.log) j["log"].push_back({{"iter", e.iter}, {"loss", e.loss}, {"lr", e.lr}});
  j["validation"] = nlohmann::json::array();
  for (const auto& e : r.validation) j["validation"].push_back({{"iter", e.iter}, {"ssim", e.ssim}});
  j["best_val_ssim"] = r.best_val_ssim;
  j["best_iter"] = r.best_iter;
  return j.dump(2) + "\n";
}

}  // namespace

ParamMap initial_params(const TrainConfig& cfg) {
  return init_params(cfg.model, derive_seed(cfg.seed, {0x1417}));
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& opts) {
  tune_allocator();
  check_config(cfg);
  const BatchStream stream(cfg, data);
  const bool has_val = !data.manifest.select(Split::val, {Family::target}).empty();
  TrainResult res;
  Model model(cfg.model, opts.resume ? opts.resume->params : initial_params(cfg));
  AdamState st = adam_init(model.params());
  if (opts.resume) {
    if (config_to_json(opts.resume->cfg) != config_to_json(cfg.model))
      throw ConfigError("resume checkpoint was trained with a different model config");
    st.m = opts.resume->adam_m;
    st.v = opts.resume->adam_v;
    st.step = opts.resume->step;
    const auto meta = nlohmann::json::parse(opts.resume->meta_json);
    res.best_val_ssim = meta.value("best_val_ssim", -1.0);
    res.best_iter = meta.value("best_iter", std::uint64_t{0});
    if (opts.out_dir && std::filesystem::exists(*opts.out_dir / "best" / "manifest.json"))
      res.best = load_checkpoint(*opts.out_dir / "best");
  }
  for (std::uint64_t iter = st.step; iter < cfg.max_iters; ++iter) {
    const double lr = lr_at(iter, cfg.lr, cfg.lr_decay, cfg.decay_every);
    Tape tape;
    double value;
    ParamMap grads;
    try {
      const Variable loss = batch_loss(tape, stream.at(iter), model.recon_fn());
      value = loss.value().item();
      if (!std::isfinite(value)) throw NumericalError("non-finite loss");
      const Gradients g = tape.backward(loss);
      for (const auto& [name, v] : model.bind(tape)) grads.emplace(name, g[v]);
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged at iteration " + std::to_string(iter) + ": " + e.what());
    }
    adam_step(model.params(), grads, st, lr, cfg.adam);
    const bool last = iter + 1 == cfg.max_iters;
    if (iter % cfg.log_every == 0 || last) {
      res.log.push_back({iter, value, lr});
      if (opts.on_log) opts.on_log(res.log.back());
    }
    if (has_val && ((iter + 1) % cfg.val_every == 0 || last)) {
      const double v = validation_ssim(cfg, data, model.recon_fn());
      res.validation.push_back({iter + 1, v});
      if (v > res.best_val_ssim) {
        res.best_val_ssim = v;
        res.best_iter = iter + 1;
        res.best = snapshot(cfg, model, st, res.best_val_ssim, res.best_iter);
        if (opts.out_dir) save_checkpoint(*opts.out_dir / "best", res.best);
      }
    }
  }
  res.last = snapshot(cfg, model, st, res.best_val_ssim, res.best_iter);
  if (!has_val || res.best.params.empty()) {
    res.best = res.last;
    if (opts.out_dir) save_checkpoint(*opts.out_dir / "best", res.best);
  }
  if (opts.out_dir) {
    save_checkpoint(*opts.out_dir / "last", res.last);
    write_text(*opts.out_dir / "train_log.json", log_json(res));
  }
  return res;
}

std::string records_to_csv(const std::vector<EvalRecord>& records) {
  std::ostringstream os;
  os << "id,R,setup,ssim,psnr,nmse\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%d,%s,%.17g,%.17g,%.17g\n", r.id.c_str(), r.acceleration, r.setup.c_str(),
                  r.ssim, r.psnr, r.nmse);
    os << buf;
  }
  return os.str();
}

std::vector<EvalRecord> records_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "id,R,setup,ssim,psnr,nmse")
    throw IoError("records CSV: unexpected header");
  std::vector<EvalRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw IoError("records CSV: bad row '" + line + "'");
    try {
      out.push_back({f[0], std::stoi(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
    } catch (const std::exception&) {
      throw IoError("records CSV: bad row '" + line + "'");
    }
  }
  return out;
}

}  // namespace jssl
