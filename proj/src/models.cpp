#include "jssl/models.hpp"

#include <cmath>
#include <random>

#include "json.hpp"
#include "jssl/error.hpp"
#include "jssl/mri_ops.hpp"
#include "jssl/rng.hpp"
#include "jssl/tnsr_io.hpp"

namespace jssl {

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::vsharp: return "vsharp";
    case ModelKind::image_refiner: return "image_refiner";
    case ModelKind::kspace_gd: return "kspace_gd";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "vsharp") return ModelKind::vsharp;
  if (s == "image_refiner" || s == "image-refiner") return ModelKind::image_refiner;
  if (s == "kspace_gd" || s == "kspace-gd") return ModelKind::kspace_gd;
  throw ConfigError("unknown model kind '" + s + "'");
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j{{"kind", model_kind_name(c.kind)}, {"T", c.T},
                   {"T_x", c.T_x}, {"channels", c.channels},
                   {"depth", c.depth}, {"sme_channels", c.sme_channels},
                   {"use_sme", c.use_sme}, {"mu_init", c.mu_init},
                   {"eta_init", c.eta_init}, {"kgd_eta_init", c.kgd_eta_init}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.kind = parse_model_kind(j.at("kind").get<std::string>());
    c.T = j.at("T").get<std::size_t>();
    c.T_x = j.at("T_x").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.sme_channels = j.at("sme_channels").get<std::size_t>();
    c.use_sme = j.at("use_sme").get<bool>();
    c.mu_init = j.at("mu_init").get<double>();
    c.eta_init = j.at("eta_init").get<double>();
    c.kgd_eta_init = j.at("kgd_eta_init").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

namespace {

void add_conv_stack(ParamMap& p, const std::string& prefix, std::size_t cin, std::size_t hidden,
                    std::size_t cout, std::size_t layers, bool zero_last, std::mt19937_64& rng) {
  std::size_t in = cin;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool last = l + 1 == layers;
    const std::size_t out = last ? cout : hidden;
    Tensor w({out, in, 3, 3});
    if (!(last && zero_last)) {
      std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(in * 9)));
      for (auto& v : w.data()) v = n(rng);
    }
    p[prefix + ".w" + std::to_string(l)] = std::move(w);
    p[prefix + ".b" + std::to_string(l)] = Tensor({out});
    in = out;
  }
}

double logit(double p) { return std::log(p / (1.0 - p)); }

const Variable& get(const BoundParams& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ConfigError("missing model parameter '" + name + "'");
  return it->second;
}

void require_finite(const Variable& v, const std::string& what) {
  if (!v.value().all_finite()) throw NumericalError("non-finite values in " + what);
}

}  // namespace

ParamMap init_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.T < 1 || cfg.T_x < 1) throw ConfigError("model config: T and T_x must be >= 1");
  if (cfg.depth < 1 || cfg.channels < 1) throw ConfigError("model config: depth and channels must be >= 1");
  if (!(cfg.mu_init > 0.0)) throw ConfigError("model config: mu_init must be positive");
  const double frac = cfg.eta_init * (1.0 + cfg.mu_init) / 2.0;
  if (!(frac > 0.0 && frac < 1.0)) throw ConfigError("model config: eta_init outside (0, 2 / (1 + mu_init))");
  std::mt19937_64 rng(derive_seed(seed, {0x5eed}));
  ParamMap p;
  if (cfg.use_sme) add_conv_stack(p, "sme", 2, cfg.sme_channels, 2, 2, true, rng);
  switch (cfg.kind) {
    case ModelKind::vsharp:
      p["u0.w"] = Tensor({2, 2, 3, 3});
      p["u0.b"] = Tensor({2});
      for (std::size_t t = 0; t < cfg.T; ++t) {
        add_conv_stack(p, "den" + std::to_string(t), 6, cfg.channels, 2, cfg.depth, true, rng);
        p["mu" + std::to_string(t)] = Tensor({1}, std::log(cfg.mu_init));
        for (std::size_t k = 0; k < cfg.T_x; ++k)
          p["eta" + std::to_string(t) + "_" + std::to_string(k)] = Tensor({1}, logit(frac));
      }
      break;
    case ModelKind::image_refiner:
      add_conv_stack(p, "ref", 2, cfg.channels, 2, cfg.depth, true, rng);
      break;
    case ModelKind::kspace_gd:
      for (std::size_t t = 0; t < cfg.T; ++t) {
        add_conv_stack(p, "kgd" + std::to_string(t), 2, cfg.channels, 2, cfg.depth, true, rng);
        p["kgd" + std::to_string(t) + ".eta"] = Tensor({1}, cfg.kgd_eta_init);
      }
      break;
  }
  return p;
}

std::size_t param_count(const ParamMap& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

BoundParams bind_params(Tape& tape, const ParamMap& params, bool trainable) {
  BoundParams out;
  for (const auto& [name, t] : params) out.emplace(name, tape.leaf(t, trainable));
  return out;
}

Tensor estimate_sensitivities(const Tensor& kspace, const SamplingMask& mask) {
  check_kspace("estimate_sensitivities", kspace);
  check_mask("estimate_sensitivities", kspace, mask.grid);
  Tensor band = acs_band(mask);
  bool any = false;
  for (std::size_t k = 0; k < band.size(); ++k) {
    band[k] *= mask.grid[k];
    any = any || band[k] != 0.0;
  }
  if (!any) throw ConfigError("estimate_sensitivities: mask has no ACS samples");
  Tensor coils = ifft2c(mask_apply(kspace, band));
  const std::size_t nc = coils.dim(0), plane = mask.grid.size();
  std::vector<double> rss(plane, 0.0);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      const double re = coils[2 * (c * plane + p)], im = coils[2 * (c * plane + p) + 1];
      rss[p] += re * re + im * im;
    }
  double peak = 0.0;
  for (auto& r : rss) {
    r = std::sqrt(r);
    peak = std::max(peak, r);
  }
  Tensor maps(coils.shape());
  if (peak == 0.0) return maps;
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      if (rss[p] <= 1e-12 * peak) continue;
      maps[2 * (c * plane + p)] = coils[2 * (c * plane + p)] / rss[p];
      maps[2 * (c * plane + p) + 1] = coils[2 * (c * plane + p) + 1] / rss[p];
    }
  return maps;
}

Variable to_channels(const Variable& x) { return permute(x, {2, 0, 1}); }
Variable from_channels(const Variable& x) { return permute(x, {1, 2, 0}); }

Variable conv_stack(const Variable& in, const BoundParams& p, const std::string& prefix,
                    std::size_t layers) {
  Variable h = in;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = get(p, prefix + ".w" + std::to_string(l));
    const auto& b = get(p, prefix + ".b" + std::to_string(l));
    h = conv2d(pad(h, 1, PadMode::zero), w, &b);
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

Variable sme_refine(const Variable& initial, const BoundParams& p, const ModelConfig& cfg) {
  (void)cfg;
  const Tensor& s0 = initial.value();
  check_kspace("sme_refine", s0);
  const std::size_t nc = s0.dim(0), nx = s0.dim(1), ny = s0.dim(2);
  std::vector<Variable> coils;
  coils.reserve(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const Variable img = to_channels(reshape(slice(initial, 0, c, 1), {nx, ny, 2}));
    const Variable out = img + conv_stack(img, p, "sme", 2);
    coils.push_back(reshape(from_channels(out), {1, nx, ny, 2}));
  }
  const Variable s = concat(coils, 0);
  const Variable energy = sum_axis(sum_axis(square(s), 3), 0);
  const Variable norm = sqrt(energy + 1e-12);
  return s / broadcast_axis(broadcast_axis(norm, 0, nc), 3, 2);
}

Variable vsharp_step_size(const Variable& raw, const Variable& mu) {
  return sigmoid(raw) * 2.0 / (mu + 1.0);
}

namespace {

double x_objective_value(const Tensor& x, const Tensor& z, const Tensor& u, double mu, const Tensor& y,
                         const Tensor& grid, const Tensor& s) {
  const Tensor r = forward_operator(x, grid, s) - y;
  const Tensor d = x - z + u * (1.0 / mu);
  return 0.5 * dot(r, r) + 0.5 * mu * dot(d, d);
}

}  // namespace

Variable vsharp_forward(const Variable& kspace, const Tensor& grid, const Variable& maps,
                        const BoundParams& p, const ModelConfig& cfg,
                        std::vector<std::vector<double>>* x_objective) {
  if (cfg.T < 1 || cfg.T_x < 1) throw ConfigError("vsharp: T and T_x must be >= 1");
  const Variable x0 = adjoint_operator(kspace, grid, maps);
  Variable x = x0, z = x0;
  const auto& uw = get(p, "u0.w");
  const auto& ub = get(p, "u0.b");
  Variable u = from_channels(conv2d(pad(to_channels(x0), 2, PadMode::replicate), uw, &ub, 2));
  if (x_objective) x_objective->clear();
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const std::string ts = std::to_string(t);
    const Variable& log_mu = get(p, "mu" + ts);
    const Variable mu = exp(log_mu);
    const Variable inv_mu = exp(log_mu * -1.0);
    std::vector<Variable> parts{to_channels(z), to_channels(x), to_channels(scale(u, inv_mu))};
    z = z + from_channels(conv_stack(concat(parts, 0), p, "den" + ts, cfg.depth));
    std::vector<double>* trace = nullptr;
    if (x_objective) {
      x_objective->emplace_back();
      trace = &x_objective->back();
      trace->push_back(x_objective_value(x.value(), z.value(), u.value(), mu.value().item(),
                                         kspace.value(), grid, maps.value()));
    }
    for (std::size_t k = 0; k < cfg.T_x; ++k) {
      const Variable resid = forward_operator(x, grid, maps) - kspace;
      const Variable g = adjoint_operator(resid, grid, maps) + scale(x - z, mu) + u;
      const Variable eta = vsharp_step_size(get(p, "eta" + ts + "_" + std::to_string(k)), mu);
      x = x - scale(g, eta);
      if (trace)
        trace->push_back(x_objective_value(x.value(), z.value(), u.value(), mu.value().item(),
                                           kspace.value(), grid, maps.value()));
    }
    u = u + scale(x - z, mu);
    require_finite(x, "vsharp iteration " + ts);
  }
  return x;
}

Variable image_refiner_forward(const Variable& x_tilde, const BoundParams& p, const ModelConfig& cfg) {
  const Variable out = x_tilde + from_channels(conv_stack(to_channels(x_tilde), p, "ref", cfg.depth));
  require_finite(out, "image refiner output");
  return out;
}

Variable kspace_gd_forward(const Variable& kspace, const Tensor& grid, const Variable& maps,
                           const BoundParams& p, const ModelConfig& cfg) {
  if (cfg.T < 1) throw ConfigError("kspace_gd: T must be >= 1");
  Variable y = kspace;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const std::string ts = "kgd" + std::to_string(t);
    const Variable img = reduce_coils(ifft2c(y), maps);
    const Variable cnn = from_channels(conv_stack(to_channels(img), p, ts, cfg.depth));
    y = y - scale(apply_mask(y - kspace, grid), get(p, ts + ".eta")) + fft2c(expand_coils(cnn, maps));
    require_finite(y, "kspace_gd iteration " + std::to_string(t));
  }
  return reduce_coils(ifft2c(y), maps);
}

ReconOutput model_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg,
                          const Tensor& kspace, const SamplingMask& mask) {
  check_mask("model_forward", kspace, mask.grid);
  Variable maps = tape.constant(estimate_sensitivities(kspace, mask));
  if (cfg.use_sme) maps = sme_refine(maps, p, cfg);
  const Variable y = tape.constant(kspace);
  Variable image;
  switch (cfg.kind) {
    case ModelKind::vsharp: image = vsharp_forward(y, mask.grid, maps, p, cfg); break;
    case ModelKind::image_refiner:
      image = image_refiner_forward(adjoint_operator(y, mask.grid, maps), p, cfg);
      break;
    case ModelKind::kspace_gd: image = kspace_gd_forward(y, mask.grid, maps, p, cfg); break;
  }
  return {image, maps};
}

Model::Model(ModelConfig cfg, ParamMap params) : cfg_(std::move(cfg)), params_(std::move(params)) {}

const BoundParams& Model::bind(Tape& tape) {
  if (bound_tape_ != tape.uid()) {
    bound_ = bind_params(tape, params_);
    bound_tape_ = tape.uid();
  }
  return bound_;
}

ReconFn Model::recon_fn() {
  return [this](Tape& tape, const Tensor& kspace, const SamplingMask& mask) {
    return model_forward(tape, bind(tape), cfg_, kspace, mask);
  };
}

Tensor infer(InferenceMode mode, const Tensor& kspace, const SamplingMask& mask, const ReconFn& model) {
  Tape tape;
  const ReconOutput out = model(tape, kspace, mask);
  switch (mode) {
    case InferenceMode::sl:
    case InferenceMode::jssl: return complex_abs(out.image.value());
    case InferenceMode::ssl: {
      const Tensor& s = out.maps.value();
      const Tensor k = dc_operator(kspace, fft2c(expand_coils(out.image.value(), s)), mask.grid);
      return complex_abs(reduce_coils(ifft2c(k), s));
    }
  }
  throw ConfigError("infer: unknown mode");
}

namespace {

nlohmann::json write_group(const std::filesystem::path& dir, const std::string& group, const ParamMap& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, t] : m) {
    const std::string file = group + "/" + name + ".tnsr";
    write_tensor(dir / file, t);
    arr.push_back({{"name", name}, {"shape", t.shape()}, {"file", file}});
  }
  return arr;
}

ParamMap read_group(const std::filesystem::path& dir, const nlohmann::json& arr) {
  ParamMap m;
  for (const auto& e : arr) {
    Tensor t = read_tensor(dir / e.at("file").get<std::string>());
    if (t.shape() != e.at("shape").get<Shape>())
      throw IoError((dir / e.at("file").get<std::string>()).string() + ": shape disagrees with manifest");
    m.emplace(e.at("name").get<std::string>(), std::move(t));
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["model_kind"] = model_kind_name(ck.cfg.kind);
  j["cfg"] = nlohmann::json::parse(config_to_json(ck.cfg));
  j["params"] = write_group(dir, "params", ck.params);
  j["adam_m"] = write_group(dir, "adam_m", ck.adam_m);
  j["adam_v"] = write_group(dir, "adam_v", ck.adam_v);
  j["step"] = ck.step;
  j["param_count"] = param_count(ck.params);
  j["meta"] = nlohmann::json::parse(ck.meta_json);
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    ck.cfg = config_from_json(j.at("cfg").dump());
    ck.params = read_group(dir, j.at("params"));
    ck.adam_m = read_group(dir, j.at("adam_m"));
    ck.adam_v = read_group(dir, j.at("adam_v"));
    ck.step = j.at("step").get<std::uint64_t>();
    ck.meta_json = j.at("meta").dump();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace jssl
