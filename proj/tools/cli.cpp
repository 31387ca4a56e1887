#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "jssl/error.hpp"
#include "jssl/report.hpp"
#include "jssl/sampling.hpp"
#include "jssl/stats.hpp"
#include "jssl/synth.hpp"
#include "jssl/theory.hpp"
#include "jssl/tnsr_io.hpp"
#include "jssl/trainer.hpp"

namespace jssl {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--config", c.config, "JSON file of flag values (keys are flag names)");
}

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError("config values must be scalars or arrays of scalars");
}

// Fills options that were not given on the command line from the JSON file.
void apply_config(CLI::App* sub, const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = name == "config" || name == "help" ? nullptr : sub->get_option_no_throw("--" + name);
    if (!opt) throw ConfigError(path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_array())
      for (const auto& v : value) opt->add_result(scalar_text(v));
    else
      opt->add_result(scalar_text(value));
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(path + ": " + key + ": " + e.what());
    }
  }
}

std::string data_root(const std::string& flag, const char* what) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("JSSL_DATA_DIR"); env && *env) return env;
  throw ConfigError(std::string("missing ") + what + " (or set JSSL_DATA_DIR)");
}

std::string need(const std::string& v, const char* flag) {
  if (v.empty()) throw ConfigError(std::string("missing ") + flag);
  return v;
}

// ---- synth

struct SynthArgs {
  Common c;
  std::string out;
  std::size_t nx = 64, ny = 64, coils = 4;
  double noise = 0.0;
  std::size_t proxy_a = 200, proxy_b = 200, target_train = 100, target_val = 30, target_test = 30;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* s = app.add_subcommand("synth", "Write a synthetic multi-coil dataset");
  s->add_option("--out", a.out, "Dataset root (default: $JSSL_DATA_DIR)");
  s->add_option("--nx", a.nx, "Rows")->capture_default_str();
  s->add_option("--ny", a.ny, "Columns (phase encodes)")->capture_default_str();
  s->add_option("--coils", a.coils, "Receiver coils")->capture_default_str();
  s->add_option("--noise", a.noise, "Complex k-space noise sigma")->capture_default_str();
  s->add_option("--proxy-a", a.proxy_a, "proxy_a training samples")->capture_default_str();
  s->add_option("--proxy-b", a.proxy_b, "proxy_b training samples")->capture_default_str();
  s->add_option("--target-train", a.target_train, "target training samples")->capture_default_str();
  s->add_option("--target-val", a.target_val, "target validation samples")->capture_default_str();
  s->add_option("--target-test", a.target_test, "target test samples")->capture_default_str();
  add_common(s, a.c);
}

void run_synth(const SynthArgs& a, std::ostream& out) {
  DatasetConfig cfg;
  cfg.nx = a.nx;
  cfg.ny = a.ny;
  cfg.n_coils = a.coils;
  cfg.noise_sigma = a.noise;
  cfg.seed = a.c.seed;
  auto put = [&](Family f, Split s, std::size_t n) {
    if (n > 0) cfg.counts[f][s] = n;
  };
  put(Family::proxy_a, Split::train, a.proxy_a);
  put(Family::proxy_b, Split::train, a.proxy_b);
  put(Family::target, Split::train, a.target_train);
  put(Family::target, Split::val, a.target_val);
  put(Family::target, Split::test, a.target_test);
  const fs::path root = data_root(a.out, "--out");
  const DatasetManifest m = build_dataset(cfg, root);
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& r : m.records) ++counts[{family_name(r.family), split_name(r.split)}];
  out << "wrote " << m.records.size() << " samples (" << cfg.nx << "x" << cfg.ny << ", " << cfg.n_coils
      << " coils) to " << root.string() << "\n";
  for (const auto& [key, n] : counts) out << "  " << key.first << " " << key.second << " " << n << "\n";
}

// ---- mask / partition

struct MaskArgs {
  Common c;
  std::string scheme = "equispaced";
  double r = 4.0;
  std::size_t nx = 64, ny = 64;
  double acs = -1.0;
  std::string phase = "train";
  std::string out;
};

void add_mask_flags(CLI::App* s, MaskArgs& a) {
  s->add_option("--scheme", a.scheme, "equispaced | random")->capture_default_str();
  s->add_option("--r", a.r, "Acceleration factor")->capture_default_str();
  s->add_option("--nx", a.nx, "Rows")->capture_default_str();
  s->add_option("--ny", a.ny, "Columns (phase encodes)")->capture_default_str();
  s->add_option("--acs", a.acs, "ACS fraction (default: schedule for --r)");
  s->add_option("--phase", a.phase, "train | inference (selects the ACS schedule)")->capture_default_str();
  s->add_option("--out", a.out, "Output directory for tensors and previews");
  add_common(s, a.c);
}

SamplingMask build_mask(const MaskArgs& a) {
  if (a.phase != "train" && a.phase != "inference") throw ConfigError("--phase must be train or inference");
  double acs = a.acs;
  if (acs < 0.0) {
    const int R = static_cast<int>(a.r);
    if (static_cast<double>(R) != a.r) throw ConfigError("--acs is required for non-integer --r");
    acs = acs_fraction_for(R, a.phase == "train" ? Phase::train : Phase::inference);
  }
  return make_mask(parse_scheme(a.scheme), a.nx, a.ny, a.r, acs, a.c.seed);
}

void print_mask(const SamplingMask& m, std::ostream& out) {
  out << "scheme " << m.scheme << ", R " << *m.acceleration << ", acs_fraction " << *m.acs_fraction << "\n";
  out << "sampled columns " << m.sampled_columns() << " / " << m.ny() << "\n";
  out << "acs columns " << acs_column_count(m.ny(), *m.acs_fraction) << "\n";
  out << "sampled entries " << m.count() << " / " << m.grid.size() << "\n";
}

void run_mask(const MaskArgs& a, std::ostream& out) {
  const SamplingMask m = build_mask(a);
  print_mask(m, out);
  if (!a.out.empty()) {
    save_mask(fs::path(a.out) / "mask.tnsr", m);
    write_mask_pgm(fs::path(a.out) / "mask.pgm", m.grid);
  }
}

struct PartitionArgs {
  MaskArgs mask;
  double q = 0.5;
  double sigma = 3.5;
  std::size_t window = 4;
};

void run_partition(const PartitionArgs& a, std::ostream& out) {
  const SamplingMask m = build_mask(a.mask);
  PartitionSpec spec;
  spec.q = a.q;
  spec.sigma = a.sigma;
  spec.acs_window = a.window;
  spec.seed = a.mask.c.seed;
  const Partition p = gaussian_partition(m, spec);
  print_mask(m, out);
  const double total = static_cast<double>(m.count());
  out << "theta " << p.theta.count() << ", lambda " << p.lambda.count() << "\n";
  out << "ratio before window " << p.ratio_before_window << " (bound [" << a.q << ", " << a.q + 1.0 / total
      << "])\n";
  out << "final ratio " << static_cast<double>(p.theta.count()) / total << "\n";
  out << "draws " << p.draws << (p.used_fallback ? " (fallback)" : "") << "\n";
  if (!a.mask.out.empty()) {
    const fs::path d = a.mask.out;
    save_mask(d / "mask.tnsr", m);
    save_mask(d / "theta.tnsr", p.theta);
    save_mask(d / "lambda.tnsr", p.lambda);
    write_mask_pgm(d / "mask.pgm", m.grid);
    write_mask_pgm(d / "theta.pgm", p.theta.grid);
    write_mask_pgm(d / "lambda.pgm", p.lambda.grid);
  }
}

// ---- train

struct TrainArgs {
  Common c;
  std::string data, out, resume;
  std::string setup = "jssl";
  std::string model = "vsharp";
  TrainConfig cfg;
  std::string ratio_mode = "range";
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* s = app.add_subcommand("train", "Train one setup and write best/last checkpoints");
  TrainConfig& c = a.cfg;
  s->add_option("--data", a.data, "Dataset root (default: $JSSL_DATA_DIR)");
  s->add_option("--out", a.out, "Run directory")->capture_default_str();
  s->add_option("--setup", a.setup, "jssl | ssl | ssl-all | sl | sl-all | sl-proxy")->capture_default_str();
  s->add_option("--resume", a.resume, "Checkpoint directory to continue from");
  s->add_option("--model", a.model, "vsharp | image_refiner | kspace_gd")->capture_default_str();
  s->add_option("--T", c.model.T, "Outer iterations")->capture_default_str();
  s->add_option("--Tx", c.model.T_x, "Inner x-step iterations")->capture_default_str();
  s->add_option("--channels", c.model.channels, "Denoiser channels")->capture_default_str();
  s->add_option("--depth", c.model.depth, "Conv layers per denoiser")->capture_default_str();
  s->add_option("--sme-channels", c.model.sme_channels, "SME channels")->capture_default_str();
  s->add_option("--r", c.accelerations, "Training accelerations")->delimiter(',')->capture_default_str();
  s->add_option("--ratio-mode", a.ratio_mode, "range | fixed")->capture_default_str();
  s->add_option("--partition-sigma", c.partition_sigma, "Partition Gaussian std")->capture_default_str();
  s->add_option("--acs-window", c.acs_window, "ACS window kept in lambda")->capture_default_str();
  s->add_option("--target-oversample", c.target_oversample, "Target replication in pooled setups")
      ->capture_default_str();
  s->add_option("--lr", c.lr, "Initial learning rate")->capture_default_str();
  s->add_option("--beta1", c.adam.beta1, "Adam beta1")->capture_default_str();
  s->add_option("--beta2", c.adam.beta2, "Adam beta2")->capture_default_str();
  s->add_option("--lr-decay", c.lr_decay, "Step decay factor")->capture_default_str();
  s->add_option("--decay-every", c.decay_every, "Iterations between decays")->capture_default_str();
  s->add_option("--batch", c.batch_size, "Batch size")->capture_default_str();
  s->add_option("--iters", c.max_iters, "Training iterations")->capture_default_str();
  s->add_option("--log-every", c.log_every, "Logging interval")->capture_default_str();
  s->add_option("--val-every", c.val_every, "Validation interval")->capture_default_str();
  s->add_option("--val-samples", c.val_samples, "Validation samples (0 = all)")->capture_default_str();
  add_common(s, a.c);
}

int run_train(TrainArgs& a, std::ostream& out) {
  TrainConfig c = a.cfg;
  c.setup = parse_setup(a.setup);
  c.model.kind = parse_model_kind(a.model);
  if (a.ratio_mode != "range" && a.ratio_mode != "fixed") throw ConfigError("--ratio-mode must be range or fixed");
  c.ratio_mode = a.ratio_mode == "range" ? RatioMode::range : RatioMode::fixed;
  c.seed = a.c.seed;
  const fs::path out_dir = need(a.out, "--out");
  const Dataset data = load_dataset(data_root(a.data, "--data"));
  TrainOptions opts;
  opts.out_dir = out_dir;
  if (!a.resume.empty()) opts.resume = load_checkpoint(a.resume);
  opts.on_log = [&out](const LogEntry& e) {
    out << "iter " << e.iter << " loss " << std::setprecision(6) << e.loss << " lr " << e.lr << "\n";
  };
  write_text(out_dir / "train_config.json", train_config_to_json(c) + "\n");
  const TrainResult r = train(c, data, opts);
  out << "best validation SSIM " << r.best_val_ssim << " at iteration " << r.best_iter << "\n";
  return exit_ok;
}

// ---- eval

struct EvalArgs {
  Common c;
  std::string data, checkpoint, setup, out;
  bool zero_filled = false;
  std::string split = "test";
  std::vector<int> rs{4, 8};
  std::size_t max_samples = 0, keep_images = 3;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* s = app.add_subcommand("eval", "Evaluate a checkpoint on target samples");
  s->add_option("--data", a.data, "Dataset root (default: $JSSL_DATA_DIR)");
  s->add_option("--checkpoint", a.checkpoint, "Checkpoint directory");
  s->add_flag("--zero-filled", a.zero_filled, "Evaluate the untrained zero-filled baseline instead");
  s->add_option("--setup", a.setup, "Inference setup (default: the checkpoint's)");
  s->add_option("--split", a.split, "train | val | test")->capture_default_str();
  s->add_option("--r", a.rs, "Accelerations")->delimiter(',')->capture_default_str();
  s->add_option("--max-samples", a.max_samples, "Limit on samples (0 = all)")->capture_default_str();
  s->add_option("--keep-images", a.keep_images, "Reconstructions kept for the report")->capture_default_str();
  s->add_option("--out", a.out, "Output directory");
  add_common(s, a.c);
}

void write_eval_dir(const fs::path& dir, const EvalResult& r) {
  write_text(dir / "records.csv", records_to_csv(r.records));
  for (const auto& [key, img] : r.images)
    write_tensor(dir / "images" / (key.first + "_R" + std::to_string(key.second) + ".tnsr"), img);
  for (const auto& [id, img] : r.ground_truth) write_tensor(dir / "gt" / (id + ".tnsr"), img);
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path out_dir = need(a.out, "--out");
  const Dataset data = load_dataset(data_root(a.data, "--data"));
  EvalOptions o;
  o.split = parse_split(a.split);
  o.accelerations = a.rs;
  o.seed = a.c.seed;
  o.max_samples = a.max_samples;
  o.keep_images = a.keep_images;
  o.threads = a.c.threads;
  EvalResult r;
  if (a.zero_filled) {
    if (!a.checkpoint.empty()) throw ConfigError("--zero-filled takes no --checkpoint");
    r = evaluate(zero_filled_model(), InferenceMode::sl, a.setup.empty() ? "ZF" : a.setup, data, o);
  } else {
    const Checkpoint ck = load_checkpoint(need(a.checkpoint, "--checkpoint"));
    std::string setup = a.setup;
    if (setup.empty()) {
      const auto meta = nlohmann::json::parse(ck.meta_json);
      if (!meta.contains("train_config")) throw ConfigError("checkpoint has no setup; pass --setup");
      setup = meta["train_config"].value("setup", "");
    }
    r = evaluate(ck, parse_setup(setup), data, o);
  }
  write_eval_dir(out_dir, r);
  out << "evaluated " << r.records.size() << " records\n" << summary_table(summarize(r.records));
  return exit_ok;
}

// ---- report

struct ReportArgs {
  Common c;
  std::vector<std::string> in;
  std::string out;
};

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".tnsr") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

void load_eval_dir(const fs::path& dir, std::map<std::string, EvalResult>& results) {
  const auto records = records_from_csv(read_text(dir / "records.csv"));
  std::set<std::string> setups;
  for (const auto& r : records) setups.insert(r.setup);
  if (setups.size() != 1) throw ConfigError(dir.string() + ": expected records of exactly one setup");
  const std::string setup = *setups.begin();
  if (results.count(setup)) throw ConfigError("setup " + setup + " given twice");
  EvalResult& res = results[setup];
  res.records = records;
  for (const auto& f : sorted_files(dir / "images")) {
    const std::string stem = f.stem().string();
    const auto pos = stem.rfind("_R");
    if (pos == std::string::npos) throw IoError(f.string() + ": unexpected image name");
    res.images[{stem.substr(0, pos), std::stoi(stem.substr(pos + 2))}] = read_tensor(f);
  }
  for (const auto& f : sorted_files(dir / "gt")) res.ground_truth[f.stem().string()] = read_tensor(f);
}

std::vector<EvalRecord> at_r(const std::vector<EvalRecord>& recs, int R) {
  std::vector<EvalRecord> out;
  for (const auto& r : recs)
    if (r.acceleration == R) out.push_back(r);
  return out;
}

int run_report(const ReportArgs& a, std::ostream& out) {
  if (a.in.empty()) throw ConfigError("missing --in");
  const fs::path out_dir = need(a.out, "--out");
  std::map<std::string, EvalResult> results;
  for (const auto& d : a.in) load_eval_dir(d, results);
  write_report(out_dir, results);
  const auto rows = summarize([&] {
    std::vector<EvalRecord> all;
    for (const auto& [s, r] : results) all.insert(all.end(), r.records.begin(), r.records.end());
    return all;
  }());
  out << summary_table(rows);
  // Paired tests for every pair of setups, in summary order.
  std::vector<std::string> order;
  std::set<int> rs;
  for (const auto& row : rows) {
    if (std::find(order.begin(), order.end(), row.setup) == order.end()) order.push_back(row.setup);
    rs.insert(row.acceleration);
  }
  std::ostringstream csv;
  csv << "a,b,R,metric,n,mean_diff,t_p_value,w_statistic,w_p_value\n";
  csv << std::setprecision(17);
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j)
      for (int R : rs) {
        const auto ra = at_r(results[order[i]].records, R), rb = at_r(results[order[j]].records, R);
        if (ra.size() < 6 || ra.size() != rb.size()) continue;
        const PairedTestResult t = paired_test(ra, rb, "ssim");
        csv << order[i] << "," << order[j] << "," << R << ",ssim," << t.n << "," << t.mean_diff << ","
            << t.t_p_value << "," << t.w_statistic << "," << t.w_p_value << "\n";
        out << order[i] << " vs " << order[j] << " R=" << R << ": mean SSIM diff " << std::setprecision(4)
            << t.mean_diff << ", Wilcoxon p " << t.w_p_value << ", t-test p " << t.t_p_value << "\n";
      }
  write_text(out_dir / "paired_tests.csv", csv.str());
  return exit_ok;
}

// ---- theory

struct TheoryArgs {
  Common c;
  MixtureSpec m;
  RegressionSpec s;
  std::vector<double> x{1.0, 1.0};
  std::string out;
};

void add_theory(CLI::App& app, TheoryArgs& a) {
  auto* s = app.add_subcommand("theory", "Monte-Carlo checks of the pooling and regression propositions");
  s->add_option("--mu1", a.m.mu1, "Target mean")->capture_default_str();
  s->add_option("--mu2", a.m.mu2, "Proxy mean")->capture_default_str();
  s->add_option("--sigma1", a.m.sigma1, "Target std")->capture_default_str();
  s->add_option("--sigma2", a.m.sigma2, "Proxy std")->capture_default_str();
  s->add_option("--n", a.m.N, "Target samples per trial")->capture_default_str();
  s->add_option("--k", a.m.K, "Proxy samples per trial")->capture_default_str();
  s->add_option("--trials", a.m.trials, "Mixture trials")->capture_default_str();
  s->add_option("--w", a.s.w, "Evaluation weights")->delimiter(',')->capture_default_str();
  s->add_option("--w-tilde", a.s.w_tilde, "Training weights")->delimiter(',')->capture_default_str();
  s->add_option("--x", a.x, "Query point")->delimiter(',')->capture_default_str();
  s->add_option("--sigma", a.s.sigma, "Feature std")->capture_default_str();
  s->add_option("--eps", a.s.eps, "Evaluation noise std")->capture_default_str();
  s->add_option("--eps-tilde", a.s.eps_tilde, "Training noise std")->capture_default_str();
  s->add_option("--reg-k", a.s.K, "Training pairs per regression trial")->capture_default_str();
  s->add_option("--reg-trials", a.s.trials, "Regression trials")->capture_default_str();
  s->add_option("--out", a.out, "CSV output path");
  add_common(s, a.c);
}

int run_theory(TheoryArgs& a, std::ostream& out) {
  a.m.seed = a.c.seed;
  a.s.seed = a.c.seed;
  a.s.p = a.s.w.size();
  const Prop1Result r1 = prop1_simulate(a.m);
  const Prop2Result r2 = prop2_simulate(a.s, a.x);
  out << theory_table(a.m, r1, a.s, a.x, r2);
  if (!a.out.empty()) write_text(a.out, theory_csv(r1, r2));
  return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint supervised and self-supervised MRI reconstruction on synthetic phantoms", "jssl"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SynthArgs synth;
  add_synth(app, synth);
  MaskArgs mask;
  add_mask_flags(app.add_subcommand("mask", "Generate an undersampling mask"), mask);
  PartitionArgs part;
  auto* ps = app.add_subcommand("partition", "Split a mask into disjoint theta / lambda sets");
  add_mask_flags(ps, part.mask);
  ps->add_option("--q", part.q, "Target |theta| / |M|")->capture_default_str();
  ps->add_option("--sigma", part.sigma, "Gaussian std in k-space units")->capture_default_str();
  ps->add_option("--window", part.window, "ACS window moved into lambda")->capture_default_str();
  TrainArgs tr;
  add_train(app, tr);
  EvalArgs ev;
  add_eval(app, ev);
  ReportArgs rep;
  auto* rs = app.add_subcommand("report", "Summaries, paired tests and image strips from eval directories");
  rs->add_option("--in", rep.in, "Eval output directories");
  rs->add_option("--out", rep.out, "Report directory");
  add_common(rs, rep.c);
  TheoryArgs th;
  add_theory(app, th);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    const Common* common = name == "synth"       ? &synth.c
                           : name == "mask"      ? &mask.c
                           : name == "partition" ? &part.mask.c
                           : name == "train"     ? &tr.c
                           : name == "eval"      ? &ev.c
                           : name == "report"    ? &rep.c
                                                 : &th.c;
    if (!common->config.empty()) apply_config(sub, common->config);
    if (name == "synth") run_synth(synth, out);
    else if (name == "mask") run_mask(mask, out);
    else if (name == "partition") run_partition(part, out);
    else if (name == "train") return run_train(tr, out);
    else if (name == "eval") return run_eval(ev, out);
    else if (name == "report") return run_report(rep, out);
    else return run_theory(th, out);
    return exit_ok;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_io;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return exit_numerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_io;
  }
}

}  // namespace jssl
