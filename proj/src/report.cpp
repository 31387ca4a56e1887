#include "jssl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "jssl/error.hpp"
#include "jssl/tnsr_io.hpp"

namespace jssl {

namespace {

bool ssl_based(const std::string& setup) { return setup == "SSL" || setup == "SSL_ALL" || setup == "JSSL"; }

int setup_rank(const std::string& s) {
  const auto& all = all_setups();
  for (std::size_t i = 0; i < all.size(); ++i)
    if (setup_name(all[i]) == s) return static_cast<int>(i);
  return static_cast<int>(all.size());
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  sd = 0.0;
  if (v.size() < 2) return;
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ConfigError("report: no records");
  std::map<std::pair<std::string, int>, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) groups[{r.setup, r.acceleration}].push_back(&r);
  std::vector<SummaryRow> rows;
  for (const auto& [key, recs] : groups) {
    SummaryRow row;
    row.setup = key.first;
    row.acceleration = key.second;
    row.n = recs.size();
    std::vector<double> s, p, m;
    for (const auto* r : recs) {
      s.push_back(r->ssim);
      p.push_back(r->psnr);
      m.push_back(r->nmse);
    }
    mean_std(s, row.ssim_mean, row.ssim_std);
    mean_std(p, row.psnr_mean, row.psnr_std);
    mean_std(m, row.nmse_mean, row.nmse_std);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    const int ra = setup_rank(a.setup), rb = setup_rank(b.setup);
    if (ra != rb) return ra < rb;
    if (a.setup != b.setup) return a.setup < b.setup;
    return a.acceleration < b.acceleration;
  });
  std::set<int> rs;
  for (const auto& r : rows) rs.insert(r.acceleration);
  for (int R : rs) {
    SummaryRow *bs = nullptr, *bp = nullptr, *bn = nullptr;
    for (auto& r : rows) {
      if (r.acceleration != R || !ssl_based(r.setup)) continue;
      if (!bs || r.ssim_mean > bs->ssim_mean) bs = &r;
      if (!bp || r.psnr_mean > bp->psnr_mean) bp = &r;
      if (!bn || r.nmse_mean < bn->nmse_mean) bn = &r;
    }
    if (bs) bs->best.push_back("ssim");
    if (bp) bp->best.push_back("psnr");
    if (bn) bn->best.push_back("nmse");
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "setup,R,n,ssim_mean,ssim_std,psnr_mean,psnr_std,nmse_mean,nmse_std,best\n";
  for (const auto& r : rows) {
    std::string best;
    for (const auto& b : r.best) best += (best.empty() ? "" : ";") + b;
    os << r.setup << ',' << r.acceleration << ',' << r.n << ',' << fmt(r.ssim_mean) << ',' << fmt(r.ssim_std) << ','
       << fmt(r.psnr_mean) << ',' << fmt(r.psnr_std) << ',' << fmt(r.nmse_mean) << ',' << fmt(r.nmse_std) << ','
       << best << '\n';
  }
  return os.str();
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %4s %4s  %-20s %-20s %-22s\n", "setup", "R", "n", "SSIM", "pSNR", "NMSE");
  os << buf;
  auto cell = [](double m, double s, bool star, int prec) {
    char c[64];
    std::snprintf(c, sizeof c, "%.*f +- %.*f%s", prec, m, prec, s, star ? " *" : "");
    return std::string(c);
  };
  for (const auto& r : rows) {
    auto has = [&](const char* m) { return std::find(r.best.begin(), r.best.end(), m) != r.best.end(); };
    std::snprintf(buf, sizeof buf, "%-10s %4d %4zu  %-20s %-20s %-22s\n", r.setup.c_str(), r.acceleration, r.n,
                  cell(r.ssim_mean, r.ssim_std, has("ssim"), 4).c_str(),
                  cell(r.psnr_mean, r.psnr_std, has("psnr"), 2).c_str(),
                  cell(r.nmse_mean, r.nmse_std, has("nmse"), 4).c_str());
    os << buf;
  }
  os << "* best SSL-based setup (SSL, SSL_ALL, JSSL) for the metric at that R\n";
  return os.str();
}

void write_image_strip(const std::filesystem::path& path, const std::vector<Tensor>& images,
                       const std::vector<double>& scales) {
  if (images.empty() || images.size() != scales.size()) throw ConfigError("image strip: bad inputs");
  const std::size_t h = images[0].dim(0), w = images[0].dim(1);
  for (const auto& im : images)
    if (im.shape() != images[0].shape()) throw ShapeError("image strip: images differ in shape");
  const std::size_t W = w * images.size();
  std::string body(h * W, '\0');
  for (std::size_t k = 0; k < images.size(); ++k) {
    const double s = scales[k] > 0.0 ? scales[k] : 1.0;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double v = std::clamp(images[k][i * w + j] / s, 0.0, 1.0);
        body[i * W + k * w + j] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
  }
  write_text(path, "P5\n" + std::to_string(W) + " " + std::to_string(h) + "\n255\n" + body);
}

void write_report(const std::filesystem::path& out_dir, const std::map<std::string, EvalResult>& results) {
  std::vector<EvalRecord> all;
  for (const auto& [setup, res] : results) all.insert(all.end(), res.records.begin(), res.records.end());
  const auto rows = summarize(all);
  write_text(out_dir / "summary.csv", summary_csv(rows));
  write_text(out_dir / "summary.txt", summary_table(rows));
  const std::map<std::string, Tensor>* gt = nullptr;
  for (const auto& [setup, res] : results) {
    if (res.ground_truth.empty()) continue;
    gt = &res.ground_truth;
    std::set<int> rs;
    for (const auto& [key, img] : res.images) rs.insert(key.second);
    for (int R : rs) {
      std::vector<Tensor> imgs;
      std::vector<double> scales;
      for (const auto& [id, g] : res.ground_truth) {
        auto it = res.images.find({id, R});
        if (it == res.images.end()) continue;
        imgs.push_back(it->second);
        scales.push_back(max_abs(g));
      }
      if (!imgs.empty()) write_image_strip(out_dir / (setup + "_R" + std::to_string(R) + ".pgm"), imgs, scales);
    }
  }
  if (gt) {
    std::vector<Tensor> imgs;
    std::vector<double> scales;
    for (const auto& [id, g] : *gt) {
      imgs.push_back(g);
      scales.push_back(max_abs(g));
    }
    write_image_strip(out_dir / "ground_truth.pgm", imgs, scales);
  }
}

}  // namespace jssl
