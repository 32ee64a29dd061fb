// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "curate/error.hpp"

namespace curate {

void MetricConfig::validate() const {
  if (!(psnr_cap_db > 0)) throw ValidationError("metrics.psnr_cap_db must be > 0");
  if (ssim_window <= 0 || ssim_window % 2 == 0) throw ValidationError("metrics.ssim_window must be odd and > 0");
  if (!(ssim_sigma > 0)) throw ValidationError("metrics.ssim_sigma must be > 0");
  if (!(ssim_k1 > 0) || !(ssim_k2 > 0)) throw ValidationError("metrics.ssim_k1/k2 must be > 0");
  if (!(dynamic_range > 0)) throw ValidationError("metrics.dynamic_range must be > 0");
  if (!(ndtw_fraction > 0)) throw ValidationError("metrics.ndtw_fraction must be > 0");
}

double MetricConfig::d_th(int width, int height) const {
  return ndtw_fraction * std::hypot(static_cast<double>(width), static_cast<double>(height));
}

double psnr(const Image8& a, const Image8& b, const MetricConfig& cfg) {
  if (!a.same_shape(b)) throw ValidationError("psnr: image shapes differ");
  if (a.data.empty()) throw ValidationError("psnr: empty image");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.data.size());
  if (mse == 0.0) return cfg.psnr_cap_db;
  return std::min(cfg.psnr_cap_db, 10.0 * std::log10(cfg.dynamic_range * cfg.dynamic_range / mse));
}

namespace {

// Valid-region separable filtering: output is (w - n + 1) x (h - n + 1).
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const GrayImage& a, const GrayImage& b, const MetricConfig& cfg) {
  cfg.validate();
  if (a.width != b.width || a.height != b.height) throw ValidationError("ssim: image shapes differ");
  const int n = cfg.ssim_window;
  if (a.width < n || a.height < n) {
    throw ValidationError("ssim: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                          " image is smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");
  }
  std::vector<double> k(n);
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    const double d = i - (n - 1) / 2.0;
    k[i] = std::exp(-d * d / (2 * cfg.ssim_sigma * cfg.ssim_sigma));
    ks += k[i];
  }
  for (auto& v : k) v /= ks;

  const std::size_t px = a.pixels.size();
  std::vector<double> x(px), y(px), xx(px), yy(px), xy(px);
  for (std::size_t i = 0; i < px; ++i) {
    x[i] = a.pixels[i];
    y[i] = b.pixels[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const int w = a.width, h = a.height;
  const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
  const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k), sxy = filter_valid(xy, w, h, k);
  const double c1 = std::pow(cfg.ssim_k1 * cfg.dynamic_range, 2);
  const double c2 = std::pow(cfg.ssim_k2 * cfg.dynamic_range, 2);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double va = sxx[i] - mx[i] * mx[i];
    const double vb = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mx.size());
}

double ssim(const Image8& a, const Image8& b, const MetricConfig& cfg) {
  if (!a.same_shape(b)) throw ValidationError("ssim: image shapes differ");
  return ssim(to_gray(a), to_gray(b), cfg);
}

double dtw(const Trajectory& a, const Trajectory& b) {
  if (a.empty() || b.empty()) throw ValidationError("dtw: empty trajectory");
  for (const auto* t : {&a, &b})
    for (const auto& p : *t)
      if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ValidationError("dtw: non-finite coordinate");
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = std::hypot(a[i - 1][0] - b[j - 1][0], a[i - 1][1] - b[j - 1][1]);
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double ndtw(const Trajectory& pred, const Trajectory& gt, double d_th) {
  if (!(d_th > 0)) throw ValidationError("ndtw: d_th must be > 0");
  return std::exp(-dtw(pred, gt) / (static_cast<double>(gt.size()) * d_th));
}

nlohmann::ordered_json aggregate_report(std::vector<ClipMetrics> clips) {
  using oj = nlohmann::ordered_json;
  if (clips.empty()) throw ValidationError("aggregate_report: no clips");
  std::sort(clips.begin(), clips.end(), [](const auto& x, const auto& y) { return x.clip_id < y.clip_id; });
  std::set<std::string> ids;
  for (const auto& c : clips)
    if (!ids.insert(c.clip_id).second) throw ValidationError("aggregate_report: duplicate clip \"" + c.clip_id + "\"");

  oj report;
  oj means = oj::object();
  auto summarize = [&](const char* name, std::optional<double> ClipMetrics::*field) {
    double sum = 0;
    long count = 0;
    for (const auto& c : clips)
      if (c.*field) {
        sum += *(c.*field);
        ++count;
      }
    oj m;
    m["count"] = count;
    m["absent"] = static_cast<long>(clips.size()) - count;
    if (count) m["mean"] = sum / static_cast<double>(count);
    else m["mean"] = nullptr;
    means[name] = m;
  };
  summarize("psnr", &ClipMetrics::psnr);
  summarize("ssim", &ClipMetrics::ssim);
  summarize("ndtw", &ClipMetrics::ndtw);
  report["clips"] = static_cast<long>(clips.size());
  report["metrics"] = means;
  oj per = oj::array();
  for (const auto& c : clips) {
    oj row;
    row["clip_id"] = c.clip_id;
    auto put = [&](const char* k, const std::optional<double>& v) {
      if (v) row[k] = *v;
      else row[k] = nullptr;
    };
    put("psnr", c.psnr);
    put("ssim", c.ssim);
    put("ndtw", c.ndtw);
    per.push_back(row);
  }
  report["per_clip"] = per;
  return report;
}

ClipMetrics compare_frame_dirs(const std::filesystem::path& pred, const std::filesystem::path& gt,
                               const MetricConfig& cfg) {
  std::set<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(gt))
    if (e.path().extension() == ".png" && std::filesystem::exists(pred / e.path().filename()))
      names.insert(e.path().filename().string());
  ClipMetrics m;
  m.clip_id = gt.filename().string();
  if (names.empty()) return m;
  double ps = 0, ss = 0;
  for (const auto& n : names) {
    const Image8 a = read_png(pred / n), b = read_png(gt / n);
    ps += psnr(a, b, cfg);
    ss += ssim(a, b, cfg);
  }
  m.psnr = ps / static_cast<double>(names.size());
  m.ssim = ss / static_cast<double>(names.size());
  return m;
}

std::map<std::string, Trajectory> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trajectory file " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    std::map<std::string, Trajectory> out;
    for (const auto& [id, pts] : j.items()) {
      Trajectory t;
      for (const auto& p : pts) {
        if (!p.is_array() || p.size() != 2) throw ValidationError("trajectory \"" + id + "\": points must be [u, v]");
        t.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      if (t.empty()) throw ValidationError("trajectory \"" + id + "\" is empty");
      out[id] = std::move(t);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace curate
