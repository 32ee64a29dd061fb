// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Farneback flow, following "Two-Frame Motion Estimation Based on Polynomial
// Expansion" (SCIA 2003): each neighbourhood is approximated by a quadratic
// polynomial f(x) ~ x'Ax + b'x + c fitted under a Gaussian applicability; a
// displacement d maps b1 to b2 = b1 - 2Ad, so d is recovered by a windowed
// least-squares solve, refined iteratively and coarse-to-fine.

#include "curate/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "curate/error.hpp"

namespace curate {

void FlowConfig::validate() const {
  if (!(sample_fps > 0.0)) throw ValidationError("flow.sample_fps must be > 0");
  if (pyramid_levels < 1) throw ValidationError("flow.pyramid_levels must be >= 1");
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) throw ValidationError("flow.pyramid_scale must lie in (0, 1)");
  if (window_size < 1) throw ValidationError("flow.window_size must be >= 1");
  if (iterations < 1) throw ValidationError("flow.iterations must be >= 1");
  if (poly_n < 1 || poly_n % 2 == 0) throw ValidationError("flow.poly_n must be a positive odd number");
  if (!(poly_sigma > 0.0)) throw ValidationError("flow.poly_sigma must be > 0");
  if (!(tau_low > 0.0)) throw ValidationError("flow.tau_low must be > 0");
  if (!(ratio_min > 0.0)) throw ValidationError("flow.ratio_min must be > 0");
}

namespace {

// Quadratic model f(x, y) ~ c + bx*x + by*y + axx*x^2 + ayy*y^2 + axy*x*y.
struct Poly {
  float bx, by, axx, ayy, axy;
};

using PolyImage = std::vector<Poly>;

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Separable Gaussian blur with replicated borders.
GrayImage gaussian_blur(const GrayImage& src, double sigma, int ksize) {
  const int r = ksize / 2;
  std::vector<double> k(ksize);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;

  GrayImage tmp(src.width, src.height), out(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src.at(clampi(x + i, 0, src.width - 1), y);
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, clampi(y + i, 0, src.height - 1));
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

// Bilinear sample with pixel-center alignment and replicated borders.
float sample_bilinear(const std::vector<float>& px, int w, int h, double fx, double fy) {
  fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = fx - x0, ay = fy - y0;
  const auto at = [&](int x, int y) { return static_cast<double>(px[static_cast<std::size_t>(y) * w + x]); };
  return static_cast<float>((1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x1, y0)) +
                            ay * ((1 - ax) * at(x0, y1) + ax * at(x1, y1)));
}

std::vector<float> resize_plane(const std::vector<float>& px, int w, int h, int nw, int nh) {
  std::vector<float> out(static_cast<std::size_t>(nw) * nh);
  const double sx = static_cast<double>(w) / nw, sy = static_cast<double>(h) / nh;
  for (int y = 0; y < nh; ++y) {
    for (int x = 0; x < nw; ++x) {
      out[static_cast<std::size_t>(y) * nw + x] = sample_bilinear(px, w, h, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    }
  }
  return out;
}

// Solves the 6x6 Gram system of the quadratic basis {1, x, y, x^2, y^2, xy}
// under the applicability g(x)g(y), returning its inverse.
std::array<std::array<double, 6>, 6> invert_gram(const std::vector<double>& g, int n) {
  std::array<std::array<double, 6>, 6> G{};
  for (int y = -n; y <= n; ++y) {
    for (int x = -n; x <= n; ++x) {
      const double basis[6] = {1.0, double(x), double(y), double(x * x), double(y * y), double(x * y)};
      const double a = g[y + n] * g[x + n];
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) G[i][j] += a * basis[i] * basis[j];
    }
  }
  std::array<std::array<double, 12>, 6> aug{};
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) aug[i][j] = G[i][j];
    aug[i][6 + i] = 1.0;
  }
  for (int c = 0; c < 6; ++c) {
    int pivot = c;
    for (int r = c + 1; r < 6; ++r)
      if (std::abs(aug[r][c]) > std::abs(aug[pivot][c])) pivot = r;
    std::swap(aug[c], aug[pivot]);
    const double inv = 1.0 / aug[c][c];
    for (double& v : aug[c]) v *= inv;
    for (int r = 0; r < 6; ++r) {
      if (r == c) continue;
      const double f = aug[r][c];
      for (int k = 0; k < 12; ++k) aug[r][k] -= f * aug[c][k];
    }
  }
  std::array<std::array<double, 6>, 6> out{};
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) out[i][j] = aug[i][6 + j];
  return out;
}

PolyImage poly_expand(const GrayImage& img, int poly_n, double sigma) {
  const int n = poly_n / 2;
  std::vector<double> g(2 * n + 1);
  double s = 0.0;
  for (int i = -n; i <= n; ++i) {
    g[i + n] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    s += g[i + n];
  }
  for (double& v : g) v /= s;
  const auto inv = invert_gram(g, n);

  const int w = img.width, h = img.height;
  // Vertical pass: correlations with g, y*g, y^2*g.
  std::vector<std::array<double, 3>> col(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, 3> acc{};
      for (int k = -n; k <= n; ++k) {
        const double v = img.at(x, clampi(y + k, 0, h - 1)) * g[k + n];
        acc[0] += v;
        acc[1] += v * k;
        acc[2] += v * k * k;
      }
      col[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  PolyImage out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // b[i] = sum of applicability * basis_i * f over the neighbourhood.
      double b[6] = {};
      for (int k = -n; k <= n; ++k) {
        const auto& c = col[static_cast<std::size_t>(y) * w + clampi(x + k, 0, w - 1)];
        const double gk = g[k + n];
        b[0] += gk * c[0];
        b[1] += gk * k * c[0];
        b[2] += gk * c[1];
        b[3] += gk * k * k * c[0];
        b[4] += gk * c[2];
        b[5] += gk * k * c[1];
      }
      double r[6] = {};
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) r[i] += inv[i][j] * b[j];
      out[static_cast<std::size_t>(y) * w + x] = {static_cast<float>(r[1]), static_cast<float>(r[2]),
                                                  static_cast<float>(r[3]), static_cast<float>(r[4]),
                                                  static_cast<float>(r[5])};
    }
  }
  return out;
}

// Per-pixel normal equations of the displacement solve: G = A'A (symmetric,
// 3 entries) and h = A' db.
struct Normal {
  double g11, g12, g22, h1, h2;
};

std::vector<Normal> update_matrices(const PolyImage& r0, const PolyImage& r1, const FlowField& flow) {
  constexpr int kBorder = 5;
  static constexpr double kBorderWeight[kBorder] = {0.14, 0.14, 0.4472, 0.4472, 0.4472};
  const int w = flow.width, h = flow.height;
  std::vector<Normal> m(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = flow.index(x, y);
      const double dx = flow.dx[i], dy = flow.dy[i];
      const double fx = x + dx, fy = y + dy;
      const int x1 = static_cast<int>(std::floor(fx)), y1 = static_cast<int>(std::floor(fy));
      const Poly& p0 = r0[i];
      double a11, a22, a12, db_x, db_y;
      if (x1 >= 0 && x1 < w && y1 >= 0 && y1 < h) {
        // The second expansion is sampled bilinearly at the displaced point.
        const double ax = fx - x1, ay = fy - y1;
        const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
        const int x2 = std::min(x1 + 1, w - 1), y2 = std::min(y1 + 1, h - 1);
        const auto at = [&](int px, int py) { return &r1[static_cast<std::size_t>(py) * w + px]; };
        const Poly* q[4] = {at(x1, y1), at(x2, y1), at(x1, y2), at(x2, y2)};
        Poly p1{0, 0, 0, 0, 0};
        for (int k = 0; k < 4; ++k) {
          p1.bx += static_cast<float>(wts[k] * q[k]->bx);
          p1.by += static_cast<float>(wts[k] * q[k]->by);
          p1.axx += static_cast<float>(wts[k] * q[k]->axx);
          p1.ayy += static_cast<float>(wts[k] * q[k]->ayy);
          p1.axy += static_cast<float>(wts[k] * q[k]->axy);
        }
        a11 = 0.5 * (p0.axx + p1.axx);
        a22 = 0.5 * (p0.ayy + p1.ayy);
        a12 = 0.25 * (p0.axy + p1.axy);
        db_x = 0.5 * (p0.bx - p1.bx);
        db_y = 0.5 * (p0.by - p1.by);
      } else {
        a11 = p0.axx;
        a22 = p0.ayy;
        a12 = 0.5 * p0.axy;
        db_x = 0.5 * p0.bx;
        db_y = 0.5 * p0.by;
      }
      // Fold the current estimate into the right-hand side.
      db_x += a11 * dx + a12 * dy;
      db_y += a12 * dx + a22 * dy;

      double scale = 1.0;
      if (x < kBorder) scale *= kBorderWeight[x];
      if (x >= w - kBorder) scale *= kBorderWeight[w - x - 1];
      if (y < kBorder) scale *= kBorderWeight[y];
      if (y >= h - kBorder) scale *= kBorderWeight[h - y - 1];
      a11 *= scale;
      a22 *= scale;
      a12 *= scale;
      db_x *= scale;
      db_y *= scale;

      m[i] = {a11 * a11 + a12 * a12, a12 * (a11 + a22), a12 * a12 + a22 * a22, a11 * db_x + a12 * db_y,
              a12 * db_x + a22 * db_y};
    }
  }
  return m;
}

// Box-filters the normal equations over the window and solves for the flow.
void solve_flow(const std::vector<Normal>& m, int window, FlowField& flow) {
  const int w = flow.width, h = flow.height, r = window / 2;
  std::vector<Normal> tmp(m.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Normal acc{};
      for (int k = -r; k <= r; ++k) {
        const Normal& s = m[static_cast<std::size_t>(y) * w + clampi(x + k, 0, w - 1)];
        acc.g11 += s.g11;
        acc.g12 += s.g12;
        acc.g22 += s.g22;
        acc.h1 += s.h1;
        acc.h2 += s.h2;
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  const double norm = 1.0 / (static_cast<double>(2 * r + 1) * (2 * r + 1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Normal acc{};
      for (int k = -r; k <= r; ++k) {
        const Normal& s = tmp[static_cast<std::size_t>(clampi(y + k, 0, h - 1)) * w + x];
        acc.g11 += s.g11;
        acc.g12 += s.g12;
        acc.g22 += s.g22;
        acc.h1 += s.h1;
        acc.h2 += s.h2;
      }
      const double g11 = acc.g11 * norm, g12 = acc.g12 * norm, g22 = acc.g22 * norm;
      const double h1 = acc.h1 * norm, h2 = acc.h2 * norm;
      const double idet = 1.0 / (g11 * g22 - g12 * g12 + 1e-3);
      const std::size_t i = flow.index(x, y);
      flow.dx[i] = static_cast<float>((g22 * h1 - g12 * h2) * idet);
      flow.dy[i] = static_cast<float>((g11 * h2 - g12 * h1) * idet);
    }
  }
}

FlowField upsample_flow(const FlowField& coarse, int w, int h) {
  FlowField out(w, h);
  out.dx = resize_plane(coarse.dx, coarse.width, coarse.height, w, h);
  out.dy = resize_plane(coarse.dy, coarse.width, coarse.height, w, h);
  const float sx = static_cast<float>(w) / coarse.width, sy = static_cast<float>(h) / coarse.height;
  for (auto& v : out.dx) v *= sx;
  for (auto& v : out.dy) v *= sy;
  return out;
}

GrayImage pyramid_layer(const GrayImage& img, double scale) {
  if (scale >= 1.0) return img;
  const double sigma = (1.0 / scale - 1.0) * 0.5;
  const int ksize = std::max(3, static_cast<int>(std::lround(sigma * 5)) | 1);
  const GrayImage blurred = gaussian_blur(img, sigma, ksize);
  const int nw = static_cast<int>(std::lround(img.width * scale));
  const int nh = static_cast<int>(std::lround(img.height * scale));
  GrayImage out(nw, nh);
  out.pixels = resize_plane(blurred.pixels, img.width, img.height, nw, nh);
  return out;
}

}  // namespace

FlowField farneback_flow(const GrayImage& prev, const GrayImage& next, const FlowConfig& cfg) {
  cfg.validate();
  if (prev.width != next.width || prev.height != next.height) {
    throw ValidationError("farneback_flow: frame dimensions differ");
  }
  if (prev.width < cfg.window_size || prev.height < cfg.window_size) {
    throw ValidationError("farneback_flow: image smaller than the averaging window");
  }
  constexpr int kMinSize = 32;

  int levels = 1;
  for (double s = cfg.pyramid_scale; levels < cfg.pyramid_levels; s *= cfg.pyramid_scale) {
    if (prev.width * s < kMinSize || prev.height * s < kMinSize) break;
    ++levels;
  }

  FlowField flow;
  for (int k = levels - 1; k >= 0; --k) {
    const double scale = std::pow(cfg.pyramid_scale, k);
    const GrayImage i0 = pyramid_layer(prev, scale);
    const GrayImage i1 = pyramid_layer(next, scale);
    flow = flow.width == 0 ? FlowField(i0.width, i0.height) : upsample_flow(flow, i0.width, i0.height);

    const PolyImage r0 = poly_expand(i0, cfg.poly_n, cfg.poly_sigma);
    const PolyImage r1 = poly_expand(i1, cfg.poly_n, cfg.poly_sigma);
    for (int it = 0; it < cfg.iterations; ++it) {
      solve_flow(update_matrices(r0, r1, flow), cfg.window_size, flow);
    }
  }
  return flow;
}

std::vector<long> sampled_frame_indices(long frame_count, double fps, double sample_fps) {
  std::vector<long> out;
  const double step = fps / sample_fps;
  for (long k = 0;; ++k) {
    const long idx = std::lround(static_cast<double>(k) * step);
    if (idx >= frame_count) break;
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

std::vector<GrayImage> sample_gray_frames(const ClipRecord& record, const FlowConfig& cfg) {
  const auto indices = sampled_frame_indices(record.frame_count, record.fps, cfg.sample_fps);
  if (indices.size() < 2) {
    throw Error("clip \"" + record.clip_id + "\": insufficient frames for flow (need 2 sampled frames)");
  }
  std::vector<GrayImage> frames;
  frames.reserve(indices.size());
  for (long idx : indices) frames.push_back(to_gray(read_png(record.frame_file(idx))));
  return frames;
}

KinematicScore kinematic_score(std::span<const FlowField> flows, int border_margin) {
  if (flows.empty()) throw ValidationError("kinematic_score: no flow fields");
  KinematicScore score;
  double net_x = 0.0, net_y = 0.0, path = 0.0;
  for (const FlowField& f : flows) {
    int m = std::max(0, border_margin);
    if (2 * m >= f.width || 2 * m >= f.height) m = 0;
    double mag = 0.0, sx = 0.0, sy = 0.0;
    long count = 0;
    for (int y = m; y < f.height - m; ++y) {
      for (int x = m; x < f.width - m; ++x) {
        const std::size_t i = f.index(x, y);
        mag += std::hypot(static_cast<double>(f.dx[i]), static_cast<double>(f.dy[i]));
        sx += f.dx[i];
        sy += f.dy[i];
        ++count;
      }
    }
    const double n = count > 0 ? static_cast<double>(count) : 1.0;
    score.pair_means.push_back(mag / n);
    net_x += sx / n;
    net_y += sy / n;
    path += std::hypot(sx / n, sy / n);
  }
  double total = 0.0;
  for (double v : score.pair_means) total += v;
  score.clip_mean = total / static_cast<double>(score.pair_means.size());
  score.net_to_path_ratio = path > 0.0 ? std::min(1.0, std::hypot(net_x, net_y) / path) : 1.0;
  return score;
}

GateDecision motion_filter(const KinematicScore& score, const FlowConfig& cfg) {
  if (score.clip_mean < cfg.tau_low) return GateDecision::reject(Reason::kNearZeroMotion);
  if (score.net_to_path_ratio < cfg.ratio_min) return GateDecision::reject(Reason::kOscillation);
  return GateDecision::accept();
}

double border_flow_median(const FlowField& field, double border_fraction) {
  const int bx = std::max(1, static_cast<int>(border_fraction * field.width));
  const int by = std::max(1, static_cast<int>(border_fraction * field.height));
  std::vector<double> mags;
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      if (x >= bx && x < field.width - bx && y >= by && y < field.height - by) continue;
      const std::size_t i = field.index(x, y);
      mags.push_back(std::hypot(static_cast<double>(field.dx[i]), static_cast<double>(field.dy[i])));
    }
  }
  if (mags.empty()) return 0.0;
  std::sort(mags.begin(), mags.end());
  const std::size_t n = mags.size();
  return n % 2 ? mags[n / 2] : 0.5 * (mags[n / 2 - 1] + mags[n / 2]);
}

ClipFlowStats compute_clip_flow(const ClipRecord& record, const FlowConfig& cfg, double border_fraction) {
  const auto frames = sample_gray_frames(record, cfg);
  std::vector<FlowField> flows;
  std::vector<double> border;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    flows.push_back(farneback_flow(frames[i - 1], frames[i], cfg));
    border.push_back(border_flow_median(flows.back(), border_fraction));
  }
  ClipFlowStats stats;
  stats.kinematic = kinematic_score(flows, cfg.window_size / 2);
  std::sort(border.begin(), border.end());
  const std::size_t n = border.size();
  stats.border_median = n % 2 ? border[n / 2] : 0.5 * (border[n / 2 - 1] + border[n / 2]);
  return stats;
}

}  // namespace curate
