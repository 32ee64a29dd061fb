// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics: PSNR, SSIM (Gaussian window, valid region, luma) and
// trajectory consistency as normalised DTW.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curate/image.hpp"
#include "json.hpp"

namespace curate {

struct MetricConfig {
  double psnr_cap_db = 99.0;
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double ssim_k1 = 0.01;
  double ssim_k2 = 0.03;
  double dynamic_range = 255.0;
  double ndtw_fraction = 0.05;  // d_th as a fraction of the image diagonal

  void validate() const;
  /// Distance threshold for an image of the given size.
  double d_th(int width, int height) const;
};

/// Over every channel of equally shaped images.
double psnr(const Image8& a, const Image8& b, const MetricConfig& cfg);

/// Colour inputs are reduced to luma first.
double ssim(const Image8& a, const Image8& b, const MetricConfig& cfg);
double ssim(const GrayImage& a, const GrayImage& b, const MetricConfig& cfg);

using Trajectory = std::vector<std::array<double, 2>>;

/// Classic DTW with Euclidean point cost and match/insert/delete steps.
double dtw(const Trajectory& a, const Trajectory& b);

/// exp(-DTW(pred, gt) / (|gt| * d_th)).
double ndtw(const Trajectory& pred, const Trajectory& gt, double d_th);

struct ClipMetrics {
  std::string clip_id;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::optional<double> ndtw;
};

/// Unweighted means per metric over the clips that have it, with counts;
/// a metric no clip has is reported as absent. Clips are listed by id.
nlohmann::ordered_json aggregate_report(std::vector<ClipMetrics> clips);

/// Mean PSNR / SSIM over the frames two directories share by name.
ClipMetrics compare_frame_dirs(const std::filesystem::path& pred, const std::filesystem::path& gt,
                               const MetricConfig& cfg);

/// {clip_id: [[u, v], ...]}
std::map<std::string, Trajectory> load_trajectories(const std::filesystem::path& path);

}  // namespace curate
