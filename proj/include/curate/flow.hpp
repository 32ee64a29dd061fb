// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense optical flow (Farneback two-frame polynomial expansion) and the
// clip-level kinematic statistics used by the motion filter.

#pragma once

#include <span>
#include <vector>

#include "curate/decision.hpp"
#include "curate/image.hpp"
#include "curate/manifest.hpp"

namespace curate {

/// Per-pixel displacement prev -> next, in pixels.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> dx;
  std::vector<float> dy;

  FlowField() = default;
  FlowField(int w, int h, float fx = 0.0f, float fy = 0.0f)
      : width(w), height(h), dx(static_cast<std::size_t>(w) * h, fx), dy(static_cast<std::size_t>(w) * h, fy) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct FlowConfig {
  double sample_fps = 2.0;
  int pyramid_levels = 3;  // layers including the full-resolution image
  double pyramid_scale = 0.5;
  int window_size = 15;
  int iterations = 3;
  int poly_n = 5;  // expansion neighbourhood is poly_n x poly_n
  double poly_sigma = 1.1;
  double tau_low = 0.3;
  double ratio_min = 0.05;

  void validate() const;
};

struct KinematicScore {
  std::vector<double> pair_means;  // mean |flow| per sampled pair
  double clip_mean = 0.0;
  double net_to_path_ratio = 1.0;  // |sum of mean vectors| / sum of |mean vectors|
};

/// Indices round(k * fps / sample_fps) below frame_count, repeats removed.
std::vector<long> sampled_frame_indices(long frame_count, double fps, double sample_fps);

/// Loads the sampled frames of a clip as luma images. Needs at least two.
std::vector<GrayImage> sample_gray_frames(const ClipRecord& record, const FlowConfig& cfg);

FlowField farneback_flow(const GrayImage& prev, const GrayImage& next, const FlowConfig& cfg);

/// Aggregates flow fields. Pixels closer than `border_margin` to an edge are
/// ignored (the expansion support is truncated there).
KinematicScore kinematic_score(std::span<const FlowField> flows, int border_margin = 0);

GateDecision motion_filter(const KinematicScore& score, const FlowConfig& cfg);

/// Median flow magnitude inside the outer `border_fraction` band of each side.
double border_flow_median(const FlowField& field, double border_fraction);

struct ClipFlowStats {
  KinematicScore kinematic;
  double border_median = 0.0;  // median over pairs of per-pair border medians
};

/// Samples frames, runs flow on consecutive pairs, returns both statistics.
ClipFlowStats compute_clip_flow(const ClipRecord& record, const FlowConfig& cfg, double border_fraction);

}  // namespace curate
