// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Video-level quality gate and temporal segmentation by task index.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "curate/decision.hpp"
#include "curate/manifest.hpp"

namespace curate {

struct GateConfig {
  long min_frames = 80;
  long max_frames = 500;
  std::vector<std::pair<int, int>> allowed_resolutions;  // empty: any size above the minimum
  std::pair<int, int> min_resolution{256, 256};
  double camera_motion_threshold = 1.0;  // median border flow, pixels per sampled pair
  double border_fraction = 0.1;
  bool verify_frames = true;  // check frame files exist before emitting segments

  void validate() const;
};

/// Half-open frame range [begin, end) in clip-relative indices.
struct FrameSpan {
  long begin = 0;
  long end = 0;
  long size() const { return end - begin; }
  bool operator==(const FrameSpan&) const = default;
};

struct SegmentPlan {
  std::vector<FrameSpan> children;
  std::vector<FrameSpan> dropped;  // spans shorter than min_frames
};

/// True when the clip is longer than max_frames or spans several tasks.
bool needs_segmentation(const ClipRecord& record, const GateConfig& cfg);

/// Splits at task-index change points, chunks over-long spans into
/// ceil(L / max_frames) near-equal parts, drops parts below min_frames.
SegmentPlan plan_segments(const ClipRecord& record, const GateConfig& cfg);

GateDecision apply_quality_gate(const ClipRecord& record, const GateConfig& cfg,
                                std::optional<double> border_flow_stat = std::nullopt);

struct SegmentResult {
  std::vector<ClipRecord> children;
  std::vector<FrameSpan> dropped;
};

/// Materializes the plan as child records "<parent>#k" with re-indexed action
/// frames, task indices and detections. Throws if a claimed frame file is
/// missing and cfg.verify_frames is set.
SegmentResult segment_by_task(const ClipRecord& record, const GateConfig& cfg);

}  // namespace curate
