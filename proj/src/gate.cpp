// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/gate.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "curate/error.hpp"

namespace curate {

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::kOk: return "ok";
    case Reason::kAbnormalResolution: return "abnormal_resolution";
    case Reason::kTooShort: return "too_short";
    case Reason::kMovingCamera: return "moving_camera";
    case Reason::kNearZeroMotion: return "near_zero_motion";
    case Reason::kOscillation: return "oscillation";
    case Reason::kIncoherent: return "incoherent";
    case Reason::kMisaligned: return "misaligned";
  }
  return "ok";
}

void GateConfig::validate() const {
  if (min_frames < 1 || min_frames > max_frames) {
    throw ValidationError("gate: require 1 <= min_frames <= max_frames");
  }
  if (!(camera_motion_threshold > 0.0)) throw ValidationError("gate.camera_motion_threshold must be > 0");
  if (!(border_fraction > 0.0 && border_fraction < 0.5)) {
    throw ValidationError("gate.border_fraction must lie in (0, 0.5)");
  }
  if (min_resolution.first <= 0 || min_resolution.second <= 0) {
    throw ValidationError("gate.min_resolution must be positive");
  }
}

namespace {

std::vector<FrameSpan> task_runs(const ClipRecord& record) {
  std::vector<FrameSpan> runs;
  if (!record.frame_task_index || record.frame_task_index->empty()) {
    runs.push_back({0, record.frame_count});
    return runs;
  }
  const auto& idx = *record.frame_task_index;
  long begin = 0;
  for (long i = 1; i <= static_cast<long>(idx.size()); ++i) {
    if (i == static_cast<long>(idx.size()) || idx[i] != idx[i - 1]) {
      runs.push_back({begin, i});
      begin = i;
    }
  }
  return runs;
}

}  // namespace

bool needs_segmentation(const ClipRecord& record, const GateConfig& cfg) {
  return record.frame_count > cfg.max_frames || task_runs(record).size() > 1;
}

SegmentPlan plan_segments(const ClipRecord& record, const GateConfig& cfg) {
  SegmentPlan plan;
  for (const FrameSpan& run : task_runs(record)) {
    const long len = run.size();
    const long parts = (len + cfg.max_frames - 1) / cfg.max_frames;
    const long base = len / parts;
    const long extra = len % parts;
    long at = run.begin;
    for (long k = 0; k < parts; ++k) {
      const long size = base + (k < extra ? 1 : 0);
      FrameSpan chunk{at, at + size};
      at += size;
      (size < cfg.min_frames ? plan.dropped : plan.children).push_back(chunk);
    }
  }
  return plan;
}

GateDecision apply_quality_gate(const ClipRecord& record, const GateConfig& cfg,
                                std::optional<double> border_flow_stat) {
  if (record.width < cfg.min_resolution.first || record.height < cfg.min_resolution.second) {
    return GateDecision::reject(Reason::kAbnormalResolution);
  }
  if (!cfg.allowed_resolutions.empty() &&
      std::find(cfg.allowed_resolutions.begin(), cfg.allowed_resolutions.end(),
                std::pair{record.width, record.height}) == cfg.allowed_resolutions.end()) {
    return GateDecision::reject(Reason::kAbnormalResolution);
  }
  if (record.frame_count < cfg.min_frames) return GateDecision::reject(Reason::kTooShort);

  // An explicit flag in the manifest wins over the flow heuristic.
  if (record.static_camera.has_value()) {
    if (!*record.static_camera) return GateDecision::reject(Reason::kMovingCamera);
  } else if (border_flow_stat && *border_flow_stat > cfg.camera_motion_threshold) {
    return GateDecision::reject(Reason::kMovingCamera);
  }

  if (!needs_segmentation(record, cfg)) return GateDecision::accept(1);
  const auto segments = static_cast<int>(plan_segments(record, cfg).children.size());
  if (segments == 0) return GateDecision::reject(Reason::kTooShort);
  return GateDecision::accept(segments);
}

SegmentResult segment_by_task(const ClipRecord& record, const GateConfig& cfg) {
  SegmentPlan plan = plan_segments(record, cfg);
  SegmentResult result;
  result.dropped = std::move(plan.dropped);

  std::set<long> distinct_tasks;
  if (record.frame_task_index) distinct_tasks.insert(record.frame_task_index->begin(), record.frame_task_index->end());

  for (std::size_t k = 0; k < plan.children.size(); ++k) {
    const FrameSpan span = plan.children[k];
    if (cfg.verify_frames) {
      for (long i = span.begin; i < span.end; ++i) {
        if (!std::filesystem::exists(record.frame_file(i))) {
          throw Error("clip \"" + record.clip_id + "\": missing frame file " + record.frame_file(i).string() +
                      " for segment [" + std::to_string(span.begin) + ", " + std::to_string(span.end) + ")");
        }
      }
    }
    ClipRecord child = record;
    child.clip_id = record.clip_id + "#" + std::to_string(k);
    child.frame_count = span.size();
    child.frame_offset = record.frame_offset + span.begin;
    if (record.frame_task_index) {
      const auto& idx = *record.frame_task_index;
      child.frame_task_index = std::vector<long>(idx.begin() + span.begin, idx.begin() + span.end);
      if (distinct_tasks.size() > 1) {
        child.task_id = record.task_id + ":" + std::to_string(idx[span.begin]);
      }
    }
    child.action_frames.clear();
    for (ActionFrame a : record.action_frames) {
      if (a.frame_index >= span.begin && a.frame_index < span.end) {
        a.frame_index -= span.begin;
        child.action_frames.push_back(a);
      }
    }
    child.gripper_detections.clear();
    for (GripperDetection d : record.gripper_detections) {
      if (d.frame_index >= span.begin && d.frame_index < span.end) {
        d.frame_index -= span.begin;
        child.gripper_detections.push_back(d);
      }
    }
    result.children.push_back(std::move(child));
  }
  return result;
}

}  // namespace curate
