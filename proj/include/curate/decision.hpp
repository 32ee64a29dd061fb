// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace curate {

enum class Reason {
  kOk,
  kAbnormalResolution,
  kTooShort,
  kMovingCamera,
  kNearZeroMotion,
  kOscillation,
  kIncoherent,
  kMisaligned,
};

std::string_view to_string(Reason r);

/// Outcome of one filter applied to one clip. `reason == kOk` iff accepted.
struct GateDecision {
  bool accepted = true;
  Reason reason = Reason::kOk;
  int segments_emitted = 0;

  static GateDecision accept(int segments = 1) { return {true, Reason::kOk, segments}; }
  static GateDecision reject(Reason r) { return {false, r, 0}; }

  bool operator==(const GateDecision&) const = default;
};

}  // namespace curate
