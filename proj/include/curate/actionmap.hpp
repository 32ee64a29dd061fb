// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Action maps: end-effector poses projected through the clip camera and drawn
// as a gripper disc plus three orientation arrows. Arrow endpoints are the
// projected tips of the rotated basis axes, so perspective alone shortens
// them with depth. Dual-arm clips draw the left arm only into the red channel
// and the right arm only into the blue one.

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "curate/decision.hpp"
#include "curate/image.hpp"
#include "curate/manifest.hpp"
#include "curate/service.hpp"

namespace curate {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct RenderStyle {
  double axis_world_length = 0.08;  // meters
  int gripper_radius_px = 12;
  int arrow_thickness_px = 2;
  double overlay_alpha = 0.6;
  // false: open gripper = opaque disc. true: closed gripper = opaque disc.
  bool invert_openness = false;
  std::array<Rgb, 3> axis_colors{Rgb{255, 0, 0}, Rgb{0, 255, 0}, Rgb{0, 0, 255}};
  Rgb single_arm_disc{255, 255, 255};

  void validate() const;
};

struct Projection {
  double u = 0.0, v = 0.0, z_cam = 0.0;
};

/// Pinhole projection of a world point. Throws ValidationError when the
/// point is at or behind the camera plane (z_cam <= 1e-6).
Projection project_point(const CameraModel& camera, const Vec3& p_world);

/// What was drawn for one arm; useful for checks that should not depend on
/// rasterization.
struct ArmLayer {
  ArmId arm = ArmId::kSingle;
  Projection center;
  std::array<std::optional<Projection>, 3> axis_tips;  // empty when behind the camera
  double disc_alpha = 0.0;
};

struct ActionMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, 3 per pixel
  std::vector<float> alpha;       // [0, 1] per pixel
  std::vector<ArmLayer> layers;

  Rgb color(int x, int y) const;
  float alpha_at(int x, int y) const { return alpha[static_cast<std::size_t>(y) * width + x]; }

  /// RGBA with alpha scaled to 0..255.
  Image8 to_rgba() const;
};

/// Renders the arms of one frame. All frames must share frame_index; at
/// most one per arm.
ActionMap render_action_map(const CameraModel& camera, const std::vector<ActionFrame>& frames, int width,
                            int height, const RenderStyle& style);

/// out = (1 - a*overlay_alpha) * frame + a*overlay_alpha * map color, rounded.
Image8 overlay(const Image8& frame, const ActionMap& map, const RenderStyle& style);

using Point2 = std::array<double, 2>;

/// Mean Euclidean distance between paired points.
double alignment_deviation(const std::vector<Point2>& projected, const std::vector<Point2>& detected);

struct AlignmentConfig {
  double max_deviation_px = 20.0;
  int vlm_frames = 4;  // overlay frames sent to the verifier

  void validate() const;
};

struct AlignmentResult {
  GateDecision decision = GateDecision::accept();
  std::optional<double> deviation_px;  // empty when the clip has no detections
  long pairs = 0;
};

/// Compares projected gripper centers with ingested detections matched on
/// (frame_index, arm). Clips without detections pass unmeasured.
AlignmentResult check_alignment(const ClipRecord& record, const AlignmentConfig& cfg);

struct VlmVerdict {
  bool aligned = false;
  std::string rationale;
};

/// POST /verify {"instruction", "frames_png_b64": [...]}. Accepts either
/// {"verdict": "aligned"|"misaligned", "rationale": ...} or a bare string
/// "aligned" / "misaligned: <rationale>". Anything else is a ProtocolError.
VlmVerdict verify_alignment_vlm(const std::vector<Image8>& overlay_frames, const std::string& instruction,
                                ServiceClient& client);

/// Distinct frame indices with action data, ascending.
std::vector<long> action_frame_indices(const ClipRecord& record);

/// Overlays for up to `count` equidistant action frames read from disk.
std::vector<Image8> overlay_frames(const ClipRecord& record, const RenderStyle& style, int count);

/// Writes `<out_dir>/actionmap/%06d.png` (RGBA) for every frame with action
/// data. Returns the number of files written.
long write_action_maps(const ClipRecord& record, const RenderStyle& style, const std::filesystem::path& out_dir);

}  // namespace curate
