// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Corpus data model and the line-delimited JSON manifest format.
//
// A manifest is an immutable, clip_id-sorted set of ClipRecords. Every
// operation that changes a record returns a new value; frames on disk are
// never touched.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace curate {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Unit quaternion, serialized as [w, x, y, z].
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const;
  /// Right-handed rotation matrix; columns are the rotated basis axes.
  Mat3 to_matrix() const;

  bool operator==(const Quaternion&) const = default;
};

enum class ArmId { kLeft, kRight, kSingle };

std::string_view to_string(ArmId arm);
ArmId parse_arm(std::string_view text);

struct ActionFrame {
  long frame_index = 0;
  Vec3 position{};  // meters, world frame
  Quaternion orientation;
  double gripper_openness = 0.0;  // 0 closed .. 1 open
  ArmId arm_id = ArmId::kSingle;

  bool operator==(const ActionFrame&) const = default;
};

/// Pinhole intrinsics plus world-to-camera extrinsics (p_cam = R p_world + t).
struct CameraModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 translation{};

  bool operator==(const CameraModel&) const = default;
};

/// Four-phase structured caption.
struct Caption {
  std::string scene_setup;
  std::string action_detail;
  std::string state_transition;
  std::string camera_summary;

  bool operator==(const Caption&) const = default;
};

/// Externally detected gripper center for one frame.
struct GripperDetection {
  long frame_index = 0;
  double u = 0.0, v = 0.0;
  ArmId arm_id = ArmId::kSingle;

  bool operator==(const GripperDetection&) const = default;
};

enum class Decision { kAccept, kReject };

std::string_view to_string(Decision d);

struct StageEntry {
  Decision decision = Decision::kAccept;
  std::string reason;

  bool operator==(const StageEntry&) const = default;
};

/// Pipeline stage names accepted by the status ledger.
const std::vector<std::string>& known_stages();
bool is_known_stage(std::string_view stage);

struct ClipRecord {
  std::string clip_id;
  std::string source_dataset;
  std::string sub_dataset;
  std::string robot_type;
  std::string task_id;
  std::string task_text;
  std::optional<Caption> caption;
  long frame_count = 0;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  std::string frame_dir;
  // First file index of this clip inside frame_dir; nonzero for segments.
  long frame_offset = 0;
  CameraModel camera;
  std::vector<ActionFrame> action_frames;
  std::optional<std::vector<long>> frame_task_index;
  std::optional<bool> static_camera;
  std::vector<GripperDetection> gripper_detections;
  std::map<std::string, StageEntry> status;
  std::map<std::string, double> scores;

  /// File holding clip-relative frame `index`.
  std::filesystem::path frame_file(long index) const;

  bool operator==(const ClipRecord&) const = default;
};

/// Every violated invariant of `r`, each naming the offending field.
std::vector<std::string> validate_record(const ClipRecord& r);

/// Throws ValidationError naming the record and the first violations.
void require_valid(const ClipRecord& r);

class Manifest {
 public:
  Manifest() = default;
  /// Validates every record, rejects duplicate ids, sorts by clip_id.
  explicit Manifest(std::vector<ClipRecord> records);

  const std::vector<ClipRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const ClipRecord* find(std::string_view clip_id) const;

  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  bool operator==(const Manifest&) const = default;

 private:
  std::vector<ClipRecord> records_;
};

/// Canonical single-line JSON for one record (stable key order).
std::string serialize_record(const ClipRecord& r);
/// Inverse of serialize_record; shape errors only, no invariant checks.
ClipRecord parse_record(std::string_view line);

/// Reads a JSONL manifest. Errors carry the 1-based line number.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text);
void save_manifest(const std::filesystem::path& path, const Manifest& m);
std::string dump_manifest(const Manifest& m);

/// Union of two manifests. Shared ids must be byte-identical records.
Manifest merge_manifests(const Manifest& a, const Manifest& b);

/// Appends a ledger entry. Re-recording the identical entry is a no-op; any
/// other entry for an already-recorded stage is an error.
ClipRecord record_decision(ClipRecord record, std::string_view stage, Decision decision,
                           std::string reason);

}  // namespace curate
