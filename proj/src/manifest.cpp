// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "curate/error.hpp"
#include "curate/image.hpp"
#include "json.hpp"

namespace curate {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Mat3 Quaternion::to_matrix() const {
  Mat3 m{};
  m[0] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)};
  m[1] = {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)};
  m[2] = {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
  return m;
}

std::string_view to_string(ArmId arm) {
  switch (arm) {
    case ArmId::kLeft: return "left";
    case ArmId::kRight: return "right";
    case ArmId::kSingle: return "single";
  }
  return "single";
}

ArmId parse_arm(std::string_view text) {
  if (text == "left") return ArmId::kLeft;
  if (text == "right") return ArmId::kRight;
  if (text == "single") return ArmId::kSingle;
  throw ValidationError("unknown arm_id \"" + std::string(text) + "\"");
}

std::string_view to_string(Decision d) { return d == Decision::kAccept ? "accept" : "reject"; }

namespace {

Decision parse_decision(std::string_view text) {
  if (text == "accept") return Decision::kAccept;
  if (text == "reject") return Decision::kReject;
  throw ValidationError("unknown decision \"" + std::string(text) + "\"");
}

}  // namespace

const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> stages = {"ingest",    "gate",      "segment", "flow",
                                                  "coherence", "alignment", "balance", "split"};
  return stages;
}

bool is_known_stage(std::string_view stage) {
  const auto& s = known_stages();
  return std::find(s.begin(), s.end(), stage) != s.end();
}

std::filesystem::path ClipRecord::frame_file(long index) const {
  return frame_path(frame_dir, frame_offset + index);
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate_record(const ClipRecord& r) {
  std::vector<std::string> issues;
  auto fail = [&](std::string msg) { issues.push_back(std::move(msg)); };

  if (r.clip_id.empty()) fail("clip_id: empty");
  if (r.frame_count < 1) fail("frame_count: must be >= 1, got " + std::to_string(r.frame_count));
  if (!(r.fps > 0.0) || !std::isfinite(r.fps)) fail("fps: must be > 0");
  if (r.width <= 0) fail("width: must be > 0");
  if (r.height <= 0) fail("height: must be > 0");
  if (r.frame_offset < 0) fail("frame_offset: must be >= 0");

  const CameraModel& cam = r.camera;
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) fail("camera.fx/fy: must be > 0");
  if (!std::isfinite(cam.cx) || !std::isfinite(cam.cy)) fail("camera.cx/cy: not finite");
  {
    const Mat3& R = cam.rotation;
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += R[k][i] * R[k][j];
        worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    }
    const double det = R[0][0] * (R[1][1] * R[2][2] - R[1][2] * R[2][1]) -
                       R[0][1] * (R[1][0] * R[2][2] - R[1][2] * R[2][0]) +
                       R[0][2] * (R[1][0] * R[2][1] - R[1][1] * R[2][0]);
    if (!(worst <= 1e-6)) fail("camera.rotation: not orthonormal");
    if (!(std::abs(det - 1.0) <= 1e-6)) fail("camera.rotation: determinant is not +1");
  }
  for (double t : cam.translation) {
    if (!std::isfinite(t)) fail("camera.translation: not finite");
  }

  std::map<ArmId, long> last_index;
  for (std::size_t i = 0; i < r.action_frames.size(); ++i) {
    const ActionFrame& a = r.action_frames[i];
    const std::string where = "action_frames[" + std::to_string(i) + "]";
    if (a.frame_index < 0 || a.frame_index >= r.frame_count) {
      fail(where + ".frame_index: " + std::to_string(a.frame_index) + " outside [0, frame_count)");
    }
    auto it = last_index.find(a.arm_id);
    if (it != last_index.end() && a.frame_index <= it->second) {
      fail(where + ".frame_index: not strictly increasing for arm " + std::string(to_string(a.arm_id)));
    }
    last_index[a.arm_id] = a.frame_index;
    if (!(std::abs(a.orientation.norm() - 1.0) <= 1e-6)) fail(where + ".orientation: not a unit quaternion");
    if (!(a.gripper_openness >= 0.0 && a.gripper_openness <= 1.0)) {
      std::ostringstream os;
      os << where << ".gripper_openness: " << a.gripper_openness << " outside [0, 1]";
      fail(os.str());
    }
    for (double p : a.position) {
      if (!std::isfinite(p)) fail(where + ".position: not finite");
    }
  }
  if (r.frame_task_index && static_cast<long>(r.frame_task_index->size()) != r.frame_count) {
    fail("frame_task_index: length " + std::to_string(r.frame_task_index->size()) +
         " != frame_count " + std::to_string(r.frame_count));
  }
  for (const auto& d : r.gripper_detections) {
    if (d.frame_index < 0 || d.frame_index >= r.frame_count) {
      fail("gripper_detections: frame_index " + std::to_string(d.frame_index) + " out of range");
    }
  }
  for (const auto& [stage, entry] : r.status) {
    if (!is_known_stage(stage)) fail("status: unknown stage \"" + stage + "\"");
  }
  for (const auto& [name, value] : r.scores) {
    if (!std::isfinite(value)) fail("scores." + name + ": not finite");
  }
  return issues;
}

void require_valid(const ClipRecord& r) {
  const auto issues = validate_record(r);
  if (issues.empty()) return;
  std::string msg = "record \"" + r.clip_id + "\": " + issues.front();
  for (std::size_t i = 1; i < issues.size(); ++i) msg += "; " + issues[i];
  throw ValidationError(msg);
}

// ---------------------------------------------------------------------------
// Manifest

Manifest::Manifest(std::vector<ClipRecord> records) : records_(std::move(records)) {
  for (const auto& r : records_) require_valid(r);
  std::sort(records_.begin(), records_.end(),
            [](const ClipRecord& a, const ClipRecord& b) { return a.clip_id < b.clip_id; });
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (records_[i].clip_id == records_[i - 1].clip_id) {
      throw ValidationError("duplicate clip_id \"" + records_[i].clip_id + "\"");
    }
  }
}

const ClipRecord* Manifest::find(std::string_view clip_id) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), clip_id,
                             [](const ClipRecord& r, std::string_view id) { return r.clip_id < id; });
  if (it == records_.end() || it->clip_id != clip_id) return nullptr;
  return &*it;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ojson vec_json(const Vec3& v) { return ojson::array({v[0], v[1], v[2]}); }

ojson record_json(const ClipRecord& r) {
  ojson j;
  j["clip_id"] = r.clip_id;
  j["source_dataset"] = r.source_dataset;
  j["sub_dataset"] = r.sub_dataset;
  j["robot_type"] = r.robot_type;
  j["task_id"] = r.task_id;
  j["task_text"] = r.task_text;
  if (r.caption) {
    j["caption"] = {{"scene_setup", r.caption->scene_setup},
                    {"action_detail", r.caption->action_detail},
                    {"state_transition", r.caption->state_transition},
                    {"camera_summary", r.caption->camera_summary}};
  }
  j["frame_count"] = r.frame_count;
  j["fps"] = r.fps;
  j["width"] = r.width;
  j["height"] = r.height;
  j["frame_dir"] = r.frame_dir;
  if (r.frame_offset != 0) j["frame_offset"] = r.frame_offset;
  ojson cam;
  cam["fx"] = r.camera.fx;
  cam["fy"] = r.camera.fy;
  cam["cx"] = r.camera.cx;
  cam["cy"] = r.camera.cy;
  cam["rotation"] = ojson::array();
  for (const auto& row : r.camera.rotation) cam["rotation"].push_back(vec_json(row));
  cam["translation"] = vec_json(r.camera.translation);
  j["camera"] = std::move(cam);
  ojson actions = ojson::array();
  for (const auto& a : r.action_frames) {
    ojson aj;
    aj["frame_index"] = a.frame_index;
    aj["position"] = vec_json(a.position);
    aj["orientation"] = ojson::array({a.orientation.w, a.orientation.x, a.orientation.y, a.orientation.z});
    aj["gripper_openness"] = a.gripper_openness;
    aj["arm_id"] = to_string(a.arm_id);
    actions.push_back(std::move(aj));
  }
  j["action_frames"] = std::move(actions);
  if (r.frame_task_index) j["frame_task_index"] = *r.frame_task_index;
  if (r.static_camera) j["static_camera"] = *r.static_camera;
  if (!r.gripper_detections.empty()) {
    ojson dets = ojson::array();
    for (const auto& d : r.gripper_detections) {
      dets.push_back({{"frame_index", d.frame_index}, {"u", d.u}, {"v", d.v}, {"arm_id", to_string(d.arm_id)}});
    }
    j["gripper_detections"] = std::move(dets);
  }
  ojson status = ojson::object();
  for (const auto& [stage, e] : r.status) status[stage] = {{"decision", to_string(e.decision)}, {"reason", e.reason}};
  j["status"] = std::move(status);
  ojson scores = ojson::object();
  for (const auto& [k, v] : r.scores) scores[k] = v;
  j["scores"] = std::move(scores);
  return j;
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ValidationError(std::string("missing field \"") + name + "\"");
  return *it;
}

template <typename T>
T get_as(const json& j, const char* name) {
  try {
    return field(j, name).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field \"") + name + "\" has the wrong type");
  }
}

Vec3 parse_vec3_value(const json& v, const char* name) {
  if (!v.is_array() || v.size() != 3) throw ValidationError(std::string("field \"") + name + "\" must be a 3-vector");
  Vec3 out{};
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ValidationError(std::string("field \"") + name + "\" must be numeric");
    out[i] = v[i].get<double>();
  }
  return out;
}

Vec3 parse_vec3(const json& j, const char* name) { return parse_vec3_value(field(j, name), name); }

}  // namespace

std::string serialize_record(const ClipRecord& r) { return record_json(r).dump(); }

ClipRecord parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("record is not a JSON object");

  ClipRecord r;
  r.clip_id = get_as<std::string>(j, "clip_id");
  try {
    r.source_dataset = get_as<std::string>(j, "source_dataset");
    r.sub_dataset = j.contains("sub_dataset") ? get_as<std::string>(j, "sub_dataset") : r.source_dataset;
    r.robot_type = get_as<std::string>(j, "robot_type");
    r.task_id = get_as<std::string>(j, "task_id");
    r.task_text = j.contains("task_text") ? get_as<std::string>(j, "task_text") : std::string();
    if (auto it = j.find("caption"); it != j.end() && !it->is_null()) {
      r.caption = Caption{get_as<std::string>(*it, "scene_setup"), get_as<std::string>(*it, "action_detail"),
                          get_as<std::string>(*it, "state_transition"), get_as<std::string>(*it, "camera_summary")};
    }
    r.frame_count = get_as<long>(j, "frame_count");
    r.fps = get_as<double>(j, "fps");
    r.width = get_as<int>(j, "width");
    r.height = get_as<int>(j, "height");
    r.frame_dir = get_as<std::string>(j, "frame_dir");
    if (j.contains("frame_offset")) r.frame_offset = get_as<long>(j, "frame_offset");

    const json& cam = field(j, "camera");
    r.camera.fx = get_as<double>(cam, "fx");
    r.camera.fy = get_as<double>(cam, "fy");
    r.camera.cx = get_as<double>(cam, "cx");
    r.camera.cy = get_as<double>(cam, "cy");
    const json& rot = field(cam, "rotation");
    if (!rot.is_array() || rot.size() != 3) throw ValidationError("field \"rotation\" must be 3x3");
    for (int i = 0; i < 3; ++i) r.camera.rotation[i] = parse_vec3_value(rot[i], "rotation");
    r.camera.translation = parse_vec3(cam, "translation");

    if (auto it = j.find("action_frames"); it != j.end()) {
      for (const json& a : *it) {
        ActionFrame f;
        f.frame_index = get_as<long>(a, "frame_index");
        f.position = parse_vec3(a, "position");
        const auto q = get_as<std::vector<double>>(a, "orientation");
        if (q.size() != 4) throw ValidationError("field \"orientation\" must be [w, x, y, z]");
        f.orientation = {q[0], q[1], q[2], q[3]};
        f.gripper_openness = get_as<double>(a, "gripper_openness");
        f.arm_id = a.contains("arm_id") ? parse_arm(get_as<std::string>(a, "arm_id")) : ArmId::kSingle;
        r.action_frames.push_back(f);
      }
    }
    if (auto it = j.find("frame_task_index"); it != j.end() && !it->is_null()) {
      r.frame_task_index = get_as<std::vector<long>>(j, "frame_task_index");
    }
    if (auto it = j.find("static_camera"); it != j.end() && !it->is_null()) {
      r.static_camera = get_as<bool>(j, "static_camera");
    }
    if (auto it = j.find("gripper_detections"); it != j.end()) {
      for (const json& d : *it) {
        GripperDetection g;
        g.frame_index = get_as<long>(d, "frame_index");
        g.u = get_as<double>(d, "u");
        g.v = get_as<double>(d, "v");
        g.arm_id = d.contains("arm_id") ? parse_arm(get_as<std::string>(d, "arm_id")) : ArmId::kSingle;
        r.gripper_detections.push_back(g);
      }
    }
    if (auto it = j.find("status"); it != j.end()) {
      for (const auto& [stage, e] : it->items()) {
        r.status[stage] = StageEntry{parse_decision(get_as<std::string>(e, "decision")),
                                     e.contains("reason") ? get_as<std::string>(e, "reason") : std::string()};
      }
    }
    if (auto it = j.find("scores"); it != j.end()) {
      for (const auto& [k, v] : it->items()) {
        if (!v.is_number()) throw ValidationError("scores." + k + " must be numeric");
        r.scores[k] = v.get<double>();
      }
    }
  } catch (const ValidationError& e) {
    throw ValidationError("record \"" + r.clip_id + "\": " + e.what());
  }
  return r;
}

Manifest parse_manifest(std::string_view text) {
  std::vector<ClipRecord> records;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    try {
      ClipRecord r = parse_record(line);
      if (!seen.insert(r.clip_id).second) throw ValidationError("duplicate clip_id \"" + r.clip_id + "\"");
      require_valid(r);
      records.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (end == text.size()) break;
  }
  return Manifest(std::move(records));
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

std::string dump_manifest(const Manifest& m) {
  std::string out;
  for (const auto& r : m) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << dump_manifest(m);
  if (!out) throw Error("short write on " + path.string());
}

Manifest merge_manifests(const Manifest& a, const Manifest& b) {
  std::vector<ClipRecord> out;
  out.reserve(a.size() + b.size());
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->clip_id < ib->clip_id)) {
      out.push_back(*ia++);
    } else if (ia == a.end() || ib->clip_id < ia->clip_id) {
      out.push_back(*ib++);
    } else {
      if (serialize_record(*ia) != serialize_record(*ib)) {
        throw ValidationError("conflicting records for clip_id \"" + ia->clip_id + "\"");
      }
      out.push_back(*ia++);
      ++ib;
    }
  }
  return Manifest(std::move(out));
}

ClipRecord record_decision(ClipRecord record, std::string_view stage, Decision decision, std::string reason) {
  if (!is_known_stage(stage)) throw ValidationError("unknown pipeline stage \"" + std::string(stage) + "\"");
  StageEntry entry{decision, std::move(reason)};
  auto it = record.status.find(std::string(stage));
  if (it != record.status.end()) {
    if (it->second == entry) return record;
    throw ValidationError("record \"" + record.clip_id + "\": stage \"" + std::string(stage) + "\" already recorded as " +
                          std::string(to_string(it->second.decision)) + " (" + it->second.reason + ")");
  }
  record.status.emplace(std::string(stage), std::move(entry));
  return record;
}

}  // namespace curate
