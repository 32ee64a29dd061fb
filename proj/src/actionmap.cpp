// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/actionmap.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "curate/error.hpp"

namespace curate {

void RenderStyle::validate() const {
  if (!(axis_world_length > 0.0)) throw ValidationError("actionmap.axis_world_length must be > 0");
  if (gripper_radius_px <= 0) throw ValidationError("actionmap.gripper_radius_px must be > 0");
  if (arrow_thickness_px <= 0) throw ValidationError("actionmap.arrow_thickness_px must be > 0");
  if (!(overlay_alpha > 0.0 && overlay_alpha <= 1.0)) {
    throw ValidationError("actionmap.overlay_alpha must lie in (0, 1]");
  }
}

Projection project_point(const CameraModel& cam, const Vec3& p) {
  Vec3 c{};
  for (int i = 0; i < 3; ++i) {
    c[i] = cam.rotation[i][0] * p[0] + cam.rotation[i][1] * p[1] + cam.rotation[i][2] * p[2] + cam.translation[i];
  }
  if (!(c[2] > 1e-6)) throw ValidationError("point is behind the camera (z_cam = " + std::to_string(c[2]) + ")");
  return {cam.fx * c[0] / c[2] + cam.cx, cam.fy * c[1] / c[2] + cam.cy, c[2]};
}

Rgb ActionMap::color(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

Image8 ActionMap::to_rgba() const {
  Image8 out(width, height, 4);
  for (std::size_t p = 0; p < alpha.size(); ++p) {
    for (int c = 0; c < 3; ++c) out.data[p * 4 + c] = rgb[p * 3 + c];
    out.data[p * 4 + 3] = static_cast<std::uint8_t>(std::lround(std::clamp(alpha[p], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

namespace {

// Writes into the map. `mask` selects the channels this arm may touch.
struct Painter {
  ActionMap& map;
  std::array<bool, 3> mask;

  void plot(int x, int y, Rgb c, float a) {
    if (x < 0 || y < 0 || x >= map.width || y >= map.height) return;
    const std::size_t p = static_cast<std::size_t>(y) * map.width + x;
    const std::uint8_t v[3] = {c.r, c.g, c.b};
    for (int k = 0; k < 3; ++k)
      if (mask[k]) map.rgb[p * 3 + k] = v[k];
    map.alpha[p] = std::max(map.alpha[p], a);
  }

  void disc(double cu, double cv, int radius, Rgb c, float a) {
    const double r2 = static_cast<double>(radius) * radius;
    const int x0 = std::max(0, static_cast<int>(std::floor(cu - radius)));
    const int x1 = std::min(map.width - 1, static_cast<int>(std::ceil(cu + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cv - radius)));
    const int y1 = std::min(map.height - 1, static_cast<int>(std::ceil(cv + radius)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if ((x - cu) * (x - cu) + (y - cv) * (y - cv) <= r2) plot(x, y, c, a);
  }

  // Pixels whose centre lies within thickness/2 of the segment.
  void segment(double ax, double ay, double bx, double by, int thickness, Rgb c) {
    const double half = thickness / 2.0;
    const double lx0 = std::min(ax, bx) - half, lx1 = std::max(ax, bx) + half;
    const double ly0 = std::min(ay, by) - half, ly1 = std::max(ay, by) + half;
    if (lx1 < 0 || ly1 < 0 || lx0 > map.width - 1 || ly0 > map.height - 1) return;
    const int x0 = std::max(0, static_cast<int>(std::floor(lx0)));
    const int x1 = std::min(map.width - 1, static_cast<int>(std::ceil(lx1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(ly0)));
    const int y1 = std::min(map.height - 1, static_cast<int>(std::ceil(ly1)));
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double t = len2 > 0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = ax + t * dx - x, ey = ay + t * dy - y;
        if (ex * ex + ey * ey <= half * half) plot(x, y, c, 1.0f);
      }
    }
  }

  void arrow(const Projection& from, const Projection& to, int thickness, Rgb c) {
    segment(from.u, from.v, to.u, to.v, thickness, c);
    const double dx = to.u - from.u, dy = to.v - from.v;
    const double len = std::hypot(dx, dy);
    if (len < 4.0) return;
    const double head = std::min(0.25 * len, 10.0);
    const double ang = std::atan2(dy, dx);
    for (double side : {-1.0, 1.0}) {
      const double a = ang + M_PI - side * M_PI / 6.0;
      segment(to.u, to.v, to.u + head * std::cos(a), to.v + head * std::sin(a), thickness, c);
    }
  }
};

Rgb channel_color(ArmId arm, std::uint8_t level) {
  return arm == ArmId::kLeft ? Rgb{level, 0, 0} : Rgb{0, 0, level};
}

}  // namespace

ActionMap render_action_map(const CameraModel& camera, const std::vector<ActionFrame>& frames, int width,
                            int height, const RenderStyle& style) {
  style.validate();
  if (width <= 0 || height <= 0) throw ValidationError("action map size must be positive");
  ActionMap map;
  map.width = width;
  map.height = height;
  map.rgb.assign(static_cast<std::size_t>(width) * height * 3, 0);
  map.alpha.assign(static_cast<std::size_t>(width) * height, 0.0f);

  std::set<ArmId> seen;
  for (const auto& f : frames) {
    if (f.frame_index != frames.front().frame_index) throw ValidationError("action frames span several frame indices");
    if (!seen.insert(f.arm_id).second) throw ValidationError("arm " + std::string(to_string(f.arm_id)) + " drawn twice");
  }

  // Fixed draw order: single, left, right.
  std::vector<const ActionFrame*> ordered;
  for (ArmId arm : {ArmId::kSingle, ArmId::kLeft, ArmId::kRight})
    for (const auto& f : frames)
      if (f.arm_id == arm) ordered.push_back(&f);

  static constexpr std::uint8_t kAxisLevel[3] = {255, 170, 85};
  for (const ActionFrame* f : ordered) {
    ArmLayer layer;
    layer.arm = f->arm_id;
    layer.center = project_point(camera, f->position);
    const double open = std::clamp(f->gripper_openness, 0.0, 1.0);
    layer.disc_alpha = style.invert_openness ? 1.0 - open : open;

    const Mat3 rot = f->orientation.to_matrix();
    for (int i = 0; i < 3; ++i) {
      Vec3 tip{};
      for (int k = 0; k < 3; ++k) tip[k] = f->position[k] + style.axis_world_length * rot[k][i];
      try {
        layer.axis_tips[i] = project_point(camera, tip);
      } catch (const ValidationError&) {
        layer.axis_tips[i].reset();
      }
    }

    const bool single = f->arm_id == ArmId::kSingle;
    Painter paint{map, single ? std::array<bool, 3>{true, true, true}
                              : std::array<bool, 3>{f->arm_id == ArmId::kLeft, false, f->arm_id == ArmId::kRight}};
    if (layer.disc_alpha > 0.0) {
      paint.disc(layer.center.u, layer.center.v, style.gripper_radius_px,
                 single ? style.single_arm_disc : channel_color(f->arm_id, 255), static_cast<float>(layer.disc_alpha));
    }
    for (int i = 0; i < 3; ++i) {
      if (!layer.axis_tips[i]) continue;
      paint.arrow(layer.center, *layer.axis_tips[i], style.arrow_thickness_px,
                  single ? style.axis_colors[i] : channel_color(f->arm_id, kAxisLevel[i]));
    }
    map.layers.push_back(layer);
  }
  return map;
}

Image8 overlay(const Image8& frame, const ActionMap& map, const RenderStyle& style) {
  style.validate();
  if (frame.width != map.width || frame.height != map.height) {
    throw ValidationError("overlay: frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                          ", map is " + std::to_string(map.width) + "x" + std::to_string(map.height));
  }
  if (frame.channels != 3) throw ValidationError("overlay: frame must be RGB");
  Image8 out = frame;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const double a = map.alpha_at(x, y) * style.overlay_alpha;
      if (a <= 0.0) continue;
      const Rgb c = map.color(x, y);
      const std::uint8_t mc[3] = {c.r, c.g, c.b};
      for (int k = 0; k < 3; ++k) {
        const double v = (1.0 - a) * frame.at(x, y, k) + a * mc[k];
        out.at(x, y, k) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

double alignment_deviation(const std::vector<Point2>& projected, const std::vector<Point2>& detected) {
  if (projected.size() != detected.size()) {
    throw ValidationError("alignment: " + std::to_string(projected.size()) + " projected vs " +
                          std::to_string(detected.size()) + " detected centers");
  }
  if (projected.empty()) throw ValidationError("alignment: no centers");
  double total = 0.0;
  for (std::size_t i = 0; i < projected.size(); ++i) {
    total += std::hypot(projected[i][0] - detected[i][0], projected[i][1] - detected[i][1]);
  }
  return total / static_cast<double>(projected.size());
}

void AlignmentConfig::validate() const {
  if (!(max_deviation_px > 0.0)) throw ValidationError("alignment.max_deviation_px must be > 0");
  if (vlm_frames < 1) throw ValidationError("alignment.vlm_frames must be >= 1");
}

AlignmentResult check_alignment(const ClipRecord& record, const AlignmentConfig& cfg) {
  cfg.validate();
  std::vector<Point2> projected, detected;
  for (const auto& det : record.gripper_detections) {
    auto it = std::find_if(record.action_frames.begin(), record.action_frames.end(), [&](const ActionFrame& f) {
      return f.frame_index == det.frame_index && f.arm_id == det.arm_id;
    });
    if (it == record.action_frames.end()) continue;
    const Projection p = project_point(record.camera, it->position);
    projected.push_back({p.u, p.v});
    detected.push_back({det.u, det.v});
  }
  AlignmentResult res;
  res.pairs = static_cast<long>(projected.size());
  if (projected.empty()) return res;
  res.deviation_px = alignment_deviation(projected, detected);
  if (*res.deviation_px > cfg.max_deviation_px) res.decision = GateDecision::reject(Reason::kMisaligned);
  return res;
}

VlmVerdict verify_alignment_vlm(const std::vector<Image8>& frames, const std::string& instruction,
                                ServiceClient& client) {
  Json body;
  body["instruction"] = instruction;
  body["frames_png_b64"] = Json::array();
  for (const auto& f : frames) body["frames_png_b64"].push_back(base64_encode(encode_png(f)));
  const Json reply = client.post("/verify", body);

  auto from_text = [](const std::string& text) -> std::optional<VlmVerdict> {
    if (text == "aligned") return VlmVerdict{true, ""};
    if (text == "misaligned") return VlmVerdict{false, ""};
    const std::string prefix = "misaligned:";
    if (text.rfind(prefix, 0) == 0) {
      std::string why = text.substr(prefix.size());
      why.erase(0, why.find_first_not_of(' '));
      return VlmVerdict{false, why};
    }
    return std::nullopt;
  };

  if (reply.is_string()) {
    if (auto v = from_text(reply.get<std::string>())) return *v;
  } else if (reply.is_object() && reply.contains("verdict") && reply["verdict"].is_string()) {
    if (auto v = from_text(reply["verdict"].get<std::string>())) {
      if (reply.contains("rationale")) {
        if (!reply["rationale"].is_string()) throw ProtocolError("/verify: rationale is not a string");
        v->rationale = reply["rationale"].get<std::string>();
      }
      return *v;
    }
  }
  throw ProtocolError("/verify: unexpected reply " + reply.dump());
}

std::vector<long> action_frame_indices(const ClipRecord& record) {
  std::set<long> idx;
  for (const auto& f : record.action_frames) idx.insert(f.frame_index);
  return {idx.begin(), idx.end()};
}

namespace {

std::vector<ActionFrame> frames_at(const ClipRecord& record, long index) {
  std::vector<ActionFrame> out;
  for (const auto& f : record.action_frames)
    if (f.frame_index == index) out.push_back(f);
  return out;
}

Image8 as_rgb(const Image8& img) {
  if (img.channels == 3) return img;
  Image8 out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, img.channels >= 3 ? c : 0);
  return out;
}

}  // namespace

std::vector<Image8> overlay_frames(const ClipRecord& record, const RenderStyle& style, int count) {
  const auto indices = action_frame_indices(record);
  std::vector<Image8> out;
  if (indices.empty() || count <= 0) return out;
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(count), indices.size());
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t pick = k == 1 ? 0 : j * (indices.size() - 1) / (k - 1);
    const long fi = indices[pick];
    const Image8 frame = as_rgb(read_png(record.frame_file(fi)));
    out.push_back(overlay(frame, render_action_map(record.camera, frames_at(record, fi), frame.width, frame.height, style),
                          style));
  }
  return out;
}

long write_action_maps(const ClipRecord& record, const RenderStyle& style, const std::filesystem::path& out_dir) {
  const auto dir = out_dir / "actionmap";
  std::filesystem::create_directories(dir);
  long n = 0;
  for (long fi : action_frame_indices(record)) {
    const auto map = render_action_map(record.camera, frames_at(record, fi), record.width, record.height, style);
    write_png(frame_path(dir, fi), map.to_rgba());
    ++n;
  }
  return n;
}

}  // namespace curate
