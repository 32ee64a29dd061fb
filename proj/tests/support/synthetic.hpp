// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic fixtures shared by the unit and acceptance suites.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "curate/image.hpp"
#include "curate/manifest.hpp"
#include "curate/rng.hpp"

namespace curate::testing {

/// Smooth band-limited texture: a sum of plane waves with random direction,
/// wavelength (10..28 px) and phase. Evaluated analytically, so a translated
/// copy is exact at sub-pixel shifts and wraps with no seams.
struct Texture {
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;

  explicit Texture(std::uint64_t seed, int count = 12) {
    DeterministicRng rng(seed);
    for (int i = 0; i < count; ++i) {
      const double angle = rng.unit() * 2.0 * M_PI;
      const double wavelength = 10.0 + 18.0 * rng.unit();
      const double k = 2.0 * M_PI / wavelength;
      waves.push_back({k * std::cos(angle), k * std::sin(angle), rng.unit() * 2.0 * M_PI, 8.0 + 8.0 * rng.unit()});
    }
  }

  double operator()(double x, double y) const {
    double v = 128.0;
    for (const Wave& w : waves) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
    return std::clamp(v, 0.0, 255.0);
  }

  /// Image whose content is moved by (sx, sy): out(x, y) = tex(x - sx, y - sy).
  GrayImage render(int w, int h, double sx = 0.0, double sy = 0.0) const {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<float>((*this)(x - sx, y - sy));
    return img;
  }
};

inline Image8 to_image8(const GrayImage& g) {
  Image8 out(g.width, g.height, 1);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(g.pixels[i], 0.0f, 255.0f)));
  }
  return out;
}

/// Valid record with an identity camera and no frames on disk.
inline ClipRecord make_record(std::string id, long frames = 120, std::string task = "task_a",
                              std::string dataset = "ds", std::string robot = "franka") {
  ClipRecord r;
  r.clip_id = std::move(id);
  r.source_dataset = dataset;
  r.sub_dataset = dataset;
  r.robot_type = std::move(robot);
  r.task_id = std::move(task);
  r.task_text = "pick up the block";
  r.frame_count = frames;
  r.fps = 30.0;
  r.width = 640;
  r.height = 480;
  r.frame_dir = "/nonexistent/" + r.clip_id;
  r.camera.fx = 500;
  r.camera.fy = 500;
  r.camera.cx = 320;
  r.camera.cy = 240;
  return r;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("curate_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace curate::testing
