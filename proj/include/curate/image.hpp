// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace curate {

/// Single-channel floating point image, row-major, values nominally 0..255.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return pixels.empty(); }
};

/// Interleaved 8-bit image with 1, 3 or 4 channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image8& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

/// Luma with ITU-R BT.601 weights (0.299, 0.587, 0.114). Gray input passes through.
GrayImage to_gray(const Image8& img);

/// Gray image of `img` rounded back into 8 bits.
Image8 to_gray8(const Image8& img);

/// Reads any 8/16-bit PNG; 16-bit samples are reduced to 8, palettes expanded.
/// Alpha is kept when present (4 channels), gray+alpha is widened to RGBA.
Image8 read_png(const std::filesystem::path& path);

/// Writes 1, 3 or 4 channel images as 8-bit PNG with fixed settings, so equal
/// images always produce equal files.
void write_png(const std::filesystem::path& path, const Image8& img);

/// Encodes to an in-memory PNG byte string.
std::string encode_png(const Image8& img);

/// Path of frame `index` inside a frame directory (`%06d.png`, 0-based).
std::filesystem::path frame_path(const std::filesystem::path& frame_dir, long index);

}  // namespace curate
