// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reproducible randomness.
//
// Every random decision in the engine goes through DeterministicRng so that
// outputs are identical across platforms and standard libraries:
//   * the bit generator is std::mt19937_64, whose output sequence is fixed by
//     the C++ standard;
//   * bounded integers use rejection sampling on the raw 64-bit output rather
//     than std::uniform_int_distribution (whose algorithm is unspecified);
//   * sub-stream seeds are derived as splitmix64(seed ^ fnv1a64(label)).

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace curate {

/// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// One step of the splitmix64 finalizer; a good bijective 64-bit mixer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for an independent sub-stream named by `label`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). `bound` must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform real in [0, 1) with 53 bits of precision.
  double unit();

  /// In-place Fisher-Yates shuffle (Durstenfeld, high index downwards).
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace curate
