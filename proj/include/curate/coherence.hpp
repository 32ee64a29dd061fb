// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Temporal-coherence filter over frame embeddings. The embedding model is
// external; it is reached through an EmbeddingProvider.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "curate/decision.hpp"
#include "curate/manifest.hpp"
#include "curate/service.hpp"

namespace curate {

class EmbeddingVector {
 public:
  static constexpr std::size_t kDim = 768;

  /// Throws ValidationError unless the vector has kDim finite, not-all-zero values.
  explicit EmbeddingVector(std::vector<float> values);

  std::span<const float> values() const { return values_; }
  double norm() const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<float> values_;
};

enum class ProviderKind { kSidecarFile, kHttpService, kDeterministicStub };

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual ProviderKind kind() const = 0;
  /// Embedding of clip-relative frame `frame_index` of `record`.
  virtual EmbeddingVector embed(const ClipRecord& record, long frame_index) = 0;
};

/// Vectors derived from a stable hash of (clip_id, frame_index): a per-clip
/// base direction plus per-frame noise of relative size `noise`.
class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit StubEmbeddingProvider(std::uint64_t seed = 0, double noise = 0.1) : seed_(seed), noise_(noise) {}
  ProviderKind kind() const override { return ProviderKind::kDeterministicStub; }
  EmbeddingVector embed(const ClipRecord& record, long frame_index) override;

 private:
  std::uint64_t seed_;
  double noise_;
};

/// Sidecar layout, all little-endian:
///   "CEMB" | u32 version=1 | u32 count | u32 dim=768
///   | count x u32 frame_index | count x dim x f32 values
/// stored as `<dir>/<clip_id>.emb`.
class SidecarEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit SidecarEmbeddingProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  ProviderKind kind() const override { return ProviderKind::kSidecarFile; }
  EmbeddingVector embed(const ClipRecord& record, long frame_index) override;

  static std::filesystem::path file_for(const std::filesystem::path& dir, const std::string& clip_id);

 private:
  std::filesystem::path dir_;
  std::string cached_clip_;
  std::map<long, std::vector<float>> cache_;
};

void write_sidecar(const std::filesystem::path& file, std::span<const long> frame_indices,
                   std::span<const EmbeddingVector> vectors);

/// POST /embed {clip_id, frame_index, image_b64} -> {vector: [768 floats]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(ServiceClient& client) : client_(client) {}
  ProviderKind kind() const override { return ProviderKind::kHttpService; }
  EmbeddingVector embed(const ClipRecord& record, long frame_index) override;

 private:
  ServiceClient& client_;
};

struct CoherenceConfig {
  int num_frames = 8;
  double min_mean_cosine = 0.85;

  void validate() const;
};

/// indices[j] = floor(j * (frame_count - 1) / (k - 1)).
std::vector<long> equidistant_indices(long frame_count, int k);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Mean cosine over consecutive pairs.
double coherence_score(std::span<const EmbeddingVector> frames);

struct CoherenceResult {
  GateDecision decision;
  double score = 0.0;
};

CoherenceResult coherence_filter(const ClipRecord& record, EmbeddingProvider& provider, const CoherenceConfig& cfg);

}  // namespace curate
