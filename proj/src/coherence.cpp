// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/coherence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "curate/error.hpp"
#include "curate/rng.hpp"

namespace curate {

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
  if (values_.size() != kDim) {
    throw ValidationError("embedding must have " + std::to_string(kDim) + " values, got " +
                          std::to_string(values_.size()));
  }
  bool nonzero = false;
  for (float v : values_) {
    if (!std::isfinite(v)) throw ValidationError("embedding has a non-finite value");
    nonzero = nonzero || v != 0.0f;
  }
  if (!nonzero) throw ValidationError("embedding is all zero");
}

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (float v : values_) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

EmbeddingVector StubEmbeddingProvider::embed(const ClipRecord& record, long frame_index) {
  DeterministicRng base(derive_seed(seed_, record.clip_id));
  DeterministicRng jitter(derive_seed(seed_, record.clip_id + "@" + std::to_string(frame_index)));
  std::vector<float> v(EmbeddingVector::kDim);
  for (auto& x : v) {
    const double b = base.unit() * 2.0 - 1.0;
    const double n = jitter.unit() * 2.0 - 1.0;
    x = static_cast<float>(b + noise_ * n);
  }
  return EmbeddingVector(std::move(v));
}

// ---------------------------------------------------------------------------
// Sidecar files

namespace {

constexpr char kMagic[4] = {'C', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::filesystem::path SidecarEmbeddingProvider::file_for(const std::filesystem::path& dir, const std::string& clip_id) {
  return dir / (clip_id + ".emb");
}

void write_sidecar(const std::filesystem::path& file, std::span<const long> frame_indices,
                   std::span<const EmbeddingVector> vectors) {
  if (frame_indices.size() != vectors.size()) throw ValidationError("sidecar: index/vector count mismatch");
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(vectors.size()));
  put_u32(out, static_cast<std::uint32_t>(EmbeddingVector::kDim));
  for (long idx : frame_indices) put_u32(out, static_cast<std::uint32_t>(idx));
  for (const auto& v : vectors) {
    for (float f : v.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw Error("cannot write sidecar " + file.string());
}

EmbeddingVector SidecarEmbeddingProvider::embed(const ClipRecord& record, long frame_index) {
  if (cached_clip_ != record.clip_id) {
    cache_.clear();
    cached_clip_.clear();
    const auto file = file_for(dir_, record.clip_id);
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("missing embedding sidecar " + file.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0 || get_u32(bytes, 4) != kVersion) {
      throw Error("bad sidecar header in " + file.string());
    }
    const std::size_t count = get_u32(bytes, 8);
    const std::size_t dim = get_u32(bytes, 12);
    if (dim != EmbeddingVector::kDim || bytes.size() != 16 + count * 4 + count * dim * 4) {
      throw Error("truncated or mis-sized sidecar " + file.string());
    }
    const std::size_t values_at = 16 + count * 4;
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<float> v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = std::bit_cast<float>(get_u32(bytes, values_at + (i * dim + d) * 4));
      cache_[static_cast<long>(get_u32(bytes, 16 + i * 4))] = std::move(v);
    }
    cached_clip_ = record.clip_id;
  }
  auto it = cache_.find(frame_index);
  if (it == cache_.end()) {
    throw Error("missing embedding for (" + record.clip_id + ", " + std::to_string(frame_index) + ")");
  }
  return EmbeddingVector(it->second);
}

EmbeddingVector HttpEmbeddingProvider::embed(const ClipRecord& record, long frame_index) {
  const std::string image = read_file_bytes(record.frame_file(frame_index));
  const Json reply = client_.post(
      "/embed", Json{{"clip_id", record.clip_id}, {"frame_index", frame_index}, {"image_b64", base64_encode(image)}});
  if (!reply.is_object() || !reply.contains("vector") || !reply["vector"].is_array()) {
    throw ProtocolError("/embed reply for (" + record.clip_id + ", " + std::to_string(frame_index) +
                        ") has no vector");
  }
  try {
    return EmbeddingVector(reply["vector"].get<std::vector<float>>());
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("/embed reply vector is not numeric: ") + e.what());
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("/embed reply: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

void CoherenceConfig::validate() const {
  if (num_frames < 2) throw ValidationError("coherence.num_frames must be >= 2");
  if (!(min_mean_cosine > -1.0 && min_mean_cosine <= 1.0)) {
    throw ValidationError("coherence.min_mean_cosine must lie in (-1, 1]");
  }
}

std::vector<long> equidistant_indices(long frame_count, int k) {
  if (k < 2) throw ValidationError("equidistant_indices: k must be >= 2");
  if (frame_count < k) {
    throw ValidationError("equidistant_indices: frame_count " + std::to_string(frame_count) + " < k " +
                          std::to_string(k));
  }
  std::vector<long> out(k);
  for (long j = 0; j < k; ++j) out[j] = j * (frame_count - 1) / (k - 1);
  return out;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  const auto va = a.values(), vb = b.values();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    dot += static_cast<double>(va[i]) * vb[i];
    na += static_cast<double>(va[i]) * va[i];
    nb += static_cast<double>(vb[i]) * vb[i];
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine_similarity: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double coherence_score(std::span<const EmbeddingVector> frames) {
  if (frames.size() < 2) throw ValidationError("coherence_score: need at least two embeddings");
  double sum = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) sum += cosine_similarity(frames[i - 1], frames[i]);
  return sum / static_cast<double>(frames.size() - 1);
}

CoherenceResult coherence_filter(const ClipRecord& record, EmbeddingProvider& provider, const CoherenceConfig& cfg) {
  cfg.validate();
  std::vector<EmbeddingVector> frames;
  for (long idx : equidistant_indices(record.frame_count, cfg.num_frames)) frames.push_back(provider.embed(record, idx));
  CoherenceResult result;
  result.score = coherence_score(frames);
  result.decision =
      result.score >= cfg.min_mean_cosine ? GateDecision::accept() : GateDecision::reject(Reason::kIncoherent);
  return result;
}

}  // namespace curate
