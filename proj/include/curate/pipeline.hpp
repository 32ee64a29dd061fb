// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage orchestration: gate -> flow -> coherence -> alignment -> balance ->
// split. Every stage takes the previous stage's accepted records, records
// its decision in each record's status ledger and reports counts. Output is
// a pure function of (manifest, config).

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "curate/actionmap.hpp"
#include "curate/balance.hpp"
#include "curate/coherence.hpp"
#include "curate/flow.hpp"
#include "curate/gate.hpp"
#include "curate/judge.hpp"
#include "curate/manifest.hpp"
#include "curate/metrics.hpp"
#include "curate/service.hpp"

namespace curate {

struct ServiceConfig {
  std::string embed_url;
  std::string vlm_url;
  std::string proposer_url;
  std::string scorer_url;
  long timeout_ms = 60000;
  int max_attempts = 3;
  std::string transcript;  // append every exchange here when set
  std::string replay;      // answer from this transcript instead of the network
};

struct SplitRatios {
  double sft = 0.8;
  double rl = 0.1;
  double a2v = 0.1;

  void validate() const;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  GateConfig gate;
  FlowConfig flow;
  CoherenceConfig coherence;
  std::string coherence_provider = "stub";  // stub | sidecar | http
  std::string sidecar_dir;
  double stub_noise = 0.1;
  AlignmentConfig alignment;
  RenderStyle actionmap;
  SamplingConfig balance;
  MetricConfig metrics;
  SplitRatios split;
  ServiceConfig services;
  std::map<std::string, bool> enabled{{"gate", true},      {"flow", true},    {"coherence", true},
                                      {"alignment", true}, {"balance", true}, {"split", true}};

  void validate() const;
  bool stage_enabled(const std::string& stage) const { return enabled.at(stage); }
};

/// Flat `<module>.<field>` JSON object. Unknown keys and wrongly typed
/// values are ValidationErrors.
PipelineConfig config_from_json(const Json& j);
PipelineConfig load_config(const std::filesystem::path& path);
/// Every key with its effective value, sorted.
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

struct StageReport {
  std::string stage;
  bool enabled = true;
  long input = 0;
  long accepted = 0;
  long rejected = 0;
  long output = 0;  // records handed on (segments count individually)
  std::map<std::string, long> reasons;
};

nlohmann::ordered_json stage_report_json(const StageReport& r);

struct StageResult {
  Manifest accepted;
  Manifest rejected;
  StageReport report;
};

/// Quality gate plus task segmentation. Uses scores["border_flow_median"]
/// as the camera-motion statistic when present.
StageResult run_gate(const Manifest& in, const GateConfig& cfg);

/// Motion filter. Uses scores flow_clip_mean / flow_net_to_path_ratio when
/// both are present, otherwise computes flow from the frames; in that case
/// the border median is also checked against the camera-motion threshold
/// when the gate had no statistic to work with.
StageResult run_flow(const Manifest& in, const FlowConfig& cfg, const GateConfig& gate);

StageResult run_coherence(const Manifest& in, EmbeddingProvider& provider, const CoherenceConfig& cfg);

/// Detection deviation check, then (when a client is given) the VLM verdict
/// on overlay frames.
StageResult run_alignment(const Manifest& in, const AlignmentConfig& cfg, const RenderStyle& style,
                          ServiceClient* vlm);

struct BalanceResult {
  StageResult stage;
  SamplingPlan plan;
};

BalanceResult run_balance(const Manifest& in, const SamplingConfig& cfg);

struct Splits {
  std::vector<std::string> sft, rl, a2v;
};

/// Seeded shuffle of the sorted ids cut into contiguous parts whose sizes are
/// the largest-remainder apportionment of the ratios (ties to sft, rl, a2v).
Splits make_splits(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed);

/// Builds the client for one service URL following cfg (replay, transcript,
/// retries). Returns null when neither a URL nor a replay file is set.
std::unique_ptr<ServiceClient> make_service_client(const ServiceConfig& cfg, const std::string& url);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const PipelineConfig& cfg, ServiceClient* http);

struct RunResult {
  Manifest final_manifest;
  Splits splits;
  nlohmann::ordered_json report;
};

/// Runs every enabled stage. When `out_dir` is non-empty it receives
/// stages/<n>_<stage>.{accepted,rejected}.jsonl, plan.json, selected.txt,
/// splits/{sft,rl,a2v}.txt, final.jsonl and report.json.
RunResult run_pipeline(const Manifest& manifest, const PipelineConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace curate
