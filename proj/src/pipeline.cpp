// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <thread>

#include "curate/error.hpp"
#include "curate/rng.hpp"
#include "curate/version.hpp"

namespace curate {

void SplitRatios::validate() const {
  if (sft < 0 || rl < 0 || a2v < 0) throw ValidationError("split ratios must be >= 0");
  if (std::abs(sft + rl + a2v - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
}

void PipelineConfig::validate() const {
  gate.validate();
  flow.validate();
  coherence.validate();
  alignment.validate();
  actionmap.validate();
  balance.validate();
  metrics.validate();
  split.validate();
  if (coherence_provider != "stub" && coherence_provider != "sidecar" && coherence_provider != "http") {
    throw ValidationError("coherence.provider must be stub, sidecar or http");
  }
  if (coherence_provider == "sidecar" && sidecar_dir.empty()) {
    throw ValidationError("coherence.sidecar_dir is required for the sidecar provider");
  }
  if (!(stub_noise >= 0)) throw ValidationError("coherence.stub_noise must be >= 0");
  if (services.timeout_ms <= 0) throw ValidationError("services.timeout_ms must be > 0");
  if (services.max_attempts < 1) throw ValidationError("services.max_attempts must be >= 1");
  for (const auto& [stage, on] : enabled) {
    if (!is_known_stage(stage)) throw ValidationError("stages." + stage + " is not a stage");
  }
}

// ---------------------------------------------------------------------------
// Config keys

namespace {

using oj = nlohmann::ordered_json;

struct Field {
  std::function<void(const Json&)> set;
  std::function<oj()> get;
};

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ValidationError("config key " + key + " must be " + want);
}

Field real(const std::string& key, double& v) {
  return {[&v, key](const Json& j) {
            if (!j.is_number()) bad_type(key, "a number");
            v = j.get<double>();
          },
          [&v] { return oj(v); }};
}

template <typename I>
Field integer(const std::string& key, I& v) {
  return {[&v, key](const Json& j) {
            if (!j.is_number_integer()) bad_type(key, "an integer");
            v = j.get<I>();
          },
          [&v] { return oj(v); }};
}

Field boolean(const std::string& key, bool& v) {
  return {[&v, key](const Json& j) {
            if (!j.is_boolean()) bad_type(key, "true or false");
            v = j.get<bool>();
          },
          [&v] { return oj(v); }};
}

Field text(const std::string& key, std::string& v) {
  return {[&v, key](const Json& j) {
            if (!j.is_string()) bad_type(key, "a string");
            v = j.get<std::string>();
          },
          [&v] { return oj(v); }};
}

Field count_map(const std::string& key, std::map<std::string, long>& v) {
  return {[&v, key](const Json& j) {
            if (!j.is_object()) bad_type(key, "an object of dataset -> integer");
            v.clear();
            for (const auto& [k, n] : j.items()) {
              if (!n.is_number_integer()) bad_type(key + "." + k, "an integer");
              v[k] = n.get<long>();
            }
          },
          [&v] { return oj(v); }};
}

Field size_pair(const std::string& key, std::pair<int, int>& v) {
  return {[&v, key](const Json& j) {
            if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
              bad_type(key, "[width, height]");
            }
            v = {j[0].get<int>(), j[1].get<int>()};
          },
          [&v] { return oj::array({v.first, v.second}); }};
}

Field size_list(const std::string& key, std::vector<std::pair<int, int>>& v) {
  return {[&v, key](const Json& j) {
            if (!j.is_array()) bad_type(key, "a list of [width, height]");
            v.clear();
            for (const auto& e : j) {
              if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
                bad_type(key, "a list of [width, height]");
              }
              v.emplace_back(e[0].get<int>(), e[1].get<int>());
            }
          },
          [&v] {
            oj a = oj::array();
            for (const auto& [w, h] : v) a.push_back({w, h});
            return a;
          }};
}

Field seed_field(PipelineConfig& c) {
  return {[&c](const Json& j) {
            if (!j.is_number_unsigned() && !j.is_number_integer()) bad_type("seed", "an integer");
            if (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0) {
              bad_type("seed", "a non-negative integer");
            }
            c.seed = j.get<std::uint64_t>();
          },
          [&c] { return oj(c.seed); }};
}

std::map<std::string, Field> fields(PipelineConfig& c) {
  std::map<std::string, Field> f;
  f.emplace("seed", seed_field(c));

  f.emplace("gate.min_frames", integer("gate.min_frames", c.gate.min_frames));
  f.emplace("gate.max_frames", integer("gate.max_frames", c.gate.max_frames));
  f.emplace("gate.allowed_resolutions", size_list("gate.allowed_resolutions", c.gate.allowed_resolutions));
  f.emplace("gate.min_resolution", size_pair("gate.min_resolution", c.gate.min_resolution));
  f.emplace("gate.camera_motion_threshold", real("gate.camera_motion_threshold", c.gate.camera_motion_threshold));
  f.emplace("gate.border_fraction", real("gate.border_fraction", c.gate.border_fraction));
  f.emplace("gate.verify_frames", boolean("gate.verify_frames", c.gate.verify_frames));

  f.emplace("flow.sample_fps", real("flow.sample_fps", c.flow.sample_fps));
  f.emplace("flow.pyramid_levels", integer("flow.pyramid_levels", c.flow.pyramid_levels));
  f.emplace("flow.pyramid_scale", real("flow.pyramid_scale", c.flow.pyramid_scale));
  f.emplace("flow.window_size", integer("flow.window_size", c.flow.window_size));
  f.emplace("flow.iterations", integer("flow.iterations", c.flow.iterations));
  f.emplace("flow.poly_n", integer("flow.poly_n", c.flow.poly_n));
  f.emplace("flow.poly_sigma", real("flow.poly_sigma", c.flow.poly_sigma));
  f.emplace("flow.tau_low", real("flow.tau_low", c.flow.tau_low));
  f.emplace("flow.ratio_min", real("flow.ratio_min", c.flow.ratio_min));

  f.emplace("coherence.num_frames", integer("coherence.num_frames", c.coherence.num_frames));
  f.emplace("coherence.min_mean_cosine", real("coherence.min_mean_cosine", c.coherence.min_mean_cosine));
  f.emplace("coherence.provider", text("coherence.provider", c.coherence_provider));
  f.emplace("coherence.sidecar_dir", text("coherence.sidecar_dir", c.sidecar_dir));
  f.emplace("coherence.stub_noise", real("coherence.stub_noise", c.stub_noise));

  f.emplace("alignment.max_deviation_px", real("alignment.max_deviation_px", c.alignment.max_deviation_px));
  f.emplace("alignment.vlm_frames", integer("alignment.vlm_frames", c.alignment.vlm_frames));

  f.emplace("actionmap.axis_world_length", real("actionmap.axis_world_length", c.actionmap.axis_world_length));
  f.emplace("actionmap.gripper_radius_px", integer("actionmap.gripper_radius_px", c.actionmap.gripper_radius_px));
  f.emplace("actionmap.arrow_thickness_px", integer("actionmap.arrow_thickness_px", c.actionmap.arrow_thickness_px));
  f.emplace("actionmap.overlay_alpha", real("actionmap.overlay_alpha", c.actionmap.overlay_alpha));
  f.emplace("actionmap.invert_openness", boolean("actionmap.invert_openness", c.actionmap.invert_openness));

  f.emplace("balance.level1_preserve_max", integer("balance.level1_preserve_max", c.balance.level1_preserve_max));
  f.emplace("balance.robot_share_cap", real("balance.robot_share_cap", c.balance.robot_share_cap));
  f.emplace("balance.head_min_count", integer("balance.head_min_count", c.balance.head_min_count));
  f.emplace("balance.tail_max_count", integer("balance.tail_max_count", c.balance.tail_max_count));
  f.emplace("balance.f_head", real("balance.f_head", c.balance.f_head));
  f.emplace("balance.f_body", real("balance.f_body", c.balance.f_body));
  f.emplace("balance.macro_cap", count_map("balance.macro_cap", c.balance.macro_cap));
  f.emplace("balance.micro_floor", count_map("balance.micro_floor", c.balance.micro_floor));

  f.emplace("metrics.psnr_cap_db", real("metrics.psnr_cap_db", c.metrics.psnr_cap_db));
  f.emplace("metrics.ssim_window", integer("metrics.ssim_window", c.metrics.ssim_window));
  f.emplace("metrics.ssim_sigma", real("metrics.ssim_sigma", c.metrics.ssim_sigma));
  f.emplace("metrics.ssim_k1", real("metrics.ssim_k1", c.metrics.ssim_k1));
  f.emplace("metrics.ssim_k2", real("metrics.ssim_k2", c.metrics.ssim_k2));
  f.emplace("metrics.dynamic_range", real("metrics.dynamic_range", c.metrics.dynamic_range));
  f.emplace("metrics.ndtw_fraction", real("metrics.ndtw_fraction", c.metrics.ndtw_fraction));

  f.emplace("split.sft", real("split.sft", c.split.sft));
  f.emplace("split.rl", real("split.rl", c.split.rl));
  f.emplace("split.a2v", real("split.a2v", c.split.a2v));

  f.emplace("services.embed_url", text("services.embed_url", c.services.embed_url));
  f.emplace("services.vlm_url", text("services.vlm_url", c.services.vlm_url));
  f.emplace("services.proposer_url", text("services.proposer_url", c.services.proposer_url));
  f.emplace("services.scorer_url", text("services.scorer_url", c.services.scorer_url));
  f.emplace("services.timeout_ms", integer("services.timeout_ms", c.services.timeout_ms));
  f.emplace("services.max_attempts", integer("services.max_attempts", c.services.max_attempts));
  f.emplace("services.transcript", text("services.transcript", c.services.transcript));
  f.emplace("services.replay", text("services.replay", c.services.replay));

  for (auto& [stage, on] : c.enabled) f.emplace("stages." + stage, boolean("stages." + stage, on));
  return f;
}

}  // namespace

PipelineConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  PipelineConfig cfg;
  auto f = fields(cfg);
  for (const auto& [key, value] : j.items()) {
    auto it = f.find(key);
    if (it == f.end()) throw ValidationError("unknown config key " + key);
    it->second.set(value);
  }
  cfg.balance.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

oj config_to_json(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  oj out;
  for (const auto& [key, field] : fields(copy)) out[key] = field.get();
  return out;
}

// ---------------------------------------------------------------------------
// Stages

oj stage_report_json(const StageReport& r) {
  oj j;
  j["stage"] = r.stage;
  j["enabled"] = r.enabled;
  j["input"] = r.input;
  j["accepted"] = r.accepted;
  j["rejected"] = r.rejected;
  j["output"] = r.output;
  j["reasons"] = r.reasons;
  return j;
}

namespace {

// Runs fn(i) for i in [0, n) on a few threads. Results must go to slot i;
// the exception of the lowest failing index wins.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct StageBuilder {
  std::string stage;
  std::vector<ClipRecord> accepted, rejected;
  StageReport report;

  explicit StageBuilder(std::string name, long input) : stage(std::move(name)) {
    report.stage = stage;
    report.input = input;
  }

  void accept(ClipRecord r, const std::string& reason = "ok") {
    accepted.push_back(record_decision(std::move(r), stage, Decision::kAccept, reason));
    ++report.accepted;
  }
  // `tally` groups free-text reasons in the report.
  void reject(ClipRecord r, const std::string& reason, const std::string& tally = "") {
    rejected.push_back(record_decision(std::move(r), stage, Decision::kReject, reason));
    ++report.rejected;
    ++report.reasons[tally.empty() ? reason : tally];
  }
  StageResult finish() {
    report.output = static_cast<long>(accepted.size());
    return {Manifest(std::move(accepted)), Manifest(std::move(rejected)), report};
  }
};

template <typename Fn>
auto guarded(const std::string& stage, const std::string& clip, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, clip, e.what());
  }
}

std::optional<double> score_of(const ClipRecord& r, const std::string& key) {
  auto it = r.scores.find(key);
  if (it == r.scores.end()) return std::nullopt;
  return it->second;
}

}  // namespace

StageResult run_gate(const Manifest& in, const GateConfig& cfg) {
  cfg.validate();
  StageBuilder b("gate", static_cast<long>(in.size()));
  long segmented_parents = 0;
  for (const auto& r : in) {
    guarded("gate", r.clip_id, [&] {
      const GateDecision d = apply_quality_gate(r, cfg, score_of(r, "border_flow_median"));
      if (!d.accepted) {
        b.reject(r, std::string(to_string(d.reason)));
        return;
      }
      if (!needs_segmentation(r, cfg)) {
        b.accept(r);
        return;
      }
      ++segmented_parents;
      auto seg = segment_by_task(r, cfg);
      ++b.report.accepted;
      for (auto& child : seg.children) {
        b.accepted.push_back(record_decision(std::move(child), "gate", Decision::kAccept, "segment of " + r.clip_id));
      }
      if (!seg.dropped.empty()) b.report.reasons["dropped_spans"] += static_cast<long>(seg.dropped.size());
    });
  }
  if (segmented_parents) b.report.reasons["segmented"] = segmented_parents;
  return b.finish();
}

StageResult run_flow(const Manifest& in, const FlowConfig& cfg, const GateConfig& gate) {
  cfg.validate();
  const auto& recs = in.records();
  struct Outcome {
    std::optional<KinematicScore> ks;
    std::optional<double> border;
  };
  std::vector<Outcome> out(recs.size());
  parallel_for(recs.size(), [&](std::size_t i) {
    const ClipRecord& r = recs[i];
    const auto mean = score_of(r, "flow_clip_mean"), ratio = score_of(r, "flow_net_to_path_ratio");
    if (mean && ratio) {
      KinematicScore ks;
      ks.clip_mean = *mean;
      ks.net_to_path_ratio = *ratio;
      out[i].ks = ks;
      return;
    }
    guarded("flow", r.clip_id, [&] {
      auto stats = compute_clip_flow(r, cfg, gate.border_fraction);
      out[i].ks = std::move(stats.kinematic);
      out[i].border = stats.border_median;
    });
  });

  StageBuilder b("flow", static_cast<long>(recs.size()));
  for (std::size_t i = 0; i < recs.size(); ++i) {
    ClipRecord r = recs[i];
    const KinematicScore& ks = *out[i].ks;
    r.scores["flow_clip_mean"] = ks.clip_mean;
    r.scores["flow_net_to_path_ratio"] = ks.net_to_path_ratio;
    const bool had_border = r.scores.count("border_flow_median") > 0;
    if (out[i].border && !had_border) r.scores["border_flow_median"] = *out[i].border;
    if (out[i].border && !had_border && !r.static_camera && *out[i].border > gate.camera_motion_threshold) {
      b.reject(std::move(r), std::string(to_string(Reason::kMovingCamera)));
      continue;
    }
    const GateDecision d = motion_filter(ks, cfg);
    if (d.accepted) b.accept(std::move(r));
    else b.reject(std::move(r), std::string(to_string(d.reason)));
  }
  return b.finish();
}

StageResult run_coherence(const Manifest& in, EmbeddingProvider& provider, const CoherenceConfig& cfg) {
  cfg.validate();
  StageBuilder b("coherence", static_cast<long>(in.size()));
  for (const auto& r : in) {
    const CoherenceResult res = guarded("coherence", r.clip_id, [&] { return coherence_filter(r, provider, cfg); });
    ClipRecord rec = r;
    rec.scores["coherence"] = res.score;
    if (res.decision.accepted) b.accept(std::move(rec));
    else b.reject(std::move(rec), std::string(to_string(res.decision.reason)));
  }
  return b.finish();
}

StageResult run_alignment(const Manifest& in, const AlignmentConfig& cfg, const RenderStyle& style,
                          ServiceClient* vlm) {
  cfg.validate();
  StageBuilder b("alignment", static_cast<long>(in.size()));
  for (const auto& r : in) {
    guarded("alignment", r.clip_id, [&] {
      ClipRecord rec = r;
      const AlignmentResult res = check_alignment(r, cfg);
      if (res.deviation_px) rec.scores["alignment_deviation_px"] = *res.deviation_px;
      if (!res.decision.accepted) {
        b.reject(std::move(rec), std::string(to_string(res.decision.reason)));
        return;
      }
      if (vlm && !r.action_frames.empty()) {
        const VlmVerdict v = verify_alignment_vlm(overlay_frames(r, style, cfg.vlm_frames), r.task_text, *vlm);
        if (!v.aligned) {
          b.reject(std::move(rec), v.rationale.empty() ? "misaligned" : "misaligned: " + v.rationale, "misaligned");
          return;
        }
        b.accept(std::move(rec), "vlm_aligned");
        return;
      }
      b.accept(std::move(rec), res.deviation_px ? "ok" : "unmeasured");
    });
  }
  return b.finish();
}

BalanceResult run_balance(const Manifest& in, const SamplingConfig& cfg) {
  BalanceResult res;
  res.plan = guarded("balance", "", [&] { return build_plan(in, cfg); });
  const auto selected = guarded("balance", "", [&] { return execute_plan(in, res.plan, cfg.seed); });
  StageBuilder b("balance", static_cast<long>(in.size()));
  for (const auto& r : in) {
    if (std::binary_search(selected.begin(), selected.end(), r.clip_id)) b.accept(r, "selected");
    else b.reject(r, "downsampled");
  }
  res.stage = b.finish();
  return res;
}

Splits make_splits(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const long n = static_cast<long>(ids.size());

  // Largest remainder on n * ratio; ratios are reals, so compare remainders
  // directly with ties going to the earlier split.
  const double r[3] = {ratios.sft, ratios.rl, ratios.a2v};
  long size[3];
  double frac[3];
  long given = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * r[i];
    size[i] = static_cast<long>(std::floor(exact + 1e-9));
    frac[i] = exact - static_cast<double>(size[i]);
    given += size[i];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int a, int b) { return frac[a] > frac[b] + 1e-12; });
  for (int k = 0; given < n; k = (k + 1) % 3) {
    ++size[order[k]];
    ++given;
  }
  while (given > n) {  // only reachable through the epsilon above
    for (int i = 2; i >= 0 && given > n; --i)
      if (size[i] > 0) {
        --size[i];
        --given;
      }
  }

  DeterministicRng rng(derive_seed(seed, "split"));
  rng.shuffle(std::span<std::string>(ids));
  Splits s;
  std::vector<std::string>* parts[3] = {&s.sft, &s.rl, &s.a2v};
  auto cut = ids.begin();
  for (int i = 0; i < 3; ++i) {
    parts[i]->assign(cut, cut + size[i]);
    std::sort(parts[i]->begin(), parts[i]->end());
    cut += size[i];
  }
  return s;
}

std::unique_ptr<ServiceClient> make_service_client(const ServiceConfig& cfg, const std::string& url) {
  if (!cfg.replay.empty()) return std::make_unique<ReplayServiceClient>(cfg.replay);
  if (url.empty()) return nullptr;
  RetryPolicy retry;
  retry.max_attempts = cfg.max_attempts;
  auto http = std::make_unique<HttpServiceClient>(url, std::chrono::milliseconds(cfg.timeout_ms), retry);
  if (cfg.transcript.empty()) return http;

  // Recorder that owns its inner client.
  class Owning final : public ServiceClient {
   public:
    Owning(std::unique_ptr<ServiceClient> inner, const std::string& path)
        : inner_(std::move(inner)), rec_(*inner_, path) {}
    Json post(const std::string& p, const Json& body) override { return rec_.post(p, body); }

   private:
    std::unique_ptr<ServiceClient> inner_;
    TranscriptRecorder rec_;
  };
  return std::make_unique<Owning>(std::move(http), cfg.transcript);
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const PipelineConfig& cfg, ServiceClient* http) {
  if (cfg.coherence_provider == "stub") return std::make_unique<StubEmbeddingProvider>(cfg.seed, cfg.stub_noise);
  if (cfg.coherence_provider == "sidecar") return std::make_unique<SidecarEmbeddingProvider>(cfg.sidecar_dir);
  if (!http) throw ValidationError("coherence.provider http needs services.embed_url or services.replay");
  return std::make_unique<HttpEmbeddingProvider>(*http);
}

// ---------------------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

std::string lines(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += id + "\n";
  return s;
}

}  // namespace

RunResult run_pipeline(const Manifest& manifest, const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  SamplingConfig bcfg = cfg.balance;
  bcfg.seed = cfg.seed;
  const bool write = !out_dir.empty();

  std::unique_ptr<ServiceClient> embed_client, vlm_client;
  if (cfg.stage_enabled("coherence") && cfg.coherence_provider == "http") {
    embed_client = make_service_client(cfg.services, cfg.services.embed_url);
  }
  if (cfg.stage_enabled("alignment")) vlm_client = make_service_client(cfg.services, cfg.services.vlm_url);

  Manifest current = manifest;
  oj stages = oj::array();
  int step = 0;
  auto advance = [&](StageResult res) {
    ++step;
    if (write) {
      const std::string stem = std::to_string(step) + "_" + res.report.stage;
      save_manifest(out_dir / "stages" / (stem + ".accepted.jsonl"), res.accepted);
      save_manifest(out_dir / "stages" / (stem + ".rejected.jsonl"), res.rejected);
    }
    stages.push_back(stage_report_json(res.report));
    current = std::move(res.accepted);
  };
  auto skip = [&](const std::string& stage) {
    StageReport r;
    r.stage = stage;
    r.enabled = false;
    r.input = r.accepted = r.output = static_cast<long>(current.size());
    stages.push_back(stage_report_json(r));
  };

  if (cfg.stage_enabled("gate")) advance(run_gate(current, cfg.gate));
  else skip("gate");
  if (cfg.stage_enabled("flow")) advance(run_flow(current, cfg.flow, cfg.gate));
  else skip("flow");
  if (cfg.stage_enabled("coherence")) {
    auto provider = make_embedding_provider(cfg, embed_client.get());
    advance(run_coherence(current, *provider, cfg.coherence));
  } else {
    skip("coherence");
  }
  if (cfg.stage_enabled("alignment")) advance(run_alignment(current, cfg.alignment, cfg.actionmap, vlm_client.get()));
  else skip("alignment");

  std::optional<SamplingPlan> plan;
  if (cfg.stage_enabled("balance") && !current.empty()) {
    auto res = run_balance(current, bcfg);
    plan = std::move(res.plan);
    advance(std::move(res.stage));
  } else {
    skip("balance");
  }

  RunResult result;
  oj split_json;
  if (cfg.stage_enabled("split")) {
    std::vector<std::string> ids;
    for (const auto& r : current) ids.push_back(r.clip_id);
    result.splits = make_splits(ids, cfg.split, cfg.seed);
    std::map<std::string, std::string> part;
    for (const auto& id : result.splits.sft) part[id] = "sft";
    for (const auto& id : result.splits.rl) part[id] = "rl";
    for (const auto& id : result.splits.a2v) part[id] = "a2v";
    StageBuilder b("split", static_cast<long>(current.size()));
    for (const auto& r : current) b.accept(r, part.at(r.clip_id));
    advance(b.finish());
    split_json["sft"] = result.splits.sft.size();
    split_json["rl"] = result.splits.rl.size();
    split_json["a2v"] = result.splits.a2v.size();
    split_json["ratios"] = {{"sft", cfg.split.sft}, {"rl", cfg.split.rl}, {"a2v", cfg.split.a2v}};
    split_json["ratios_are_placeholders"] = true;
  } else {
    skip("split");
  }
  result.final_manifest = std::move(current);

  oj report;
  report["tool"] = "curate";
  report["version"] = kVersion;
  report["seed"] = cfg.seed;
  report["input_records"] = manifest.size();
  report["output_records"] = result.final_manifest.size();
  report["stages"] = std::move(stages);
  if (plan) report["balance"] = plan_to_json(*plan)["audit"];
  if (!split_json.is_null()) report["split"] = split_json;
  report["config"] = config_to_json(cfg);
  result.report = report;

  if (write) {
    save_manifest(out_dir / "final.jsonl", result.final_manifest);
    if (plan) write_text(out_dir / "plan.json", plan_to_json(*plan).dump(2) + "\n");
    std::vector<std::string> ids;
    for (const auto& r : result.final_manifest) ids.push_back(r.clip_id);
    write_text(out_dir / "selected.txt", lines(ids));
    if (cfg.stage_enabled("split")) {
      write_text(out_dir / "splits" / "sft.txt", lines(result.splits.sft));
      write_text(out_dir / "splits" / "rl.txt", lines(result.splits.rl));
      write_text(out_dir / "splits" / "a2v.txt", lines(result.splits.a2v));
    }
    write_text(out_dir / "report.json", report.dump(2) + "\n");
  }
  return result;
}

}  // namespace curate
