// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "curate/error.hpp"
#include "curate/pipeline.hpp"
#include "curate/version.hpp"

namespace curate {

namespace {

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? config_from_json(Json::object()) : load_config(path);
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Service client from explicit flags, falling back to the config.
std::unique_ptr<ServiceClient> client_for(const PipelineConfig& cfg, const std::string& url, const std::string& replay,
                                          const std::string& transcript, const std::string& config_url) {
  ServiceConfig s = cfg.services;
  if (!replay.empty()) s.replay = replay;
  if (!transcript.empty()) s.transcript = transcript;
  return make_service_client(s, url.empty() ? config_url : url);
}

void write_stage(const StageResult& res, const std::string& out, const std::string& rejected, std::ostream& os) {
  save_manifest(out, res.accepted);
  if (!rejected.empty()) save_manifest(rejected, res.rejected);
  os << stage_report_json(res.report).dump() << "\n";
}

struct Options {
  std::string manifest, config, out, rejected;
};

void common(CLI::App* sub, Options& o, bool needs_out = true) {
  sub->add_option("--manifest", o.manifest, "Input manifest (JSONL)")->required();
  sub->add_option("--config", o.config, "Pipeline config (JSON, <module>.<field> keys)");
  auto* opt = sub->add_option("--out", o.out, "Output path");
  if (needs_out) opt->required();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Curation and preference-mining engine for manipulation video corpora", "curate"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // ingest
  std::vector<std::string> ingest_inputs;
  std::string ingest_out;
  bool ingest_check_frames = false;
  auto* ingest = app.add_subcommand("ingest", "Validate and merge manifests into one sorted manifest");
  ingest->add_option("--input", ingest_inputs, "Manifest files to merge")->required();
  ingest->add_option("--out", ingest_out, "Merged manifest")->required();
  ingest->add_flag("--check-frames", ingest_check_frames, "Require every frame file to exist");

  Options gate_o, flow_o, coh_o, bal_o, run_o, am_o;
  auto* gate = app.add_subcommand("gate", "Quality gate and task segmentation");
  common(gate, gate_o);
  gate->add_option("--rejected", gate_o.rejected, "Write rejected records here");

  std::string flow_scores;
  auto* flow = app.add_subcommand("flow-filter", "Optical-flow motion filter");
  common(flow, flow_o);
  flow->add_option("--rejected", flow_o.rejected, "Write rejected records here");
  flow->add_option("--dump-scores", flow_scores, "clip_id -> {clip_mean, net_to_path_ratio}");

  std::string coh_provider, coh_sidecar, coh_endpoint, coh_replay, coh_transcript;
  auto* coh = app.add_subcommand("coherence-filter", "Embedding temporal-coherence filter");
  common(coh, coh_o);
  coh->add_option("--rejected", coh_o.rejected, "Write rejected records here");
  coh->add_option("--provider", coh_provider, "stub | sidecar | http")
      ->check(CLI::IsMember({"stub", "sidecar", "http"}));
  coh->add_option("--sidecar-dir", coh_sidecar, "Directory of <clip_id>.emb files");
  coh->add_option("--endpoint", coh_endpoint, "Embedding service base URL");
  coh->add_option("--replay", coh_replay, "Answer from a recorded transcript");
  coh->add_option("--transcript", coh_transcript, "Record exchanges to this JSONL file");

  // actionmap render|verify
  auto* am = app.add_subcommand("actionmap", "Render or verify action maps");
  am->require_subcommand(1);
  std::string am_style, am_out_dir, am_endpoint, am_replay, am_transcript;
  auto* am_render = am->add_subcommand("render", "Write actionmap/%06d.png per clip");
  am_render->add_option("--manifest", am_o.manifest)->required();
  am_render->add_option("--style", am_style, "Config file providing actionmap.* keys");
  am_render->add_option("--out-dir", am_out_dir, "Maps go to <out-dir>/<clip_id>/actionmap")->required();
  Options amv_o;
  auto* am_verify = am->add_subcommand("verify", "Alignment check against detections and the VLM verifier");
  am_verify->add_option("--manifest", amv_o.manifest)->required();
  am_verify->add_option("--style", am_style, "Config file providing actionmap.* / alignment.* keys");
  am_verify->add_option("--out", amv_o.out, "Accepted records")->required();
  am_verify->add_option("--rejected", amv_o.rejected);
  am_verify->add_option("--endpoint", am_endpoint, "VLM service base URL");
  am_verify->add_option("--replay", am_replay);
  am_verify->add_option("--transcript", am_transcript);

  std::string bal_plan;
  auto* bal = app.add_subcommand("balance", "Hierarchical distribution balancing");
  common(bal, bal_o);
  bal->add_option("--plan", bal_plan, "Write the sampling plan with its audit");

  // judge
  auto* judge = app.add_subcommand("judge", "Checklist judging and preference mining");
  judge->require_subcommand(1);
  std::string j_instruction, j_frame, j_endpoint, j_replay, j_transcript, j_out, j_checklist, j_pred, j_video,
      j_cands, j_config;
  auto* j_propose = judge->add_subcommand("propose", "Ask the proposer for a checklist");
  j_propose->add_option("--instruction", j_instruction)->required();
  j_propose->add_option("--first-frame", j_frame, "PNG of the first frame");
  auto* j_score = judge->add_subcommand("score", "Score predictions (or live scorer answers) against a checklist");
  j_score->add_option("--checklist", j_checklist)->required();
  j_score->add_option("--predictions", j_pred, "JSON {question_id: yes|no}");
  j_score->add_option("--video", j_video, "Video reference for the scorer service");
  auto* j_mine = judge->add_subcommand("mine", "Mine DPO triplets from candidate groups");
  j_mine->add_option("--candidates", j_cands, "JSONL groups {condition_ref, candidates, checklist?}")->required();
  j_mine->add_option("--checklist", j_checklist, "Checklist shared by every group");
  for (auto* s : {j_propose, j_score, j_mine}) {
    s->add_option("--endpoint", j_endpoint, "Service base URL");
    s->add_option("--replay", j_replay, "Answer from a recorded transcript");
    s->add_option("--transcript", j_transcript, "Record exchanges to this JSONL file");
    s->add_option("--config", j_config);
    s->add_option("--out", j_out)->required();
  }

  DpoLossInputs dpo;
  auto* dpo_cmd = app.add_subcommand("dpo-loss", "Evaluate the preference loss for precomputed errors");
  dpo_cmd->add_option("--l-theta-w", dpo.l_theta_w)->required();
  dpo_cmd->add_option("--l-theta-l", dpo.l_theta_l)->required();
  dpo_cmd->add_option("--l-ref-w", dpo.l_ref_w)->required();
  dpo_cmd->add_option("--l-ref-l", dpo.l_ref_l)->required();
  dpo_cmd->add_option("--beta", dpo.beta, "Default 5000");

  std::string m_pred, m_gt, m_out, m_config;
  std::vector<std::string> m_traj;
  int m_width = 0, m_height = 0;
  auto* metrics = app.add_subcommand("metrics", "PSNR / SSIM / nDTW report");
  metrics->add_option("--pred-dir", m_pred, "Predicted frames, one subdirectory per clip");
  metrics->add_option("--gt-dir", m_gt, "Ground-truth frames, one subdirectory per clip");
  metrics->add_option("--traj", m_traj, "pred.json gt.json")->expected(2);
  metrics->add_option("--width", m_width, "Frame width for the nDTW threshold");
  metrics->add_option("--height", m_height, "Frame height for the nDTW threshold");
  metrics->add_option("--config", m_config);
  metrics->add_option("--out", m_out)->required();

  std::string run_dir;
  auto* run = app.add_subcommand("run", "Run every enabled stage");
  run->add_option("--manifest", run_o.manifest)->required();
  run->add_option("--config", run_o.config);
  run->add_option("--out-dir", run_dir)->required();

  std::string rep_manifest, rep_out;
  auto* report = app.add_subcommand("report", "Per-stage decision counts from a manifest's status ledgers");
  report->add_option("--manifest", rep_manifest)->required();
  report->add_option("--out", rep_out, "Write JSON here instead of stdout");

  std::vector<std::string> argv_store{"curate"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) {
      Manifest merged;
      for (const auto& in : ingest_inputs) merged = merge_manifests(merged, load_manifest(in));
      if (ingest_check_frames) {
        for (const auto& r : merged)
          for (long i = 0; i < r.frame_count; ++i)
            if (!std::filesystem::exists(r.frame_file(i))) {
              throw ValidationError("record \"" + r.clip_id + "\": missing frame " + r.frame_file(i).string());
            }
      }
      save_manifest(ingest_out, merged);
      out << "ingested " << merged.size() << " records\n";
    } else if (*gate) {
      const auto cfg = config_or_default(gate_o.config);
      write_stage(run_gate(load_manifest(gate_o.manifest), cfg.gate), gate_o.out, gate_o.rejected, out);
    } else if (*flow) {
      const auto cfg = config_or_default(flow_o.config);
      const auto res = run_flow(load_manifest(flow_o.manifest), cfg.flow, cfg.gate);
      if (!flow_scores.empty()) {
        Json s = Json::object();  // keys come out sorted
        for (const auto* m : {&res.accepted, &res.rejected})
          for (const auto& r : *m)
            s[r.clip_id] = {{"clip_mean", r.scores.at("flow_clip_mean")},
                            {"net_to_path_ratio", r.scores.at("flow_net_to_path_ratio")}};
        write_file(flow_scores, s.dump(2) + "\n");
      }
      write_stage(res, flow_o.out, flow_o.rejected, out);
    } else if (*coh) {
      auto cfg = config_or_default(coh_o.config);
      if (!coh_provider.empty()) cfg.coherence_provider = coh_provider;
      if (!coh_sidecar.empty()) cfg.sidecar_dir = coh_sidecar;
      cfg.validate();
      auto client = cfg.coherence_provider == "http"
                        ? client_for(cfg, coh_endpoint, coh_replay, coh_transcript, cfg.services.embed_url)
                        : nullptr;
      auto provider = make_embedding_provider(cfg, client.get());
      write_stage(run_coherence(load_manifest(coh_o.manifest), *provider, cfg.coherence), coh_o.out, coh_o.rejected,
                  out);
    } else if (*am_render) {
      const auto cfg = config_or_default(am_style);
      long n = 0;
      for (const auto& r : load_manifest(am_o.manifest)) {
        n += write_action_maps(r, cfg.actionmap, std::filesystem::path(am_out_dir) / r.clip_id);
      }
      out << "rendered " << n << " action maps\n";
    } else if (*am_verify) {
      const auto cfg = config_or_default(am_style);
      auto client = client_for(cfg, am_endpoint, am_replay, am_transcript, cfg.services.vlm_url);
      write_stage(run_alignment(load_manifest(amv_o.manifest), cfg.alignment, cfg.actionmap, client.get()), amv_o.out,
                  amv_o.rejected, out);
    } else if (*bal) {
      const auto cfg = config_or_default(bal_o.config);
      SamplingConfig scfg = cfg.balance;
      scfg.seed = cfg.seed;
      const auto res = run_balance(load_manifest(bal_o.manifest), scfg);
      std::string ids;
      for (const auto& r : res.stage.accepted) ids += r.clip_id + "\n";
      write_file(bal_o.out, ids);
      if (!bal_plan.empty()) write_file(bal_plan, plan_to_json(res.plan).dump(2) + "\n");
      out << stage_report_json(res.stage.report).dump() << "\n";
    } else if (*j_propose) {
      const auto cfg = config_or_default(j_config);
      auto client = client_for(cfg, j_endpoint, j_replay, j_transcript, cfg.services.proposer_url);
      if (!client) throw ValidationError("judge propose needs --endpoint, --replay or services.proposer_url");
      const std::string frame = j_frame.empty() ? "" : base64_encode(read_file_bytes(j_frame));
      Checklist c = propose_checklist(*client, j_instruction, frame);
      if (c.first_frame_ref.empty()) c.first_frame_ref = j_frame;
      write_file(j_out, checklist_to_json(c).dump(2) + "\n");
      out << "checklist with " << c.questions.size() << " questions\n";
    } else if (*j_score) {
      const auto cfg = config_or_default(j_config);
      const Checklist c = checklist_from_json(read_json(j_checklist));
      std::map<std::string, Answer> preds;
      if (!j_pred.empty()) {
        const Json pj = read_json(j_pred);
        for (const auto& [k, v] : pj.items()) {
          if (!v.is_string()) throw ValidationError("prediction for " + k + " must be \"yes\" or \"no\"");
          preds[k] = parse_answer(v.get<std::string>());
        }
      } else {
        auto client = client_for(cfg, j_endpoint, j_replay, j_transcript, cfg.services.scorer_url);
        if (!client || j_video.empty()) {
          throw ValidationError("judge score needs --predictions, or --video with a scorer endpoint/replay");
        }
        preds = answer_checklist(*client, j_video, c);
      }
      const auto rep = score_sv(c, preds, j_video);
      write_file(j_out, score_report_to_json(rep).dump(2) + "\n");
      out << "s_v " << fmt17(rep.s_v) << (rep.tier1_violated ? " tier1_violated" : "") << "\n";
    } else if (*j_mine) {
      const auto cfg = config_or_default(j_config);
      auto client = client_for(cfg, j_endpoint, j_replay, j_transcript, cfg.services.scorer_url);
      std::optional<Checklist> shared;
      if (!j_checklist.empty()) shared = checklist_from_json(read_json(j_checklist));
      std::ifstream in(j_cands);
      if (!in) throw ValidationError("cannot open " + j_cands);
      std::string line, jsonl;
      long lineno = 0, mined = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json g;
        try {
          g = Json::parse(line);
        } catch (const Json::parse_error& e) {
          throw ValidationError(j_cands + " line " + std::to_string(lineno) + ": " + e.what());
        }
        const Checklist c = g.contains("checklist") ? checklist_from_json(g["checklist"])
                            : shared             ? *shared
                                                 : throw ValidationError("line " + std::to_string(lineno) +
                                                                         ": no checklist for this group");
        ConditionRef cond;
        if (g.contains("condition_ref")) {
          cond.prompt = g["condition_ref"].value("prompt", "");
          cond.first_frame = g["condition_ref"].value("first_frame", "");
        }
        std::vector<Candidate> cands;
        for (const auto& cj : g.at("candidates")) {
          Candidate cand;
          cand.clip_id = cj.at("clip_id").get<std::string>();
          std::optional<std::map<std::string, Answer>> preds;
          if (cj.contains("predictions")) {
            preds.emplace();
            for (const auto& [k, v] : cj["predictions"].items()) (*preds)[k] = parse_answer(v.get<std::string>());
          } else if (client && !cj.contains("s_v")) {
            preds = answer_checklist(*client, cand.clip_id, c);
          }
          if (preds) {
            const auto rep = score_sv(c, *preds, cand.clip_id);
            cand.s_v = rep.s_v;
            cand.vetoed = rep.tier1_violated;
          }
          if (cj.contains("s_v")) cand.s_v = cj["s_v"].get<double>();
          if (cj.contains("vetoed")) cand.vetoed = cj["vetoed"].get<bool>();
          cands.push_back(std::move(cand));
        }
        // Pairwise preference when a scorer is reachable, else S_v.
        const auto t = client ? mine_triplet(cond, cands, pairwise_comparator(cands, c, *client), "pairwise")
                              : mine_triplet(cond, cands, sv_comparator(cands), "s_v");
        jsonl += triplet_to_json(t).dump() + "\n";
        ++mined;
      }
      write_file(j_out, jsonl);
      out << "mined " << mined << " triplets\n";
    } else if (*dpo_cmd) {
      out << fmt17(dpo_loss(dpo)) << "\n";
    } else if (*metrics) {
      const auto cfg = config_or_default(m_config);
      std::map<std::string, ClipMetrics> clips;
      if (!m_pred.empty() || !m_gt.empty()) {
        if (m_pred.empty() || m_gt.empty()) throw ValidationError("--pred-dir and --gt-dir go together");
        for (const auto& e : std::filesystem::directory_iterator(m_gt)) {
          if (!e.is_directory()) continue;
          const auto pred = std::filesystem::path(m_pred) / e.path().filename();
          if (!std::filesystem::is_directory(pred)) continue;
          auto cm = compare_frame_dirs(pred, e.path(), cfg.metrics);
          clips[cm.clip_id] = cm;
          if (m_width == 0) {
            for (const auto& f : std::filesystem::directory_iterator(e.path()))
              if (f.path().extension() == ".png") {
                const auto img = read_png(f.path());
                m_width = img.width;
                m_height = img.height;
                break;
              }
          }
        }
      }
      if (!m_traj.empty()) {
        if (m_width <= 0 || m_height <= 0) throw ValidationError("nDTW needs --width/--height or frame directories");
        const auto pred = load_trajectories(m_traj[0]);
        const auto gt = load_trajectories(m_traj[1]);
        const double d_th = cfg.metrics.d_th(m_width, m_height);
        for (const auto& [id, g] : gt) {
          auto it = pred.find(id);
          if (it == pred.end()) continue;
          clips[id].clip_id = id;
          clips[id].ndtw = ndtw(it->second, g, d_th);
        }
      }
      std::vector<ClipMetrics> list;
      for (auto& [id, cm] : clips) list.push_back(cm);
      const auto rep = aggregate_report(list);
      write_file(m_out, rep.dump(2) + "\n");
      out << rep["metrics"].dump() << "\n";
    } else if (*run) {
      const auto cfg = config_or_default(run_o.config);
      const auto res = run_pipeline(load_manifest(run_o.manifest), cfg, run_dir);
      out << "selected " << res.final_manifest.size() << " of " << res.report["input_records"] << " records\n";
    } else if (*report) {
      const Manifest m = load_manifest(rep_manifest);
      nlohmann::ordered_json rep;
      rep["records"] = m.size();
      nlohmann::ordered_json stages = nlohmann::ordered_json::object();
      for (const auto& stage : known_stages()) {
        std::map<std::string, long> accept, reject;
        long seen = 0;
        for (const auto& r : m) {
          auto it = r.status.find(stage);
          if (it == r.status.end()) continue;
          ++seen;
          (it->second.decision == Decision::kAccept ? accept : reject)[it->second.reason]++;
        }
        if (!seen) continue;
        stages[stage] = {{"recorded", seen}, {"accept", accept}, {"reject", reject}};
      }
      rep["stages"] = stages;
      if (rep_out.empty()) out << rep.dump(2) << "\n";
      else write_file(rep_out, rep.dump(2) + "\n");
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace curate
