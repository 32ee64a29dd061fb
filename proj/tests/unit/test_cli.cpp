// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "curate/cli.hpp"
#include "curate/judge.hpp"
#include "curate/manifest.hpp"
#include "curate/service.hpp"
#include "doctest.h"
#include "support/synthetic.hpp"

using namespace curate;
using curate::testing::make_record;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

Checklist small_checklist() {
  Checklist c;
  c.instruction = "put the cup on the plate";
  c.questions = {{"q1", "Does the cup pass through the table?", Polarity::kNegative, 1, Answer::kNo},
                 {"q2", "Is the cup on the plate at the end?", Polarity::kPositive, 2, Answer::kYes},
                 {"q3", "Does the gripper close on the cup?", Polarity::kPositive, 2, Answer::kYes}};
  return c;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(cli({"--version"}).code == 0);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"no-such-command"}).code == 1);
  CHECK(cli({"gate"}).code == 1);  // missing required options
  curate::testing::TempDir dir("cli_codes");
  CHECK(cli({"gate", "--manifest", (dir.path() / "absent.jsonl").string(), "--out", (dir.path() / "o").string()})
            .code == 1);
  // A stage hard error is exit code 2.
  save_manifest(dir.path() / "m.jsonl", Manifest({make_record("c", 200)}));
  write(dir.path() / "cfg.json", R"({"coherence.provider": "sidecar", "coherence.sidecar_dir": ")" +
                                     dir.path().string() + R"("})");
  auto r = cli({"coherence-filter", "--manifest", (dir.path() / "m.jsonl").string(), "--config",
                (dir.path() / "cfg.json").string(), "--out", (dir.path() / "o.jsonl").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("stage coherence, clip c") != std::string::npos);
}

TEST_CASE("dpo-loss prints the value") {
  auto r = cli({"dpo-loss", "--l-theta-w", "0", "--l-theta-l", "0", "--l-ref-w", "0", "--l-ref-l", "0", "--beta", "1"});
  CHECK(r.code == 0);
  CHECK(std::stod(r.out) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cli({"dpo-loss", "--l-theta-w", "-1", "--l-theta-l", "0", "--l-ref-w", "0", "--l-ref-l", "0"}).code == 1);
}

TEST_CASE("ingest, balance, run and report") {
  curate::testing::TempDir dir("cli_run");
  std::vector<ClipRecord> a, b;
  for (int i = 0; i < 30; ++i) {
    auto r = make_record("c" + std::to_string(i), i < 4 ? 40 : 200, "t" + std::to_string(i % 4));
    r.static_camera = true;
    r.scores["flow_clip_mean"] = 1.0;
    r.scores["flow_net_to_path_ratio"] = 0.5;
    (i % 2 ? a : b).push_back(r);
  }
  save_manifest(dir.path() / "a.jsonl", Manifest(a));
  save_manifest(dir.path() / "b.jsonl", Manifest(b));
  const auto merged = (dir.path() / "m.jsonl").string();
  CHECK(cli({"ingest", "--input", (dir.path() / "a.jsonl").string(), (dir.path() / "b.jsonl").string(), "--out",
             merged})
            .code == 0);
  CHECK(load_manifest(merged).size() == 30);

  write(dir.path() / "cfg.json", R"({"seed": 5, "gate.verify_frames": false})");
  const auto cfg = (dir.path() / "cfg.json").string();
  auto r = cli({"balance", "--manifest", merged, "--config", cfg, "--out", (dir.path() / "sel.txt").string(),
                "--plan", (dir.path() / "plan.json").string()});
  CHECK(r.code == 0);
  CHECK(Json::parse(slurp(dir.path() / "plan.json")).contains("audit"));

  for (const char* sub : {"o1", "o2"}) {
    CHECK(cli({"run", "--manifest", merged, "--config", cfg, "--out-dir", (dir.path() / sub).string()}).code == 0);
  }
  CHECK(slurp(dir.path() / "o1" / "report.json") == slurp(dir.path() / "o2" / "report.json"));
  const auto report = Json::parse(slurp(dir.path() / "o1" / "report.json"));
  CHECK(report["stages"][0]["rejected"] == 4);
  CHECK(report["seed"] == 5);

  r = cli({"report", "--manifest", (dir.path() / "o1" / "final.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("gate") != std::string::npos);

  write(dir.path() / "bad.json", R"({"gate.bogus": 1})");
  CHECK(cli({"run", "--manifest", merged, "--config", (dir.path() / "bad.json").string(), "--out-dir",
             (dir.path() / "o3").string()})
            .code == 1);
}

TEST_CASE("judge mine against a replayed transcript") {
  curate::testing::TempDir dir("cli_judge");
  const auto transcript = dir.path() / "transcript.jsonl";
  const Checklist cl = small_checklist();

  // Record what a scripted scorer says; the CLI then replays it offline.
  ScriptedServiceClient scripted([](const std::string& path, const Json& body) -> Json {
    if (path == "/answer") {
      const auto video = body["video_ref"].get<std::string>();
      const auto q = body["question"].get<std::string>();
      if (q.find("through") != std::string::npos) return {{"answer", video == "v2" ? "yes" : "no"}};
      return {{"answer", video == "v3" ? "no" : "yes"}};
    }
    const auto a = body["video_a"].get<std::string>(), b = body["video_b"].get<std::string>();
    return {{"preferred", a < b ? "a" : "b"}};
  });
  {
    TranscriptRecorder rec(scripted, transcript);
    std::vector<Candidate> cands;
    for (const char* id : {"v0", "v1", "v2", "v3"}) {
      Candidate c;
      c.clip_id = id;
      const auto rep = score_sv(cl, answer_checklist(rec, id, cl), id);
      c.s_v = rep.s_v;
      c.vetoed = rep.tier1_violated;
      cands.push_back(c);
    }
    mine_triplet({}, cands, pairwise_comparator(cands, cl, rec), "pairwise");
  }

  Json group{{"condition_ref", {{"prompt", cl.instruction}, {"first_frame", "f0.png"}}},
             {"checklist", checklist_to_json(cl)},
             {"candidates", Json::array({{{"clip_id", "v0"}}, {{"clip_id", "v1"}}, {{"clip_id", "v2"}}, {{"clip_id", "v3"}}})}};
  write(dir.path() / "groups.jsonl", group.dump() + "\n");
  auto r = cli({"judge", "mine", "--candidates", (dir.path() / "groups.jsonl").string(), "--replay", transcript.string(),
                "--out", (dir.path() / "triplets.jsonl").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto t = Json::parse(slurp(dir.path() / "triplets.jsonl"));
  CHECK(t["winner"] == "v0");
  CHECK(t["loser"] == "v3");
  CHECK(t["path"] == "pairwise");

  // Without the transcript the mock has nothing to say: a transport failure.
  write(dir.path() / "empty.jsonl", "");
  r = cli({"judge", "mine", "--candidates", (dir.path() / "groups.jsonl").string(), "--replay",
           (dir.path() / "empty.jsonl").string(), "--out", (dir.path() / "t2.jsonl").string()});
  CHECK(r.code == 2);

  // S_v path with explicit predictions.
  write(dir.path() / "cl.json", checklist_to_json(cl).dump());
  write(dir.path() / "pred.json", R"({"q1": "no", "q2": "yes", "q3": "no"})");
  r = cli({"judge", "score", "--checklist", (dir.path() / "cl.json").string(), "--predictions",
           (dir.path() / "pred.json").string(), "--out", (dir.path() / "score.json").string()});
  CHECK(r.code == 0);
  CHECK(Json::parse(slurp(dir.path() / "score.json"))["s_v"].get<double>() == doctest::Approx(2.0 / 3.0));
}
