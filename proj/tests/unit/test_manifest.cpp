// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <random>

#include "curate/error.hpp"
#include "curate/manifest.hpp"
#include "doctest.h"
#include "support/synthetic.hpp"

using namespace curate;
using curate::testing::make_record;

namespace {

ClipRecord rich_record(const std::string& id) {
  auto r = make_record(id, 200, "pour", "agibot", "g1");
  r.sub_dataset = "agibot_beta";
  r.caption = Caption{"a table with a cup", "the arm grasps the cup", "the cup is lifted", "static camera"};
  r.frame_task_index = std::vector<long>(200, 3);
  r.static_camera = true;
  r.camera.rotation = {{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}};
  r.camera.translation = {0.1, -0.2, 0.5};
  for (long i = 0; i < 5; ++i) {
    ActionFrame f;
    f.frame_index = i * 10;
    f.position = {0.1 * i, 0.2, 0.7};
    const double h = 0.1 * i;
    f.orientation = {std::cos(h), std::sin(h), 0, 0};
    f.gripper_openness = 0.25 * (i % 5);
    f.arm_id = ArmId::kLeft;
    r.action_frames.push_back(f);
    f.arm_id = ArmId::kRight;
    r.action_frames.push_back(f);
  }
  r.gripper_detections = {{0, 320.5, 240.25, ArmId::kLeft}};
  r.scores["flow_clip_mean"] = 1.2345678901234567;
  r.status["gate"] = {Decision::kAccept, "ok"};
  return r;
}

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
  for (const auto& s : issues)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("quaternion to matrix") {
  Quaternion q{std::cos(M_PI / 4), 0, 0, std::sin(M_PI / 4)};  // 90 degrees about z
  auto m = q.to_matrix();
  CHECK(m[0][0] == doctest::Approx(0).epsilon(1e-12));
  CHECK(m[1][0] == doctest::Approx(1));
  CHECK(m[0][1] == doctest::Approx(-1));
  CHECK(m[2][2] == doctest::Approx(1));
  CHECK(Quaternion{}.norm() == 1.0);
}

TEST_CASE("validate_record names the field") {
  auto r = make_record("c1");
  CHECK(validate_record(r).empty());

  auto bad = r;
  ActionFrame f;
  f.gripper_openness = 1.5;
  bad.action_frames.push_back(f);
  auto issues = validate_record(bad);
  CHECK(mentions(issues, "gripper_openness"));

  bad = r;
  bad.frame_count = 0;
  CHECK(mentions(validate_record(bad), "frame_count"));
  bad = r;
  bad.fps = 0;
  CHECK(mentions(validate_record(bad), "fps"));
  bad = r;
  bad.camera.fx = -1;
  CHECK(mentions(validate_record(bad), "fx"));
  bad = r;
  bad.camera.rotation[0][0] = 2;
  CHECK(mentions(validate_record(bad), "rotation"));
  bad = r;
  bad.camera.rotation = {{{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};  // reflection
  CHECK(mentions(validate_record(bad), "rotation"));

  bad = r;
  f = ActionFrame{};
  f.orientation = {1, 1, 0, 0};
  bad.action_frames = {f};
  CHECK(mentions(validate_record(bad), "orientation"));

  bad = r;
  ActionFrame a, b;
  a.frame_index = 5;
  b.frame_index = 5;
  bad.action_frames = {a, b};
  CHECK(mentions(validate_record(bad), "frame_index"));
  b.frame_index = 500;
  bad.action_frames = {a, b};
  CHECK(mentions(validate_record(bad), "frame_index"));

  bad = r;
  bad.frame_task_index = std::vector<long>(3, 0);
  CHECK(mentions(validate_record(bad), "frame_task_index"));

  bad = r;
  bad.status["dance"] = {Decision::kAccept, ""};
  CHECK(mentions(validate_record(bad), "status"));

  // Dual-arm frames share an index.
  auto dual = rich_record("d");
  CHECK(validate_record(dual).empty());
}

TEST_CASE("load, sort and round trip") {
  curate::testing::TempDir dir("manifest");
  const auto path = dir.path() / "m.jsonl";
  Manifest m({rich_record("c3"), make_record("c1"), make_record("c2")});
  CHECK(m.records()[0].clip_id == "c1");
  CHECK(m.records()[2].clip_id == "c3");
  save_manifest(path, m);
  auto back = load_manifest(path);
  CHECK(back == m);
  CHECK(dump_manifest(back) == dump_manifest(m));
  CHECK(back.find("c3")->caption->state_transition == "the cup is lifted");
  CHECK(back.find("zz") == nullptr);

  // Quaternions are [w, x, y, z].
  CHECK(serialize_record(rich_record("q")).find("\"orientation\":[") != std::string::npos);

  std::mt19937_64 gen(3);
  for (int t = 0; t < 50; ++t) {
    auto r = rich_record("r" + std::to_string(t));
    r.scores["x"] = std::uniform_real_distribution<double>(-1e6, 1e6)(gen);
    r.fps = 1.0 + (gen() % 1000) / 7.0;
    const auto line = serialize_record(r);
    CHECK(serialize_record(parse_record(line)) == line);
    CHECK(parse_record(line) == r);
  }
}

TEST_CASE("load errors") {
  curate::testing::TempDir dir("manifest_err");
  const auto path = dir.path() / "m.jsonl";
  std::ofstream(path) << serialize_record(make_record("c1")) << "\n" << serialize_record(make_record("c1")) << "\n";
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("c1"), ValidationError);

  std::ofstream(path) << serialize_record(make_record("c1")) << "\n{not json\n";
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("line 2"), ValidationError);

  auto r = make_record("c9");
  ActionFrame f;
  f.gripper_openness = 1.5;
  r.action_frames.push_back(f);
  std::ofstream(path) << serialize_record(r) << "\n";
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("gripper_openness"), ValidationError);
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("c9"), ValidationError);

  CHECK_THROWS_AS(load_manifest(dir.path() / "missing.jsonl"), ValidationError);
}

TEST_CASE("merge_manifests") {
  Manifest m({make_record("a"), make_record("b")});
  CHECK(merge_manifests(m, Manifest{}) == m);
  CHECK(merge_manifests(Manifest{}, m) == m);
  Manifest n({make_record("c"), make_record("d"), make_record("e")});
  auto u = merge_manifests(m, n);
  CHECK(u.size() == 5);
  CHECK(merge_manifests(n, m) == u);
  CHECK(merge_manifests(u, m) == u);

  auto other = make_record("a");
  other.task_text = "something else";
  CHECK_THROWS_WITH_AS(merge_manifests(m, Manifest({other})), doctest::Contains("a"), ValidationError);

  Manifest p({make_record("f")});
  CHECK(merge_manifests(merge_manifests(m, n), p) == merge_manifests(m, merge_manifests(n, p)));
}

TEST_CASE("record_decision ledger") {
  auto r = make_record("c");
  auto a = record_decision(r, "gate", Decision::kAccept, "ok");
  CHECK(a.status.at("gate") == StageEntry{Decision::kAccept, "ok"});
  CHECK(record_decision(a, "gate", Decision::kAccept, "ok") == a);
  CHECK_THROWS_AS(record_decision(a, "gate", Decision::kReject, "too_short"), ValidationError);
  CHECK_THROWS_AS(record_decision(a, "gate", Decision::kAccept, "other"), ValidationError);
  CHECK_THROWS_AS(record_decision(r, "dance", Decision::kAccept, ""), ValidationError);
}
