// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical distribution balancing. Four levels run in a fixed order:
//   1. small sub-datasets are protected from any downsampling;
//   2. robot types are capped at a share of the running total (water-filling);
//   3. tasks get tier quotas (head / body downsampled, tail kept whole);
//   4. macro-datasets are capped, micro-datasets lifted to a coverage floor.
// A later level overrides an earlier one, except that tail tasks and
// protected clips are never reduced; a cap that would force that is an error.
//
// All integer rounding is largest-remainder with ties going to the smaller id,
// so every total is exact and every run is reproducible.

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "curate/manifest.hpp"
#include "json.hpp"

namespace curate {

enum class Tier { kHead, kBody, kTail };

std::string_view to_string(Tier t);

struct SamplingConfig {
  std::uint64_t seed = 0;
  long level1_preserve_max = 5000;
  double robot_share_cap = 0.35;
  long head_min_count = 10000;
  long tail_max_count = 500;
  double f_head = 0.10;
  double f_body = 0.45;
  std::map<std::string, long> macro_cap;    // dataset -> max clips
  std::map<std::string, long> micro_floor;  // dataset -> min clips

  void validate() const;
};

using Counts = std::map<std::string, long>;

struct PlanKey {
  std::string dataset;
  std::string robot_type;
  std::string task_id;

  auto operator<=>(const PlanKey&) const = default;
  std::string str() const { return dataset + "/" + robot_type + "/" + task_id; }
};

struct PlanEntry {
  long available = 0;
  long protected_count = 0;
  long target = 0;

  bool operator==(const PlanEntry&) const = default;
};

/// Totals after one level, by dataset / robot type / tier.
struct LevelAudit {
  std::string level;
  long total = 0;
  Counts by_dataset;
  Counts by_robot;
  Counts by_tier;
};

struct SamplingPlan {
  std::map<PlanKey, PlanEntry> entries;
  std::map<std::string, Tier> tier;
  std::set<std::string> protected_sub_datasets;
  std::set<std::string> partial_datasets;  // micro floor could not be met
  std::vector<LevelAudit> audit;
};

/// One bucket for allocate_proportional.
struct AllocSlot {
  std::string id;
  long weight = 0;
  long lo = 0;
  long hi = 0;
};

/// Splits `total` over the slots proportionally to weight within [lo, hi]
/// (caps bind by water-filling), flooring each share and handing the rest out
/// by descending fractional part, ties to the smaller id. The result sums to
/// total clamped into [sum lo, sum hi]. Exact integer arithmetic throughout.
Counts allocate_proportional(long total, const std::vector<AllocSlot>& slots);

std::map<std::string, Tier> classify_tiers(const Counts& task_counts, const SamplingConfig& cfg);

/// Sub-datasets with at most level1_preserve_max clips.
std::set<std::string> level1_preserve(const Manifest& manifest, const SamplingConfig& cfg);

/// Largest L with L <= floor(cap * sum_r min(count_r, L)); target_r = min(count_r, L).
/// The cap is raised to 1/n when n robot types cannot all fit under it.
Counts level2_robot_rebalance(const Counts& counts, const SamplingConfig& cfg);

/// head: round(f_head n), body: round(f_body n), tail: n; at least 1 when n >= 1.
Counts level3_task_quota(const Counts& task_counts, const std::map<std::string, Tier>& tiers,
                         const SamplingConfig& cfg);

struct SupplementResult {
  Counts allocation;
  long added[3] = {0, 0, 0};  // per round
  bool partial = false;
};

/// Lifts sum(current) to `floor`: (1) an equal base quota per task clipped at
/// availability, (2) the unused remainder spread over per-task headroom,
/// (3) residual units drawn uniformly without replacement from the whole pool
/// (tasks of `pool` absent from `current` included). `partial` is set when
/// the pool runs dry first.
SupplementResult three_round_supplement(const Counts& current, const Counts& pool, long floor, std::uint64_t seed);

/// Applies macro caps and micro floors per dataset. Tail tasks and protected
/// clips are fixed; a cap below them throws.
SamplingPlan level4_macro_regulate(SamplingPlan plan, const SamplingConfig& cfg);

/// Runs levels 1-4 over the manifest.
SamplingPlan build_plan(const Manifest& manifest, const SamplingConfig& cfg);

/// Selects clips per plan key: protected clips first, the rest by a seeded
/// Fisher-Yates shuffle of the key's sorted ids (seed derived from the key).
/// Returns sorted clip ids.
std::vector<std::string> execute_plan(const Manifest& manifest, const SamplingPlan& plan, std::uint64_t seed);

nlohmann::ordered_json plan_to_json(const SamplingPlan& plan);

}  // namespace curate
