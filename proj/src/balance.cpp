// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/balance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "curate/error.hpp"
#include "curate/rng.hpp"

namespace curate {

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::kHead: return "head";
    case Tier::kBody: return "body";
    case Tier::kTail: return "tail";
  }
  return "body";
}

void SamplingConfig::validate() const {
  if (!(f_head >= 0.08 && f_head <= 0.15)) throw ValidationError("balance.f_head must lie in [0.08, 0.15]");
  if (!(f_body >= 0.40 && f_body <= 0.50)) throw ValidationError("balance.f_body must lie in [0.40, 0.50]");
  if (!(tail_max_count < head_min_count)) throw ValidationError("balance.tail_max_count must be < head_min_count");
  if (!(robot_share_cap > 0.0 && robot_share_cap <= 1.0)) {
    throw ValidationError("balance.robot_share_cap must lie in (0, 1]");
  }
  if (level1_preserve_max < 0) throw ValidationError("balance.level1_preserve_max must be >= 0");
  for (const auto& [ds, cap] : macro_cap) {
    if (cap < 0) throw ValidationError("balance.macro_cap." + ds + " must be >= 0");
  }
  for (const auto& [ds, floor] : micro_floor) {
    if (floor < 0) throw ValidationError("balance.micro_floor." + ds + " must be >= 0");
  }
}

// ---------------------------------------------------------------------------

Counts allocate_proportional(long total, const std::vector<AllocSlot>& slots) {
  using i128 = __int128;
  Counts out;
  long sum_lo = 0, sum_hi = 0;
  for (const auto& s : slots) {
    if (s.lo > s.hi || s.lo < 0 || s.weight < 0) throw ValidationError("allocate: bad slot \"" + s.id + "\"");
    if (!out.emplace(s.id, s.lo).second) throw ValidationError("allocate: duplicate slot \"" + s.id + "\"");
    sum_lo += s.lo;
    sum_hi += s.hi;
  }
  long remaining = std::clamp(total, sum_lo, sum_hi) - sum_lo;

  std::vector<const AllocSlot*> active;
  for (const auto& s : slots)
    if (s.hi > s.lo) active.push_back(&s);

  while (remaining > 0 && !active.empty()) {
    auto headroom = [&](const AllocSlot* s) { return s->hi - out[s->id]; };
    i128 wsum = 0;
    for (auto* s : active) wsum += s->weight;
    const bool by_headroom = wsum == 0;
    auto weight = [&](const AllocSlot* s) -> i128 { return by_headroom ? headroom(s) : s->weight; };
    if (by_headroom)
      for (auto* s : active) wsum += headroom(s);

    // Slots whose proportional share reaches their headroom fill up first.
    std::vector<const AllocSlot*> saturated, rest;
    for (auto* s : active) {
      (static_cast<i128>(remaining) * weight(s) >= static_cast<i128>(headroom(s)) * wsum ? saturated : rest)
          .push_back(s);
    }
    if (!saturated.empty()) {
      for (auto* s : saturated) {
        remaining -= headroom(s);
        out[s->id] = s->hi;
      }
      active = std::move(rest);
      continue;
    }

    struct Frac {
      const AllocSlot* slot;
      i128 rem;
    };
    std::vector<Frac> fracs;
    long given = 0;
    for (auto* s : active) {
      const i128 num = static_cast<i128>(remaining) * weight(s);
      const long base = static_cast<long>(num / wsum);
      out[s->id] += base;
      given += base;
      fracs.push_back({s, num % wsum});
    }
    std::sort(fracs.begin(), fracs.end(), [](const Frac& a, const Frac& b) {
      if (a.rem != b.rem) return a.rem > b.rem;
      return a.slot->id < b.slot->id;
    });
    long left = remaining - given;
    for (std::size_t i = 0; left > 0 && i < fracs.size(); ++i) {
      if (out[fracs[i].slot->id] < fracs[i].slot->hi) {
        ++out[fracs[i].slot->id];
        --left;
      }
    }
    remaining = left;
    if (remaining > 0) {
      std::vector<const AllocSlot*> still;
      for (auto* s : active)
        if (headroom(s) > 0) still.push_back(s);
      active = std::move(still);
    }
  }
  return out;
}

std::map<std::string, Tier> classify_tiers(const Counts& task_counts, const SamplingConfig& cfg) {
  std::map<std::string, Tier> tiers;
  for (const auto& [task, n] : task_counts) {
    if (n >= cfg.head_min_count) tiers[task] = Tier::kHead;
    else if (n <= cfg.tail_max_count) tiers[task] = Tier::kTail;
    else tiers[task] = Tier::kBody;
  }
  return tiers;
}

std::set<std::string> level1_preserve(const Manifest& manifest, const SamplingConfig& cfg) {
  Counts per_sub;
  for (const auto& r : manifest) ++per_sub[r.sub_dataset];
  std::set<std::string> out;
  for (const auto& [sub, n] : per_sub)
    if (n <= cfg.level1_preserve_max) out.insert(sub);
  return out;
}

Counts level2_robot_rebalance(const Counts& counts, const SamplingConfig& cfg) {
  long present = 0, largest = 0;
  for (const auto& [robot, n] : counts) {
    if (n < 0) throw ValidationError("level2: negative count for robot \"" + robot + "\"");
    if (n > 0) ++present;
    largest = std::max(largest, n);
  }
  if (present == 0) throw ValidationError("level2: all robot counts are zero");

  const double cap = std::max(cfg.robot_share_cap, 1.0 / static_cast<double>(present));
  long level = largest;
  for (;;) {
    long sum = 0;
    for (const auto& [robot, n] : counts) sum += std::min(n, level);
    const long next = std::min(level, static_cast<long>(std::floor(cap * static_cast<double>(sum) + 1e-9)));
    if (next == level) break;
    level = next;
  }
  Counts out;
  for (const auto& [robot, n] : counts) out[robot] = std::min(n, level);
  return out;
}

Counts level3_task_quota(const Counts& task_counts, const std::map<std::string, Tier>& tiers,
                         const SamplingConfig& cfg) {
  if (!(cfg.f_head >= 0.08 && cfg.f_head <= 0.15)) throw ValidationError("level3: f_head outside [0.08, 0.15]");
  if (!(cfg.f_body >= 0.40 && cfg.f_body <= 0.50)) throw ValidationError("level3: f_body outside [0.40, 0.50]");
  Counts out;
  for (const auto& [task, n] : task_counts) {
    auto it = tiers.find(task);
    if (it == tiers.end()) throw ValidationError("level3: no tier for task \"" + task + "\"");
    long q = n;
    if (it->second == Tier::kHead) q = std::lround(cfg.f_head * static_cast<double>(n));
    if (it->second == Tier::kBody) q = std::lround(cfg.f_body * static_cast<double>(n));
    if (n >= 1) q = std::max(q, 1L);
    out[task] = q;
  }
  return out;
}

SupplementResult three_round_supplement(const Counts& current, const Counts& pool, long floor, std::uint64_t seed) {
  SupplementResult res;
  res.allocation = current;
  long have = 0;
  for (const auto& [task, n] : current) {
    auto it = pool.find(task);
    const long avail = it == pool.end() ? 0 : it->second;
    if (n > avail) throw ValidationError("supplement: task \"" + task + "\" already exceeds its availability");
    have += n;
  }
  const long deficit = floor - have;
  if (deficit <= 0) return res;
  auto headroom = [&](const std::string& task) {
    auto it = pool.find(task);
    return (it == pool.end() ? 0 : it->second) - res.allocation[task];
  };

  // Round 1: equal base quota.
  if (!current.empty()) {
    const long base = deficit / static_cast<long>(current.size());
    for (const auto& [task, n] : current) {
      const long add = std::min(base, headroom(task));
      res.allocation[task] += add;
      res.added[0] += add;
    }
  }

  // Round 2: unused quota in proportion to the remaining headroom.
  long leftover = deficit - res.added[0];
  if (leftover > 0) {
    std::vector<AllocSlot> slots;
    for (const auto& [task, n] : current) {
      const long h = headroom(task);
      slots.push_back({task, h, 0, h});
    }
    for (const auto& [task, add] : allocate_proportional(leftover, slots)) {
      res.allocation[task] += add;
      res.added[1] += add;
    }
  }

  // Round 3: random fallback over every remaining unit of the pool.
  long residual = deficit - res.added[0] - res.added[1];
  if (residual > 0) {
    std::vector<std::pair<std::string, long>> units;
    long total = 0;
    for (const auto& [task, avail] : pool) {
      const long h = avail - (res.allocation.count(task) ? res.allocation[task] : 0);
      if (h > 0) {
        units.emplace_back(task, h);
        total += h;
      }
    }
    DeterministicRng rng(derive_seed(seed, "supplement"));
    while (residual > 0 && total > 0) {
      auto pick = static_cast<long>(rng.below(static_cast<std::uint64_t>(total)));
      for (auto& [task, h] : units) {
        if (pick < h) {
          ++res.allocation[task];
          --h;
          break;
        }
        pick -= h;
      }
      --total;
      --residual;
      ++res.added[2];
    }
  }
  res.partial = residual > 0;
  return res;
}

// ---------------------------------------------------------------------------
// Plan assembly

namespace {

LevelAudit audit_level(const std::string& level, const SamplingPlan& plan, bool use_available) {
  LevelAudit a;
  a.level = level;
  for (const auto& [key, e] : plan.entries) {
    const long n = use_available ? e.available : e.target;
    a.total += n;
    a.by_dataset[key.dataset] += n;
    a.by_robot[key.robot_type] += n;
    auto it = plan.tier.find(key.task_id);
    if (it != plan.tier.end()) a.by_tier[std::string(to_string(it->second))] += n;
  }
  return a;
}

bool is_tail(const SamplingPlan& plan, const PlanKey& key) {
  auto it = plan.tier.find(key.task_id);
  return it != plan.tier.end() && it->second == Tier::kTail;
}

// Entries can never drop below this.
long fixed_floor(const SamplingPlan& plan, const PlanKey& key, const PlanEntry& e) {
  return is_tail(plan, key) ? e.available : e.protected_count;
}

// Redistributes `total` over the given keys with the given bounds.
template <typename Lo, typename Hi, typename W>
void spread(SamplingPlan& plan, const std::vector<PlanKey>& keys, long total, Lo lo, Hi hi, W weight) {
  std::vector<AllocSlot> slots;
  for (const auto& k : keys) {
    const PlanEntry& e = plan.entries.at(k);
    slots.push_back({k.str(), weight(k, e), lo(k, e), hi(k, e)});
  }
  const Counts alloc = allocate_proportional(total, slots);
  for (const auto& k : keys) plan.entries.at(k).target = alloc.at(k.str());
}

}  // namespace

SamplingPlan level4_macro_regulate(SamplingPlan plan, const SamplingConfig& cfg) {
  std::map<std::string, std::map<std::string, std::vector<PlanKey>>> by_dataset_task;
  for (const auto& [key, e] : plan.entries) by_dataset_task[key.dataset][key.task_id].push_back(key);

  for (const auto& [dataset, tasks] : by_dataset_task) {
    long total = 0, fixed = 0;
    Counts task_target, task_fixed, task_avail;
    for (const auto& [task, keys] : tasks) {
      for (const auto& k : keys) {
        const PlanEntry& e = plan.entries.at(k);
        total += e.target;
        fixed += fixed_floor(plan, k, e);
        task_target[task] += e.target;
        task_fixed[task] += fixed_floor(plan, k, e);
        task_avail[task] += e.available;
      }
    }

    if (auto cap = cfg.macro_cap.find(dataset); cap != cfg.macro_cap.end() && total > cap->second) {
      if (cap->second < fixed) {
        throw Error("level4: macro_cap " + std::to_string(cap->second) + " for dataset \"" + dataset +
                    "\" is below its " + std::to_string(fixed) + " protected/tail clips");
      }
      std::vector<AllocSlot> slots;
      for (const auto& [task, t] : task_target) slots.push_back({task, t, task_fixed[task], t});
      const Counts scaled = allocate_proportional(cap->second, slots);
      for (const auto& [task, keys] : tasks) {
        spread(
            plan, keys, scaled.at(task), [&](const PlanKey& k, const PlanEntry& e) { return fixed_floor(plan, k, e); },
            [](const PlanKey&, const PlanEntry& e) { return e.target; },
            [](const PlanKey&, const PlanEntry& e) { return e.target; });
      }
      total = cap->second;
    }

    if (auto floor = cfg.micro_floor.find(dataset); floor != cfg.micro_floor.end() && total < floor->second) {
      const auto sup = three_round_supplement(task_target, task_avail, floor->second, derive_seed(cfg.seed, dataset));
      if (sup.partial) plan.partial_datasets.insert(dataset);
      for (const auto& [task, keys] : tasks) {
        spread(
            plan, keys, sup.allocation.at(task), [](const PlanKey&, const PlanEntry& e) { return e.target; },
            [](const PlanKey&, const PlanEntry& e) { return e.available; },
            [](const PlanKey&, const PlanEntry& e) { return e.available - e.target; });
      }
    }
  }
  return plan;
}

SamplingPlan build_plan(const Manifest& manifest, const SamplingConfig& cfg) {
  cfg.validate();
  SamplingPlan plan;
  plan.protected_sub_datasets = level1_preserve(manifest, cfg);

  Counts task_counts;
  for (const auto& r : manifest) {
    PlanEntry& e = plan.entries[PlanKey{r.source_dataset, r.robot_type, r.task_id}];
    ++e.available;
    if (plan.protected_sub_datasets.count(r.sub_dataset)) ++e.protected_count;
    ++task_counts[r.task_id];
  }
  plan.tier = classify_tiers(task_counts, cfg);
  for (auto& [key, e] : plan.entries) e.target = e.available;
  plan.audit.push_back(audit_level("input", plan, true));
  if (plan.entries.empty()) return plan;

  // Level 1 shows up as protected_count floors below.
  LevelAudit l1;
  l1.level = "level1_protected";
  for (const auto& [key, e] : plan.entries) {
    l1.total += e.protected_count;
    l1.by_dataset[key.dataset] += e.protected_count;
    l1.by_robot[key.robot_type] += e.protected_count;
    l1.by_tier[std::string(to_string(plan.tier.at(key.task_id)))] += e.protected_count;
  }
  plan.audit.push_back(std::move(l1));

  // Level 2: robot shares.
  Counts robot_counts;
  std::map<std::string, std::vector<PlanKey>> by_robot, by_task;
  for (const auto& [key, e] : plan.entries) {
    robot_counts[key.robot_type] += e.available;
    by_robot[key.robot_type].push_back(key);
    by_task[key.task_id].push_back(key);
  }
  const Counts robot_target = level2_robot_rebalance(robot_counts, cfg);
  for (const auto& [robot, keys] : by_robot) {
    spread(
        plan, keys, robot_target.at(robot), [](const PlanKey&, const PlanEntry& e) { return e.protected_count; },
        [](const PlanKey&, const PlanEntry& e) { return e.available; },
        [](const PlanKey&, const PlanEntry& e) { return e.available; });
  }
  plan.audit.push_back(audit_level("level2_robot", plan, false));

  // Level 3: tier quotas over what level 2 kept; tails restored in full.
  Counts task_after_l2;
  for (const auto& [task, keys] : by_task)
    for (const auto& k : keys) task_after_l2[task] += plan.entries.at(k).target;
  const Counts quota = level3_task_quota(task_after_l2, plan.tier, cfg);
  for (const auto& [task, keys] : by_task) {
    if (plan.tier.at(task) == Tier::kTail) {
      for (const auto& k : keys) plan.entries.at(k).target = plan.entries.at(k).available;
      continue;
    }
    spread(
        plan, keys, quota.at(task), [](const PlanKey&, const PlanEntry& e) { return e.protected_count; },
        [](const PlanKey&, const PlanEntry& e) { return e.available; },
        [](const PlanKey&, const PlanEntry& e) { return e.target; });
  }
  plan.audit.push_back(audit_level("level3_task", plan, false));

  plan = level4_macro_regulate(std::move(plan), cfg);
  plan.audit.push_back(audit_level("level4_macro", plan, false));
  return plan;
}

std::vector<std::string> execute_plan(const Manifest& manifest, const SamplingPlan& plan, std::uint64_t seed) {
  std::map<PlanKey, std::vector<const ClipRecord*>> groups;
  for (const auto& r : manifest) groups[PlanKey{r.source_dataset, r.robot_type, r.task_id}].push_back(&r);

  std::vector<std::string> selected;
  for (const auto& [key, entry] : plan.entries) {
    auto it = groups.find(key);
    if (it == groups.end()) {
      if (entry.target == 0) continue;
      throw ValidationError("plan key " + key.str() + " is absent from the manifest");
    }
    std::vector<std::string> keep, rest;
    for (const ClipRecord* r : it->second) {
      (plan.protected_sub_datasets.count(r->sub_dataset) ? keep : rest).push_back(r->clip_id);
    }
    if (entry.target > static_cast<long>(it->second.size())) {
      throw ValidationError("plan key " + key.str() + " asks for more clips than exist");
    }
    DeterministicRng rng(derive_seed(seed, key.str()));
    rng.shuffle(std::span<std::string>(rest));
    const long extra = std::max(0L, entry.target - static_cast<long>(keep.size()));
    keep.insert(keep.end(), rest.begin(), rest.begin() + std::min<long>(extra, static_cast<long>(rest.size())));
    selected.insert(selected.end(), keep.begin(), keep.end());
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

nlohmann::ordered_json plan_to_json(const SamplingPlan& plan) {
  using oj = nlohmann::ordered_json;
  oj j;
  oj entries = oj::array();
  for (const auto& [key, e] : plan.entries) {
    entries.push_back({{"dataset", key.dataset},
                       {"robot_type", key.robot_type},
                       {"task_id", key.task_id},
                       {"tier", to_string(plan.tier.at(key.task_id))},
                       {"available", e.available},
                       {"protected", e.protected_count},
                       {"target", e.target}});
  }
  j["entries"] = std::move(entries);
  oj tiers = oj::object();
  for (const auto& [task, t] : plan.tier) tiers[task] = to_string(t);
  j["tiers"] = std::move(tiers);
  j["protected_sub_datasets"] = plan.protected_sub_datasets;
  j["partial_datasets"] = plan.partial_datasets;
  oj audit = oj::array();
  for (const auto& a : plan.audit) {
    audit.push_back({{"level", a.level},
                     {"total", a.total},
                     {"by_dataset", a.by_dataset},
                     {"by_robot", a.by_robot},
                     {"by_tier", a.by_tier}});
  }
  j["audit"] = std::move(audit);
  return j;
}

}  // namespace curate
