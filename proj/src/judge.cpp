// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "curate/error.hpp"

namespace curate {

std::string_view to_string(Polarity p) { return p == Polarity::kPositive ? "positive" : "negative"; }
std::string_view to_string(Answer a) { return a == Answer::kYes ? "yes" : "no"; }

Answer parse_answer(std::string_view text) {
  if (text == "yes") return Answer::kYes;
  if (text == "no") return Answer::kNo;
  throw ValidationError("answer must be \"yes\" or \"no\", got \"" + std::string(text) + "\"");
}

namespace {

Polarity parse_polarity(std::string_view text) {
  if (text == "positive") return Polarity::kPositive;
  if (text == "negative") return Polarity::kNegative;
  throw ValidationError("polarity must be \"positive\" or \"negative\", got \"" + std::string(text) + "\"");
}

std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

Checklist checklist_from_json(const Json& j) {
  try {
    Checklist c;
    c.instruction = j.value("instruction", "");
    c.first_frame_ref = j.value("first_frame_ref", "");
    for (const auto& q : j.at("questions")) {
      ChecklistQuestion cq;
      cq.question_id = q.at("question_id").get<std::string>();
      cq.text = q.at("text").get<std::string>();
      cq.polarity = parse_polarity(q.at("polarity").get<std::string>());
      cq.tier = q.at("tier").get<int>();
      cq.gt_answer = parse_answer(q.at("gt_answer").get<std::string>());
      c.questions.push_back(std::move(cq));
    }
    return c;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("checklist: ") + e.what());
  }
}

Json checklist_to_json(const Checklist& c) {
  Json qs = Json::array();
  for (const auto& q : c.questions) {
    qs.push_back({{"question_id", q.question_id},
                  {"text", q.text},
                  {"polarity", to_string(q.polarity)},
                  {"tier", q.tier},
                  {"gt_answer", to_string(q.gt_answer)}});
  }
  return {{"instruction", c.instruction}, {"first_frame_ref", c.first_frame_ref}, {"questions", qs}};
}

std::vector<std::string> validate_checklist(const Checklist& c) {
  std::vector<std::string> out;
  const long n = static_cast<long>(c.questions.size());
  if (n == 0) {
    out.push_back("no questions");
    return out;
  }
  long neg = 0, tier1 = 0;
  std::set<std::string> ids;
  for (const auto& q : c.questions) {
    if (q.question_id.empty()) out.push_back("question with empty id");
    else if (!ids.insert(q.question_id).second) out.push_back("duplicate question id \"" + q.question_id + "\"");
    if (q.text.empty()) out.push_back("question \"" + q.question_id + "\": empty text");
    if (q.tier != 1 && q.tier != 2) out.push_back("question \"" + q.question_id + "\": tier must be 1 or 2");
    neg += q.polarity == Polarity::kNegative;
    tier1 += q.tier == 1;
  }
  // 0.30 <= neg/n <= 0.50 in integers.
  const double ratio = static_cast<double>(neg) / static_cast<double>(n);
  if (10 * neg < 3 * n) out.push_back("negative ratio " + fixed2(ratio) + " < 0.30");
  if (10 * neg > 5 * n) out.push_back("negative ratio " + fixed2(ratio) + " > 0.50");
  if (tier1 == 0) out.push_back("no Tier-1 question");
  return out;
}

ScoreReport score_sv(const Checklist& c, const std::map<std::string, Answer>& predictions, const std::string& clip_id) {
  if (c.questions.empty()) throw ValidationError("score_sv: checklist has no questions");
  ScoreReport r;
  r.clip_id = clip_id;
  long matches = 0;
  for (const auto& q : c.questions) {
    auto it = predictions.find(q.question_id);
    if (it == predictions.end()) throw ValidationError("score_sv: missing prediction for \"" + q.question_id + "\"");
    QuestionScore s{it->second, it->second == q.gt_answer};
    matches += s.match;
    if (q.tier == 1 && !s.match) r.tier1_violated = true;
    if (!r.per_question.emplace(q.question_id, s).second) {
      throw ValidationError("score_sv: duplicate question id \"" + q.question_id + "\"");
    }
  }
  for (const auto& [id, a] : predictions) {
    if (!r.per_question.count(id)) throw ValidationError("score_sv: prediction for unknown question \"" + id + "\"");
  }
  r.s_v = static_cast<double>(matches) / static_cast<double>(c.questions.size());
  return r;
}

Json score_report_to_json(const ScoreReport& r) {
  Json pq = Json::object();
  for (const auto& [id, s] : r.per_question) pq[id] = {{"predicted", to_string(s.predicted)}, {"match", s.match}};
  return {{"clip_id", r.clip_id}, {"s_v", r.s_v}, {"tier1_violated", r.tier1_violated}, {"per_question", pq}};
}

// ---------------------------------------------------------------------------

KnockoutResult knockout_tournament(const std::vector<std::size_t>& entrants, const Comparator& compare) {
  if (entrants.size() < 2) throw ValidationError("knockout needs at least 2 candidates");
  KnockoutResult res;
  std::vector<std::size_t> round = entrants;
  bool first = true;
  while (round.size() > 1) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i + 1 < round.size(); i += 2) {
      const std::size_t a = round[i], b = round[i + 1];
      const int c = compare(a, b);
      ++res.comparisons;
      next.push_back(c <= 0 ? a : b);
      if (first) res.first_round_losers.push_back(c <= 0 ? b : a);
    }
    if (round.size() % 2 == 1) {
      next.push_back(round.back());
      if (first) res.first_round_bye = round.back();
    }
    first = false;
    round = std::move(next);
  }
  res.winner = round.front();
  return res;
}

LoserBracketResult loser_bracket(const std::vector<std::size_t>& losers, const Comparator& compare) {
  if (losers.empty()) throw ValidationError("loser bracket needs at least 1 candidate");
  LoserBracketResult res;
  std::vector<std::size_t> round = losers;
  while (round.size() > 1) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i + 1 < round.size(); i += 2) {
      const std::size_t a = round[i], b = round[i + 1];
      const int c = compare(a, b);
      ++res.comparisons;
      next.push_back(c >= 0 ? a : b);
    }
    if (round.size() % 2 == 1) next.push_back(round.back());
    round = std::move(next);
  }
  res.worst = round.front();
  return res;
}

Comparator sv_comparator(const std::vector<Candidate>& candidates) {
  return [&candidates](std::size_t a, std::size_t b) {
    const auto& sa = candidates.at(a).s_v;
    const auto& sb = candidates.at(b).s_v;
    if (!sa || !sb) throw ValidationError("S_v comparison needs scores for every candidate");
    if (std::abs(*sa - *sb) < 1e-9) return 0;
    return *sa > *sb ? -1 : 1;
  };
}

Comparator pairwise_comparator(const std::vector<Candidate>& candidates, const Checklist& checklist,
                               ServiceClient& client) {
  return [&candidates, &client, cl = checklist_to_json(checklist)](std::size_t a, std::size_t b) {
    const Json reply = client.post("/compare", {{"video_a", candidates.at(a).clip_id},
                                                {"video_b", candidates.at(b).clip_id},
                                                {"checklist", cl}});
    if (!reply.is_object() || !reply.contains("preferred") || !reply["preferred"].is_string()) {
      throw ProtocolError("/compare: unexpected reply " + reply.dump());
    }
    const auto p = reply["preferred"].get<std::string>();
    if (p == "a") return -1;
    if (p == "b") return 1;
    if (p == "tie") return 0;
    throw ProtocolError("/compare: preferred must be a, b or tie, got \"" + p + "\"");
  };
}

DpoTriplet mine_triplet(const ConditionRef& condition, const std::vector<Candidate>& candidates,
                        const Comparator& compare, const std::string& path) {
  if (candidates.size() < 2) throw ValidationError("mining needs at least 2 candidates");
  std::vector<std::size_t> eligible, vetoed;
  for (std::size_t i = 0; i < candidates.size(); ++i) (candidates[i].vetoed ? vetoed : eligible).push_back(i);
  if (eligible.empty()) throw Error("no physics-compliant winner: all " + std::to_string(candidates.size()) +
                                    " candidates are Tier-1 vetoed");

  DpoTriplet t;
  t.condition = condition;
  t.path = path;
  std::size_t winner = eligible.front();
  std::vector<std::size_t> pool;
  if (eligible.size() >= 2) {
    const auto ko = knockout_tournament(eligible, compare);
    winner = ko.winner;
    t.comparisons += ko.comparisons;
    pool = ko.first_round_losers;
    if (ko.first_round_bye) pool.push_back(*ko.first_round_bye);
  }
  pool.insert(pool.end(), vetoed.begin(), vetoed.end());
  std::sort(pool.begin(), pool.end());
  const auto lb = loser_bracket(pool, compare);
  t.comparisons += lb.comparisons;

  const Candidate& w = candidates[winner];
  const Candidate& l = candidates[lb.worst];
  t.winner_clip_id = w.clip_id;
  t.loser_clip_id = l.clip_id;
  t.margin = (w.s_v && l.s_v) ? *w.s_v - *l.s_v : 1.0;
  return t;
}

Json triplet_to_json(const DpoTriplet& t) {
  return {{"condition_ref", {{"prompt", t.condition.prompt}, {"first_frame", t.condition.first_frame}}},
          {"winner", t.winner_clip_id},
          {"loser", t.loser_clip_id},
          {"margin", t.margin},
          {"path", t.path},
          {"comparisons", t.comparisons}};
}

// ---------------------------------------------------------------------------

Checklist propose_checklist(ServiceClient& client, const std::string& instruction, const std::string& first_frame_b64) {
  const Json reply = client.post("/propose", {{"instruction", instruction}, {"first_frame_b64", first_frame_b64}});
  Checklist c;
  try {
    c = checklist_from_json(reply);
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("/propose: ") + e.what());
  }
  if (c.instruction.empty()) c.instruction = instruction;
  const auto issues = validate_checklist(c);
  if (!issues.empty()) {
    std::string msg = "/propose: invalid checklist:";
    for (const auto& s : issues) msg += " " + s + ";";
    throw ProtocolError(msg);
  }
  return c;
}

std::map<std::string, Answer> answer_checklist(ServiceClient& client, const std::string& video_ref,
                                               const Checklist& c) {
  std::map<std::string, Answer> out;
  for (const auto& q : c.questions) {
    const Json reply = client.post("/answer", {{"video_ref", video_ref}, {"question", q.text}});
    if (!reply.is_object() || !reply.contains("answer") || !reply["answer"].is_string()) {
      throw ProtocolError("/answer: unexpected reply " + reply.dump());
    }
    try {
      out[q.question_id] = parse_answer(reply["answer"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ProtocolError(std::string("/answer: ") + e.what());
    }
  }
  return out;
}

double dpo_loss(const DpoLossInputs& in) {
  for (double v : {in.l_theta_w, in.l_theta_l, in.l_ref_w, in.l_ref_l, in.beta}) {
    if (!std::isfinite(v)) throw ValidationError("dpo_loss: inputs must be finite");
  }
  if (in.l_theta_w < 0 || in.l_theta_l < 0 || in.l_ref_w < 0 || in.l_ref_l < 0) {
    throw ValidationError("dpo_loss: denoising errors must be >= 0");
  }
  if (!(in.beta > 0)) throw ValidationError("dpo_loss: beta must be > 0");
  const double z = -(in.beta / 2.0) * ((in.l_theta_w - in.l_theta_l) - (in.l_ref_w - in.l_ref_l));
  // softplus(-z) without overflow.
  const double x = -z;
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace curate
