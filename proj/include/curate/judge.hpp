// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checklist judging and preference mining. A proposer service writes a
// yes/no checklist per instruction, a separate scorer answers it per clip;
// the answers give S_v and the Tier-1 veto. Candidates for one condition are
// then ranked with a knockout bracket (best) plus a bracket over the
// first-round losers (worst), which yields a DPO triplet in O(N) comparisons.

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curate/service.hpp"

namespace curate {

enum class Polarity { kPositive, kNegative };
enum class Answer { kYes, kNo };

std::string_view to_string(Polarity p);
std::string_view to_string(Answer a);
Answer parse_answer(std::string_view text);

struct ChecklistQuestion {
  std::string question_id;
  std::string text;
  Polarity polarity = Polarity::kPositive;
  int tier = 2;
  Answer gt_answer = Answer::kYes;
};

struct Checklist {
  std::string instruction;
  std::string first_frame_ref;
  std::vector<ChecklistQuestion> questions;
};

Checklist checklist_from_json(const Json& j);
Json checklist_to_json(const Checklist& c);

/// Every violated invariant as a readable line; empty means valid.
std::vector<std::string> validate_checklist(const Checklist& c);

struct QuestionScore {
  Answer predicted = Answer::kYes;
  bool match = false;
};

struct ScoreReport {
  std::string clip_id;
  std::map<std::string, QuestionScore> per_question;
  double s_v = 0.0;
  bool tier1_violated = false;
};

/// Predictions must cover exactly the checklist's question ids.
ScoreReport score_sv(const Checklist& c, const std::map<std::string, Answer>& predictions,
                     const std::string& clip_id = "");

Json score_report_to_json(const ScoreReport& r);

// ---------------------------------------------------------------------------
// Brackets

/// compare(a, b) < 0: a preferred, > 0: b preferred, 0: tie. Indices refer
/// to the caller's candidate list.
using Comparator = std::function<int(std::size_t a, std::size_t b)>;

struct KnockoutResult {
  std::size_t winner = 0;
  std::vector<std::size_t> first_round_losers;
  // Odd fields: the last entrant skips round one.
  std::optional<std::size_t> first_round_bye;
  long comparisons = 0;
};

/// Single elimination over `entrants` in order. Ties advance the entrant
/// listed first; an odd round gives the last entrant a bye.
KnockoutResult knockout_tournament(const std::vector<std::size_t>& entrants, const Comparator& compare);

struct LoserBracketResult {
  std::size_t worst = 0;
  long comparisons = 0;
};

/// Single elimination advancing the worse entrant; ties advance the one
/// listed first (it is declared worse).
LoserBracketResult loser_bracket(const std::vector<std::size_t>& losers, const Comparator& compare);

// ---------------------------------------------------------------------------
// Mining

struct ConditionRef {
  std::string prompt;
  std::string first_frame;
};

struct Candidate {
  std::string clip_id;
  std::optional<double> s_v;
  bool vetoed = false;
};

struct DpoTriplet {
  ConditionRef condition;
  std::string winner_clip_id;
  std::string loser_clip_id;
  double margin = 0.0;
  std::string path;  // "s_v" or "pairwise"
  long comparisons = 0;
};

/// S_v comparator; scores closer than 1e-9 tie.
Comparator sv_comparator(const std::vector<Candidate>& candidates);

/// POST /compare {video_a, video_b, checklist} -> {preferred: "a"|"b"|"tie"}.
Comparator pairwise_comparator(const std::vector<Candidate>& candidates, const Checklist& checklist,
                               ServiceClient& client);

/// Winner by knockout over the non-vetoed candidates; worst by loser bracket
/// over that knockout's first-round losers, its round-one bye (if any) and
/// every vetoed candidate. The margin is the S_v gap when both ends have S_v,
/// else 1. Throws Error when every candidate is vetoed.
DpoTriplet mine_triplet(const ConditionRef& condition, const std::vector<Candidate>& candidates,
                        const Comparator& compare, const std::string& path);

Json triplet_to_json(const DpoTriplet& t);

// ---------------------------------------------------------------------------
// Services

/// POST /propose {instruction, first_frame_b64} -> checklist JSON. A reply
/// that is not a valid checklist is a ProtocolError.
Checklist propose_checklist(ServiceClient& client, const std::string& instruction, const std::string& first_frame_b64);

/// POST /answer {video_ref, question} -> {answer: "yes"|"no"} per question.
std::map<std::string, Answer> answer_checklist(ServiceClient& client, const std::string& video_ref,
                                               const Checklist& c);

// ---------------------------------------------------------------------------
// Loss

struct DpoLossInputs {
  double l_theta_w = 0.0;
  double l_theta_l = 0.0;
  double l_ref_w = 0.0;
  double l_ref_l = 0.0;
  double beta = 5000.0;
};

/// -log sigmoid(-(beta/2) * ((l_theta_w - l_theta_l) - (l_ref_w - l_ref_l))).
double dpo_loss(const DpoLossInputs& in);

}  // namespace curate
