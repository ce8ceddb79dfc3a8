// Copyright 2026 The Dialectic Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dialectic/protocol.hpp"

#include <cmath>
#include <set>

#include "dialectic/error.hpp"

namespace dialectic {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kProtocol: return "protocol_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kTemplate: return "template_error";
    case ErrorCode::kEvaluation: return "evaluation_error";
    case ErrorCode::kNoClaim: return "no_claim";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kBackend: return "backend_error";
    case ErrorCode::kScriptExhausted: return "script_exhausted";
    case ErrorCode::kStorage: return "storage_error";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kNotFound: return "not_found";
  }
  return "unknown";
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw Error(ErrorCode::kValidation, "unknown " + std::string(what) + ": '" + std::string(s) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "unknown";
}

constexpr std::array<std::pair<std::string_view, Phase>, 4> kPhases = {{
    {"HighContention", Phase::kHighContention},
    {"ModerateContention", Phase::kModerateContention},
    {"Consensus", Phase::kConsensus},
    {"Concluded", Phase::kConcluded},
}};

constexpr std::array<std::pair<std::string_view, Role>, 3> kRoles = {{
    {"debater", Role::kDebater},
    {"judge", Role::kJudge},
    {"moderator", Role::kModerator},
}};

constexpr std::array<std::pair<std::string_view, TerminationReason>, 4> kReasons = {{
    {"converged", TerminationReason::kConverged},
    {"max_rounds", TerminationReason::kMaxRounds},
    {"moderator_ended", TerminationReason::kModeratorEnded},
    {"error", TerminationReason::kError},
}};

constexpr std::array<std::pair<std::string_view, ControlKind>, 5> kControlKinds = {{
    {"set_contentiousness", ControlKind::kSetContentiousness},
    {"force_phase", ControlKind::kForcePhase},
    {"inject_prompt", ControlKind::kInjectPrompt},
    {"end_session", ControlKind::kEndSession},
    {"request_crit", ControlKind::kRequestCrit},
}};

constexpr std::array<std::pair<std::string_view, Issuer>, 2> kIssuers = {{
    {"evince_policy", Issuer::kEvincePolicy},
    {"human_moderator", Issuer::kHumanModerator},
}};

constexpr std::array<std::pair<std::string_view, PhaseChangeCause>, 4> kCauses = {{
    {"schedule", PhaseChangeCause::kSchedule},
    {"converged", PhaseChangeCause::kConverged},
    {"max_rounds", PhaseChangeCause::kMaxRounds},
    {"command", PhaseChangeCause::kCommand},
}};

constexpr std::array<std::pair<std::string_view, ModeratorMode>, 3> kModes = {{
    {"automated", ModeratorMode::kAutomated},
    {"human", ModeratorMode::kHuman},
    {"hybrid", ModeratorMode::kHybrid},
}};

// Rows in anchor order 0.9, 0.7, 0.5, 0.3, 0.0.
constexpr std::array<FeatureRow, 5> kFeatureRows = {{
    {"Most confrontational: contest the opposing position on every front.",
     "Press on risks, failure modes and who bears the cost.",
     "Categorical and sharp; reject the other side's claims outright.",
     "Most confrontational"},
    {"Still confrontational, though some merits of the other side are conceded.",
     "Grant narrow benefits while stressing the problems that remain.",
     "Firm but measured; call out open concerns and missing evidence.",
     "Still confrontational"},
    {"Balanced: weigh both sides without taking a strong line.",
     "Give pros and cons comparable attention and look for common ground.",
     "Neutral and qualified; avoid loaded wording.",
     "Balanced"},
    {"More agreeable than not, with some reservations kept.",
     "Build on the other side's points while flagging safeguards.",
     "Positive and careful; endorse with conditions.",
     "More agreeable"},
    {"Completely agreeable: cooperate fully with the other side.",
     "Concentrate on benefits and on how to act on them together.",
     "Warm and affirmative; no adversarial framing.",
     "Completely agreeable"},
}};

}  // namespace

std::string_view to_string(Phase p) { return enum_name(p, kPhases); }
Phase parse_phase(std::string_view s) { return parse_enum(s, kPhases, "phase"); }
std::string_view to_string(Role r) { return enum_name(r, kRoles); }
Role parse_role(std::string_view s) { return parse_enum(s, kRoles, "role"); }
std::string_view to_string(TerminationReason r) { return enum_name(r, kReasons); }
TerminationReason parse_termination_reason(std::string_view s) {
  return parse_enum(s, kReasons, "termination reason");
}
std::string_view to_string(ControlKind k) { return enum_name(k, kControlKinds); }
ControlKind parse_control_kind(std::string_view s) {
  return parse_enum(s, kControlKinds, "control kind");
}
std::string_view to_string(Issuer i) { return enum_name(i, kIssuers); }
Issuer parse_issuer(std::string_view s) { return parse_enum(s, kIssuers, "issuer"); }
std::string_view to_string(PhaseChangeCause c) { return enum_name(c, kCauses); }
PhaseChangeCause parse_phase_change_cause(std::string_view s) {
  return parse_enum(s, kCauses, "phase change cause");
}
std::string_view to_string(ModeratorMode m) { return enum_name(m, kModes); }
ModeratorMode parse_moderator_mode(std::string_view s) {
  return parse_enum(s, kModes, "moderator mode");
}

const FeatureRow& feature_row(double anchor) {
  for (std::size_t i = 0; i < kContentiousnessAnchors.size(); ++i) {
    if (kContentiousnessAnchors[i] == anchor) return kFeatureRows[i];
  }
  throw Error(ErrorCode::kValidation, "not a contentiousness anchor: " + std::to_string(anchor));
}

ContentiousnessLevel quantize_contentiousness(double raw) {
  if (!(raw >= 0.0 && raw <= 1.0)) {
    throw Error(ErrorCode::kValidation,
                "contentiousness must lie in [0, 1], got " + std::to_string(raw));
  }
  // Walk anchors from low to high and only switch on a strictly better
  // distance, so exact midpoints stay on the lower anchor.
  constexpr double kTieEps = 1e-9;
  double best = kContentiousnessAnchors.back();
  double best_d = std::abs(raw - best);
  for (auto it = kContentiousnessAnchors.rbegin() + 1; it != kContentiousnessAnchors.rend(); ++it) {
    const double d = std::abs(raw - *it);
    if (d < best_d - kTieEps) {
      best = *it;
      best_d = d;
    }
  }
  return ContentiousnessLevel{raw, best, feature_row(best)};
}

void Stance::validate() const {
  if (position.empty()) throw Error(ErrorCode::kValidation, "stance position is empty");
  if (label_space) {
    std::set<std::string> seen;
    for (const auto& l : *label_space) {
      if (l.empty()) throw Error(ErrorCode::kValidation, "empty label in label space");
      if (!seen.insert(fold_case(l)).second) {
        throw Error(ErrorCode::kValidation, "duplicate label in label space: " + l);
      }
    }
  }
}

ControlKind ModeratorCommand::kind() const {
  return static_cast<ControlKind>(payload.index());
}

void ModeratorCommand::validate() const {
  if (const auto* s = std::get_if<SetContentiousness>(&payload)) {
    if (!(s->value >= 0.0 && s->value <= 1.0)) {
      throw Error(ErrorCode::kValidation, "set_contentiousness value must lie in [0, 1]");
    }
  } else if (const auto* i = std::get_if<InjectPrompt>(&payload)) {
    if (i->text.empty()) throw Error(ErrorCode::kValidation, "inject_prompt text is empty");
  }
}

std::string_view record_name(const Event& e) {
  static constexpr std::array<std::string_view, 6> kNames = {
      "Turn", "MetricSnapshot", "ControlEvent", "PhaseChange", "CritReport", "Concluded"};
  return kNames[e.index()];
}

double ContentiousnessSchedule::for_phase(Phase p) const {
  switch (p) {
    case Phase::kHighContention: return open;
    case Phase::kModerateContention: return moderate;
    case Phase::kConsensus:
    case Phase::kConcluded: return consensus;
  }
  return consensus;
}

void ContentiousnessSchedule::validate() const {
  if (!(0.0 <= consensus && consensus < moderate && moderate < open && open <= 1.0)) {
    throw Error(ErrorCode::kValidation,
                "contentiousness schedule must satisfy 0 <= consensus < moderate < open <= 1");
  }
}

std::vector<std::string> SessionConfig::debater_ids() const {
  std::vector<std::string> ids;
  ids.reserve(debaters.size());
  for (const auto& d : debaters) ids.push_back(d.agent.agent_id);
  return ids;
}

std::vector<std::string> SessionConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kValidation, m); };
  std::vector<std::string> warnings;
  if (topic.empty()) fail("topic is empty");
  if (debaters.size() < 2) fail("at least two debaters are required");
  if (judges.empty()) fail("at least one judge is required");

  std::set<std::string> debater_ids;
  for (const auto& d : debaters) {
    d.agent.validate();
    d.stance.validate();
    if (!debater_ids.insert(d.agent.agent_id).second) {
      fail("duplicate debater id: " + d.agent.agent_id);
    }
  }
  std::set<std::string> judge_ids;
  for (const auto& j : judges) {
    j.validate();
    if (!judge_ids.insert(j.agent_id).second) fail("duplicate judge id: " + j.agent_id);
    if (debater_ids.count(j.agent_id)) {
      const std::string m = "agent '" + j.agent_id + "' is both a judge and a debater";
      if (judge_overlap == OverlapPolicy::kError) fail(m);
      warnings.push_back(m);
    }
  }
  schedule.validate();
  if (k_max < 1) fail("k_max must be >= 1");
  convergence.validate();
  if (predictions_per_turn < 0) fail("predictions_per_turn must be >= 0");
  if (consensus_rounds < 1) fail("consensus_rounds must be >= 1");
  if (context_token_budget < 0) fail("context_token_budget must be >= 0");
  if (crit.max_depth < 0) fail("crit.max_depth must be >= 0");
  if (!(crit.tau >= 0.0 && crit.tau <= 1.0)) fail("crit.tau must lie in [0, 1]");
  if (round_pause_ms < 0) fail("round_pause_ms must be >= 0");
  return warnings;
}

DebateSession DebateSession::start(SessionConfig config) {
  DebateSession s;
  s.contentiousness = config.schedule.open;
  s.config = std::move(config);
  return s;
}

namespace {

TerminationReason reason_for(PhaseChangeCause cause) {
  switch (cause) {
    case PhaseChangeCause::kConverged: return TerminationReason::kConverged;
    case PhaseChangeCause::kMaxRounds: return TerminationReason::kMaxRounds;
    case PhaseChangeCause::kSchedule: return TerminationReason::kMaxRounds;
    case PhaseChangeCause::kCommand: return TerminationReason::kModeratorEnded;
  }
  return TerminationReason::kMaxRounds;
}

}  // namespace

DebateSession apply_event(DebateSession s, const Event& event) {
  std::visit(
      [&s](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, MetricSnapshot>) {
          s.round_index = e.round_index + 1;
          if (s.phase == Phase::kConsensus) ++s.consensus_rounds_done;
        } else if constexpr (std::is_same_v<T, ControlEvent>) {
          if (const auto* c = std::get_if<SetContentiousness>(&e.command.payload)) {
            s.contentiousness = c->value;
          }
        } else if constexpr (std::is_same_v<T, PhaseChange>) {
          if (!is_allowed_transition(s.phase, e.to)) {
            throw Error(ErrorCode::kProtocol, "backward phase change " + std::string(to_string(s.phase)) +
                                                  " -> " + std::string(to_string(e.to)));
          }
          s.phase = e.to;
          s.contentiousness = e.contentiousness;
          if (e.to == Phase::kConsensus) s.consensus_reason = reason_for(e.cause);
        } else if constexpr (std::is_same_v<T, Concluded>) {
          s.phase = Phase::kConcluded;
          s.termination_reason = e.reason;
        }
      },
      event);
  return s;
}

void Transcript::check(const Event& e) const {
  if (const auto* t = std::get_if<Turn>(&e)) {
    if (t->round_index < 0) throw Error(ErrorCode::kValidation, "negative round index");
    if (t->round_index < last_turn_round_) {
      throw Error(ErrorCode::kProtocol, "turn round index regressed from " +
                                            std::to_string(last_turn_round_) + " to " +
                                            std::to_string(t->round_index));
    }
    if (t->role != Role::kModerator && t->content.empty()) {
      throw Error(ErrorCode::kValidation, "debater and judge turns need content");
    }
  }
}

void Transcript::note(const Event& e) {
  if (const auto* t = std::get_if<Turn>(&e)) last_turn_round_ = t->round_index;
}

const SequencedEvent& Transcript::append(Event e) {
  check(e);
  note(e);
  events_.push_back(SequencedEvent{last_seq() + 1, std::move(e)});
  return events_.back();
}

const SequencedEvent& Transcript::append(SequencedEvent e) {
  if (e.seq != last_seq() + 1) {
    throw Error(ErrorCode::kProtocol, "sequence gap: expected " + std::to_string(last_seq() + 1) +
                                          ", got " + std::to_string(e.seq));
  }
  check(e.event);
  note(e.event);
  events_.push_back(std::move(e));
  return events_.back();
}

namespace {

template <typename T>
std::vector<T> collect(const std::vector<SequencedEvent>& events) {
  std::vector<T> out;
  for (const auto& se : events) {
    if (const auto* v = std::get_if<T>(&se.event)) out.push_back(*v);
  }
  return out;
}

}  // namespace

std::vector<Turn> Transcript::turns() const { return collect<Turn>(events_); }
std::vector<MetricSnapshot> Transcript::metric_snapshots() const {
  return collect<MetricSnapshot>(events_);
}
std::vector<ControlEvent> Transcript::control_events() const {
  return collect<ControlEvent>(events_);
}
std::vector<CritRecord> Transcript::crit_records() const { return collect<CritRecord>(events_); }

Transcript append_turn(Transcript transcript, Turn turn) {
  transcript.append(Event{std::move(turn)});
  return transcript;
}

}  // namespace dialectic
