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

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dialectic/agent_spec.hpp"
#include "dialectic/crit_report.hpp"
#include "dialectic/metrics.hpp"

namespace dialectic {

// ---------------------------------------------------------------------------
// Phases

enum class Phase { kHighContention = 0, kModerateContention, kConsensus, kConcluded };

std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

/// Phases only move forward; staying put is allowed.
constexpr bool is_allowed_transition(Phase from, Phase to) {
  return static_cast<int>(to) >= static_cast<int>(from);
}

enum class Role { kDebater, kJudge, kModerator };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

enum class TerminationReason { kConverged, kMaxRounds, kModeratorEnded, kError };

std::string_view to_string(TerminationReason r);
TerminationReason parse_termination_reason(std::string_view s);

// ---------------------------------------------------------------------------
// Contentiousness

struct FeatureRow {
  std::string_view tone;
  std::string_view emphasis;
  std::string_view language;
  /// Phrase unique to this row's tone; no other row's tone contains it.
  std::string_view tone_keyword;
};

/// Anchors in descending order.
inline constexpr std::array<double, 5> kContentiousnessAnchors = {0.9, 0.7, 0.5, 0.3, 0.0};

/// Feature row for an anchor value; throws kValidation for non-anchors.
const FeatureRow& feature_row(double anchor);

struct ContentiousnessLevel {
  double raw = 0.0;
  double quantized = 0.0;
  FeatureRow features;
};

/// Snaps `raw` to the nearest anchor, breaking ties toward the lower one.
/// Throws kValidation outside [0, 1].
ContentiousnessLevel quantize_contentiousness(double raw);

// ---------------------------------------------------------------------------
// Session vocabulary

struct Stance {
  std::string topic_id;
  std::string position;
  std::optional<std::vector<std::string>> label_space;

  void validate() const;
};

struct Turn {
  int round_index = 0;
  std::string agent_id;
  Role role = Role::kDebater;
  std::string content;
  std::optional<PredictionSet> prediction;
  std::int64_t timestamp_ms = 0;
  /// Conditioning in force when the turn was produced (debater turns).
  std::optional<Phase> phase;
  std::optional<double> contentiousness;
  /// Oldest turns dropped from this turn's context by the token budget.
  int context_omitted_turns = 0;
};

enum class ControlKind { kSetContentiousness, kForcePhase, kInjectPrompt, kEndSession, kRequestCrit };

std::string_view to_string(ControlKind k);
ControlKind parse_control_kind(std::string_view s);

enum class Issuer { kEvincePolicy, kHumanModerator };

std::string_view to_string(Issuer i);
Issuer parse_issuer(std::string_view s);

struct SetContentiousness {
  double value = 0.0;
};
struct ForcePhase {
  Phase target = Phase::kModerateContention;
};
struct InjectPrompt {
  std::string text;
};
struct EndSession {};
struct RequestCrit {};

using CommandPayload =
    std::variant<SetContentiousness, ForcePhase, InjectPrompt, EndSession, RequestCrit>;

struct ModeratorCommand {
  CommandPayload payload;
  Issuer source = Issuer::kHumanModerator;

  ControlKind kind() const;
  /// Throws kValidation (e.g. contentiousness outside [0, 1]).
  void validate() const;
};

struct ControlEvent {
  ModeratorCommand command;
  /// Rounds completed when the command was applied.
  int round_index = 0;
  std::int64_t timestamp_ms = 0;

  ControlKind kind() const { return command.kind(); }
  Issuer issued_by() const { return command.source; }
};

enum class PhaseChangeCause { kSchedule, kConverged, kMaxRounds, kCommand };

std::string_view to_string(PhaseChangeCause c);
PhaseChangeCause parse_phase_change_cause(std::string_view s);

struct PhaseChange {
  int round_index = 0;
  Phase from = Phase::kHighContention;
  Phase to = Phase::kModerateContention;
  double contentiousness = 0.0;
  PhaseChangeCause cause = PhaseChangeCause::kSchedule;
  std::int64_t timestamp_ms = 0;
};

struct CritRecord {
  int round_index = 0;
  std::string agent_id;
  CritReport report;
  std::int64_t timestamp_ms = 0;
};

struct Concluded {
  int round_index = 0;
  TerminationReason reason = TerminationReason::kConverged;
  std::string detail;
  std::int64_t timestamp_ms = 0;
};

using Event = std::variant<Turn, MetricSnapshot, ControlEvent, PhaseChange, CritRecord, Concluded>;

/// Record type name used on the wire ("Turn", "MetricSnapshot", ...).
std::string_view record_name(const Event& e);

struct SequencedEvent {
  std::uint64_t seq = 0;
  Event event;
};

// ---------------------------------------------------------------------------
// Configuration

struct ContentiousnessSchedule {
  double open = 0.9;
  double moderate = 0.5;
  double consensus = 0.1;

  double for_phase(Phase p) const;
  void validate() const;
};

enum class ModeratorMode { kAutomated, kHuman, kHybrid };

std::string_view to_string(ModeratorMode m);
ModeratorMode parse_moderator_mode(std::string_view s);

enum class OverlapPolicy { kError, kWarn };

struct DebaterSpec {
  AgentSpec agent;
  Stance stance;
};

struct CritSettings {
  int max_depth = 1;
  double tau = 0.5;
  /// Score every debater turn of each moderate round (forced on when
  /// convergence.crit_floor > 0).
  bool per_round = false;
};

struct SessionConfig {
  std::string session_id;
  std::string topic;
  std::vector<DebaterSpec> debaters;
  std::vector<AgentSpec> judges;
  ContentiousnessSchedule schedule;
  int k_max = 5;
  ConvergenceThresholds convergence;
  ModeratorMode moderator_mode = ModeratorMode::kAutomated;
  OverlapPolicy judge_overlap = OverlapPolicy::kError;
  /// Predictions requested per debater turn; 0 disables elicitation.
  int predictions_per_turn = 3;
  int consensus_rounds = 1;
  /// Approximate token budget for the context digest; 0 means unlimited.
  int context_token_budget = 0;
  bool opening_rotation = false;
  CritSettings crit;
  int round_pause_ms = 0;
  /// Timestamps from a counter instead of the wall clock (reproducible logs).
  bool logical_clock = false;

  /// Throws kValidation on any violated invariant; returns warnings for
  /// downgraded checks.
  std::vector<std::string> validate() const;
  std::vector<std::string> debater_ids() const;
};

// ---------------------------------------------------------------------------
// Session state

struct DebateSession {
  SessionConfig config;
  Phase phase = Phase::kHighContention;
  /// K: number of completed rounds.
  int round_index = 0;
  /// Contentiousness applied to the next round.
  double contentiousness = 0.9;
  int consensus_rounds_done = 0;
  std::optional<TerminationReason> consensus_reason;
  std::optional<TerminationReason> termination_reason;

  static DebateSession start(SessionConfig config);
  bool concluded() const { return phase == Phase::kConcluded; }
};

/// Folds one event into the session state. Both the live engine and replay
/// go through this, so the two cannot disagree. Throws kProtocol on a
/// backward phase change.
DebateSession apply_event(DebateSession session, const Event& event);

// ---------------------------------------------------------------------------
// Transcript

/// Append-only, sequenced record of a session.
class Transcript {
 public:
  static constexpr int kSchemaVersion = 1;

  Transcript() = default;
  explicit Transcript(std::string session_id) : session_id_(std::move(session_id)) {}

  const std::string& session_id() const noexcept { return session_id_; }
  int schema_version() const noexcept { return kSchemaVersion; }

  const std::vector<SequencedEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  std::uint64_t last_seq() const noexcept { return events_.empty() ? 0 : events_.back().seq; }

  /// Appends with the next sequence number. Throws kProtocol when a turn's
  /// round index regresses, kValidation for an empty debater/judge turn.
  const SequencedEvent& append(Event e);

  /// Appends an already-sequenced event; `seq` must be last_seq() + 1.
  const SequencedEvent& append(SequencedEvent e);

  /// Highest turn round index, or -1 when there are no turns.
  int last_round_index() const noexcept { return last_turn_round_; }

  std::vector<Turn> turns() const;
  std::vector<MetricSnapshot> metric_snapshots() const;
  std::vector<ControlEvent> control_events() const;
  std::vector<CritRecord> crit_records() const;

 private:
  void check(const Event& e) const;
  void note(const Event& e);

  std::string session_id_;
  std::vector<SequencedEvent> events_;
  int last_turn_round_ = -1;
};

/// Value-returning append: the input transcript is left untouched.
Transcript append_turn(Transcript transcript, Turn turn);

}  // namespace dialectic
