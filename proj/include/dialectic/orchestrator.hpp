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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dialectic/gateway.hpp"
#include "dialectic/protocol.hpp"

namespace dialectic {

// ---------------------------------------------------------------------------
// Pure transition rules. Each returns the events to append; folding them with
// apply_event gives the next session state.

/// Boundary step after a round completes (`s.round_index` already counts it).
/// HighContention moves to ModerateContention after round 1. From
/// ModerateContention the decision moves to Consensus: kConverged only when
/// the automated policy is in charge (automated or hybrid mode), kMaxRounds
/// always. In automated and hybrid mode a convergence move is issued as a
/// policy force_phase command. Consensus concludes after `consensus_rounds`
/// joint rounds. Never emits a backward change.
std::vector<Event> phase_step_events(const DebateSession& s, ConvergenceDecision decision,
                                     std::int64_t timestamp_ms = 0);

DebateSession step_phase(DebateSession s, ConvergenceDecision decision);

/// Events for one moderator command. Throws kProtocol for a backward
/// force_phase or a concluded session, kValidation for a bad payload.
/// end_session (and force_phase to Concluded) end with Concluded
/// (moderator_ended).
std::vector<Event> command_events(const DebateSession& s, const ModeratorCommand& cmd,
                                  std::int64_t timestamp_ms = 0);

DebateSession apply_command(DebateSession s, const ModeratorCommand& cmd);

/// Debater order for a round (rotated by round when opening_rotation is set).
std::vector<std::size_t> speaking_order(const SessionConfig& c, int round_index);

inline constexpr std::string_view kModeratorId = "moderator";

// ---------------------------------------------------------------------------
// Engine

using EventSink = std::function<void(const SequencedEvent&)>;
using Clock = std::function<std::int64_t()>;

struct EngineOptions {
  gateway::AgentFactory factory = gateway::make_agent;
  /// Called synchronously for every appended event, in order. A throwing
  /// sink is fatal to the session (raised as kStorage).
  std::vector<EventSink> sinks;
  /// Overrides the config's clock choice.
  Clock clock;
};

/// Drives one session. `run()` is the single writer; `submit()`, the
/// accessors and `wait_events()` may be called from other threads.
class DebateEngine {
 public:
  /// Validates the config and builds the agents; throws kValidation.
  explicit DebateEngine(SessionConfig config, EngineOptions options = {});
  ~DebateEngine();

  DebateEngine(const DebateEngine&) = delete;
  DebateEngine& operator=(const DebateEngine&) = delete;

  /// Runs rounds until Concluded (or cancel()). Returns the final transcript.
  Transcript run();

  /// Runs a single round plus its boundary step. Returns the round's
  /// snapshot, or nothing when the round failed and the session concluded.
  std::optional<MetricSnapshot> run_round();

  /// Queues a command for the next round boundary. Throws kValidation for a
  /// bad payload and kProtocol when the session has concluded, when a human
  /// command arrives in automated mode, or for a force_phase that would move
  /// backward from the current phase.
  void submit(ModeratorCommand cmd);

  /// Concludes with reason error at the next opportunity.
  void cancel();

  DebateSession session() const;
  Transcript transcript() const;
  std::vector<std::string> warnings() const { return warnings_; }

  /// Events with seq > after_seq, waiting up to `timeout` for one to arrive.
  std::vector<SequencedEvent> wait_events(std::uint64_t after_seq, std::chrono::milliseconds timeout) const;

 private:
  void append(Event e);
  std::int64_t now();
  bool debater_turn(std::size_t debater, int round, Phase phase, double c,
                    std::vector<std::pair<std::string, PredictionSet>>& dists);
  void boundary();
  void drain_commands();
  bool evaluate_latest(int round, bool only_this_round);
  void conclude(TerminationReason reason, std::string detail);
  void conclude_with_final_crit(TerminationReason reason, std::string detail);
  bool stopping() const;

  SessionConfig config_;
  EngineOptions options_;
  std::vector<std::shared_ptr<gateway::ChatAgent>> debaters_;
  std::unique_ptr<gateway::JudgePool> judges_;
  std::vector<std::string> warnings_;
  std::map<std::string, double> crit_scores_;
  std::int64_t logical_ticks_ = 0;

  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  DebateSession session_;
  Transcript transcript_;
  std::deque<ModeratorCommand> queue_;
  std::atomic<bool> cancelled_{false};
};

/// Convenience: build an engine and run it to completion.
Transcript run_session(SessionConfig config, EngineOptions options = {});

/// Rebuilds session state from a transcript through apply_event.
DebateSession replay_state(SessionConfig config, const Transcript& transcript);

}  // namespace dialectic
