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

#include "dialectic/orchestrator.hpp"

#include <chrono>

#include "dialectic/conditioning.hpp"
#include "dialectic/crit.hpp"
#include "dialectic/records.hpp"

namespace dialectic {

namespace {

class EventList {
 public:
  explicit EventList(DebateSession s) : state_(std::move(s)) {}

  void push(Event e) {
    state_ = apply_event(std::move(state_), e);
    events_.push_back(std::move(e));
  }
  const DebateSession& state() const { return state_; }
  std::vector<Event> take() { return std::move(events_); }

 private:
  DebateSession state_;
  std::vector<Event> events_;
};

DebateSession fold(DebateSession s, const std::vector<Event>& events) {
  for (const auto& e : events) s = apply_event(std::move(s), e);
  return s;
}

}  // namespace

std::vector<Event> phase_step_events(const DebateSession& s, ConvergenceDecision decision,
                                     std::int64_t ts) {
  if (s.concluded()) return {};
  const auto& cfg = s.config;
  const int k = s.round_index;
  EventList out(s);

  if (out.state().phase == Phase::kHighContention && k >= 1) {
    out.push(PhaseChange{k, Phase::kHighContention, Phase::kModerateContention,
                         cfg.schedule.moderate, PhaseChangeCause::kSchedule, ts});
  }
  if (out.state().phase == Phase::kModerateContention) {
    const bool policy = cfg.moderator_mode != ModeratorMode::kHuman;
    if (decision == ConvergenceDecision::kConverged && policy) {
      out.push(ControlEvent{ModeratorCommand{ForcePhase{Phase::kConsensus}, Issuer::kEvincePolicy}, k, ts});
      out.push(PhaseChange{k, Phase::kModerateContention, Phase::kConsensus, cfg.schedule.consensus,
                           PhaseChangeCause::kConverged, ts});
    } else if (decision == ConvergenceDecision::kMaxRounds || k >= cfg.k_max) {
      out.push(PhaseChange{k, Phase::kModerateContention, Phase::kConsensus, cfg.schedule.consensus,
                           PhaseChangeCause::kMaxRounds, ts});
    }
  } else if (out.state().phase == Phase::kConsensus &&
             out.state().consensus_rounds_done >= cfg.consensus_rounds) {
    out.push(Concluded{k, out.state().consensus_reason.value_or(TerminationReason::kMaxRounds), "", ts});
  }
  return out.take();
}

DebateSession step_phase(DebateSession s, ConvergenceDecision decision) {
  const auto events = phase_step_events(s, decision);
  return fold(std::move(s), events);
}

std::vector<Event> command_events(const DebateSession& s, const ModeratorCommand& cmd,
                                  std::int64_t ts) {
  cmd.validate();
  if (s.concluded()) throw Error(ErrorCode::kProtocol, "session has concluded");
  const int k = s.round_index;
  EventList out(s);
  if (const auto* f = std::get_if<ForcePhase>(&cmd.payload)) {
    if (!is_allowed_transition(s.phase, f->target)) {
      throw Error(ErrorCode::kProtocol, "force_phase cannot move back from " +
                                            std::string(to_string(s.phase)) + " to " +
                                            std::string(to_string(f->target)));
    }
  }
  out.push(ControlEvent{cmd, k, ts});
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ForcePhase>) {
          if (p.target == Phase::kConcluded) {
            out.push(Concluded{k, TerminationReason::kModeratorEnded, "force_phase", ts});
          } else if (p.target != s.phase) {
            out.push(PhaseChange{k, s.phase, p.target, s.config.schedule.for_phase(p.target),
                                 PhaseChangeCause::kCommand, ts});
          }
        } else if constexpr (std::is_same_v<T, InjectPrompt>) {
          Turn t;
          t.round_index = k;
          t.agent_id = std::string(kModeratorId);
          t.role = Role::kModerator;
          t.content = p.text;
          t.timestamp_ms = ts;
          out.push(std::move(t));
        } else if constexpr (std::is_same_v<T, EndSession>) {
          out.push(Concluded{k, TerminationReason::kModeratorEnded, "", ts});
        }
      },
      cmd.payload);
  return out.take();
}

DebateSession apply_command(DebateSession s, const ModeratorCommand& cmd) {
  const auto events = command_events(s, cmd);
  return fold(std::move(s), events);
}

std::vector<std::size_t> speaking_order(const SessionConfig& c, int round_index) {
  const std::size_t n = c.debaters.size();
  const std::size_t start = c.opening_rotation && n > 0 ? static_cast<std::size_t>(round_index) % n : 0;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) order.push_back((start + i) % n);
  return order;
}

DebateSession replay_state(SessionConfig config, const Transcript& transcript) {
  auto s = DebateSession::start(std::move(config));
  for (const auto& e : transcript.events()) s = apply_event(std::move(s), e.event);
  return s;
}

// ---------------------------------------------------------------------------

DebateEngine::DebateEngine(SessionConfig config, EngineOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  if (config_.session_id.empty()) config_.session_id = "session";
  warnings_ = config_.validate();
  if (!options_.factory) options_.factory = gateway::make_agent;
  for (const auto& d : config_.debaters) debaters_.push_back(options_.factory(d.agent));
  std::vector<std::shared_ptr<gateway::ChatAgent>> judges;
  for (const auto& j : config_.judges) judges.push_back(options_.factory(j));
  judges_ = std::make_unique<gateway::JudgePool>(std::move(judges));
  session_ = DebateSession::start(config_);
  transcript_ = Transcript(config_.session_id);
}

DebateEngine::~DebateEngine() = default;

std::int64_t DebateEngine::now() {
  if (options_.clock) return options_.clock();
  if (config_.logical_clock) return ++logical_ticks_;
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void DebateEngine::append(Event e) {
  SequencedEvent se;
  {
    std::lock_guard lock(mu_);
    auto next = apply_event(session_, e);
    se = transcript_.append(std::move(e));
    session_ = std::move(next);
  }
  for (const auto& sink : options_.sinks) {
    try {
      sink(se);
    } catch (const std::exception& ex) {
      throw Error(ErrorCode::kStorage, std::string("event sink failed: ") + ex.what());
    }
  }
  // Waiters see an event only once every sink has it.
  changed_.notify_all();
}

DebateSession DebateEngine::session() const {
  std::lock_guard lock(mu_);
  return session_;
}

Transcript DebateEngine::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

bool DebateEngine::stopping() const { return cancelled_.load(); }

void DebateEngine::cancel() {
  cancelled_ = true;
  changed_.notify_all();
}

void DebateEngine::submit(ModeratorCommand cmd) {
  cmd.validate();
  {
    std::lock_guard lock(mu_);
    if (session_.concluded()) throw Error(ErrorCode::kProtocol, "session has concluded");
    if (config_.moderator_mode == ModeratorMode::kAutomated && cmd.source == Issuer::kHumanModerator) {
      throw Error(ErrorCode::kProtocol,
                  "session runs in automated mode; moderator commands come from the policy");
    }
    if (const auto* f = std::get_if<ForcePhase>(&cmd.payload)) {
      if (!is_allowed_transition(session_.phase, f->target)) {
        throw Error(ErrorCode::kProtocol, "force_phase cannot move back from " +
                                              std::string(to_string(session_.phase)));
      }
    }
    queue_.push_back(std::move(cmd));
  }
  changed_.notify_all();
}

std::vector<SequencedEvent> DebateEngine::wait_events(std::uint64_t after_seq,
                                                      std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  changed_.wait_for(lock, timeout,
                    [&] { return transcript_.last_seq() > after_seq || session_.concluded(); });
  const auto& events = transcript_.events();
  std::vector<SequencedEvent> out;
  for (std::size_t i = static_cast<std::size_t>(std::min<std::uint64_t>(after_seq, events.size()));
       i < events.size(); ++i) {
    out.push_back(events[i]);
  }
  return out;
}

void DebateEngine::conclude(TerminationReason reason, std::string detail) {
  append(Concluded{session().round_index, reason, std::move(detail), now()});
}

bool DebateEngine::evaluate_latest(int round, bool only_this_round) {
  const auto turns = transcript().turns();
  crit::CritOptions opts;
  opts.max_depth = config_.crit.max_depth;
  opts.tau = config_.crit.tau;
  for (const auto& d : config_.debaters) {
    const auto& id = d.agent.agent_id;
    const Turn* latest = nullptr;
    for (const auto& t : turns) {
      if (t.role == Role::kDebater && t.agent_id == id) latest = &t;
    }
    if (latest == nullptr || (only_this_round && latest->round_index != round)) continue;
    CritReport report;
    try {
      report = crit::crit(latest->content, *judges_, opts);
    } catch (const std::exception& e) {
      conclude(TerminationReason::kError, "CRIT evaluation of " + id + " failed: " + e.what());
      return false;
    }
    crit_scores_[id] = report.gamma_aggregate;
    append(CritRecord{latest->round_index, id, std::move(report), now()});
  }
  return true;
}

void DebateEngine::conclude_with_final_crit(TerminationReason reason, std::string detail) {
  if (!evaluate_latest(0, false)) return;
  conclude(reason, std::move(detail));
}

bool DebateEngine::debater_turn(std::size_t idx, int round, Phase phase, double c,
                                std::vector<std::pair<std::string, PredictionSet>>& dists) {
  const auto& spec = config_.debaters[idx];
  const auto& id = spec.agent.agent_id;
  auto& agent = *debaters_[idx];

  const auto digest = conditioning::build_context_digest(transcript().turns(), config_.context_token_budget);
  std::string prompt = conditioning::render_debater_prompt(
      spec.stance, quantize_contentiousness(c), phase, digest.text, config_.topic);
  const int k = config_.predictions_per_turn;
  if (k > 0) prompt += "\n\n" + conditioning::render_elicitation_prompt(spec.stance, k);
  const std::string system = "You are " + id + ", a debater. Stay in your assigned role.";

  std::vector<gateway::ChatMessage> history{{"user", prompt}};
  auto ask = [&]() -> std::optional<std::string> {
    try {
      auto reply = agent.complete(system, history).reply;
      if (reply.empty()) throw Error(ErrorCode::kBackend, "empty reply");
      return reply;
    } catch (const std::exception& e) {
      conclude(TerminationReason::kError, "agent " + id + " failed: " + e.what());
      return std::nullopt;
    }
  };

  auto reply = ask();
  if (!reply) return false;
  Turn turn;
  turn.round_index = round;
  turn.agent_id = id;
  turn.role = Role::kDebater;
  turn.phase = phase;
  turn.contentiousness = c;
  turn.context_omitted_turns = digest.omitted_turns;
  if (k > 0) {
    try {
      turn.prediction = parse_prediction_block(*reply);
    } catch (const ParseError& first) {
      history.push_back({"assistant", *reply});
      history.push_back({"user", conditioning::render_prediction_reprompt(k, first.what())});
      reply = ask();
      if (!reply) return false;
      try {
        turn.prediction = parse_prediction_block(*reply);
      } catch (const ParseError& second) {
        turn.content = *reply;
        turn.timestamp_ms = now();
        append(std::move(turn));
        conclude(TerminationReason::kError,
                 "agent " + id + ": prediction block unparseable after reprompt: " + second.what());
        return false;
      }
    }
  }
  turn.content = *reply;
  turn.timestamp_ms = now();
  if (turn.prediction) dists.emplace_back(id, *turn.prediction);
  append(std::move(turn));
  return true;
}

std::optional<MetricSnapshot> DebateEngine::run_round() {
  if (session().round_index > 0) {
    // Commands that arrived since the last boundary.
    drain_commands();
  }
  const auto s = session();
  if (s.concluded()) return std::nullopt;
  const int round = s.round_index;

  std::vector<std::optional<std::pair<std::string, PredictionSet>>> by_debater(config_.debaters.size());
  for (auto idx : speaking_order(config_, round)) {
    std::vector<std::pair<std::string, PredictionSet>> one;
    if (!debater_turn(idx, round, s.phase, s.contentiousness, one)) return std::nullopt;
    if (!one.empty()) by_debater[idx] = std::move(one.front());
  }
  std::vector<std::pair<std::string, PredictionSet>> dists;
  for (auto& d : by_debater) {
    if (d) dists.push_back(std::move(*d));
  }
  auto snapshot = records::canonical(compute_snapshot(round, dists));
  append(snapshot);

  const bool per_round = config_.crit.per_round || config_.convergence.crit_floor > 0.0;
  if (per_round && s.phase == Phase::kModerateContention && !evaluate_latest(round, true)) {
    return std::nullopt;
  }
  boundary();
  return snapshot;
}

void DebateEngine::boundary() {
  const auto decision =
      convergence_check(transcript().metric_snapshots(), crit_scores_, config_.convergence,
                        session().round_index, config_.k_max, config_.debater_ids());
  for (auto& e : phase_step_events(session(), decision, now())) {
    if (auto* c = std::get_if<Concluded>(&e)) {
      conclude_with_final_crit(c->reason, c->detail);
      return;
    }
    append(std::move(e));
  }
  drain_commands();
}

void DebateEngine::drain_commands() {
  for (;;) {
    ModeratorCommand cmd;
    {
      std::lock_guard lock(mu_);
      if (queue_.empty()) break;
      cmd = std::move(queue_.front());
      queue_.pop_front();
    }
    std::vector<Event> events;
    try {
      events = command_events(session(), cmd, now());
    } catch (const Error& e) {
      // The phase moved on since the command was accepted.
      warnings_.push_back(std::string("dropped command ") + std::string(to_string(cmd.kind())) + ": " + e.what());
      continue;
    }
    for (auto& e : events) {
      if (auto* c = std::get_if<Concluded>(&e)) {
        conclude_with_final_crit(c->reason, c->detail);
        return;
      }
      append(std::move(e));
    }
    if (cmd.kind() == ControlKind::kRequestCrit && !evaluate_latest(0, false)) return;
  }
}

Transcript DebateEngine::run() {
  try {
    while (!session().concluded()) {
      if (stopping()) {
        conclude(TerminationReason::kError, "cancelled");
        break;
      }
      run_round();
      if (config_.round_pause_ms > 0 && !session().concluded()) {
        std::unique_lock lock(mu_);
        changed_.wait_for(lock, std::chrono::milliseconds(config_.round_pause_ms),
                          [&] { return cancelled_.load(); });
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kStorage) {
      std::lock_guard lock(mu_);
      session_.phase = Phase::kConcluded;
      session_.termination_reason = TerminationReason::kError;
    }
    changed_.notify_all();
    throw;
  }
  return transcript();
}

Transcript run_session(SessionConfig config, EngineOptions options) {
  DebateEngine engine(std::move(config), std::move(options));
  return engine.run();
}

}  // namespace dialectic
