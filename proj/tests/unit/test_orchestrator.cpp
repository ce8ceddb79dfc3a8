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

#include <gtest/gtest.h>

#include <thread>

#include "dialectic/error.hpp"
#include "dialectic/metrics.hpp"
#include "dialectic/orchestrator.hpp"
#include "dialectic/records.hpp"
#include "../oracle/naive_metrics.hpp"
#include "test_support.hpp"

using namespace dialectic;
using gateway::ScriptedAgent;

namespace {

template <typename T>
std::vector<T> events_of(const Transcript& t) {
  std::vector<T> out;
  for (const auto& e : t.events()) {
    if (const auto* v = std::get_if<T>(&e.event)) out.push_back(*v);
  }
  return out;
}

Concluded conclusion(const Transcript& t) {
  const auto c = events_of<Concluded>(t);
  EXPECT_EQ(c.size(), 1u);
  return c.empty() ? Concluded{} : c.back();
}

/// Factory that keeps the scripted agents so tests can read their prompts.
struct Recorder {
  std::map<std::string, std::shared_ptr<ScriptedAgent>> agents;
  gateway::AgentFactory factory() {
    return [this](const AgentSpec& s) {
      auto a = gateway::make_agent(s);
      if (auto sa = std::dynamic_pointer_cast<ScriptedAgent>(a)) agents[s.agent_id] = sa;
      return a;
    };
  }
  std::vector<std::string> prompts(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& r : agents.at(id)->received()) out.push_back(r.history.front().content);
    return out;
  }
};

std::string block(std::vector<double> probs) {
  return format_prediction_block(PredictionSet::make({"Dengue Fever", "Zika Virus"}, probs), "symptom fit");
}

DebaterSpec replies_debater(const std::string& id, std::vector<std::string> replies) {
  DebaterSpec d;
  d.agent.agent_id = id;
  d.agent.script.replies = std::move(replies);
  d.stance.topic_id = "diagnosis";
  d.stance.position = "Position of " + id + ".";
  return d;
}

oracle::Dist as_oracle(const PredictionSet& p) {
  return oracle::make(p.labels(), p.probs());
}

}  // namespace

TEST(RunRound, TwoTurnsThenSnapshotThenSchedule) {
  DebateEngine engine(testing_support::convergent_pair());
  const auto snap = engine.run_round();
  ASSERT_TRUE(snap);
  const auto t = engine.transcript();
  ASSERT_GE(t.size(), 4u);
  EXPECT_TRUE(std::holds_alternative<Turn>(t.events()[0].event));
  EXPECT_TRUE(std::holds_alternative<Turn>(t.events()[1].event));
  EXPECT_TRUE(std::holds_alternative<MetricSnapshot>(t.events()[2].event));
  const auto& turn = std::get<Turn>(t.events()[0].event);
  EXPECT_EQ(turn.agent_id, "alpha");
  EXPECT_EQ(turn.contentiousness, 0.9);
  EXPECT_EQ(turn.phase, Phase::kHighContention);
  ASSERT_TRUE(turn.prediction);
  const auto& pc = std::get<PhaseChange>(t.events()[3].event);
  EXPECT_EQ(pc.to, Phase::kModerateContention);
  EXPECT_EQ(pc.contentiousness, 0.5);
  EXPECT_EQ(engine.session().round_index, 1);
  EXPECT_EQ(snap->distributions.size(), 2u);
}

TEST(RunRound, OpeningRotationAlternatesSpeakers) {
  auto c = testing_support::convergent_pair();
  c.opening_rotation = true;
  EXPECT_EQ(speaking_order(c, 0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(speaking_order(c, 1), (std::vector<std::size_t>{1, 0}));
  c.opening_rotation = false;
  EXPECT_EQ(speaking_order(c, 1), (std::vector<std::size_t>{0, 1}));
}

TEST(RunRound, UnparseablePredictionIsRepromptedOnce) {
  auto c = testing_support::convergent_pair();
  c.debaters[0] = replies_debater("alpha", {"I forgot the block.", "Here it is.\n" + block({0.7, 0.3})});
  c.debaters[1] = replies_debater("beta", {"Fine.\n" + block({0.4, 0.6})});
  Recorder rec;
  EngineOptions o;
  o.factory = rec.factory();
  DebateEngine engine(c, o);
  ASSERT_TRUE(engine.run_round());
  const auto turns = engine.transcript().turns();
  ASSERT_EQ(turns.size(), 2u);
  ASSERT_TRUE(turns[0].prediction);
  EXPECT_EQ(turns[0].prediction->probs(), (std::vector<double>{0.7, 0.3}));
  const auto calls = rec.agents.at("alpha")->received();
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_EQ(calls[1].history.size(), 3u);
}

TEST(RunRound, SecondParseFailureConcludesWithError) {
  auto c = testing_support::convergent_pair();
  c.debaters[0] = replies_debater("alpha", {"no block", "still none"});
  c.debaters[1] = replies_debater("beta", {block({0.4, 0.6})});
  const auto t = run_session(c);
  const auto turns = t.turns();
  ASSERT_EQ(turns.size(), 1u);
  EXPECT_FALSE(turns[0].prediction);
  EXPECT_EQ(turns[0].content, "still none");
  EXPECT_EQ(conclusion(t).reason, TerminationReason::kError);
  EXPECT_TRUE(events_of<MetricSnapshot>(t).empty());
}

TEST(RunRound, AgentFailureKeepsPartialRound) {
  auto c = testing_support::convergent_pair();
  c.debaters[0] = replies_debater("alpha", {block({0.6, 0.4}), block({0.6, 0.4})});
  c.debaters[1] = replies_debater("beta", {block({0.5, 0.5})});
  const auto t = run_session(c);
  EXPECT_EQ(t.turns().size(), 3u);
  EXPECT_EQ(events_of<MetricSnapshot>(t).size(), 1u);
  const auto end = conclusion(t);
  EXPECT_EQ(end.reason, TerminationReason::kError);
  EXPECT_NE(end.detail.find("beta"), std::string::npos);
}

TEST(RunSession, ConvergesWhereTheOracleSaysItShould) {
  const auto c = testing_support::convergent_pair(10);
  const auto t = run_session(c);

  // Independent check over the stored turn distributions.
  std::map<int, std::map<std::string, oracle::Dist>> by_round;
  for (const auto& turn : t.turns()) {
    if (turn.role == Role::kDebater && turn.prediction) {
      by_round[turn.round_index][turn.agent_id] = as_oracle(*turn.prediction);
    }
  }
  int expected_k = -1;
  for (int k = c.convergence.min_rounds; k <= c.k_max && expected_k < 0; ++k) {
    const auto& now = by_round.at(k - 1);
    const auto& prev = by_round.at(k - 2);
    const bool self = oracle::JSD(prev.at("alpha"), now.at("alpha")) <= c.convergence.eps_self &&
                      oracle::JSD(prev.at("beta"), now.at("beta")) <= c.convergence.eps_self;
    const bool pair = oracle::JSD(now.at("alpha"), now.at("beta")) <= c.convergence.eps_pair;
    if (self && pair) expected_k = k;
  }
  ASSERT_GT(expected_k, 0);

  const auto changes = events_of<PhaseChange>(t);
  ASSERT_EQ(changes.size(), 2u);
  EXPECT_EQ(changes[0].to, Phase::kModerateContention);
  EXPECT_EQ(changes[1].to, Phase::kConsensus);
  EXPECT_EQ(changes[1].cause, PhaseChangeCause::kConverged);
  EXPECT_EQ(changes[1].round_index, expected_k);
  EXPECT_EQ(changes[1].contentiousness, 0.1);
  EXPECT_EQ(conclusion(t).reason, TerminationReason::kConverged);

  const auto controls = events_of<ControlEvent>(t);
  ASSERT_EQ(controls.size(), 1u);
  EXPECT_EQ(controls[0].issued_by(), Issuer::kEvincePolicy);
  EXPECT_EQ(controls[0].kind(), ControlKind::kForcePhase);

  // One joint round in Consensus, then a final CRIT for each debater.
  const auto turns = t.turns();
  EXPECT_EQ(turns.back().phase, Phase::kConsensus);
  EXPECT_EQ(turns.back().round_index, expected_k);
  const auto crits = events_of<CritRecord>(t);
  ASSERT_EQ(crits.size(), 2u);
  EXPECT_EQ(crits[0].agent_id, "alpha");
  EXPECT_EQ(crits[1].agent_id, "beta");
  EXPECT_NEAR(crits[0].report.gamma_aggregate, 0.64, 1e-12);
}

TEST(RunSession, NeverConvergingStopsAtKMax) {
  const auto t = run_session(testing_support::oscillating_pair(5));
  const auto changes = events_of<PhaseChange>(t);
  ASSERT_EQ(changes.size(), 2u);
  EXPECT_EQ(changes[1].to, Phase::kConsensus);
  EXPECT_EQ(changes[1].cause, PhaseChangeCause::kMaxRounds);
  EXPECT_EQ(changes[1].round_index, 5);
  EXPECT_EQ(conclusion(t).reason, TerminationReason::kMaxRounds);
  EXPECT_EQ(t.last_round_index(), 5);
}

TEST(RunSession, OneDebaterIsRejectedBeforeAnyRound) {
  auto c = testing_support::convergent_pair();
  c.debaters.pop_back();
  Recorder rec;
  EngineOptions o;
  o.factory = rec.factory();
  try {
    DebateEngine engine(c, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  EXPECT_TRUE(rec.agents.empty());
}

TEST(RunSession, DeterministicBytes) {
  const auto a = records::serialize_transcript(run_session(testing_support::convergent_pair()));
  const auto b = records::serialize_transcript(run_session(testing_support::convergent_pair()));
  EXPECT_EQ(a, b);
  const auto o1 = records::serialize_transcript(run_session(testing_support::oscillating_pair()));
  const auto o2 = records::serialize_transcript(run_session(testing_support::oscillating_pair()));
  EXPECT_EQ(o1, o2);
}

TEST(RunSession, ReplayMatchesLiveState) {
  DebateEngine engine(testing_support::convergent_pair());
  const auto t = engine.run();
  const auto live = engine.session();
  const auto replayed = replay_state(testing_support::convergent_pair(), t);
  EXPECT_EQ(records::to_json(replayed).dump(), records::to_json(live).dump());
}

TEST(RunSession, LivenessWithinKMaxPlusTwo) {
  for (int k_max = 1; k_max <= 6; ++k_max) {
    for (auto make : {testing_support::convergent_pair, testing_support::oscillating_pair}) {
      const auto t = run_session(make(k_max));
      EXPECT_LE(t.last_round_index() + 1, k_max + 2);
      EXPECT_TRUE(std::holds_alternative<Concluded>(t.events().back().event));
    }
  }
}

TEST(RunSession, ContentiousnessNeverRisesUnderTheDefaultSchedule) {
  const auto t = run_session(testing_support::oscillating_pair(5));
  double last = 1.0;
  for (const auto& turn : t.turns()) {
    if (!turn.contentiousness) continue;
    EXPECT_LE(*turn.contentiousness, last);
    last = *turn.contentiousness;
  }
  EXPECT_EQ(last, 0.1);
}

TEST(Commands, HumanEndSessionStopsAfterRoundOne) {
  auto c = testing_support::convergent_pair();
  c.moderator_mode = ModeratorMode::kHuman;
  DebateEngine engine(c);
  engine.submit({EndSession{}, Issuer::kHumanModerator});
  const auto t = engine.run();
  EXPECT_EQ(t.last_round_index(), 0);
  EXPECT_EQ(conclusion(t).reason, TerminationReason::kModeratorEnded);
  EXPECT_EQ(events_of<CritRecord>(t).size(), 2u);
  const auto controls = events_of<ControlEvent>(t);
  ASSERT_EQ(controls.size(), 1u);
  EXPECT_EQ(controls[0].kind(), ControlKind::kEndSession);
}

TEST(Commands, AutomatedModeRejectsHumanCommands) {
  DebateEngine engine(testing_support::convergent_pair());
  try {
    engine.submit({EndSession{}, Issuer::kHumanModerator});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
  }
}

TEST(Commands, HumanModeIgnoresConvergence) {
  auto c = testing_support::convergent_pair(8);
  c.moderator_mode = ModeratorMode::kHuman;
  const auto t = run_session(c);
  EXPECT_EQ(conclusion(t).reason, TerminationReason::kMaxRounds);
  EXPECT_EQ(events_of<PhaseChange>(t)[1].round_index, 8);
}

TEST(Commands, HybridModeConvergesAndAcceptsHumans) {
  auto c = testing_support::convergent_pair(10);
  c.moderator_mode = ModeratorMode::kHybrid;
  DebateEngine engine(c);
  engine.submit({InjectPrompt{"Consider the rash."}, Issuer::kHumanModerator});
  const auto t = engine.run();
  EXPECT_EQ(conclusion(t).reason, TerminationReason::kConverged);
}

TEST(Commands, SetContentiousnessChangesNextRoundRow) {
  auto c = testing_support::convergent_pair();
  c.moderator_mode = ModeratorMode::kHuman;
  Recorder rec;
  EngineOptions o;
  o.factory = rec.factory();
  DebateEngine engine(c, o);
  engine.run_round();
  engine.submit({SetContentiousness{0.3}, Issuer::kHumanModerator});
  engine.run_round();
  const auto prompts = rec.prompts("alpha");
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_NE(prompts[0].find(feature_row(0.9).tone_keyword), std::string::npos);
  EXPECT_NE(prompts[1].find(feature_row(0.3).tone_keyword), std::string::npos);
  EXPECT_NE(prompts[1].find(feature_row(0.3).language), std::string::npos);
  EXPECT_EQ(prompts[1].find(feature_row(0.5).tone_keyword), std::string::npos);
  EXPECT_EQ(engine.transcript().turns().back().contentiousness, 0.3);
}

TEST(Commands, PreStartOverrideTakesEffectInRoundTwo) {
  auto c = testing_support::convergent_pair();
  c.moderator_mode = ModeratorMode::kHuman;
  DebateEngine engine(c);
  engine.submit({SetContentiousness{0.0}, Issuer::kHumanModerator});
  engine.run_round();
  engine.run_round();
  const auto turns = engine.transcript().turns();
  EXPECT_EQ(turns[0].contentiousness, 0.9);
  EXPECT_EQ(turns[2].contentiousness, 0.0);
}

TEST(Commands, BackwardForcePhaseIsAProtocolError) {
  auto c = testing_support::convergent_pair();
  c.moderator_mode = ModeratorMode::kHuman;
  DebateEngine engine(c);
  engine.run_round();
  try {
    engine.submit({ForcePhase{Phase::kHighContention}, Issuer::kHumanModerator});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
  }
  EXPECT_NO_THROW(engine.submit({ForcePhase{Phase::kConsensus}, Issuer::kHumanModerator}));
  engine.run_round();
  const auto last = engine.transcript().turns().back();
  EXPECT_EQ(last.phase, Phase::kConsensus);
  EXPECT_EQ(last.contentiousness, 0.1);
  EXPECT_TRUE(engine.session().concluded());
}

TEST(Commands, ForwardSkipFromHighContention) {
  auto s = DebateSession::start(testing_support::convergent_pair());
  s = apply_command(s, {ForcePhase{Phase::kConsensus}, Issuer::kHumanModerator});
  EXPECT_EQ(s.phase, Phase::kConsensus);
  EXPECT_THROW(apply_command(s, {ForcePhase{Phase::kHighContention}, Issuer::kHumanModerator}), Error);
}

TEST(Commands, InjectPromptReachesTheNextRound) {
  auto c = testing_support::convergent_pair();
  c.moderator_mode = ModeratorMode::kHuman;
  Recorder rec;
  EngineOptions o;
  o.factory = rec.factory();
  DebateEngine engine(c, o);
  engine.run_round();
  engine.submit({InjectPrompt{"Weigh the platelet count."}, Issuer::kHumanModerator});
  engine.run_round();
  const auto turns = engine.transcript().turns();
  const auto it = std::find_if(turns.begin(), turns.end(), [](const Turn& t) { return t.role == Role::kModerator; });
  ASSERT_NE(it, turns.end());
  EXPECT_EQ(it->round_index, 1);
  EXPECT_NE(rec.prompts("alpha")[1].find("Weigh the platelet count."), std::string::npos);
  EXPECT_NE(rec.prompts("beta")[1].find("Weigh the platelet count."), std::string::npos);
}

TEST(Commands, RequestCritEvaluatesLatestTurns) {
  auto c = testing_support::convergent_pair();
  c.moderator_mode = ModeratorMode::kHuman;
  DebateEngine engine(c);
  engine.run_round();
  engine.submit({RequestCrit{}, Issuer::kHumanModerator});
  engine.run_round();
  EXPECT_EQ(events_of<CritRecord>(engine.transcript()).size(), 2u);
}

TEST(Commands, ConcludedSessionRejectsCommands) {
  DebateEngine engine(testing_support::convergent_pair());
  engine.run();
  EXPECT_THROW(engine.submit({RequestCrit{}, Issuer::kEvincePolicy}), Error);
}

TEST(Engine, CancelConcludesWithError) {
  auto c = testing_support::convergent_pair(50);
  c.round_pause_ms = 50;
  c.convergence.min_rounds = 50;
  DebateEngine engine(c);
  std::thread runner([&] { engine.run(); });
  engine.wait_events(2, std::chrono::seconds(5));
  engine.cancel();
  runner.join();
  const auto t = engine.transcript();
  EXPECT_EQ(conclusion(t).reason, TerminationReason::kError);
  EXPECT_EQ(conclusion(t).detail, "cancelled");
}

TEST(Engine, WaitEventsSeesAppendsFromTheRunner) {
  DebateEngine engine(testing_support::convergent_pair());
  std::thread runner([&] { engine.run(); });
  std::uint64_t seen = 0;
  bool concluded = false;
  while (!concluded) {
    for (const auto& e : engine.wait_events(seen, std::chrono::seconds(5))) {
      EXPECT_EQ(e.seq, seen + 1);
      seen = e.seq;
      concluded = std::holds_alternative<Concluded>(e.event);
    }
  }
  runner.join();
  EXPECT_EQ(seen, engine.transcript().last_seq());
}

TEST(Engine, FailingSinkIsAStorageError) {
  EngineOptions o;
  int calls = 0;
  o.sinks.push_back([&](const SequencedEvent&) {
    if (++calls == 3) throw std::runtime_error("disk full");
  });
  DebateEngine engine(testing_support::convergent_pair(), o);
  try {
    engine.run();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStorage);
  }
  EXPECT_TRUE(engine.session().concluded());
}

TEST(Context, EveryPriorTurnAppearsVerbatim) {
  auto c = testing_support::convergent_pair(5);
  c.convergence.min_rounds = 6;
  Recorder rec;
  EngineOptions o;
  o.factory = rec.factory();
  DebateEngine engine(c, o);
  for (int r = 0; r < 5; ++r) engine.run_round();
  const auto turns = engine.transcript().turns();
  for (const auto& id : {"alpha", "beta"}) {
    const auto prompts = rec.prompts(id);
    ASSERT_EQ(prompts.size(), 5u);
    for (int k = 0; k < 5; ++k) {
      for (const auto& t : turns) {
        if (t.role == Role::kDebater && t.round_index < k) {
          EXPECT_NE(prompts[k].find(t.content), std::string::npos) << id << " round " << k;
        }
      }
    }
  }
}

TEST(Context, BudgetTruncationIsRecorded) {
  auto c = testing_support::convergent_pair(5);
  c.context_token_budget = 60;
  const auto t = run_session(c);
  const auto turns = t.turns();
  EXPECT_EQ(turns.front().context_omitted_turns, 0);
  EXPECT_GT(turns.back().context_omitted_turns, 0);
}

TEST(PhaseRules, StepEvents) {
  auto s = DebateSession::start(testing_support::convergent_pair());
  s.round_index = 1;
  auto e = phase_step_events(s, ConvergenceDecision::kContinue);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(std::get<PhaseChange>(e[0]).to, Phase::kModerateContention);
  s = step_phase(s, ConvergenceDecision::kContinue);
  s.round_index = 3;
  s = step_phase(s, ConvergenceDecision::kConverged);
  EXPECT_EQ(s.phase, Phase::kConsensus);
  EXPECT_EQ(s.contentiousness, 0.1);
}
