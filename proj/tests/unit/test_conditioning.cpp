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

#include "dialectic/conditioning.hpp"
#include "dialectic/error.hpp"

using namespace dialectic;
using namespace dialectic::conditioning;

namespace {

Stance stance() {
  Stance s;
  s.topic_id = "diagnosis";
  s.position = "The symptoms point to dengue fever.";
  return s;
}

bool contains(const std::string& hay, std::string_view needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST(Template, RendersAndRejectsUnboundPlaceholders) {
  PromptTemplate t{"t", "Hello {name}, phase {phase}.", {"name", "phase"}};
  EXPECT_EQ(t.render({{"name", "A"}, {"phase", "B"}}), "Hello A, phase B.");
  try {
    t.render({{"name", "A"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTemplate);
  }
  PromptTemplate loose{"u", "Hi {who}", {}};
  EXPECT_THROW(loose.render({}), Error);
}

TEST(Template, SubstitutedValuesAreNotRescanned) {
  PromptTemplate t{"t", "{a}", {"a"}};
  EXPECT_EQ(t.render({{"a", "{b}"}}), "{b}");
}

TEST(DebaterPrompt, CarriesStanceLevelPhaseAndContext) {
  const auto p = render_debater_prompt(stance(), quantize_contentiousness(0.9), Phase::kHighContention,
                                       "[Round 1] beta:\nearlier text\n\n", "Which disease?");
  EXPECT_TRUE(contains(p, "Which disease?"));
  EXPECT_TRUE(contains(p, "dengue fever"));
  EXPECT_TRUE(contains(p, "0.9"));
  EXPECT_TRUE(contains(p, "HighContention"));
  EXPECT_TRUE(contains(p, "earlier text"));
  EXPECT_TRUE(contains(p, feature_row(0.9).tone));
  EXPECT_TRUE(contains(p, feature_row(0.9).emphasis));
  EXPECT_TRUE(contains(p, feature_row(0.9).language));
}

TEST(DebaterPrompt, EveryLevelAndPhaseHasOnlyItsOwnKeyword) {
  for (double level : kContentiousnessAnchors) {
    for (Phase phase : {Phase::kHighContention, Phase::kModerateContention, Phase::kConsensus}) {
      const auto p = render_debater_prompt(stance(), quantize_contentiousness(level), phase, "");
      for (double other : kContentiousnessAnchors) {
        EXPECT_EQ(contains(p, feature_row(other).tone_keyword), other == level)
            << "level " << level << " phase " << to_string(phase) << " keyword "
            << feature_row(other).tone_keyword;
      }
    }
  }
}

TEST(DebaterPrompt, OverrideLevelUsesItsRow) {
  const auto p = render_debater_prompt(stance(), quantize_contentiousness(0.3), Phase::kModerateContention, "");
  EXPECT_TRUE(contains(p, feature_row(0.3).language));
  EXPECT_TRUE(contains(p, "Positive and careful"));
}

TEST(DebaterPrompt, ConsensusAsksForJointRemarks) {
  EXPECT_TRUE(contains(std::string(phase_task(Phase::kConsensus)), "joint"));
  EXPECT_THROW(phase_task(Phase::kConcluded), Error);
}

TEST(Elicitation, CountsAndGrammar) {
  const auto three = render_elicitation_prompt(stance(), 3);
  EXPECT_TRUE(contains(three, "three top predictions"));
  EXPECT_TRUE(contains(three, "===PREDICTIONS==="));
  EXPECT_TRUE(contains(three, "===END==="));
  EXPECT_TRUE(contains(three, "%"));
  const auto one = render_elicitation_prompt(stance(), 1);
  EXPECT_TRUE(contains(one, "single prediction"));
  EXPECT_THROW(render_elicitation_prompt(stance(), 0), Error);
  auto s = stance();
  s.label_space = std::vector<std::string>{"Dengue", "Zika"};
  EXPECT_TRUE(contains(render_elicitation_prompt(s, 2), "Dengue, Zika"));
}

TEST(ContextDigest, IncludesPriorTurnsInOrder) {
  std::vector<Turn> turns;
  for (int r = 0; r < 3; ++r) {
    for (const char* id : {"a", "b"}) {
      Turn t;
      t.round_index = r;
      t.agent_id = id;
      t.content = std::string("argument ") + id + std::to_string(r);
      turns.push_back(t);
    }
  }
  Turn judge;
  judge.role = Role::kJudge;
  judge.agent_id = "j";
  judge.content = "judge notes";
  turns.push_back(judge);
  const auto d = build_context_digest(turns);
  EXPECT_EQ(d.omitted_turns, 0);
  std::size_t pos = 0;
  for (const auto& t : turns) {
    if (t.role == Role::kJudge) {
      EXPECT_FALSE(contains(d.text, t.content));
      continue;
    }
    const auto at = d.text.find(t.content);
    ASSERT_NE(at, std::string::npos);
    EXPECT_GE(at, pos);
    pos = at;
  }
}

TEST(ContextDigest, BudgetDropsOldestFirst) {
  std::vector<Turn> turns;
  for (int r = 0; r < 5; ++r) {
    Turn t;
    t.round_index = r;
    t.agent_id = "a";
    t.content = "word word word word word round" + std::to_string(r);
    turns.push_back(t);
  }
  const auto d = build_context_digest(turns, 20);
  EXPECT_GT(d.omitted_turns, 0);
  EXPECT_FALSE(contains(d.text, "round0"));
  EXPECT_TRUE(contains(d.text, "round4"));
  EXPECT_TRUE(contains(d.text, "earliest turns omitted"));
}

TEST(ContextDigest, ModeratorTurnsAreLabelled) {
  Turn m;
  m.role = Role::kModerator;
  m.agent_id = "moderator";
  m.content = "Focus on lab tests.";
  EXPECT_TRUE(contains(build_context_digest({m}).text, "Moderator:\nFocus on lab tests."));
}
