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

#include <set>

#include "dialectic/orchestrator.hpp"
#include "dialectic/records.hpp"
#include "test_support.hpp"

using namespace dialectic;
using records::Json;

TEST(Round12, IdempotentAndClose) {
  for (double x : {0.0, 1.0, 1.0 / 3.0, 0.18445567798824577567, 6.1711134045203298189, 1e-15, -2.5}) {
    const double r = records::round12(x);
    EXPECT_EQ(records::round12(r), r);
    EXPECT_NEAR(r, x, std::abs(x) * 1e-11 + 1e-300);
  }
}

TEST(Wire, FullSessionRoundTripsByteForByte) {
  const auto t = run_session(testing_support::convergent_pair());
  const auto text = records::serialize_transcript(t);
  const auto back = records::parse_transcript(text);
  EXPECT_EQ(records::serialize_transcript(back), text);
  EXPECT_EQ(back.session_id(), "convergent");
  EXPECT_EQ(back.size(), t.size());
}

TEST(Wire, HeaderVersionIsChecked) {
  auto h = records::header_json("s");
  EXPECT_EQ(records::parse_header(h), "s");
  h["schema_version"] = 2;
  try {
    records::parse_header(h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedVersion);
  }
}

TEST(Wire, BadLinesReportTheirLineNumber) {
  const auto t = run_session(testing_support::convergent_pair());
  auto text = records::serialize_transcript(t);
  text += "{\"seq\":99,\"record\":\"Nope\"}\n";
  try {
    records::parse_transcript(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(t.size() + 2)), std::string::npos)
        << e.what();
  }
}

TEST(Wire, EventRecordsCarryTheirNames) {
  const auto t = run_session(testing_support::convergent_pair());
  std::set<std::string> names;
  for (const auto& e : t.events()) names.insert(records::to_json(e).at("record").get<std::string>());
  for (const char* n : {"Turn", "MetricSnapshot", "ControlEvent", "PhaseChange", "CritReport", "Concluded"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
}

TEST(Wire, InvalidUtf8IsReplaced) {
  Json j;
  j["text"] = std::string("ok \xff\xfe end");
  const auto s = records::dump(j);
  EXPECT_NE(s.find("ok "), std::string::npos);
  EXPECT_NO_THROW((void)Json::parse(s));
}

TEST(Commands, ParseAndReject) {
  const auto c = records::command_from_json(
      Json::parse(R"({"kind":"set_contentiousness","payload":{"value":0.3},"source":"human"})"));
  EXPECT_EQ(c.kind(), ControlKind::kSetContentiousness);
  EXPECT_EQ(c.source, Issuer::kHumanModerator);
  EXPECT_EQ(std::get<SetContentiousness>(c.payload).value, 0.3);
  EXPECT_EQ(records::to_json(records::command_from_json(records::to_json(c))).dump(), records::to_json(c).dump());

  const auto f = records::command_from_json(Json::parse(R"({"kind":"force_phase","payload":{"target":"Consensus"}})"));
  EXPECT_EQ(std::get<ForcePhase>(f.payload).target, Phase::kConsensus);

  EXPECT_THROW(records::command_from_json(Json::parse(R"({"kind":"dance"})")), Error);
  EXPECT_THROW(records::command_from_json(Json::parse(R"({"kind":"set_contentiousness","payload":{"value":3}})")),
               Error);
  EXPECT_THROW(records::command_from_json(Json::parse(R"({"kind":"inject_prompt","payload":{}})")), Error);
}

TEST(Config, SampleLoadsAndRoundTrips) {
  const auto c = records::load_config(testing_support::sample("convergent_pair.json"));
  EXPECT_EQ(c.debaters.size(), 2u);
  const auto again = records::config_from_json(records::to_json(c));
  EXPECT_EQ(records::to_json(again).dump(), records::to_json(c).dump());
}

TEST(Config, UnknownKeysAreRejected) {
  auto j = records::to_json(testing_support::convergent_pair());
  j["k_maxx"] = 3;
  try {
    records::config_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(std::string(e.what()).find("k_maxx"), std::string::npos);
  }
  auto k = records::to_json(testing_support::convergent_pair());
  k["debaters"][0]["temperature_x"] = 1;
  EXPECT_THROW(records::config_from_json(k), Error);
  auto w = records::to_json(testing_support::convergent_pair());
  w["k_max"] = "five";
  EXPECT_THROW(records::config_from_json(w), Error);
}

TEST(Config, CredentialsAreReferencedByName) {
  auto c = testing_support::convergent_pair();
  c.debaters[0].agent = testing_support::remote_spec("http://127.0.0.1:9/v1", "MY_TOKEN_VAR");
  c.debaters[0].agent.agent_id = "alpha";
  const auto j = records::to_json(c).dump();
  EXPECT_NE(j.find("MY_TOKEN_VAR"), std::string::npos);
  EXPECT_EQ(records::config_from_json(Json::parse(j)).debaters[0].agent.credentials_ref, "MY_TOKEN_VAR");
}

TEST(Session, PublicView) {
  const auto s = DebateSession::start(testing_support::convergent_pair());
  const auto j = records::to_json(s);
  EXPECT_EQ(j.at("record"), "DebateSession");
  EXPECT_EQ(j.at("phase"), "HighContention");
  EXPECT_EQ(records::error_json(ErrorCode::kNotFound, "x").at("code"), "not_found");
}
