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

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "dialectic/error.hpp"
#include "dialectic/gateway.hpp"
#include "dialectic/metrics.hpp"
#include "dialectic/orchestrator.hpp"
#include "dialectic/store.hpp"
#include "test_support.hpp"

using namespace dialectic;
using namespace std::chrono_literals;
using testing_support::StubServer;

namespace {

const std::vector<gateway::ChatMessage> kHello{{"user", "hello"}};

std::vector<std::chrono::milliseconds> sleeps;
gateway::Sleeper recording_sleeper() {
  sleeps.clear();
  return [](std::chrono::milliseconds d) { sleeps.push_back(d); };
}

}  // namespace

TEST(History, MustAlternateStartingWithUser) {
  EXPECT_NO_THROW(gateway::validate_history({{"user", "a"}, {"assistant", "b"}, {"user", "c"}}));
  EXPECT_THROW(gateway::validate_history({}), Error);
  EXPECT_THROW(gateway::validate_history({{"assistant", "a"}}), Error);
  EXPECT_THROW(gateway::validate_history({{"user", "a"}, {"user", "b"}}), Error);
}

TEST(Scripted, PopsRepliesThenRunsOut) {
  gateway::ScriptedAgent a("a", std::vector<std::string>{"one", "two"});
  EXPECT_EQ(a.complete("s", kHello).reply, "one");
  EXPECT_EQ(a.complete("s", kHello).reply, "two");
  try {
    a.complete("s", kHello);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kScriptExhausted);
  }
  EXPECT_EQ(a.received().size(), 3u);
}

TEST(Backoff, ExponentialAndCapped) {
  RetryPolicy p;
  p.initial_backoff = 100ms;
  p.multiplier = 2.0;
  p.max_backoff = 500ms;
  EXPECT_EQ(gateway::backoff_delay(p, 0), 100ms);
  EXPECT_EQ(gateway::backoff_delay(p, 1), 200ms);
  EXPECT_EQ(gateway::backoff_delay(p, 2), 400ms);
  EXPECT_EQ(gateway::backoff_delay(p, 3), 500ms);
  EXPECT_EQ(gateway::backoff_delay(p, 30), 500ms);
  EXPECT_TRUE(gateway::is_transient_status(429));
  EXPECT_TRUE(gateway::is_transient_status(503));
  EXPECT_FALSE(gateway::is_transient_status(400));
  EXPECT_FALSE(gateway::is_transient_status(404));
}

TEST(Remote, SucceedsAfterTwoRateLimits) {
  StubServer stub({{429, "{\"error\":\"slow down\"}"},
                   {429, "{\"error\":\"slow down\"}"},
                   {200, StubServer::completion("The answer.")}});
  gateway::RemoteChatAgent agent(testing_support::remote_spec(stub.base_url()), recording_sleeper());
  const auto ex = agent.complete("system", kHello);
  EXPECT_EQ(ex.reply, "The answer.");
  EXPECT_EQ(ex.attempts, 3);
  EXPECT_EQ(stub.hits(), 3u);
  ASSERT_EQ(ex.backoff_delays.size(), 2u);
  EXPECT_LE(ex.backoff_delays[0], ex.backoff_delays[1]);
  EXPECT_EQ(sleeps, ex.backoff_delays);
  EXPECT_EQ(ex.usage.prompt_tokens, 12);
  EXPECT_EQ(ex.usage.completion_tokens, 7);

  const auto sent = records::Json::parse(stub.requests().front());
  EXPECT_EQ(sent["model"], "stub-model");
  EXPECT_EQ(sent["messages"][0]["role"], "system");
  EXPECT_EQ(sent["messages"][1]["content"], "hello");
}

TEST(Remote, HonoursRetryAfter) {
  StubServer stub({{503, "", {{"Retry-After", "1"}}}, {200, StubServer::completion("ok")}});
  gateway::RemoteChatAgent agent(testing_support::remote_spec(stub.base_url()), recording_sleeper());
  const auto ex = agent.complete("s", kHello);
  ASSERT_EQ(ex.backoff_delays.size(), 1u);
  EXPECT_EQ(ex.backoff_delays[0], 1000ms);
}

TEST(Remote, ClientErrorIsNotRetried) {
  StubServer stub({{400, "{\"error\":\"bad request\"}"}});
  gateway::RemoteChatAgent agent(testing_support::remote_spec(stub.base_url()), recording_sleeper());
  try {
    agent.complete("s", kHello);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_NE(e.body_digest().find("bad request"), std::string::npos);
  }
  EXPECT_EQ(stub.hits(), 1u);
}

TEST(Remote, RetriesAreBounded) {
  StubServer stub({{500, "oops"}});
  auto spec = testing_support::remote_spec(stub.base_url());
  spec.retry.max_retries = 2;
  gateway::RemoteChatAgent agent(spec, recording_sleeper());
  try {
    agent.complete("s", kHello);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.status(), 500);
  }
  EXPECT_EQ(stub.hits(), 3u);
}

TEST(Remote, MalformedBodyIsABackendError) {
  StubServer stub({{200, "{\"choices\":[]}"}});
  gateway::RemoteChatAgent agent(testing_support::remote_spec(stub.base_url()), recording_sleeper());
  EXPECT_THROW(agent.complete("s", kHello), BackendError);
}

TEST(Remote, DeadlineRaisesTimeout) {
  StubServer stub({{200, StubServer::completion("late"), {}, 800ms}});
  auto spec = testing_support::remote_spec(stub.base_url());
  spec.retry.deadline = 200ms;
  gateway::RemoteChatAgent agent(spec, recording_sleeper());
  const auto start = std::chrono::steady_clock::now();
  try {
    agent.complete("s", kHello);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 700ms);
}

TEST(Remote, BackoffPastDeadlineRaisesTimeout) {
  StubServer stub({{429, "", {{"Retry-After", "30"}}}});
  gateway::RemoteChatAgent agent(testing_support::remote_spec(stub.base_url()), recording_sleeper());
  try {
    agent.complete("s", kHello);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
  EXPECT_TRUE(sleeps.empty());
}

TEST(Remote, UnreachableEndpointRetriesThenFails) {
  auto spec = testing_support::remote_spec("http://127.0.0.1:1/v1");
  spec.retry.max_retries = 1;
  gateway::RemoteChatAgent agent(spec, recording_sleeper());
  EXPECT_THROW(agent.complete("s", kHello), Error);
  EXPECT_EQ(sleeps.size(), 1u);
}

TEST(Credentials, TokenIsSentButScrubbed) {
  const std::string token = "sk-test-7f3a91c2e4b5d6";
  ::setenv("DIALECTIC_TEST_TOKEN", token.c_str(), 1);
  StubServer stub({{200, StubServer::completion("echo " + token + " end")},
                   {401, "{\"error\":\"bad key " + token + "\"}"}});
  gateway::RemoteChatAgent agent(testing_support::remote_spec(stub.base_url(), "DIALECTIC_TEST_TOKEN"),
                                 recording_sleeper());
  const auto ex = agent.complete("s", kHello);
  EXPECT_EQ(stub.authorizations().front(), "Bearer " + token);
  EXPECT_EQ(ex.reply, "echo [REDACTED] end");
  try {
    agent.complete("s", kHello);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(std::string(e.what()).find(token), std::string::npos);
    EXPECT_EQ(e.body_digest().find(token), std::string::npos);
    EXPECT_NE(e.body_digest().find("[REDACTED]"), std::string::npos);
  }
  EXPECT_EQ(gateway::scrub("a-x-a", "a"), "[REDACTED]-x-[REDACTED]");
  EXPECT_EQ(gateway::scrub("abc", ""), "abc");
}

TEST(Credentials, NoTokenBytesInPersistedArtifacts) {
  const std::string token = "sk-live-0c9e8d7f6a5b4c3d";
  ::setenv("DIALECTIC_ARTIFACT_TOKEN", token.c_str(), 1);
  const auto block = format_prediction_block(
      PredictionSet::make({"Dengue Fever", "Zika Virus"}, {0.6, 0.4}), "weighted by symptoms");
  StubServer stub({{200, StubServer::completion("My key is " + token + ".\n" + block)}});

  auto config = testing_support::convergent_pair(2);
  config.session_id = "remote-debate";
  for (auto& d : config.debaters) {
    const auto id = d.agent.agent_id;
    d.agent = testing_support::remote_spec(stub.base_url(), "DIALECTIC_ARTIFACT_TOKEN");
    d.agent.agent_id = id;
  }
  testing_support::TempDir dir;
  store::FileStore fs(dir.path());
  fs.create(config);
  EngineOptions opts;
  opts.sinks.push_back(fs.sink(config.session_id));
  const auto transcript = run_session(config, opts);
  fs.close(config.session_id);
  ASSERT_TRUE(std::holds_alternative<Concluded>(transcript.events().back().event));
  EXPECT_EQ(std::get<Concluded>(transcript.events().back().event).reason, TerminationReason::kMaxRounds);
  EXPECT_GT(stub.hits(), 3u);

  int files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (!entry.is_regular_file()) continue;
    ++files;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str().find(token), std::string::npos) << entry.path();
    EXPECT_EQ(ss.str().find("sk-live"), std::string::npos) << entry.path();
  }
  EXPECT_GE(files, 3);
  EXPECT_NE(records::read_file(fs.events_path(config.session_id)).find("[REDACTED]"), std::string::npos);
}

TEST(Limiter, CapsInFlightRequests) {
  gateway::ConcurrencyLimiter limiter(2, 3);
  StubServer stub({{200, StubServer::completion("ok"), {}, 60ms}});
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      gateway::RemoteChatAgent agent(testing_support::remote_spec(stub.base_url()), {}, &limiter);
      agent.complete("s", kHello);
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(stub.hits(), 8u);
  EXPECT_LE(limiter.peak_in_flight(), 2);
  EXPECT_GE(limiter.peak_in_flight(), 1);
  EXPECT_EQ(limiter.in_flight(), 0);
}

TEST(Factory, BuildsEachKind) {
  auto j = gateway::make_agent(testing_support::judge_spec("j"));
  EXPECT_EQ(j->id(), "j");
  AgentSpec bad;
  bad.agent_id = "x";
  EXPECT_THROW(gateway::make_agent(bad), Error);
  EXPECT_THROW(gateway::make_agent(testing_support::remote_spec("https://api.example.com/v1")), Error);
  auto remote = gateway::make_agent(testing_support::remote_spec("http://127.0.0.1:9/v1"));
  EXPECT_NE(dynamic_cast<gateway::RemoteChatAgent*>(remote.get()), nullptr);
}
