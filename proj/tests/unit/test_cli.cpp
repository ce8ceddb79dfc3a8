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

#include <fstream>
#include <sstream>

#include "dialectic/cli.hpp"
#include "dialectic/metrics.hpp"
#include "dialectic/records.hpp"
#include "test_support.hpp"

using namespace dialectic;
using testing_support::fixture;
using testing_support::sample;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::cli_run(args, out, err);
  return {code, out.str(), err.str()};
}

bool has(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
  EXPECT_EQ(run({"evaluate"}).code, cli::kUsage);
  EXPECT_EQ(run({"debate", "--config", sample("convergent_pair.json").string(), "--mode", "solo"}).code, cli::kUsage);
}

TEST(Cli, BadConfigExitsTwo) {
  testing_support::TempDir dir;
  const auto path = dir.path() / "bad.json";
  std::ofstream(path) << R"({"topic":"x","debaters":[],"judges":[]})";
  const auto r = run({"debate", "--config", path.string(), "--store", (dir.path() / "s").string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_TRUE(has(r.err, "two debaters")) << r.err;
  EXPECT_EQ(run({"debate", "--config", (dir.path() / "missing.json").string()}).code, cli::kUsage);
}

TEST(Cli, EvaluatePilotPrintsSeventyFive) {
  testing_support::TempDir dir;
  const auto out = dir.path() / "report.json";
  const auto r = run({"evaluate", "--doc", fixture("pilot_document.txt").string(), "--judges",
                      sample("pilot_judges.json").string(), "--out", out.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(has(r.out, "gamma: 75% (0.7533, tau 0.5)")) << r.out;
  EXPECT_TRUE(has(r.out, "dismissed")) << r.out;
  const auto j = records::Json::parse(records::read_file(out));
  EXPECT_NEAR(j.at("report").at("gamma_aggregate").get<double>(), 0.7533, 1e-4);
}

TEST(Cli, MetricsOnTheDiagnosisFixture) {
  const auto r = run({"metrics", "--transcript", fixture("diagnosis_transcript.jsonl").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(has(r.out, "Chikungunya 50% | Dengue Fever 25% | Influenza 10% | other 15%")) << r.out;
  EXPECT_TRUE(has(r.out, "Dengue Fever 40% | Chikungunya 30% | Zika Virus 20% | other 10%")) << r.out;
  EXPECT_FALSE(has(r.out, "differs"));
  EXPECT_TRUE(has(r.out, "stored snapshot: identical"));

  const auto j = run({"metrics", "--transcript", fixture("diagnosis_transcript.jsonl").string(), "--json"});
  ASSERT_EQ(j.code, cli::kOk);
  std::istringstream in(j.out);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(records::Json::parse(line).at("record"), "MetricSnapshot");
}

TEST(Cli, DiagnosisFixtureRegeneratesByteForByte) {
  testing_support::TempDir dir;
  const auto r = run({"debate", "--config", fixture("diagnosis_config.json").string(), "--store", dir.path().string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(has(r.out, "concluded: max_rounds"));
  EXPECT_EQ(records::read_file(dir.path() / "diagnosis-replay" / "events.log"),
            records::read_file(fixture("diagnosis_transcript.jsonl")));
}

TEST(Cli, DebateWithCommandsFileAndReplay) {
  testing_support::TempDir dir;
  const auto commands = dir.path() / "commands.jsonl";
  std::ofstream(commands) << R"({"kind":"set_contentiousness","payload":{"value":0.3}})" << "\n"
                          << R"({"kind":"end_session"})" << "\n";
  const auto store = (dir.path() / "store").string();
  const auto r = run({"debate", "--config", sample("convergent_pair.json").string(), "--mode", "human",
                      "--store", store, "--commands", commands.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(has(r.out, "concluded: moderator_ended")) << r.out;

  const auto replay = run({"replay", "--session", "convergent-pair", "--store", store});
  ASSERT_EQ(replay.code, cli::kOk) << replay.err;
  EXPECT_TRUE(has(replay.out, "[Round 1] explorer"));
  EXPECT_EQ(run({"replay", "--session", "nope", "--store", store}).code, cli::kUsage);
}

TEST(Cli, RecomputedSnapshotsMatchStoredOnes) {
  const auto t = records::parse_transcript(records::read_file(fixture("diagnosis_transcript.jsonl")));
  const auto stored = t.metric_snapshots();
  const auto again = cli::recompute_snapshots(t);
  ASSERT_EQ(again.size(), stored.size());
  for (std::size_t i = 0; i < stored.size(); ++i) {
    EXPECT_EQ(records::to_json(records::canonical(again[i])).dump(), records::to_json(stored[i]).dump());
  }
}
