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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialectic/crit_report.hpp"
#include "dialectic/gateway.hpp"

// Recursive critical-reading evaluation. A judge agent extracts a document's
// claim and reasons, scores each reason for validity (gamma) and source
// credibility (theta), proposes and scores rival reasons, and the report
// aggregates the retained scores into one reasonableness score.

namespace dialectic::crit {

// Every judge prompt starts with one of these lines; scripted judges key on
// them.
inline constexpr std::string_view kClaimTask = "TASK: IDENTIFY CLAIM";
inline constexpr std::string_view kReasonsTask = "TASK: LIST SUPPORTING REASONS";
inline constexpr std::string_view kValidateTask = "TASK: RATE ARGUMENT";
inline constexpr std::string_view kRivalsTask = "TASK: LIST RIVAL REASONS";
inline constexpr std::string_view kAnalysisTask = "TASK: ANALYZE";
inline constexpr std::string_view kRateQuestionTask = "TASK: RATE QUESTION";
inline constexpr std::string_view kRateAnswerTask = "TASK: RATE ANSWER";

inline constexpr std::string_view kJudgeSystemPrompt =
    "You are an impartial judge who evaluates the reasonableness of arguments. Follow the "
    "requested reply format exactly.";

struct CritOptions {
  int max_depth = 1;
  /// Reasons whose (gamma/10)(theta/10) falls below tau are dismissed.
  double tau = 0.5;
  /// Ask the judge for the closing analysis (one extra call).
  bool with_justification = true;
};

/// Looks up the source document behind a reason that cites another source.
using SourceResolver = std::function<std::optional<std::string>(std::string_view reason)>;

/// Throws kValidation on an empty document, kNoClaim when the judge finds
/// none, kEvaluation when the judge fails.
std::string extract_claim(std::string_view document, gateway::ChatAgent& judge);

/// Deduplicated by normalized text (case, whitespace, trailing punctuation).
std::vector<std::string> extract_reasons(std::string_view document, std::string_view claim,
                                         gateway::ChatAgent& judge);

std::vector<std::string> extract_rivals(std::string_view claim,
                                        const std::vector<std::string>& reasons,
                                        gateway::ChatAgent& judge);

/// Scores clamped into [1, 10] (a notice is appended for each clamp). One
/// reprompt on an unparseable reply, then kEvaluation.
ScoredReason validate_reason(std::string_view reason, std::string_view claim,
                             gateway::ChatAgent& judge,
                             std::vector<std::string>* notices = nullptr);

/// Scores a resolved sub-document contributes to its parent reason:
/// (10 * child gamma, mean child theta over retained reasons), clamped to
/// [1, 10].
std::pair<double, double> child_scores(const CritReport& child);

/// Runs the full evaluation with the pool's next judge.
CritReport crit(std::string_view document, gateway::JudgePool& judges,
                const CritOptions& options = {}, const SourceResolver& fetch = {});

/// Same, with an explicit judge and starting depth.
CritReport crit_with_judge(std::string_view document, gateway::ChatAgent& judge,
                           const CritOptions& options = {}, const SourceResolver& fetch = {},
                           int depth = 0);

/// Marks `retained` against tau and recomputes the aggregate and vacuous
/// flag.
void finalize_scores(CritReport& report);

/// "75%".
std::string format_percent(double gamma);

struct QuestionScores {
  double relevance = 0;
  double depth = 0;
  double clarity = 0;
  double novelty = 0;
};

struct AnswerScores {
  double completeness = 0;
  double accuracy = 0;
  double reasonableness = 0;
  double insightfulness = 0;
};

QuestionScores rate_question(std::string_view question, std::string_view context,
                             gateway::ChatAgent& judge, std::vector<std::string>* notices = nullptr);

AnswerScores rate_answer(std::string_view answer, std::string_view question,
                         gateway::ChatAgent& judge, std::vector<std::string>* notices = nullptr);

// Parsers, exposed for tests. They return nullopt when the text cannot be
// read.
std::vector<std::string> parse_list_reply(std::string_view reply);
std::optional<ScoredReason> parse_validation_reply(std::string_view reply);
std::optional<std::array<double, 4>> parse_rubric_reply(std::string_view reply,
                                                        const std::array<std::string_view, 4>& labels);

/// Extracts the text between <document> and </document> (used by the
/// simulated judge).
std::string_view document_in_prompt(std::string_view prompt);

}  // namespace dialectic::crit
