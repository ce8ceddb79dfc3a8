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

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dialectic/protocol.hpp"

namespace dialectic::conditioning {

/// Text with `{name}` placeholders. Substituted values are never rescanned,
/// so agent text containing braces passes through untouched.
struct PromptTemplate {
  std::string template_id;
  std::string body;
  std::vector<std::string> required_placeholders;

  /// Throws kTemplate when a required placeholder is unbound or the body
  /// references a placeholder that has no value.
  std::string render(const std::map<std::string, std::string>& values) const;
};

const PromptTemplate& debater_template();

/// Instruction for what a debater does in a phase. Throws kValidation for
/// Concluded.
std::string_view phase_task(Phase phase);

/// "0.9", "0.62", "0.0": at most three decimals, trailing zeros dropped.
std::string format_contentiousness(double value);

/// System prompt for a debater: topic, stance, contentiousness value and its
/// feature row, phase task, and the accumulated debate context.
std::string render_debater_prompt(const Stance& stance, const ContentiousnessLevel& level,
                                  Phase phase, std::string_view context_digest,
                                  std::string_view topic = {});

/// Asks for exactly `k` ranked predictions in the fenced block grammar.
/// Throws kValidation when k < 1.
std::string render_elicitation_prompt(const Stance& stance, int k);

/// Reprompt used once when a reply carried no parseable prediction block.
std::string render_prediction_reprompt(int k, std::string_view parse_error);

struct ContextDigest {
  std::string text;
  int omitted_turns = 0;
};

/// Concatenates every debater and moderator turn in order. With a positive
/// `token_budget` (whitespace-separated words), the oldest turns are dropped
/// first until the rest fits.
ContextDigest build_context_digest(const std::vector<Turn>& turns, int token_budget = 0);

/// Rough token count: whitespace-separated words.
int approximate_tokens(std::string_view text);

}  // namespace dialectic::conditioning
