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

#include "dialectic/conditioning.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <deque>
#include <set>

#include "dialectic/error.hpp"

namespace dialectic::conditioning {

namespace {

constexpr std::string_view kDebaterBody =
    "You are a debater in a structured multi-agent debate.\n"
    "Topic: {topic}\n"
    "Your position: {position}\n"
    "\n"
    "Contentiousness: {contentiousness} on a scale from 0 (fully cooperative) to 1 "
    "(maximally adversarial).\n"
    "At this level, argue with the following linguistic behavior:\n"
    "{contentiousness_features}\n"
    "\n"
    "Current phase: {phase}\n"
    "Task: {task}\n"
    "\n"
    "Debate so far:\n"
    "{context_digest}\n";

constexpr std::string_view kNoContext = "(no prior turns; you open the debate)";

bool is_placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

constexpr std::array<std::string_view, 11> kNumberWords = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"};

std::string count_word(int k) {
  if (k >= 0 && k < static_cast<int>(kNumberWords.size())) return std::string(kNumberWords[k]);
  return std::to_string(k);
}

}  // namespace

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  for (const auto& name : required_placeholders) {
    if (!values.count(name)) {
      throw Error(ErrorCode::kTemplate,
                  "template '" + template_id + "': placeholder {" + name + "} is unbound");
    }
  }
  std::string out;
  out.reserve(body.size() * 2);
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_placeholder_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}' && j > i + 1) {
        const auto name = body.substr(i + 1, j - i - 1);
        const auto it = values.find(name);
        if (it == values.end()) {
          throw Error(ErrorCode::kTemplate,
                      "template '" + template_id + "': unresolved placeholder {" + name + "}");
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += body[i++];
  }
  return out;
}

const PromptTemplate& debater_template() {
  static const PromptTemplate kTemplate{
      "debater.v1",
      std::string(kDebaterBody),
      {"topic", "position", "contentiousness", "contentiousness_features", "phase", "task",
       "context_digest"}};
  return kTemplate;
}

std::string_view phase_task(Phase phase) {
  switch (phase) {
    case Phase::kHighContention:
      return "Attack the weakest points of the opposing arguments and propose the strongest "
             "case for your own position.";
    case Phase::kModerateContention:
      return "Critique the latest opposing arguments point by point, concede what is valid, "
             "and revise your own arguments and predictions accordingly.";
    case Phase::kConsensus:
      return "Synthesize a joint recommendation with the other debaters: write joint remarks "
             "that state the points of agreement, the remaining open questions, and the "
             "recommended course of action.";
    case Phase::kConcluded:
      break;
  }
  throw Error(ErrorCode::kValidation, "no debater task for a concluded session");
}

std::string format_contentiousness(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  std::string s = buf;
  while (s.size() > 3 && s.back() == '0') s.pop_back();
  return s;
}

std::string render_debater_prompt(const Stance& stance, const ContentiousnessLevel& level,
                                  Phase phase, std::string_view context_digest,
                                  std::string_view topic) {
  stance.validate();
  std::string features;
  features += "- Tone: ";
  features += level.features.tone;
  features += "\n- Emphasis: ";
  features += level.features.emphasis;
  features += "\n- Language: ";
  features += level.features.language;
  return debater_template().render({
      {"topic", std::string(topic.empty() ? std::string_view(stance.topic_id) : topic)},
      {"position", stance.position},
      {"contentiousness", format_contentiousness(level.raw)},
      {"contentiousness_features", features},
      {"phase", std::string(to_string(phase))},
      {"task", std::string(phase_task(phase))},
      {"context_digest",
       context_digest.empty() ? std::string(kNoContext) : std::string(context_digest)},
  });
}

std::string render_elicitation_prompt(const Stance& stance, int k) {
  if (k < 1) throw Error(ErrorCode::kValidation, "number of predictions must be >= 1");
  std::string out;
  if (k == 1) {
    out += "Give a single prediction with a short justification and a percentage weight.\n";
  } else {
    out += "Give your " + count_word(k) + " top predictions, most likely first, each with a "
           "short justification and a percentage weight.\n";
  }
  if (stance.label_space && !stance.label_space->empty()) {
    out += "Choose labels from: ";
    for (std::size_t i = 0; i < stance.label_space->size(); ++i) {
      if (i) out += ", ";
      out += (*stance.label_space)[i];
    }
    out += ".\n";
  }
  out += "Write your reasoning in prose, then end your reply with exactly one block of " +
         std::to_string(k) + (k == 1 ? " line" : " lines") + " in this format:\n"
         "===PREDICTIONS===\n"
         "<label> : <number>% : <one-line justification>\n"
         "===END===\n"
         "Percentages are non-negative decimals; any mass you leave unassigned is recorded "
         "as \"other\".\n";
  return out;
}

std::string render_prediction_reprompt(int k, std::string_view parse_error) {
  return "Your reply did not contain a valid prediction block (" + std::string(parse_error) +
         "). Reply again and end with exactly one block of " + std::to_string(k) +
         " prediction line(s):\n===PREDICTIONS===\n<label> : <number>% : <justification>\n"
         "===END===\n";
}

int approximate_tokens(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

namespace {

std::string render_entry(const Turn& t) {
  std::string s = "[Round " + std::to_string(t.round_index + 1) + "] ";
  s += t.role == Role::kModerator ? "Moderator" : t.agent_id;
  s += ":\n";
  s += t.content;
  s += "\n\n";
  return s;
}

}  // namespace

ContextDigest build_context_digest(const std::vector<Turn>& turns, int token_budget) {
  std::deque<std::string> entries;
  std::deque<int> costs;
  int total = 0;
  for (const auto& t : turns) {
    if (t.role == Role::kJudge) continue;
    entries.push_back(render_entry(t));
    costs.push_back(approximate_tokens(entries.back()));
    total += costs.back();
  }
  ContextDigest d;
  if (token_budget > 0) {
    while (!entries.empty() && total > token_budget) {
      total -= costs.front();
      entries.pop_front();
      costs.pop_front();
      ++d.omitted_turns;
    }
  }
  if (d.omitted_turns > 0) {
    d.text = "(" + std::to_string(d.omitted_turns) + " earliest turns omitted)\n\n";
  }
  for (const auto& e : entries) d.text += e;
  return d;
}

}  // namespace dialectic::conditioning
