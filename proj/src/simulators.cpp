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

#include "dialectic/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "dialectic/crit.hpp"
#include "dialectic/error.hpp"

namespace dialectic::simulators {

PredictionSet predictor_distribution(const PredictorSimSpec& spec, double temperature,
                                     std::size_t call_index) {
  const std::size_t n = spec.labels.size();
  if (n == 0 || spec.start.size() != n || spec.target.size() != n) {
    throw Error(ErrorCode::kValidation, "predictor simulator needs labels, start and target of equal size");
  }
  std::vector<double> base(n);
  if (spec.oscillate) {
    base = call_index % 2 == 0 ? spec.start : spec.target;
  } else {
    const double decay = std::pow(spec.rate, static_cast<double>(call_index));
    for (std::size_t i = 0; i < n; ++i) {
      base[i] = spec.target[i] + (spec.start[i] - spec.target[i]) * decay;
    }
  }
  if (spec.noise > 0.0) {
    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + call_index);
    std::normal_distribution<double> normal(0.0, spec.noise);
    for (auto& b : base) b *= std::exp(normal(rng));
  }
  std::vector<double> probs(n, 0.0);
  if (temperature < 1e-6) {
    probs[static_cast<std::size_t>(std::max_element(base.begin(), base.end()) - base.begin())] = 1.0;
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      probs[i] = base[i] > 0.0 ? std::pow(base[i], 1.0 / temperature) : 0.0;
      total += probs[i];
    }
    for (auto& p : probs) p /= total;
  }
  return PredictionSet::make(spec.labels, probs);
}

gateway::ReplyGenerator make_predictor(PredictorSimSpec spec, double temperature,
                                       std::string agent_id) {
  return [spec = std::move(spec), temperature, agent_id = std::move(agent_id)](
             const std::string&, const std::vector<gateway::ChatMessage>&, std::size_t call) {
    const auto dist = predictor_distribution(spec, temperature, call);
    std::string prose = spec.prose.empty() ? "Assessment" : spec.prose;
    prose += " (" + agent_id + ", response " + std::to_string(call + 1) + ").\n";
    return prose + format_prediction_block(dist, "simulated estimate");
  };
}

namespace {

std::string first_line(std::string_view s) {
  const auto nl = s.find('\n');
  return std::string(s.substr(0, nl));
}

std::vector<std::string> sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') c = ' ';
    cur += c;
    if (c == '.' || c == '!' || c == '?') {
      const auto b = cur.find_first_not_of(' ');
      if (b != std::string::npos) out.push_back(cur.substr(b));
      cur.clear();
    }
  }
  const auto b = cur.find_first_not_of(' ');
  if (b != std::string::npos) out.push_back(cur.substr(b));
  return out;
}

std::string field(std::string_view prompt, std::string_view name) {
  const auto pos = prompt.find(name);
  if (pos == std::string_view::npos) return {};
  return first_line(prompt.substr(pos + name.size()));
}

std::string score_reply(double validity, double credibility, std::string_view evidence) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "Validity: %g/10\nCredibility: %g/10\nEvidence: %.*s", validity,
                credibility, static_cast<int>(evidence.size()), evidence.data());
  return buf;
}

}  // namespace

gateway::ReplyGenerator make_judge(JudgeSimSpec spec) {
  return [spec = std::move(spec)](const std::string&,
                                  const std::vector<gateway::ChatMessage>& history,
                                  std::size_t) -> std::string {
    const std::string& prompt = history.front().content;
    const auto task = first_line(prompt);
    if (task == crit::kClaimTask) {
      const auto s = sentences(crit::document_in_prompt(prompt));
      return s.empty() ? "NONE" : s.front();
    }
    if (task == crit::kReasonsTask) {
      const auto s = sentences(crit::document_in_prompt(prompt));
      if (s.size() < 2) return "NONE";
      std::string out;
      for (std::size_t i = 1; i < s.size() && i <= 3; ++i) {
        out += std::to_string(i) + ". " + s[i] + "\n";
      }
      return out;
    }
    if (task == crit::kValidateTask) {
      const auto reason = field(prompt, "\nReason: ");
      const bool rival =
          std::find(spec.rivals.begin(), spec.rivals.end(), reason) != spec.rivals.end();
      return rival ? score_reply(spec.rival_validity, spec.rival_credibility, "opinion")
                   : score_reply(spec.validity, spec.credibility, spec.evidence);
    }
    if (task == crit::kRivalsTask) {
      if (spec.rivals.empty()) return "NONE";
      std::string out;
      for (std::size_t i = 0; i < spec.rivals.size(); ++i) {
        out += std::to_string(i + 1) + ". " + spec.rivals[i] + "\n";
      }
      return out;
    }
    if (task == crit::kAnalysisTask) {
      return "The score follows from the retained reasons and their credibility.";
    }
    if (task == crit::kRateQuestionTask || task == crit::kRateAnswerTask) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g/%g/%g/%g", spec.validity, spec.validity,
                    spec.credibility, spec.credibility);
      return buf;
    }
    return "NONE";
  };
}

}  // namespace dialectic::simulators
