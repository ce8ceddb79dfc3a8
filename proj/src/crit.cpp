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

#include "dialectic/crit.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

#include "dialectic/error.hpp"

namespace dialectic {

namespace {

constexpr std::array<std::pair<std::string_view, EvidenceType>, 4> kEvidence = {{
    {"theory", EvidenceType::kTheory},
    {"opinion", EvidenceType::kOpinion},
    {"statistics", EvidenceType::kStatistics},
    {"claim_from_other_source", EvidenceType::kClaimFromOtherSource},
}};

}  // namespace

std::string_view to_string(EvidenceType t) {
  for (const auto& [name, v] : kEvidence) {
    if (v == t) return name;
  }
  return "opinion";
}

EvidenceType parse_evidence_type(std::string_view s) {
  std::string key;
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!key.empty() && key.back() != '_') {
      key += '_';
    }
  }
  while (!key.empty() && key.back() == '_') key.pop_back();
  if (key == "a" || key == "theory") return EvidenceType::kTheory;
  if (key == "b" || key == "opinion") return EvidenceType::kOpinion;
  if (key == "c" || key == "statistics" || key == "statistic") return EvidenceType::kStatistics;
  if (key == "d" || key.rfind("claim", 0) == 0) return EvidenceType::kClaimFromOtherSource;
  throw Error(ErrorCode::kValidation, "unknown evidence type: '" + std::string(s) + "'");
}

double aggregate_gamma(const std::vector<ScoredReason>& reasons,
                       const std::vector<ScoredReason>& rivals) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* set : {&reasons, &rivals}) {
    for (const auto& r : *set) {
      if (!r.retained) continue;
      sum += r.weight();
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace crit {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_reason(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!out.empty() && std::string_view(".;:!,").find(out.back()) != std::string_view::npos) {
    out.pop_back();
  }
  return out;
}

std::vector<std::string> dedupe(std::vector<std::string> items) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (auto& item : items) {
    if (seen.insert(normalize_reason(item)).second) out.push_back(std::move(item));
  }
  return out;
}

bool is_none(std::string_view reply) {
  auto t = lower(trim(reply));
  while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
  return t.empty() || t == "none" || t == "no reasons" || t == "n/a";
}

// Strips "1.", "2)", "-", "*" list markers; returns nullopt if absent.
std::optional<std::string_view> strip_marker(std::string_view line) {
  line = trim(line);
  if (line.empty()) return std::nullopt;
  if (line.front() == '-' || line.front() == '*') return trim(line.substr(1));
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
    return trim(line.substr(i + 1));
  }
  return std::nullopt;
}

std::vector<double> all_numbers(std::string_view s) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      double v = 0;
      const auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v,
                                             std::chars_format::fixed);
      if (ec == std::errc()) {
        out.push_back(v);
        i = static_cast<std::size_t>(ptr - s.data());
        continue;
      }
    }
    ++i;
  }
  return out;
}

// First number appearing within a short window after any of the labels.
std::optional<double> labeled_number(std::string_view text,
                                     std::initializer_list<std::string_view> labels) {
  const auto low = lower(text);
  constexpr std::size_t kWindow = 32;
  std::optional<std::pair<std::size_t, double>> best;
  for (auto label : labels) {
    const auto key = lower(label);
    std::size_t pos = low.find(key);
    while (pos != std::string::npos) {
      std::size_t i = pos + key.size();
      const std::size_t end = std::min(low.size(), i + kWindow);
      for (; i < end && low[i] != '\n'; ++i) {
        if (std::isdigit(static_cast<unsigned char>(low[i]))) {
          double v = 0;
          const auto [ptr, ec] = std::from_chars(low.data() + i, low.data() + low.size(), v,
                                                 std::chars_format::fixed);
          if (ec == std::errc()) {
            if (!best || pos < best->first) best = std::make_pair(pos, v);
          }
          break;
        }
      }
      if (best && best->first == pos) break;
      pos = low.find(key, pos + 1);
    }
  }
  if (!best) return std::nullopt;
  return best->second;
}

std::optional<EvidenceType> labeled_evidence(std::string_view text) {
  const auto low = lower(text);
  const auto pos = low.find("evidence");
  if (pos == std::string::npos) return std::nullopt;
  auto rest = std::string_view(low).substr(pos + 8);
  const auto nl = rest.find('\n');
  rest = rest.substr(0, nl);
  while (!rest.empty() && (rest.front() == ':' || rest.front() == ' ' || rest.front() == '=' ||
                           rest.front() == '\t')) {
    rest.remove_prefix(1);
  }
  rest = trim(rest);
  if (rest.empty()) return std::nullopt;
  // "D) claim from another source" or just the name.
  if (rest.size() >= 2 && rest[1] == ')') rest = rest.substr(0, 1);
  try {
    return parse_evidence_type(rest);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double clamp_score(double v, std::string_view what, std::vector<std::string>* notices) {
  if (v < 1.0 || v > 10.0) {
    const double c = std::clamp(v, 1.0, 10.0);
    if (notices) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%.*s score %g out of range; clamped to %g",
                    static_cast<int>(what.size()), what.data(), v, c);
      notices->push_back(buf);
    }
    return c;
  }
  return v;
}

std::string ask(gateway::ChatAgent& judge, const std::vector<gateway::ChatMessage>& history) {
  try {
    return judge.complete(std::string(kJudgeSystemPrompt), history).reply;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kEvaluation, "judge '" + judge.id() + "' failed: " + e.what());
  }
}

std::string ask(gateway::ChatAgent& judge, const std::string& prompt) {
  return ask(judge, {{"user", prompt}});
}

// Asks, parses, and on failure reprompts once.
template <typename Parse>
auto ask_parsed(gateway::ChatAgent& judge, const std::string& prompt, std::string_view format,
                Parse parse) -> decltype(parse(std::string_view{})) {
  std::vector<gateway::ChatMessage> history{{"user", prompt}};
  auto reply = ask(judge, history);
  if (auto v = parse(reply)) return v;
  history.push_back({"assistant", reply});
  history.push_back({"user", "Your reply could not be parsed. Reply again using exactly this "
                             "format:\n" +
                                 std::string(format)});
  reply = ask(judge, history);
  if (auto v = parse(reply)) return v;
  throw Error(ErrorCode::kEvaluation,
              "judge '" + judge.id() + "' gave an unparseable reply twice: " + reply.substr(0, 200));
}

std::string document_block(std::string_view document) {
  return "<document>\n" + std::string(document) + "\n</document>\n";
}

constexpr std::string_view kValidationFormat =
    "Validity: <1-10>\nCredibility: <1-10>\nEvidence: "
    "<theory|opinion|statistics|claim_from_other_source>";

}  // namespace

std::string_view document_in_prompt(std::string_view prompt) {
  const auto open = prompt.find("<document>\n");
  const auto close = prompt.rfind("\n</document>");
  if (open == std::string_view::npos || close == std::string_view::npos || close < open + 11) {
    return {};
  }
  return prompt.substr(open + 11, close - open - 11);
}

std::vector<std::string> parse_list_reply(std::string_view reply) {
  if (is_none(reply)) return {};
  std::vector<std::string> marked;
  std::vector<std::string> plain;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    auto nl = reply.find('\n', pos);
    if (nl == std::string_view::npos) nl = reply.size();
    const auto line = trim(reply.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    if (auto item = strip_marker(line)) {
      if (!item->empty()) marked.emplace_back(*item);
    } else if (line.back() != ':') {
      plain.emplace_back(line);
    }
  }
  return dedupe(marked.empty() ? std::move(plain) : std::move(marked));
}

std::optional<ScoredReason> parse_validation_reply(std::string_view reply) {
  const auto gamma = labeled_number(reply, {"validity", "\xCE\xB3", "gamma"});
  const auto theta = labeled_number(reply, {"credibility", "\xCE\xB8", "theta"});
  if (!gamma || !theta) return std::nullopt;
  ScoredReason r;
  r.gamma = *gamma;
  r.theta = *theta;
  r.evidence_type = labeled_evidence(reply).value_or(EvidenceType::kOpinion);
  return r;
}

std::optional<std::array<double, 4>> parse_rubric_reply(
    std::string_view reply, const std::array<std::string_view, 4>& labels) {
  std::array<double, 4> out{};
  bool all = true;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto v = labeled_number(reply, {labels[i]});
    if (!v) {
      all = false;
      break;
    }
    out[i] = *v;
  }
  if (all) return out;
  const auto nums = all_numbers(reply);
  if (nums.size() == 4) {
    std::copy(nums.begin(), nums.end(), out.begin());
    return out;
  }
  return std::nullopt;
}

std::string extract_claim(std::string_view document, gateway::ChatAgent& judge) {
  if (trim(document).empty()) throw Error(ErrorCode::kValidation, "document is empty");
  const auto prompt = std::string(kClaimTask) +
                      "\nWhat is the conclusion in the document below? Reply with the "
                      "conclusion as a single statement, or NONE if it draws none.\n" +
                      document_block(document);
  const auto reply = ask(judge, prompt);
  auto claim = std::string(trim(reply));
  if (claim.rfind("Conclusion:", 0) == 0) claim = std::string(trim(claim.substr(11)));
  if (is_none(claim)) throw Error(ErrorCode::kNoClaim, "judge found no claim in the document");
  return claim;
}

std::vector<std::string> extract_reasons(std::string_view document, std::string_view claim,
                                         gateway::ChatAgent& judge) {
  if (trim(claim).empty()) throw Error(ErrorCode::kValidation, "claim must be extracted first");
  const auto prompt = std::string(kReasonsTask) + "\nThe document below concludes: \"" +
                      std::string(claim) +
                      "\". What are the supporting reasons it gives for this conclusion? List "
                      "one reason per line, numbered, or reply NONE.\n" +
                      document_block(document);
  return parse_list_reply(ask(judge, prompt));
}

std::vector<std::string> extract_rivals(std::string_view claim,
                                        const std::vector<std::string>& reasons,
                                        gateway::ChatAgent& judge) {
  std::string prompt = std::string(kRivalsTask) + "\nClaim: " + std::string(claim) +
                       "\nSupporting reasons:\n";
  for (std::size_t i = 0; i < reasons.size(); ++i) {
    prompt += std::to_string(i + 1) + ". " + reasons[i] + "\n";
  }
  prompt += "Give counter-reasons that cut against the claim, opening with one aimed at the "
            "least convincing reason above. List one per line, numbered, or reply NONE.\n";
  return parse_list_reply(ask(judge, prompt));
}

ScoredReason validate_reason(std::string_view reason, std::string_view claim,
                             gateway::ChatAgent& judge, std::vector<std::string>* notices) {
  if (trim(reason).empty() || trim(claim).empty()) {
    throw Error(ErrorCode::kValidation, "reason and claim must be non-empty");
  }
  const auto prompt = std::string(kValidateTask) + "\nClaim: " + std::string(claim) +
                      "\nReason: " + std::string(reason) +
                      "\nRate the validity of the argument \"" + std::string(reason) +
                      ", therefore " + std::string(claim) +
                      "\" on a 1 to 10 scale, score how trustworthy the sources behind it are on the "
                      "same scale, and name the kind of evidence it rests on (statistics, "
                      "theory, opinion, or a claim taken from another source).\nReply in exactly this format:\n" +
                      std::string(kValidationFormat);
  auto scored = ask_parsed(judge, prompt, kValidationFormat, parse_validation_reply);
  scored->text = std::string(reason);
  scored->gamma = clamp_score(scored->gamma, "validity", notices);
  scored->theta = clamp_score(scored->theta, "credibility", notices);
  return *scored;
}

std::pair<double, double> child_scores(const CritReport& child) {
  double theta_sum = 0.0;
  std::size_t n = 0;
  for (const auto* set : {&child.reasons, &child.rivals}) {
    for (const auto& r : *set) {
      if (!r.retained) continue;
      theta_sum += r.theta;
      ++n;
    }
  }
  const double theta = n == 0 ? 1.0 : theta_sum / static_cast<double>(n);
  return {std::clamp(10.0 * child.gamma_aggregate, 1.0, 10.0), std::clamp(theta, 1.0, 10.0)};
}

void finalize_scores(CritReport& report) {
  constexpr double kEps = 1e-12;
  for (auto* set : {&report.reasons, &report.rivals}) {
    for (auto& r : *set) r.retained = r.weight() >= report.tau - kEps;
  }
  report.gamma_aggregate = recompute_gamma(report);
  report.vacuous = std::none_of(report.reasons.begin(), report.reasons.end(),
                                [](const ScoredReason& r) { return r.retained; }) &&
                   std::none_of(report.rivals.begin(), report.rivals.end(),
                                [](const ScoredReason& r) { return r.retained; });
}

CritReport crit_with_judge(std::string_view document, gateway::ChatAgent& judge,
                           const CritOptions& options, const SourceResolver& fetch, int depth) {
  if (options.max_depth < 0) throw Error(ErrorCode::kValidation, "max_depth must be >= 0");
  CritReport report;
  report.depth = depth;
  report.tau = options.tau;

  // Identify the claim and its supporting reasons.
  report.claim = extract_claim(document, judge);
  const auto reasons = extract_reasons(document, report.claim, judge);

  // Validate each reason; reasons citing another source recurse into it.
  for (std::size_t i = 0; i < reasons.size(); ++i) {
    auto scored = validate_reason(reasons[i], report.claim, judge, &report.notices);
    if (scored.evidence_type == EvidenceType::kClaimFromOtherSource) {
      const auto id = reason_id(i);
      if (depth >= options.max_depth) {
        report.notices.push_back("recursion budget exhausted at depth " + std::to_string(depth) +
                                 "; " + id + " scored directly");
      } else if (!fetch) {
        report.notices.push_back("no source resolver; " + id + " scored directly");
      } else if (auto source = fetch(reasons[i])) {
        try {
          auto child = crit_with_judge(*source, judge, options, fetch, depth + 1);
          std::tie(scored.gamma, scored.theta) = child_scores(child);
          report.children.emplace(id, std::move(child));
        } catch (const Error& e) {
          report.notices.push_back("sub-evaluation of " + id + " failed (" + e.what() +
                                   "); scored directly");
        }
      } else {
        report.notices.push_back("source for " + id + " not found; scored directly");
      }
    }
    report.reasons.push_back(std::move(scored));
  }

  // Rival reasons, scored the same way but never recursed into.
  for (const auto& rival : extract_rivals(report.claim, reasons, judge)) {
    report.rivals.push_back(validate_reason(rival, report.claim, judge, &report.notices));
  }

  finalize_scores(report);
  if (report.vacuous) report.notices.push_back("all reasons dismissed; score is vacuous");

  if (options.with_justification) {
    std::string prompt = std::string(kAnalysisTask) + "\nClaim: " + report.claim + "\n";
    for (const auto* set : {&report.reasons, &report.rivals}) {
      const bool rivals = set == &report.rivals;
      for (const auto& r : *set) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " (validity %g, credibility %g, %s)", r.gamma, r.theta,
                      r.retained ? "retained" : "dismissed");
        prompt += rivals ? "Rival: " : "Reason: ";
        prompt += r.text + buf + "\n";
      }
    }
    prompt += "Aggregate score: " + format_percent(report.gamma_aggregate) +
              "\nExplain the score in a short analysis, then note whether the same "
              "judgement would hold for related claims.\n";
    report.justification = std::string(trim(ask(judge, prompt)));
  }
  return report;
}

CritReport crit(std::string_view document, gateway::JudgePool& judges, const CritOptions& options,
                const SourceResolver& fetch) {
  return crit_with_judge(document, judges.round_robin_next(), options, fetch, 0);
}

std::string format_percent(double gamma) {
  return std::to_string(static_cast<int>(std::lround(gamma * 100.0))) + "%";
}

namespace {

template <typename Scores>
Scores to_scores(const std::array<double, 4>& v) {
  return Scores{v[0], v[1], v[2], v[3]};
}

std::array<double, 4> rubric(std::string_view task, const std::string& body,
                             const std::array<std::string_view, 4>& labels,
                             gateway::ChatAgent& judge, std::vector<std::string>* notices) {
  std::string format;
  for (auto l : labels) format += std::string(l) + ": <1-10>\n";
  const auto prompt = std::string(task) + "\n" + body + "Reply in exactly this format:\n" + format;
  auto values = ask_parsed(judge, prompt, format,
                           [&labels](std::string_view r) { return parse_rubric_reply(r, labels); });
  for (std::size_t i = 0; i < 4; ++i) (*values)[i] = clamp_score((*values)[i], labels[i], notices);
  return *values;
}

}  // namespace

QuestionScores rate_question(std::string_view question, std::string_view context,
                             gateway::ChatAgent& judge, std::vector<std::string>* notices) {
  if (trim(question).empty()) throw Error(ErrorCode::kValidation, "question is empty");
  const std::string body =
      "Context: " + std::string(context) + "\nQuestion: " + std::string(question) +
      "\nScore the question from 1 to 10 under each heading. Relevance: how closely it stays "
      "on the subject. Depth: how far below the surface it reaches. Clarity: how hard it is "
      "to misread. Novelty: how much it adds that the context lacks.\n";
  return to_scores<QuestionScores>(
      rubric(kRateQuestionTask, body, {"Relevance", "Depth", "Clarity", "Novelty"}, judge, notices));
}

AnswerScores rate_answer(std::string_view answer, std::string_view question,
                         gateway::ChatAgent& judge, std::vector<std::string>* notices) {
  if (trim(answer).empty()) throw Error(ErrorCode::kValidation, "answer is empty");
  const std::string body =
      "Question: " + std::string(question) + "\nAnswer: " + std::string(answer) +
      "\nScore the answer from 1 to 10 under each heading. Completeness: how much of the "
      "question it covers. Accuracy: whether its facts hold. Reasonableness: whether the "
      "argument hangs together. Insightfulness: what it adds beyond the obvious.\n";
  return to_scores<AnswerScores>(rubric(kRateAnswerTask, body,
                                        {"Completeness", "Accuracy", "Reasonableness",
                                         "Insightfulness"},
                                        judge, notices));
}

}  // namespace crit
}  // namespace dialectic
