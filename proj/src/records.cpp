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

#include "dialectic/records.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <cmath>
#include <sstream>

namespace dialectic::records {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

const Json& member(const Json& j, const char* key, ErrorCode code) {
  if (!j.is_object()) fail(code, std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) fail(code, std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get(const Json& j, const char* key, ErrorCode code = ErrorCode::kParse) {
  const Json& v = member(j, key, code);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(code, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, ErrorCode code = ErrorCode::kParse) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key, code);
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kValidation, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) fail(ErrorCode::kValidation, "unknown field '" + key + "' in " + where);
  }
}

// Enum parsers throw kValidation; on the wire that is a parse problem.
template <typename F>
auto parse_enum_field(const Json& j, const char* key, F parse, ErrorCode code = ErrorCode::kParse) {
  const auto text = get<std::string>(j, key, code);
  try {
    return parse(text);
  } catch (const Error& e) {
    fail(code, e.what());
  }
}

Json reason_json(const ScoredReason& r) {
  return Json{{"text", r.text},
              {"gamma", r.gamma},
              {"theta", r.theta},
              {"evidence_type", to_string(r.evidence_type)},
              {"retained", r.retained}};
}

ScoredReason reason_from_json(const Json& j) {
  ScoredReason r;
  r.text = get<std::string>(j, "text");
  r.gamma = get<double>(j, "gamma");
  r.theta = get<double>(j, "theta");
  r.evidence_type = parse_enum_field(j, "evidence_type", parse_evidence_type);
  r.retained = get<bool>(j, "retained");
  return r;
}

Issuer parse_issuer_alias(std::string_view s) {
  if (s == "human") return Issuer::kHumanModerator;
  return parse_issuer(s);
}

std::int64_t ms(std::chrono::milliseconds d) { return d.count(); }

}  // namespace

double round12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

MetricSnapshot canonical(MetricSnapshot s) {
  for (auto& [_, h] : s.per_agent_entropy) h = round12(h);
  s.cross_entropy = round12(s.cross_entropy);
  s.kl_pq = round12(s.kl_pq);
  s.kl_qp = round12(s.kl_qp);
  s.jsd = round12(s.jsd);
  s.wasserstein = round12(s.wasserstein);
  s.nmi = round12(s.nmi);
  return s;
}

std::string dump(const Json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Json to_json(const PredictionSet& p) {
  Json j{{"labels", p.labels()}, {"probs", p.probs()}};
  if (!p.warnings().empty()) j["warnings"] = p.warnings();
  return j;
}

PredictionSet prediction_from_json(const Json& j) {
  PredictionSet p;
  try {
    p = PredictionSet::make(get<std::vector<std::string>>(j, "labels"),
                            get<std::vector<double>>(j, "probs"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) throw;
    fail(ErrorCode::kParse, std::string("invalid prediction set: ") + e.what());
  }
  for (auto& w : get_or<std::vector<std::string>>(j, "warnings", {})) p.add_warning(std::move(w));
  return p;
}

Json to_json(const CritReport& r) {
  Json j;
  j["claim"] = r.claim;
  j["gamma_aggregate"] = r.gamma_aggregate;
  j["tau"] = r.tau;
  j["depth"] = r.depth;
  j["vacuous"] = r.vacuous;
  j["reasons"] = Json::array();
  for (const auto& x : r.reasons) j["reasons"].push_back(reason_json(x));
  j["rivals"] = Json::array();
  for (const auto& x : r.rivals) j["rivals"].push_back(reason_json(x));
  j["children"] = Json::object();
  for (const auto& [id, child] : r.children) j["children"][id] = to_json(child);
  j["justification"] = r.justification;
  j["notices"] = r.notices;
  return j;
}

CritReport crit_report_from_json(const Json& j) {
  CritReport r;
  r.claim = get<std::string>(j, "claim");
  r.gamma_aggregate = get<double>(j, "gamma_aggregate");
  r.tau = get<double>(j, "tau");
  r.depth = get<int>(j, "depth");
  r.vacuous = get<bool>(j, "vacuous");
  for (const auto& x : member(j, "reasons", ErrorCode::kParse)) r.reasons.push_back(reason_from_json(x));
  for (const auto& x : member(j, "rivals", ErrorCode::kParse)) r.rivals.push_back(reason_from_json(x));
  for (const auto& [id, child] : member(j, "children", ErrorCode::kParse).items()) {
    r.children.emplace(id, crit_report_from_json(child));
  }
  r.justification = get<std::string>(j, "justification");
  r.notices = get<std::vector<std::string>>(j, "notices");
  return r;
}

Json to_json(const MetricSnapshot& s0) {
  const MetricSnapshot s = canonical(s0);
  Json j;
  j["round_index"] = s.round_index;
  j["per_agent_entropy"] = Json::object();
  for (const auto& [id, h] : s.per_agent_entropy) j["per_agent_entropy"][id] = h;
  j["cross_entropy"] = s.cross_entropy;
  j["kl_pq"] = s.kl_pq;
  j["kl_qp"] = s.kl_qp;
  j["jsd"] = s.jsd;
  j["wasserstein"] = s.wasserstein;
  j["nmi"] = s.nmi;
  j["distributions"] = Json::array();
  for (const auto& [id, p] : s.distributions) {
    Json d = to_json(p);
    d["agent_id"] = id;
    j["distributions"].push_back(std::move(d));
  }
  return j;
}

MetricSnapshot snapshot_from_json(const Json& j) {
  MetricSnapshot s;
  s.round_index = get<int>(j, "round_index");
  for (const auto& [id, h] : member(j, "per_agent_entropy", ErrorCode::kParse).items()) {
    if (!h.is_number()) fail(ErrorCode::kParse, "per_agent_entropy values must be numbers");
    s.per_agent_entropy[id] = h.get<double>();
  }
  s.cross_entropy = get<double>(j, "cross_entropy");
  s.kl_pq = get<double>(j, "kl_pq");
  s.kl_qp = get<double>(j, "kl_qp");
  s.jsd = get<double>(j, "jsd");
  s.wasserstein = get<double>(j, "wasserstein");
  s.nmi = get<double>(j, "nmi");
  for (const auto& d : member(j, "distributions", ErrorCode::kParse)) {
    s.distributions.emplace_back(get<std::string>(d, "agent_id"), prediction_from_json(d));
  }
  return s;
}

Json to_json(const ModeratorCommand& c) {
  Json payload = Json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SetContentiousness>) {
          payload["value"] = p.value;
        } else if constexpr (std::is_same_v<T, ForcePhase>) {
          payload["target"] = to_string(p.target);
        } else if constexpr (std::is_same_v<T, InjectPrompt>) {
          payload["text"] = p.text;
        }
      },
      c.payload);
  return Json{{"kind", to_string(c.kind())}, {"payload", payload}, {"source", to_string(c.source)}};
}

ModeratorCommand command_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::kParse, "command must be a JSON object");
  ModeratorCommand c;
  const auto kind = parse_enum_field(j, "kind", parse_control_kind, ErrorCode::kValidation);
  const Json empty = Json::object();
  const Json& payload = j.contains("payload") ? j["payload"] : empty;
  if (!payload.is_object()) fail(ErrorCode::kParse, "command payload must be an object");
  switch (kind) {
    case ControlKind::kSetContentiousness:
      c.payload = SetContentiousness{get<double>(payload, "value", ErrorCode::kValidation)};
      break;
    case ControlKind::kForcePhase:
      c.payload = ForcePhase{parse_enum_field(payload, "target", parse_phase, ErrorCode::kValidation)};
      break;
    case ControlKind::kInjectPrompt:
      c.payload = InjectPrompt{get<std::string>(payload, "text", ErrorCode::kValidation)};
      break;
    case ControlKind::kEndSession: c.payload = EndSession{}; break;
    case ControlKind::kRequestCrit: c.payload = RequestCrit{}; break;
  }
  if (j.contains("source")) {
    c.source = parse_enum_field(j, "source", parse_issuer_alias, ErrorCode::kValidation);
  }
  c.validate();
  return c;
}

Json to_json(const SequencedEvent& se) {
  Json j;
  j["seq"] = se.seq;
  j["record"] = record_name(se.event);
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Turn>) {
          j["round_index"] = e.round_index;
          j["agent_id"] = e.agent_id;
          j["role"] = to_string(e.role);
          j["content"] = e.content;
          if (e.prediction) j["prediction"] = to_json(*e.prediction);
          if (e.phase) j["phase"] = to_string(*e.phase);
          if (e.contentiousness) j["contentiousness"] = *e.contentiousness;
          j["context_omitted_turns"] = e.context_omitted_turns;
          j["timestamp_ms"] = e.timestamp_ms;
        } else if constexpr (std::is_same_v<T, MetricSnapshot>) {
          const Json body = to_json(e);
          for (const auto& [k, v] : body.items()) j[k] = v;
        } else if constexpr (std::is_same_v<T, ControlEvent>) {
          j["round_index"] = e.round_index;
          j["kind"] = to_string(e.kind());
          j["payload"] = to_json(e.command)["payload"];
          j["issued_by"] = to_string(e.issued_by());
          j["timestamp_ms"] = e.timestamp_ms;
        } else if constexpr (std::is_same_v<T, PhaseChange>) {
          j["round_index"] = e.round_index;
          j["from"] = to_string(e.from);
          j["to"] = to_string(e.to);
          j["contentiousness"] = e.contentiousness;
          j["cause"] = to_string(e.cause);
          j["timestamp_ms"] = e.timestamp_ms;
        } else if constexpr (std::is_same_v<T, CritRecord>) {
          j["round_index"] = e.round_index;
          j["agent_id"] = e.agent_id;
          j["report"] = to_json(e.report);
          j["timestamp_ms"] = e.timestamp_ms;
        } else if constexpr (std::is_same_v<T, Concluded>) {
          j["round_index"] = e.round_index;
          j["reason"] = to_string(e.reason);
          j["detail"] = e.detail;
          j["timestamp_ms"] = e.timestamp_ms;
        }
      },
      se.event);
  return j;
}

SequencedEvent event_from_json(const Json& j) {
  SequencedEvent se;
  se.seq = get<std::uint64_t>(j, "seq");
  const auto record = get<std::string>(j, "record");
  if (record == "Turn") {
    Turn t;
    t.round_index = get<int>(j, "round_index");
    t.agent_id = get<std::string>(j, "agent_id");
    t.role = parse_enum_field(j, "role", parse_role);
    t.content = get<std::string>(j, "content");
    if (j.contains("prediction")) t.prediction = prediction_from_json(j["prediction"]);
    if (j.contains("phase")) t.phase = parse_enum_field(j, "phase", parse_phase);
    if (j.contains("contentiousness")) t.contentiousness = get<double>(j, "contentiousness");
    t.context_omitted_turns = get<int>(j, "context_omitted_turns");
    t.timestamp_ms = get<std::int64_t>(j, "timestamp_ms");
    se.event = std::move(t);
  } else if (record == "MetricSnapshot") {
    se.event = snapshot_from_json(j);
  } else if (record == "ControlEvent") {
    ControlEvent c;
    c.round_index = get<int>(j, "round_index");
    Json cmd{{"kind", get<std::string>(j, "kind")},
             {"payload", member(j, "payload", ErrorCode::kParse)},
             {"source", get<std::string>(j, "issued_by")}};
    try {
      c.command = command_from_json(cmd);
    } catch (const Error& e) {
      fail(ErrorCode::kParse, std::string("bad control event: ") + e.what());
    }
    c.timestamp_ms = get<std::int64_t>(j, "timestamp_ms");
    se.event = std::move(c);
  } else if (record == "PhaseChange") {
    PhaseChange p;
    p.round_index = get<int>(j, "round_index");
    p.from = parse_enum_field(j, "from", parse_phase);
    p.to = parse_enum_field(j, "to", parse_phase);
    p.contentiousness = get<double>(j, "contentiousness");
    p.cause = parse_enum_field(j, "cause", parse_phase_change_cause);
    p.timestamp_ms = get<std::int64_t>(j, "timestamp_ms");
    se.event = p;
  } else if (record == "CritReport") {
    CritRecord c;
    c.round_index = get<int>(j, "round_index");
    c.agent_id = get<std::string>(j, "agent_id");
    c.report = crit_report_from_json(member(j, "report", ErrorCode::kParse));
    c.timestamp_ms = get<std::int64_t>(j, "timestamp_ms");
    se.event = std::move(c);
  } else if (record == "Concluded") {
    Concluded c;
    c.round_index = get<int>(j, "round_index");
    c.reason = parse_enum_field(j, "reason", parse_termination_reason);
    c.detail = get<std::string>(j, "detail");
    c.timestamp_ms = get<std::int64_t>(j, "timestamp_ms");
    se.event = std::move(c);
  } else {
    fail(ErrorCode::kParse, "unknown record type '" + record + "'");
  }
  return se;
}

Json header_json(const std::string& session_id) {
  return Json{{"record", "Transcript"},
              {"schema_version", Transcript::kSchemaVersion},
              {"session_id", session_id}};
}

std::string parse_header(const Json& j) {
  if (get<std::string>(j, "record") != "Transcript") {
    fail(ErrorCode::kParse, "first line is not a Transcript header");
  }
  const auto version = get<int>(j, "schema_version");
  if (version != Transcript::kSchemaVersion) {
    fail(ErrorCode::kUnsupportedVersion,
         "unsupported schema_version " + std::to_string(version) + " (this build reads " +
             std::to_string(Transcript::kSchemaVersion) + ")");
  }
  return get<std::string>(j, "session_id");
}

std::string serialize_transcript(const Transcript& t) {
  std::string out = dump(header_json(t.session_id())) + "\n";
  for (const auto& e : t.events()) out += dump(to_json(e)) + "\n";
  return out;
}

Transcript parse_transcript(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::optional<Transcript> t;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::kParse, "line " + std::to_string(line_no) + " is not JSON");
    try {
      if (!t) {
        t.emplace(parse_header(j));
      } else {
        t->append(event_from_json(j));
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnsupportedVersion) throw;
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!t) fail(ErrorCode::kParse, "empty transcript");
  return std::move(*t);
}

// ---------------------------------------------------------------------------
// Configuration

Json to_json(const AgentSpec& a) {
  Json j;
  j["agent_id"] = a.agent_id;
  j["kind"] = a.kind == AgentKind::kRemoteChat ? "remote_chat" : "scripted";
  if (!a.endpoint.empty()) j["endpoint"] = a.endpoint;
  if (!a.model_name.empty()) j["model_name"] = a.model_name;
  j["sampling"] = Json{{"temperature", a.sampling.temperature},
                       {"top_p", a.sampling.top_p},
                       {"max_tokens", a.sampling.max_tokens}};
  if (!a.credentials_ref.empty()) j["credentials_ref"] = a.credentials_ref;
  j["retry"] = Json{{"max_retries", a.retry.max_retries},
                    {"initial_backoff_ms", ms(a.retry.initial_backoff)},
                    {"multiplier", a.retry.multiplier},
                    {"max_backoff_ms", ms(a.retry.max_backoff)},
                    {"deadline_ms", ms(a.retry.deadline)}};
  if (!a.script.empty()) {
    Json s = Json::object();
    if (!a.script.replies.empty()) s["replies"] = a.script.replies;
    if (const auto& p = a.script.predictor) {
      s["predictor"] = Json{{"labels", p->labels}, {"start", p->start}, {"target", p->target},
                            {"rate", p->rate},     {"oscillate", p->oscillate},
                            {"noise", p->noise},   {"seed", p->seed},
                            {"prose", p->prose}};
    }
    if (const auto& q = a.script.judge) {
      s["judge"] = Json{{"validity", q->validity},
                        {"credibility", q->credibility},
                        {"evidence", q->evidence},
                        {"rivals", q->rivals},
                        {"rival_validity", q->rival_validity},
                        {"rival_credibility", q->rival_credibility}};
    }
    j["script"] = s;
  }
  return j;
}

AgentSpec agent_from_json(const Json& j) {
  constexpr auto V = ErrorCode::kValidation;
  reject_unknown(j,
                 {"agent_id", "kind", "endpoint", "model_name", "sampling", "credentials_ref",
                  "retry", "script", "position", "label_space", "topic_id"},
                 "agent");
  AgentSpec a;
  a.agent_id = get<std::string>(j, "agent_id", V);
  const auto kind = get_or<std::string>(j, "kind", "scripted", V);
  if (kind == "remote_chat") {
    a.kind = AgentKind::kRemoteChat;
  } else if (kind == "scripted") {
    a.kind = AgentKind::kScripted;
  } else {
    fail(V, "agent kind must be remote_chat or scripted, got '" + kind + "'");
  }
  a.endpoint = get_or<std::string>(j, "endpoint", "", V);
  a.model_name = get_or<std::string>(j, "model_name", "", V);
  a.credentials_ref = get_or<std::string>(j, "credentials_ref", "", V);
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    reject_unknown(s, {"temperature", "top_p", "max_tokens"}, "sampling");
    a.sampling.temperature = get_or(s, "temperature", a.sampling.temperature, V);
    a.sampling.top_p = get_or(s, "top_p", a.sampling.top_p, V);
    a.sampling.max_tokens = get_or(s, "max_tokens", a.sampling.max_tokens, V);
  }
  if (j.contains("retry")) {
    const auto& r = j["retry"];
    reject_unknown(r, {"max_retries", "initial_backoff_ms", "multiplier", "max_backoff_ms", "deadline_ms"},
                   "retry");
    using std::chrono::milliseconds;
    a.retry.max_retries = get_or(r, "max_retries", a.retry.max_retries, V);
    a.retry.initial_backoff =
        milliseconds(get_or<std::int64_t>(r, "initial_backoff_ms", ms(a.retry.initial_backoff), V));
    a.retry.multiplier = get_or(r, "multiplier", a.retry.multiplier, V);
    a.retry.max_backoff =
        milliseconds(get_or<std::int64_t>(r, "max_backoff_ms", ms(a.retry.max_backoff), V));
    a.retry.deadline = milliseconds(get_or<std::int64_t>(r, "deadline_ms", ms(a.retry.deadline), V));
  }
  if (j.contains("script")) {
    const auto& s = j["script"];
    reject_unknown(s, {"replies", "predictor", "judge"}, "script");
    a.script.replies = get_or<std::vector<std::string>>(s, "replies", {}, V);
    if (s.contains("predictor")) {
      const auto& p = s["predictor"];
      reject_unknown(p, {"labels", "start", "target", "rate", "oscillate", "noise", "seed", "prose"},
                     "predictor");
      PredictorSimSpec ps;
      ps.labels = get<std::vector<std::string>>(p, "labels", V);
      ps.start = get<std::vector<double>>(p, "start", V);
      ps.target = get_or(p, "target", ps.start, V);
      ps.rate = get_or(p, "rate", ps.rate, V);
      ps.oscillate = get_or(p, "oscillate", ps.oscillate, V);
      ps.noise = get_or(p, "noise", ps.noise, V);
      ps.seed = get_or<std::uint64_t>(p, "seed", ps.seed, V);
      ps.prose = get_or<std::string>(p, "prose", "", V);
      a.script.predictor = std::move(ps);
    }
    if (s.contains("judge")) {
      const auto& q = s["judge"];
      reject_unknown(q, {"validity", "credibility", "evidence", "rivals", "rival_validity", "rival_credibility"},
                     "judge");
      JudgeSimSpec js;
      js.validity = get_or(q, "validity", js.validity, V);
      js.credibility = get_or(q, "credibility", js.credibility, V);
      js.evidence = get_or(q, "evidence", js.evidence, V);
      js.rivals = get_or(q, "rivals", js.rivals, V);
      js.rival_validity = get_or(q, "rival_validity", js.rival_validity, V);
      js.rival_credibility = get_or(q, "rival_credibility", js.rival_credibility, V);
      a.script.judge = std::move(js);
    }
  }
  return a;
}

Json to_json(const SessionConfig& c) {
  Json j;
  j["session_id"] = c.session_id;
  j["topic"] = c.topic;
  j["debaters"] = Json::array();
  for (const auto& d : c.debaters) {
    Json a = to_json(d.agent);
    a["position"] = d.stance.position;
    if (d.stance.topic_id != c.topic) a["topic_id"] = d.stance.topic_id;
    if (d.stance.label_space) a["label_space"] = *d.stance.label_space;
    j["debaters"].push_back(std::move(a));
  }
  j["judges"] = Json::array();
  for (const auto& a : c.judges) j["judges"].push_back(to_json(a));
  j["schedule"] = Json{{"open", c.schedule.open},
                       {"moderate", c.schedule.moderate},
                       {"consensus", c.schedule.consensus}};
  j["k_max"] = c.k_max;
  j["convergence"] = Json{{"eps_self", c.convergence.eps_self},
                          {"eps_pair", c.convergence.eps_pair},
                          {"crit_floor", c.convergence.crit_floor},
                          {"min_rounds", c.convergence.min_rounds}};
  j["moderator_mode"] = to_string(c.moderator_mode);
  j["judge_overlap"] = c.judge_overlap == OverlapPolicy::kError ? "error" : "warn";
  j["predictions_per_turn"] = c.predictions_per_turn;
  j["consensus_rounds"] = c.consensus_rounds;
  j["context_token_budget"] = c.context_token_budget;
  j["opening_rotation"] = c.opening_rotation;
  j["crit"] = Json{{"max_depth", c.crit.max_depth}, {"tau", c.crit.tau}, {"per_round", c.crit.per_round}};
  j["round_pause_ms"] = c.round_pause_ms;
  j["logical_clock"] = c.logical_clock;
  return j;
}

SessionConfig config_from_json(const Json& j) {
  constexpr auto V = ErrorCode::kValidation;
  reject_unknown(j,
                 {"session_id", "topic", "debaters", "judges", "schedule", "k_max", "convergence",
                  "moderator_mode", "judge_overlap", "predictions_per_turn", "consensus_rounds",
                  "context_token_budget", "opening_rotation", "crit", "round_pause_ms", "logical_clock"},
                 "config");
  SessionConfig c;
  c.session_id = get_or<std::string>(j, "session_id", "", V);
  c.topic = get<std::string>(j, "topic", V);
  const auto& debaters = member(j, "debaters", V);
  if (!debaters.is_array()) fail(V, "debaters must be an array");
  for (const auto& d : debaters) {
    DebaterSpec spec;
    spec.agent = agent_from_json(d);
    spec.stance.topic_id = get_or<std::string>(d, "topic_id", c.topic, V);
    spec.stance.position = get<std::string>(d, "position", V);
    if (d.contains("label_space")) {
      spec.stance.label_space = get<std::vector<std::string>>(d, "label_space", V);
    }
    c.debaters.push_back(std::move(spec));
  }
  const auto& judges = member(j, "judges", V);
  if (!judges.is_array()) fail(V, "judges must be an array");
  for (const auto& a : judges) {
    for (auto key : {"position", "label_space", "topic_id"}) {
      if (a.is_object() && a.contains(key)) fail(V, std::string("judges take no '") + key + "'");
    }
    c.judges.push_back(agent_from_json(a));
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    reject_unknown(s, {"open", "moderate", "consensus"}, "schedule");
    c.schedule.open = get_or(s, "open", c.schedule.open, V);
    c.schedule.moderate = get_or(s, "moderate", c.schedule.moderate, V);
    c.schedule.consensus = get_or(s, "consensus", c.schedule.consensus, V);
  }
  c.k_max = get_or(j, "k_max", c.k_max, V);
  if (j.contains("convergence")) {
    const auto& s = j["convergence"];
    reject_unknown(s, {"eps_self", "eps_pair", "crit_floor", "min_rounds"}, "convergence");
    c.convergence.eps_self = get_or(s, "eps_self", c.convergence.eps_self, V);
    c.convergence.eps_pair = get_or(s, "eps_pair", c.convergence.eps_pair, V);
    c.convergence.crit_floor = get_or(s, "crit_floor", c.convergence.crit_floor, V);
    c.convergence.min_rounds = get_or(s, "min_rounds", c.convergence.min_rounds, V);
  }
  if (j.contains("moderator_mode")) {
    c.moderator_mode = parse_enum_field(j, "moderator_mode", parse_moderator_mode, V);
  }
  const auto overlap = get_or<std::string>(j, "judge_overlap", "error", V);
  if (overlap == "error") {
    c.judge_overlap = OverlapPolicy::kError;
  } else if (overlap == "warn") {
    c.judge_overlap = OverlapPolicy::kWarn;
  } else {
    fail(V, "judge_overlap must be error or warn");
  }
  c.predictions_per_turn = get_or(j, "predictions_per_turn", c.predictions_per_turn, V);
  c.consensus_rounds = get_or(j, "consensus_rounds", c.consensus_rounds, V);
  c.context_token_budget = get_or(j, "context_token_budget", c.context_token_budget, V);
  c.opening_rotation = get_or(j, "opening_rotation", c.opening_rotation, V);
  if (j.contains("crit")) {
    const auto& s = j["crit"];
    reject_unknown(s, {"max_depth", "tau", "per_round"}, "crit");
    c.crit.max_depth = get_or(s, "max_depth", c.crit.max_depth, V);
    c.crit.tau = get_or(s, "tau", c.crit.tau, V);
    c.crit.per_round = get_or(s, "per_round", c.crit.per_round, V);
  }
  c.round_pause_ms = get_or(j, "round_pause_ms", c.round_pause_ms, V);
  c.logical_clock = get_or(j, "logical_clock", c.logical_clock, V);
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SessionConfig load_config(const std::filesystem::path& path) {
  auto j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::kValidation, path.string() + " is not valid JSON");
  return config_from_json(j);
}

Json to_json(const DebateSession& s) {
  Json j;
  j["record"] = "DebateSession";
  j["session_id"] = s.config.session_id;
  j["topic"] = s.config.topic;
  j["phase"] = to_string(s.phase);
  j["round_index"] = s.round_index;
  j["contentiousness"] = s.contentiousness;
  j["moderator_mode"] = to_string(s.config.moderator_mode);
  j["k_max"] = s.config.k_max;
  j["consensus_rounds_done"] = s.consensus_rounds_done;
  j["termination_reason"] =
      s.termination_reason ? Json(to_string(*s.termination_reason)) : Json(nullptr);
  j["debaters"] = s.config.debater_ids();
  return j;
}

Json error_json(ErrorCode code, std::string_view message) {
  return Json{{"record", "Error"}, {"code", to_string(code)}, {"message", message}};
}

}  // namespace dialectic::records
