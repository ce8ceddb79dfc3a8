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

#include "dialectic/cli.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>

#include "dialectic/crit.hpp"
#include "dialectic/orchestrator.hpp"
#include "dialectic/records.hpp"
#include "dialectic/service.hpp"
#include "dialectic/store.hpp"

namespace dialectic::cli {

namespace {

using records::Json;

std::string default_store() {
  const char* env = std::getenv("STORE_ROOT");
  return env && *env ? env : "dialectic-store";
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Errors a user fixes by changing arguments or config files.
bool is_config_error(const Error& e) {
  return e.code() == ErrorCode::kValidation || e.code() == ErrorCode::kNotFound ||
         e.code() == ErrorCode::kTemplate;
}

std::vector<AgentSpec> load_judges(const std::string& path) {
  auto j = Json::parse(records::read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kValidation, path + " is not valid JSON");
  if (j.is_object() && j.contains("judges")) j = j["judges"];
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::kValidation, path + " must hold a non-empty array of judge agents");
  }
  std::vector<AgentSpec> out;
  for (const auto& a : j) {
    out.push_back(records::agent_from_json(a));
    out.back().validate();
  }
  return out;
}

void print_report(std::ostream& out, const CritReport& r, int indent = 0) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  out << pad << "claim: " << r.claim << "\n";
  auto line = [&](const char* tag, std::size_t i, const ScoredReason& s) {
    out << pad << "  " << tag << i << "  validity " << fmt("%g", s.gamma) << "  credibility "
        << fmt("%g", s.theta) << "  weight " << fmt("%.4f", s.weight()) << "  "
        << (s.retained ? "retained" : "dismissed") << "  [" << to_string(s.evidence_type) << "]  "
        << s.text << "\n";
  };
  for (std::size_t i = 0; i < r.reasons.size(); ++i) {
    line("r", i, r.reasons[i]);
    if (auto it = r.children.find(reason_id(i)); it != r.children.end()) print_report(out, it->second, indent + 6);
  }
  for (std::size_t i = 0; i < r.rivals.size(); ++i) line("rival", i, r.rivals[i]);
  for (const auto& n : r.notices) out << pad << "  notice: " << n << "\n";
  out << pad << "gamma: " << crit::format_percent(r.gamma_aggregate) << " ("
      << fmt("%.4f", r.gamma_aggregate) << ", tau " << fmt("%g", r.tau) << ")"
      << (r.vacuous ? " vacuous" : "") << "\n";
  if (!r.justification.empty() && indent == 0) out << "justification: " << r.justification << "\n";
}

int cmd_debate(const std::string& config_path, const std::string& mode, const std::string& store_root,
               const std::string& commands_path, std::ostream& out, std::ostream& err) {
  SessionConfig config;
  std::vector<ModeratorCommand> commands;
  try {
    config = records::load_config(config_path);
    if (!mode.empty()) config.moderator_mode = parse_moderator_mode(mode);
    if (config.session_id.empty()) {
      config.session_id = std::filesystem::path(config_path).stem().string();
    }
    config.validate();
    if (!commands_path.empty()) {
      std::istringstream in(records::read_file(commands_path));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::kValidation, "bad command line: " + line);
        commands.push_back(records::command_from_json(j));
      }
    }
  } catch (const Error& e) {
    err << "dialectic debate: " << e.what() << "\n";
    return kUsage;
  }

  try {
    store::FileStore store(store_root);
    EngineOptions eo;
    eo.sinks.push_back(store.sink(config.session_id));
    DebateEngine engine(config, std::move(eo));
    store.create(config);
    for (auto& c : commands) engine.submit(c);
    for (const auto& w : engine.warnings()) err << "warning: " << w << "\n";
    const auto transcript = engine.run();
    store.close(config.session_id);

    const auto session = engine.session();
    out << "transcript: " << store.events_path(config.session_id).string() << "\n";
    out << "rounds: " << session.round_index << "\n";
    out << "concluded: "
        << (session.termination_reason ? to_string(*session.termination_reason) : "no") << "\n";
    for (const auto& e : transcript.events()) {
      if (const auto* c = std::get_if<Concluded>(&e.event); c && !c->detail.empty()) {
        out << "detail: " << c->detail << "\n";
      }
    }
    for (const auto& rec : transcript.crit_records()) {
      out << "gamma " << rec.agent_id << " (round " << rec.round_index + 1
          << "): " << crit::format_percent(rec.report.gamma_aggregate) << " ("
          << fmt("%.4f", rec.report.gamma_aggregate) << ")\n";
    }
    return session.termination_reason == TerminationReason::kError ? kRuntimeFailure : kOk;
  } catch (const Error& e) {
    err << "dialectic debate: " << e.what() << "\n";
    return is_config_error(e) ? kUsage : kRuntimeFailure;
  }
}

int cmd_evaluate(const std::string& doc_path, const std::string& judges_path, double tau, int max_depth,
                 const std::string& out_path, std::ostream& out, std::ostream& err) {
  std::string doc;
  std::vector<AgentSpec> specs;
  try {
    doc = records::read_file(doc_path);
    specs = load_judges(judges_path);
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorCode::kValidation, "--tau must lie in [0, 1]");
    if (max_depth < 0) throw Error(ErrorCode::kValidation, "--max-depth must be >= 0");
  } catch (const Error& e) {
    err << "dialectic evaluate: " << e.what() << "\n";
    return kUsage;
  }
  try {
    std::vector<std::shared_ptr<gateway::ChatAgent>> judges;
    for (const auto& s : specs) judges.push_back(gateway::make_agent(s));
    gateway::JudgePool pool(std::move(judges));
    crit::CritOptions opts;
    opts.tau = tau;
    opts.max_depth = max_depth;
    const auto report = crit::crit(doc, pool, opts);
    print_report(out, report);
    if (!out_path.empty()) {
      std::ofstream f(out_path, std::ios::binary);
      f << Json{{"record", "CritReport"}, {"report", records::to_json(report)}}.dump(2) << "\n";
      if (!f) throw Error(ErrorCode::kStorage, "cannot write " + out_path);
    }
    return kOk;
  } catch (const Error& e) {
    err << "dialectic evaluate: " << e.what() << "\n";
    return e.code() == ErrorCode::kValidation ? kUsage : kRuntimeFailure;
  }
}

int cmd_metrics(const std::string& path, bool as_json, std::ostream& out, std::ostream& err) {
  Transcript t;
  try {
    t = records::parse_transcript(records::read_file(path));
  } catch (const Error& e) {
    err << "dialectic metrics: " << e.what() << "\n";
    return e.code() == ErrorCode::kNotFound ? kUsage : kRuntimeFailure;
  }
  const auto stored = t.metric_snapshots();
  std::map<int, const MetricSnapshot*> by_round;
  for (const auto& s : stored) by_round[s.round_index] = &s;

  bool all_match = true;
  for (const auto& s : recompute_snapshots(t)) {
    const auto it = by_round.find(s.round_index);
    const bool match =
        it == by_round.end() || records::dump(records::to_json(s)) == records::dump(records::to_json(*it->second));
    all_match = all_match && match;
    if (as_json) {
      Json line{{"record", "MetricSnapshot"}};
      const Json body = records::to_json(s);
      for (const auto& [k, v] : body.items()) line[k] = v;
      out << records::dump(line) << "\n";
      continue;
    }
    out << "round " << s.round_index + 1 << "\n";
    for (const auto& [id, p] : s.distributions) {
      out << "  " << id << ": " << format_distribution(p) << "  (H " << fmt("%.4f", s.per_agent_entropy.at(id))
          << " bits)\n";
    }
    if (s.distributions.size() >= 2) {
      out << "  CE " << fmt("%.6f", s.cross_entropy) << "  KL(p||q) " << fmt("%.6f", s.kl_pq) << "  KL(q||p) "
          << fmt("%.6f", s.kl_qp) << "  JSD " << fmt("%.6f", s.jsd) << "  WD " << fmt("%.6f", s.wasserstein)
          << "  NMI " << fmt("%.6f", s.nmi) << "\n";
    }
    if (it != by_round.end()) out << "  stored snapshot: " << (match ? "identical" : "DIFFERS") << "\n";
  }
  return all_match ? kOk : kRuntimeFailure;
}

int cmd_replay(const std::string& id, const std::string& store_root, std::ostream& out, std::ostream& err) {
  try {
    store::FileStore store(store_root);
    const auto r = store.replay(id);
    out << render_transcript(r.transcript);
    out << "state: phase " << to_string(r.session.phase) << ", rounds " << r.session.round_index;
    if (r.session.termination_reason) out << ", reason " << to_string(*r.session.termination_reason);
    out << "\n";
    if (r.truncated_at) {
      err << "warning: replay stopped at line " << r.truncated_at->first << ": " << r.truncated_at->second
          << "\n";
    }
    if (r.duplicates > 0) err << "note: " << r.duplicates << " duplicate events skipped\n";
    return kOk;
  } catch (const Error& e) {
    err << "dialectic replay: " << e.what() << "\n";
    return e.code() == ErrorCode::kNotFound ? kUsage : kRuntimeFailure;
  }
}

int cmd_serve(const std::string& addr, const std::string& store_root, std::ostream& out, std::ostream& err) {
  std::pair<std::string, int> bind;
  try {
    bind = service::parse_bind_address(addr);
  } catch (const Error& e) {
    err << "dialectic serve: " << e.what() << "\n";
    return kUsage;
  }
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  try {
    service::ServiceOptions opts;
    opts.store_root = store_root;
    service::Service svc(opts);
    const int port = svc.start(bind.first, bind.second);
    out << "listening on " << bind.first << ":" << port << " (store " << store_root << ")" << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    svc.stop();
    return kOk;
  } catch (const Error& e) {
    err << "dialectic serve: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace

std::string format_distribution(const PredictionSet& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += " | ";
    s += p.labels()[i] + " " + fmt("%.10g", p.probs()[i] * 100.0) + "%";
  }
  return s;
}

std::vector<MetricSnapshot> recompute_snapshots(const Transcript& t) {
  std::vector<std::string> appearance;
  std::map<int, std::map<std::string, PredictionSet>> by_round;
  for (const auto& turn : t.turns()) {
    if (turn.role != Role::kDebater || !turn.prediction) continue;
    if (std::find(appearance.begin(), appearance.end(), turn.agent_id) == appearance.end()) {
      appearance.push_back(turn.agent_id);
    }
    by_round[turn.round_index][turn.agent_id] = *turn.prediction;
  }
  std::map<int, std::vector<std::string>> stored_order;
  for (const auto& s : t.metric_snapshots()) {
    for (const auto& [id, _] : s.distributions) stored_order[s.round_index].push_back(id);
  }
  std::vector<MetricSnapshot> out;
  for (auto& [round, preds] : by_round) {
    const auto& order = stored_order.count(round) ? stored_order[round] : appearance;
    std::vector<std::pair<std::string, PredictionSet>> dists;
    for (const auto& id : order) {
      if (auto it = preds.find(id); it != preds.end()) dists.emplace_back(id, it->second);
    }
    for (const auto& id : appearance) {
      if (std::find(order.begin(), order.end(), id) == order.end() && preds.count(id)) {
        dists.emplace_back(id, preds[id]);
      }
    }
    out.push_back(records::canonical(compute_snapshot(round, dists)));
  }
  return out;
}

std::string render_transcript(const Transcript& t) {
  std::ostringstream out;
  out << "session " << t.session_id() << "\n";
  for (const auto& se : t.events()) {
    std::visit(
        [&](const auto& e) {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, Turn>) {
            out << "\n[Round " << e.round_index + 1 << "] " << e.agent_id;
            if (e.phase) out << " (" << to_string(*e.phase) << ")";
            if (e.contentiousness) out << " C=" << fmt("%g", *e.contentiousness);
            out << "\n" << e.content;
            if (!e.content.empty() && e.content.back() != '\n') out << "\n";
          } else if constexpr (std::is_same_v<T, MetricSnapshot>) {
            out << "-- metrics round " << e.round_index + 1 << ": JSD " << fmt("%.6f", e.jsd) << ", WD "
                << fmt("%.6f", e.wasserstein) << ", CE " << fmt("%.6f", e.cross_entropy) << ", NMI "
                << fmt("%.6f", e.nmi) << "\n";
          } else if constexpr (std::is_same_v<T, ControlEvent>) {
            out << "-- command " << to_string(e.kind()) << " by " << to_string(e.issued_by()) << "\n";
          } else if constexpr (std::is_same_v<T, PhaseChange>) {
            out << "-- phase " << to_string(e.from) << " -> " << to_string(e.to) << " ("
                << to_string(e.cause) << "), C=" << fmt("%g", e.contentiousness) << "\n";
          } else if constexpr (std::is_same_v<T, CritRecord>) {
            out << "-- CRIT " << e.agent_id << ": " << crit::format_percent(e.report.gamma_aggregate) << "\n";
          } else if constexpr (std::is_same_v<T, Concluded>) {
            out << "-- concluded: " << to_string(e.reason);
            if (!e.detail.empty()) out << " (" << e.detail << ")";
            out << "\n";
          }
        },
        se.event);
  }
  return out.str();
}

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-agent debate orchestration", "dialectic"};
  app.require_subcommand(1);

  std::string config_path, mode, store_root = default_store(), commands_path;
  auto* debate = app.add_subcommand("debate", "Run a debate session from a config file");
  debate->add_option("--config", config_path, "Session config (JSON)")->required();
  debate->add_option("--mode", mode, "Moderator mode override")
      ->check(CLI::IsMember({"automated", "human", "hybrid"}));
  debate->add_option("--store", store_root, "Store root directory (default $STORE_ROOT)");
  debate->add_option("--commands", commands_path, "Moderator commands to queue before the first round (JSON lines)");

  std::string doc_path, judges_path, report_out;
  double tau = 0.5;
  int max_depth = 1;
  auto* evaluate = app.add_subcommand("evaluate", "Score a document with CRIT");
  evaluate->add_option("--doc", doc_path, "Plain-text document")->required();
  evaluate->add_option("--judges", judges_path, "Judge agents (JSON array)")->required();
  evaluate->add_option("--tau", tau, "Dismissal threshold");
  evaluate->add_option("--max-depth", max_depth, "Recursion budget for cited sources");
  evaluate->add_option("--out", report_out, "Write the report as JSON");

  std::string transcript_path;
  bool as_json = false;
  auto* metrics = app.add_subcommand("metrics", "Recompute metric snapshots from a transcript");
  metrics->add_option("--transcript", transcript_path, "Transcript file (events.log)")->required();
  metrics->add_flag("--json", as_json, "Print snapshots as JSON lines");

  std::string session_id;
  auto* replay = app.add_subcommand("replay", "Replay a stored session");
  replay->add_option("--session", session_id, "Session id")->required();
  replay->add_option("--store", store_root, "Store root directory (default $STORE_ROOT)");

  const char* bind_env = std::getenv("BIND_ADDR");
  std::string addr = bind_env && *bind_env ? bind_env : "127.0.0.1:8080";
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--addr", addr, "host:port (default $BIND_ADDR or 127.0.0.1:8080)");
  serve->add_option("--store", store_root, "Store root directory (default $STORE_ROOT)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "dialectic: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  if (debate->parsed()) return cmd_debate(config_path, mode, store_root, commands_path, out, err);
  if (evaluate->parsed()) return cmd_evaluate(doc_path, judges_path, tau, max_depth, report_out, out, err);
  if (metrics->parsed()) return cmd_metrics(transcript_path, as_json, out, err);
  if (replay->parsed()) return cmd_replay(session_id, store_root, out, err);
  if (serve->parsed()) return cmd_serve(addr, store_root, out, err);
  err << app.help();
  return kUsage;
}

}  // namespace dialectic::cli
