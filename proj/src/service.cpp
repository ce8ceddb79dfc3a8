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

#include "dialectic/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>

#include "dialectic/crit.hpp"
#include "dialectic/orchestrator.hpp"
#include "dialectic/store.hpp"

namespace dialectic::service {

using records::Json;

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kNdjson = "application/x-ndjson";
constexpr const char* kEventStream = "text/event-stream";

Reply json_reply(int status, const Json& j) { return Reply{status, kJson, records::dump(j) + "\n"}; }

Reply error_reply(ErrorCode code, std::string_view message, int status = 0) {
  return json_reply(status ? status : http_status(code), records::error_json(code, message));
}

std::optional<Json> parse_body(const std::string& body) {
  auto j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

std::string fresh_id() {
  static std::mt19937_64 rng{std::random_device{}()};
  static std::mutex mu;
  std::lock_guard lock(mu);
  char buf[32];
  std::snprintf(buf, sizeof buf, "debate-%012llx",
                static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
  return buf;
}

struct Live {
  std::shared_ptr<DebateEngine> engine;
  std::thread thread;
  std::string failure;
};

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation:
    case ErrorCode::kTemplate:
    case ErrorCode::kNoClaim:
    case ErrorCode::kUnsupportedVersion: return 422;
    case ErrorCode::kParse: return 400;
    case ErrorCode::kProtocol: return 409;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kEvaluation:
    case ErrorCode::kBackend:
    case ErrorCode::kScriptExhausted: return 502;
    case ErrorCode::kTimeout: return 504;
    case ErrorCode::kStorage: return 500;
  }
  return 500;
}

std::string sse_frame(const SequencedEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(record_name(e.event)) +
         "\ndata: " + records::dump(records::to_json(e)) + "\n\n";
}

std::pair<std::string, int> parse_bind_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::kValidation, "bind address must look like host:port, got '" + addr + "'");
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kValidation, "bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::kValidation, "port out of range in '" + addr + "'");
  return {addr.substr(0, colon), port};
}

struct Service::Impl {
  explicit Impl(ServiceOptions o) : options(std::move(o)), store(options.store_root) {}

  ServiceOptions options;
  store::FileStore store;
  httplib::Server server;
  std::thread server_thread;
  std::mutex mu;
  std::map<std::string, std::shared_ptr<Live>> live;
  std::atomic<bool> stopping{false};

  std::shared_ptr<Live> find_live(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = live.find(id);
    return it == live.end() ? nullptr : it->second;
  }

  void install_routes(Service& svc);
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  impl_->install_routes(*this);
}

Service::~Service() { stop(); }

Reply Service::create_debate(const std::string& body) {
  auto j = parse_body(body);
  if (!j) return error_reply(ErrorCode::kParse, "request body is not valid JSON");
  SessionConfig config;
  try {
    config = records::config_from_json(*j);
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }
  if (config.session_id.empty()) config.session_id = fresh_id();
  if (!store::valid_session_id(config.session_id)) {
    return error_reply(ErrorCode::kValidation, "session_id must match [A-Za-z0-9._-]{1,128}");
  }
  if (impl_->store.exists(config.session_id)) {
    return error_reply(ErrorCode::kValidation, "session '" + config.session_id + "' already exists", 409);
  }

  auto entry = std::make_shared<Live>();
  try {
    EngineOptions eo;
    eo.factory = impl_->options.factory;
    eo.sinks.push_back(impl_->store.sink(config.session_id));
    entry->engine = std::make_shared<DebateEngine>(config, std::move(eo));
    impl_->store.create(config);
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }

  const auto id = config.session_id;
  {
    std::lock_guard lock(impl_->mu);
    impl_->live[id] = entry;
  }
  auto* store = &impl_->store;
  entry->thread = std::thread([entry, store, id] {
    try {
      entry->engine->run();
    } catch (const std::exception& e) {
      entry->failure = e.what();
    }
    store->close(id);
  });

  Json out = records::to_json(entry->engine->session());
  if (const auto w = entry->engine->warnings(); !w.empty()) out["warnings"] = w;
  return json_reply(201, out);
}

Reply Service::list_debates() {
  Json out{{"record", "DebateList"}, {"debates", Json::array()}};
  for (const auto& r : impl_->store.list()) {
    out["debates"].push_back(Json{{"session_id", r.session_id},
                                  {"status", r.status},
                                  {"created_ms", r.created_ms},
                                  {"updated_ms", r.updated_ms}});
  }
  return json_reply(200, out);
}

Reply Service::get_debate(const std::string& id) {
  try {
    if (auto l = impl_->find_live(id)) {
      Json out = records::to_json(l->engine->session());
      out["last_seq"] = l->engine->transcript().last_seq();
      if (!l->failure.empty()) out["failure"] = l->failure;
      return json_reply(200, out);
    }
    if (!impl_->store.exists(id)) return error_reply(ErrorCode::kNotFound, "unknown session '" + id + "'");
    auto r = impl_->store.replay(id);
    Json out = records::to_json(r.session);
    out["last_seq"] = r.transcript.last_seq();
    if (r.truncated_at) out["truncated_at_line"] = r.truncated_at->first;
    return json_reply(200, out);
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }
}

Reply Service::control(const std::string& id, const std::string& body) {
  auto l = impl_->find_live(id);
  if (!l && !impl_->store.exists(id)) return error_reply(ErrorCode::kNotFound, "unknown session '" + id + "'");
  auto j = parse_body(body);
  if (!j) return error_reply(ErrorCode::kParse, "request body is not valid JSON");
  try {
    auto cmd = records::command_from_json(*j);
    if (!l) return error_reply(ErrorCode::kProtocol, "session '" + id + "' is not running");
    l->engine->submit(cmd);
    return json_reply(202, Json{{"record", "CommandQueued"},
                                {"session_id", id},
                                {"kind", to_string(cmd.kind())},
                                {"round_index", l->engine->session().round_index}});
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }
}

Reply Service::metrics(const std::string& id) {
  try {
    std::vector<MetricSnapshot> snaps;
    if (auto l = impl_->find_live(id)) {
      snaps = l->engine->transcript().metric_snapshots();
    } else if (impl_->store.exists(id)) {
      snaps = impl_->store.replay(id).transcript.metric_snapshots();
    } else {
      return error_reply(ErrorCode::kNotFound, "unknown session '" + id + "'");
    }
    std::string out;
    for (const auto& s : snaps) {
      Json line{{"record", "MetricSnapshot"}};
      const Json body = records::to_json(s);
      for (const auto& [k, v] : body.items()) line[k] = v;
      out += records::dump(line) + "\n";
    }
    return Reply{200, kNdjson, out};
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }
}

Reply Service::evaluate(const std::string& body) {
  auto j = parse_body(body);
  if (!j || !j->is_object()) return error_reply(ErrorCode::kParse, "request body is not a JSON object");
  try {
    if (!j->contains("document") || !(*j)["document"].is_string()) {
      return error_reply(ErrorCode::kValidation, "field 'document' (string) is required");
    }
    if (!j->contains("judges") || !(*j)["judges"].is_array() || (*j)["judges"].empty()) {
      return error_reply(ErrorCode::kValidation, "field 'judges' (non-empty array) is required");
    }
    std::vector<std::shared_ptr<gateway::ChatAgent>> judges;
    for (const auto& a : (*j)["judges"]) judges.push_back(impl_->options.factory(records::agent_from_json(a)));
    gateway::JudgePool pool(std::move(judges));
    crit::CritOptions opts;
    opts.tau = j->value("tau", opts.tau);
    opts.max_depth = j->value("max_depth", opts.max_depth);
    if (!(opts.tau >= 0.0 && opts.tau <= 1.0)) return error_reply(ErrorCode::kValidation, "tau must lie in [0, 1]");
    if (opts.max_depth < 0) return error_reply(ErrorCode::kValidation, "max_depth must be >= 0");
    const auto report = crit::crit((*j)["document"].get<std::string>(), pool, opts);
    return json_reply(200, Json{{"record", "CritReport"},
                                {"gamma_percent", crit::format_percent(report.gamma_aggregate)},
                                {"report", records::to_json(report)}});
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_reply(ErrorCode::kValidation, e.what());
  }
}

Reply Service::events_since(const std::string& id, std::uint64_t after_seq) {
  try {
    std::string out;
    for (const auto& e : impl_->store.read_events(id, after_seq)) out += sse_frame(e);
    return Reply{200, kEventStream, out};
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }
}

bool Service::wait_concluded(const std::string& id, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  auto l = impl_->find_live(id);
  if (!l) return impl_->store.exists(id) && impl_->store.record(id).status != "active";
  while (std::chrono::steady_clock::now() < deadline) {
    if (l->engine->session().concluded()) return true;
    l->engine->wait_events(l->engine->transcript().last_seq(), std::chrono::milliseconds(50));
  }
  return l->engine->session().concluded();
}

void Service::Impl::install_routes(Service& svc) {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type, Last-Event-ID"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.new_task_queue = [] { return new httplib::ThreadPool(32); };
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(ErrorCode::kStorage, what, 500));
  });
  server.Get("/healthz", [send](const httplib::Request&, httplib::Response& res) {
    send(res, json_reply(200, Json{{"record", "Health"}, {"status", "ok"}}));
  });
  server.Post("/v1/debates", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.create_debate(req.body));
  });
  server.Get("/v1/debates", [&svc, send](const httplib::Request&, httplib::Response& res) {
    send(res, svc.list_debates());
  });
  server.Get(R"(/v1/debates/([A-Za-z0-9._-]+))", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get_debate(req.matches[1]));
  });
  server.Post(R"(/v1/debates/([A-Za-z0-9._-]+)/control)",
              [&svc, send](const httplib::Request& req, httplib::Response& res) {
                send(res, svc.control(req.matches[1], req.body));
              });
  server.Get(R"(/v1/debates/([A-Za-z0-9._-]+)/metrics)",
             [&svc, send](const httplib::Request& req, httplib::Response& res) {
               send(res, svc.metrics(req.matches[1]));
             });
  server.Post("/v1/evaluate", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.evaluate(req.body));
  });
  server.Get(R"(/v1/debates/([A-Za-z0-9._-]+)/events)",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               if (!store.exists(id)) {
                 send(res, error_reply(ErrorCode::kNotFound, "unknown session '" + id + "'"));
                 return;
               }
               std::uint64_t after = 0;
               std::string last = req.get_header_value("Last-Event-ID");
               if (last.empty() && req.has_param("last_event_id")) last = req.get_param_value("last_event_id");
               if (!last.empty()) {
                 try {
                   after = std::stoull(last);
                 } catch (const std::exception&) {
                   send(res, error_reply(ErrorCode::kParse, "Last-Event-ID must be a sequence number"));
                   return;
                 }
               }
               auto cursor = std::make_shared<std::uint64_t>(after);
               res.set_header("Cache-Control", "no-cache");
               res.set_chunked_content_provider(
                   kEventStream, [this, id, cursor](std::size_t, httplib::DataSink& sink) {
                     if (stopping) {
                       sink.done();
                       return true;
                     }
                     const auto events = store.read_events(id, *cursor);
                     bool concluded = false;
                     for (const auto& e : events) {
                       const auto frame = sse_frame(e);
                       if (!sink.write(frame.data(), frame.size())) return false;
                       *cursor = e.seq;
                       concluded = concluded || std::holds_alternative<Concluded>(e.event);
                     }
                     auto l = find_live(id);
                     const bool finished =
                         concluded || (!l && events.empty()) ||
                         (l && events.empty() && l->engine->session().concluded() &&
                          store.read_events(id, *cursor).empty());
                     if (finished) {
                       sink.done();
                       return true;
                     }
                     if (events.empty()) {
                       if (l) {
                         l->engine->wait_events(*cursor, options.stream_poll);
                       } else {
                         std::this_thread::sleep_for(options.stream_poll);
                       }
                     }
                     return true;
                   });
             });
}

int Service::start(const std::string& host, int port) {
  auto& s = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = s.bind_to_any_port(host);
  } else if (!s.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::kStorage, "cannot bind " + host + ":" + std::to_string(port));
  impl_->server_thread = std::thread([&s] { s.listen_after_bind(); });
  return bound;
}

void Service::wait() {
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
  std::map<std::string, std::shared_ptr<Live>> live;
  {
    std::lock_guard lock(impl_->mu);
    live = impl_->live;
  }
  for (auto& [_, l] : live) l->engine->cancel();
  for (auto& [_, l] : live) {
    if (l->thread.joinable()) l->thread.join();
  }
}

}  // namespace dialectic::service
