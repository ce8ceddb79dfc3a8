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

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "dialectic/gateway.hpp"
#include "dialectic/records.hpp"

namespace dialectic::service {

struct ServiceOptions {
  std::filesystem::path store_root = "dialectic-store";
  gateway::AgentFactory factory = gateway::make_agent;
  /// How long an idle event stream waits before re-checking the log.
  std::chrono::milliseconds stream_poll{200};
};

/// Response of a service call; also what the HTTP layer sends back.
struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// HTTP facade over the orchestrator and the store.
///
///   POST /v1/debates                 config -> 201 session state
///   GET  /v1/debates                 session list
///   GET  /v1/debates/{id}            session state
///   GET  /v1/debates/{id}/events     server-sent events, resumable by Last-Event-ID
///   POST /v1/debates/{id}/control    moderator command -> 202 / 409 / 422
///   GET  /v1/debates/{id}/metrics    metric snapshots, one JSON object per line
///   POST /v1/evaluate                {document, judges, tau?, max_depth?} -> CritReport
///
/// Errors are {"record":"Error","code":...,"message":...}.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port. Throws kStorage when binding fails.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  /// Stops accepting requests, cancels running sessions and joins them.
  void stop();

  // The same operations without HTTP, for the CLI and tests.
  Reply create_debate(const std::string& body);
  Reply list_debates();
  Reply get_debate(const std::string& id);
  Reply control(const std::string& id, const std::string& body);
  Reply metrics(const std::string& id);
  Reply evaluate(const std::string& body);
  /// SSE frames for events after `after_seq` that are already persisted.
  Reply events_since(const std::string& id, std::uint64_t after_seq);

  /// Blocks until the session has concluded or `timeout` passes.
  bool wait_concluded(const std::string& id, std::chrono::milliseconds timeout);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Maps an error code to the HTTP status the service answers with.
int http_status(ErrorCode code);

/// One server-sent-event frame: "id: <seq>\nevent: <record>\ndata: <json>\n\n".
std::string sse_frame(const SequencedEvent& e);

/// Splits "host:port"; throws kValidation.
std::pair<std::string, int> parse_bind_address(const std::string& addr);

}  // namespace dialectic::service
