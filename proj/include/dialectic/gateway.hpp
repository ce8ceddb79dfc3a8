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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialectic/agent_spec.hpp"

namespace dialectic::gateway {

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatExchange {
  std::string system;
  std::vector<ChatMessage> history;
  std::string reply;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
  int attempts = 1;
  std::vector<std::chrono::milliseconds> backoff_delays;
};

/// Throws kValidation unless `history` is non-empty, starts with a user
/// message and alternates user/assistant.
void validate_history(const std::vector<ChatMessage>& history);

class ChatAgent {
 public:
  virtual ~ChatAgent() = default;
  virtual const std::string& id() const = 0;
  virtual ChatExchange complete(const std::string& system,
                                const std::vector<ChatMessage>& history) = 0;
};

using ReplyGenerator = std::function<std::string(
    const std::string& system, const std::vector<ChatMessage>& history, std::size_t call_index)>;

/// Deterministic agent: pops queued replies in order, or asks a generator.
/// Thread-safe; every received request is kept for inspection.
class ScriptedAgent : public ChatAgent {
 public:
  ScriptedAgent(std::string id, std::vector<std::string> replies);
  ScriptedAgent(std::string id, ReplyGenerator generator);

  const std::string& id() const override { return id_; }
  ChatExchange complete(const std::string& system,
                        const std::vector<ChatMessage>& history) override;

  struct Request {
    std::string system;
    std::vector<ChatMessage> history;
  };
  std::vector<Request> received() const;
  std::size_t calls() const;

 private:
  std::string id_;
  std::vector<std::string> replies_;
  ReplyGenerator generator_;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
  std::vector<Request> received_;
};

/// Sleeps for backoff; injectable so tests do not wait in real time.
using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Caps concurrent requests per endpoint and globally.
class ConcurrencyLimiter {
 public:
  ConcurrencyLimiter(int per_endpoint, int global);

  class Permit {
   public:
    Permit(ConcurrencyLimiter* owner, std::string endpoint);
    Permit(Permit&& other) noexcept;
    Permit& operator=(Permit&&) = delete;
    ~Permit();

   private:
    ConcurrencyLimiter* owner_;
    std::string endpoint_;
  };

  Permit acquire(const std::string& endpoint);
  int in_flight() const;
  int peak_in_flight() const;

  static ConcurrencyLimiter& shared();

 private:
  void release(const std::string& endpoint);

  int per_endpoint_;
  int global_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, int> by_endpoint_;
  int total_ = 0;
  int peak_ = 0;
};

/// Chat-completions client for OpenAI-compatible servers.
///
/// Retries 429 and 5xx (and connection failures) with exponential backoff,
/// never more than `retry.max_retries` times, and fails with kTimeout once
/// `retry.deadline` is spent. Other statuses raise BackendError. The bearer
/// token comes from the environment variable named by `credentials_ref` and
/// is scrubbed from every reply and error message.
class RemoteChatAgent : public ChatAgent {
 public:
  explicit RemoteChatAgent(AgentSpec spec, Sleeper sleeper = {},
                           ConcurrencyLimiter* limiter = nullptr);

  const std::string& id() const override { return spec_.agent_id; }
  ChatExchange complete(const std::string& system,
                        const std::vector<ChatMessage>& history) override;

 private:
  AgentSpec spec_;
  Sleeper sleeper_;
  ConcurrencyLimiter* limiter_;
};

/// Backoff before retry `attempt` (0-based), capped at `max_backoff`.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

bool is_transient_status(int status);

/// Replaces every occurrence of `secret` with "[REDACTED]".
std::string scrub(std::string text, std::string_view secret);

/// Builds the agent a spec describes (remote client, queued script, or
/// simulator).
std::shared_ptr<ChatAgent> make_agent(const AgentSpec& spec);

using AgentFactory = std::function<std::shared_ptr<ChatAgent>(const AgentSpec&)>;

/// One judge's answer in a vote; `error` is set when that judge failed.
struct JudgeVote {
  std::string agent_id;
  std::optional<std::string> reply;
  std::optional<std::string> error;
};

struct VoteResult {
  std::vector<JudgeVote> votes;
  bool partial() const;
  std::vector<std::string> replies() const;
};

class JudgePool {
 public:
  /// Throws kValidation when empty.
  explicit JudgePool(std::vector<std::shared_ptr<ChatAgent>> judges);

  /// Cycles through judges in construction order.
  ChatAgent& round_robin_next();
  /// Asks every judge; individual failures are recorded, not thrown.
  VoteResult vote(const std::string& system, const std::string& prompt);

  std::size_t size() const { return judges_.size(); }
  ChatAgent& at(std::size_t i) { return *judges_.at(i); }

 private:
  std::vector<std::shared_ptr<ChatAgent>> judges_;
  std::atomic<std::size_t> next_{0};
};

}  // namespace dialectic::gateway
