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

#include "dialectic/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dialectic/error.hpp"
#include "dialectic/simulators.hpp"

namespace dialectic {

void AgentSpec::validate() const {
  auto fail = [this](const std::string& m) {
    throw Error(ErrorCode::kValidation, "agent '" + agent_id + "': " + m);
  };
  if (agent_id.empty()) throw Error(ErrorCode::kValidation, "agent id is empty");
  if (kind == AgentKind::kRemoteChat) {
    if (endpoint.empty()) fail("remote agent needs an endpoint");
    if (model_name.empty()) fail("remote agent needs a model name");
    if (endpoint.rfind("http://", 0) != 0) {
      fail("endpoint must be a plain http:// URL (put a TLS-terminating proxy in front of https "
           "backends): " + endpoint);
    }
  } else if (script.empty()) {
    fail("scripted agent needs a script (replies, predictor or judge)");
  }
  if (!(sampling.temperature >= 0.0)) fail("temperature must be >= 0");
  if (!(sampling.top_p > 0.0 && sampling.top_p <= 1.0)) fail("top_p must lie in (0, 1]");
  if (sampling.max_tokens < 1) fail("max_tokens must be >= 1");
  if (retry.max_retries < 0) fail("max_retries must be >= 0");
  if (retry.deadline.count() <= 0) fail("deadline must be positive");
  if (retry.multiplier < 1.0) fail("backoff multiplier must be >= 1");
  if (script.predictor) {
    const auto& p = *script.predictor;
    if (p.labels.empty() || p.start.size() != p.labels.size() ||
        p.target.size() != p.labels.size()) {
      fail("predictor needs labels, start and target of equal length");
    }
    if (!(p.rate >= 0.0 && p.rate <= 1.0)) fail("predictor rate must lie in [0, 1]");
  }
}

namespace gateway {

void validate_history(const std::vector<ChatMessage>& history) {
  if (history.empty()) throw Error(ErrorCode::kValidation, "chat history is empty");
  for (std::size_t i = 0; i < history.size(); ++i) {
    const char* expected = i % 2 == 0 ? "user" : "assistant";
    if (history[i].role != expected) {
      throw Error(ErrorCode::kValidation, "chat history must alternate user/assistant starting "
                                          "with user (message " +
                                              std::to_string(i) + " is '" + history[i].role + "')");
    }
  }
}

ScriptedAgent::ScriptedAgent(std::string id, std::vector<std::string> replies)
    : id_(std::move(id)), replies_(std::move(replies)) {}

ScriptedAgent::ScriptedAgent(std::string id, ReplyGenerator generator)
    : id_(std::move(id)), generator_(std::move(generator)) {}

ChatExchange ScriptedAgent::complete(const std::string& system,
                                     const std::vector<ChatMessage>& history) {
  validate_history(history);
  std::lock_guard lock(mu_);
  received_.push_back({system, history});
  ChatExchange ex;
  ex.system = system;
  ex.history = history;
  const std::size_t call = next_++;
  if (generator_) {
    ex.reply = generator_(system, history, call);
  } else {
    if (call >= replies_.size()) {
      throw Error(ErrorCode::kScriptExhausted,
                  "scripted agent '" + id_ + "' has no reply left (call " +
                      std::to_string(call + 1) + ")");
    }
    ex.reply = replies_[call];
  }
  return ex;
}

std::vector<ScriptedAgent::Request> ScriptedAgent::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

std::size_t ScriptedAgent::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

ConcurrencyLimiter::ConcurrencyLimiter(int per_endpoint, int global)
    : per_endpoint_(std::max(1, per_endpoint)), global_(std::max(1, global)) {}

ConcurrencyLimiter::Permit::Permit(ConcurrencyLimiter* owner, std::string endpoint)
    : owner_(owner), endpoint_(std::move(endpoint)) {}

ConcurrencyLimiter::Permit::Permit(Permit&& other) noexcept
    : owner_(std::exchange(other.owner_, nullptr)), endpoint_(std::move(other.endpoint_)) {}

ConcurrencyLimiter::Permit::~Permit() {
  if (owner_) owner_->release(endpoint_);
}

ConcurrencyLimiter::Permit ConcurrencyLimiter::acquire(const std::string& endpoint) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return total_ < global_ && by_endpoint_[endpoint] < per_endpoint_; });
  ++total_;
  ++by_endpoint_[endpoint];
  peak_ = std::max(peak_, total_);
  return Permit(this, endpoint);
}

void ConcurrencyLimiter::release(const std::string& endpoint) {
  {
    std::lock_guard lock(mu_);
    --total_;
    --by_endpoint_[endpoint];
  }
  cv_.notify_all();
}

int ConcurrencyLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return total_;
}

int ConcurrencyLimiter::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

ConcurrencyLimiter& ConcurrencyLimiter::shared() {
  static ConcurrencyLimiter limiter(4, 16);
  return limiter;
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
  const double ms = static_cast<double>(policy.initial_backoff.count()) *
                    std::pow(policy.multiplier, static_cast<double>(attempt));
  const double capped = std::min(ms, static_cast<double>(policy.max_backoff.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

bool is_transient_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

std::string scrub(std::string text, std::string_view secret) {
  if (secret.empty()) return text;
  static constexpr std::string_view kMask = "[REDACTED]";
  std::size_t pos = 0;
  while ((pos = text.find(secret, pos)) != std::string::npos) {
    text.replace(pos, secret.size(), kMask);
    pos += kMask.size();
  }
  return text;
}

namespace {

struct ParsedEndpoint {
  std::string scheme_host_port;
  std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kValidation, "endpoint must start with http://: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedEndpoint ep;
  ep.scheme_host_port = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  static constexpr std::string_view kSuffix = "/chat/completions";
  if (path.size() < kSuffix.size() ||
      path.compare(path.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
    path += kSuffix;
  }
  ep.path = path;
  return ep;
}

std::string digest(const std::string& body, std::string_view secret) {
  constexpr std::size_t kMax = 256;
  std::string d = std::to_string(body.size()) + " bytes: " + body.substr(0, kMax);
  if (body.size() > kMax) d += "...";
  return scrub(std::move(d), secret);
}

void sleep_for(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

}  // namespace

RemoteChatAgent::RemoteChatAgent(AgentSpec spec, Sleeper sleeper, ConcurrencyLimiter* limiter)
    : spec_(std::move(spec)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(sleep_for)),
      limiter_(limiter ? limiter : &ConcurrencyLimiter::shared()) {
  spec_.validate();
}

ChatExchange RemoteChatAgent::complete(const std::string& system,
                                       const std::vector<ChatMessage>& history) {
  using Clock = std::chrono::steady_clock;
  using std::chrono::duration_cast;
  using std::chrono::milliseconds;
  validate_history(history);

  std::string secret;
  if (!spec_.credentials_ref.empty()) {
    if (const char* v = std::getenv(spec_.credentials_ref.c_str())) secret = v;
  }
  const auto endpoint = parse_endpoint(spec_.endpoint);

  nlohmann::json body;
  body["model"] = spec_.model_name;
  body["messages"] = nlohmann::json::array();
  body["messages"].push_back({{"role", "system"}, {"content", system}});
  for (const auto& m : history) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = spec_.sampling.temperature;
  body["top_p"] = spec_.sampling.top_p;
  body["max_tokens"] = spec_.sampling.max_tokens;
  const auto payload = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);

  httplib::Headers headers;
  if (!secret.empty()) headers.emplace("Authorization", "Bearer " + secret);

  ChatExchange ex;
  ex.system = system;
  ex.history = history;
  const auto start = Clock::now();
  const auto deadline = start + spec_.retry.deadline;
  auto timeout_error = [&](const std::string& why) {
    return Error(ErrorCode::kTimeout, "agent '" + spec_.agent_id + "': deadline of " +
                                          std::to_string(spec_.retry.deadline.count()) +
                                          " ms exceeded (" + why + ")");
  };

  milliseconds previous_delay{0};
  std::string last_failure;
  int last_status = 0;
  for (int attempt = 0;; ++attempt) {
    const auto remaining = duration_cast<milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) throw timeout_error(last_failure.empty() ? "no attempt" : last_failure);
    ex.attempts = attempt + 1;

    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      auto permit = limiter_->acquire(endpoint.scheme_host_port);
      httplib::Client client(endpoint.scheme_host_port);
      client.set_connection_timeout(remaining);
      client.set_read_timeout(remaining);
      client.set_write_timeout(remaining);
      res = client.Post(endpoint.path, headers, payload, "application/json");
    }

    bool transient = false;
    milliseconds retry_after{0};
    if (!res) {
      last_failure = "transport: " + httplib::to_string(res.error());
      last_status = 0;
      if (Clock::now() >= deadline) throw timeout_error(last_failure);
      transient = true;
    } else if (res->status >= 200 && res->status < 300) {
      auto json = nlohmann::json::parse(res->body, nullptr, false);
      const nlohmann::json* content = nullptr;
      if (!json.is_discarded() && json.contains("choices") && json["choices"].is_array() &&
          !json["choices"].empty() && json["choices"][0].contains("message") &&
          json["choices"][0]["message"].contains("content") &&
          json["choices"][0]["message"]["content"].is_string()) {
        content = &json["choices"][0]["message"]["content"];
      }
      if (content == nullptr || content->get_ref<const std::string&>().empty()) {
        throw BackendError(res->status,
                           "agent '" + spec_.agent_id + "': malformed or empty chat completion",
                           digest(res->body, secret));
      }
      ex.reply = scrub(content->get<std::string>(), secret);
      if (json.contains("usage") && json["usage"].is_object()) {
        ex.usage.prompt_tokens = json["usage"].value("prompt_tokens", 0);
        ex.usage.completion_tokens = json["usage"].value("completion_tokens", 0);
      }
      ex.latency = duration_cast<milliseconds>(Clock::now() - start);
      return ex;
    } else if (is_transient_status(res->status)) {
      transient = true;
      last_status = res->status;
      last_failure = "HTTP " + std::to_string(res->status);
      if (res->has_header("Retry-After")) {
        const auto v = std::atoi(res->get_header_value("Retry-After").c_str());
        if (v > 0) retry_after = milliseconds(v * 1000LL);
      }
    } else {
      throw BackendError(res->status,
                         "agent '" + spec_.agent_id + "': HTTP " + std::to_string(res->status),
                         digest(res->body, secret));
    }

    if (transient && attempt >= spec_.retry.max_retries) {
      throw BackendError(last_status,
                         "agent '" + spec_.agent_id + "': retries exhausted after " +
                             std::to_string(attempt + 1) + " attempts (" + last_failure + ")",
                         scrub(last_failure, secret));
    }
    auto delay = std::max({previous_delay, backoff_delay(spec_.retry, attempt), retry_after});
    if (Clock::now() + delay >= deadline) throw timeout_error(last_failure + ", backoff would pass deadline");
    ex.backoff_delays.push_back(delay);
    previous_delay = delay;
    sleeper_(delay);
  }
}

std::shared_ptr<ChatAgent> make_agent(const AgentSpec& spec) {
  spec.validate();
  if (spec.kind == AgentKind::kRemoteChat) return std::make_shared<RemoteChatAgent>(spec);
  if (spec.script.predictor) {
    return std::make_shared<ScriptedAgent>(
        spec.agent_id,
        simulators::make_predictor(*spec.script.predictor, spec.sampling.temperature, spec.agent_id));
  }
  if (spec.script.judge) {
    return std::make_shared<ScriptedAgent>(spec.agent_id, simulators::make_judge(*spec.script.judge));
  }
  return std::make_shared<ScriptedAgent>(spec.agent_id, spec.script.replies);
}

bool VoteResult::partial() const {
  return std::any_of(votes.begin(), votes.end(), [](const JudgeVote& v) { return v.error.has_value(); });
}

std::vector<std::string> VoteResult::replies() const {
  std::vector<std::string> out;
  for (const auto& v : votes) {
    if (v.reply) out.push_back(*v.reply);
  }
  return out;
}

JudgePool::JudgePool(std::vector<std::shared_ptr<ChatAgent>> judges) : judges_(std::move(judges)) {
  if (judges_.empty()) throw Error(ErrorCode::kValidation, "judge pool needs at least one judge");
}

ChatAgent& JudgePool::round_robin_next() {
  return *judges_[next_.fetch_add(1) % judges_.size()];
}

VoteResult JudgePool::vote(const std::string& system, const std::string& prompt) {
  VoteResult result;
  for (const auto& judge : judges_) {
    JudgeVote v;
    v.agent_id = judge->id();
    try {
      v.reply = judge->complete(system, {{"user", prompt}}).reply;
    } catch (const std::exception& e) {
      v.error = e.what();
    }
    result.votes.push_back(std::move(v));
  }
  return result;
}

}  // namespace gateway
}  // namespace dialectic
