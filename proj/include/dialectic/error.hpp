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

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace dialectic {

enum class ErrorCode {
  kValidation,
  kProtocol,
  kParse,
  kTemplate,
  kEvaluation,
  kNoClaim,
  kTimeout,
  kBackend,
  kScriptExhausted,
  kStorage,
  kUnsupportedVersion,
  kNotFound,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` is machine-readable and
/// is what the service maps onto HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failures keep the offending input so callers can log or reprompt.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string raw)
      : Error(ErrorCode::kParse, message), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Non-transient HTTP failure from a remote backend.
class BackendError : public Error {
 public:
  BackendError(int status, const std::string& message, std::string body_digest)
      : Error(ErrorCode::kBackend, message),
        status_(status),
        body_digest_(std::move(body_digest)) {}

  int status() const noexcept { return status_; }
  const std::string& body_digest() const noexcept { return body_digest_; }

 private:
  int status_;
  std::string body_digest_;
};

}  // namespace dialectic
