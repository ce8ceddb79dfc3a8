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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dialectic/orchestrator.hpp"
#include "dialectic/protocol.hpp"

namespace dialectic::store {

struct SessionRecord {
  std::string session_id;
  std::filesystem::path directory;
  /// "active", "concluded" or "error".
  std::string status;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
};

struct ReplayResult {
  DebateSession session;
  Transcript transcript;
  /// Set when a corrupt or partial line stopped the replay: 1-based line
  /// number and the reason.
  std::optional<std::pair<int, std::string>> truncated_at;
  /// Lines skipped because their sequence number was already applied.
  int duplicates = 0;
};

/// One directory per session under `root`:
///   <root>/<id>/events.log       header line + one event per line
///   <root>/<id>/config.snapshot  the session config as JSON
///   <root>/<id>/reports/         standalone CRIT reports
///   <root>/index.jsonl           one line per created session
class FileStore {
 public:
  explicit FileStore(std::filesystem::path root);
  ~FileStore();

  FileStore(const FileStore&) = delete;
  FileStore& operator=(const FileStore&) = delete;

  const std::filesystem::path& root() const { return root_; }

  /// Throws kValidation when the id is taken or unsafe as a directory name.
  SessionRecord create(const SessionConfig& config);

  /// Appends one line and flushes it to disk before returning. Throws
  /// kStorage on any I/O failure.
  void persist_event(const std::string& session_id, const SequencedEvent& event);

  /// Sink for DebateEngine that persists every event.
  EventSink sink(const std::string& session_id);

  /// Throws kNotFound for an unknown id and kUnsupportedVersion for a log
  /// written by an incompatible schema.
  ReplayResult replay(const std::string& session_id) const;

  /// Complete lines with seq > after_seq (a trailing partial line is left
  /// for a later read).
  std::vector<SequencedEvent> read_events(const std::string& session_id,
                                          std::uint64_t after_seq = 0) const;

  SessionConfig load_config(const std::string& session_id) const;
  std::filesystem::path save_report(const std::string& session_id, const std::string& name,
                                    const CritReport& report);

  bool exists(const std::string& session_id) const;
  SessionRecord record(const std::string& session_id) const;
  std::vector<SessionRecord> list() const;

  std::filesystem::path events_path(const std::string& session_id) const;

  /// Closes the session's open log handle.
  void close(const std::string& session_id);

 private:
  std::filesystem::path dir(const std::string& session_id) const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, std::FILE*> open_;
};

/// Safe as a directory name: [A-Za-z0-9._-], 1..128 chars, not "." or "..".
bool valid_session_id(const std::string& id);

}  // namespace dialectic::store
