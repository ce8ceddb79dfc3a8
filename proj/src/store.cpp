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

#include "dialectic/store.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include "dialectic/records.hpp"

namespace dialectic::store {

namespace fs = std::filesystem;
using records::Json;

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

[[noreturn]] void storage_fail(const std::string& what) { throw Error(ErrorCode::kStorage, what); }

void write_durable(const fs::path& path, const std::string& data, const char* mode) {
  std::FILE* f = std::fopen(path.c_str(), mode);
  if (!f) storage_fail("cannot open " + path.string());
  const bool ok = std::fwrite(data.data(), 1, data.size(), f) == data.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) storage_fail("write failed: " + path.string());
}

// Lines terminated by '\n'; a trailing fragment is returned separately.
std::vector<std::string> complete_lines(const std::string& text, std::string* tail) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1) {
    lines.push_back(text.substr(start, nl - start));
  }
  if (tail) *tail = text.substr(start);
  return lines;
}

std::int64_t mtime_ms(const fs::path& p) {
  std::error_code ec;
  const auto t = fs::last_write_time(p, ec);
  if (ec) return 0;
  const auto sys = std::chrono::system_clock::now() + (t - fs::file_time_type::clock::now());
  return std::chrono::duration_cast<std::chrono::milliseconds>(sys.time_since_epoch()).count();
}

}  // namespace

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  for (unsigned char c : id) {
    if (!(std::isalnum(c) || c == '.' || c == '_' || c == '-')) return false;
  }
  return true;
}

FileStore::FileStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) storage_fail("cannot create store root " + root_.string() + ": " + ec.message());
}

FileStore::~FileStore() {
  for (auto& [_, f] : open_) std::fclose(f);
}

fs::path FileStore::dir(const std::string& id) const {
  if (!valid_session_id(id)) throw Error(ErrorCode::kNotFound, "invalid session id '" + id + "'");
  return root_ / id;
}

fs::path FileStore::events_path(const std::string& id) const { return dir(id) / "events.log"; }

bool FileStore::exists(const std::string& id) const {
  return valid_session_id(id) && fs::exists(root_ / id / "events.log");
}

SessionRecord FileStore::create(const SessionConfig& config) {
  const auto& id = config.session_id;
  if (!valid_session_id(id)) {
    throw Error(ErrorCode::kValidation, "session id '" + id + "' must match [A-Za-z0-9._-]{1,128}");
  }
  std::lock_guard lock(mu_);
  const auto d = root_ / id;
  std::error_code ec;
  if (!fs::create_directory(d, ec)) {
    if (ec) storage_fail("cannot create " + d.string() + ": " + ec.message());
    throw Error(ErrorCode::kValidation, "session '" + id + "' already exists");
  }
  fs::create_directories(d / "reports", ec);
  if (ec) storage_fail("cannot create " + (d / "reports").string());
  write_durable(d / "config.snapshot", records::to_json(config).dump(2) + "\n", "wb");
  write_durable(d / "events.log", records::dump(records::header_json(id)) + "\n", "wb");
  SessionRecord rec{id, d, "active", now_ms(), now_ms()};
  Json line{{"session_id", id}, {"directory", id}, {"created_ms", rec.created_ms}};
  write_durable(root_ / "index.jsonl", records::dump(line) + "\n", "ab");
  return rec;
}

void FileStore::persist_event(const std::string& id, const SequencedEvent& event) {
  const std::string line = records::dump(records::to_json(event)) + "\n";
  std::lock_guard lock(mu_);
  auto it = open_.find(id);
  if (it == open_.end()) {
    const auto path = events_path(id);
    if (!fs::exists(path)) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
    std::FILE* f = std::fopen(path.c_str(), "ab");
    if (!f) storage_fail("cannot open " + path.string());
    it = open_.emplace(id, f).first;
  }
  std::FILE* f = it->second;
  if (std::fwrite(line.data(), 1, line.size(), f) != line.size() || std::fflush(f) != 0 ||
      ::fsync(::fileno(f)) != 0) {
    storage_fail("append to " + id + "/events.log failed");
  }
}

void FileStore::close(const std::string& id) {
  std::lock_guard lock(mu_);
  if (auto it = open_.find(id); it != open_.end()) {
    std::fclose(it->second);
    open_.erase(it);
  }
}

EventSink FileStore::sink(const std::string& id) {
  return [this, id](const SequencedEvent& e) { persist_event(id, e); };
}

SessionConfig FileStore::load_config(const std::string& id) const {
  const auto path = dir(id) / "config.snapshot";
  if (!fs::exists(path)) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
  auto j = Json::parse(records::read_file(path), nullptr, false);
  if (j.is_discarded()) storage_fail("config.snapshot of '" + id + "' is corrupt");
  return records::config_from_json(j);
}

ReplayResult FileStore::replay(const std::string& id) const {
  const auto path = events_path(id);
  if (!fs::exists(path)) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
  auto config = load_config(id);
  const std::string text = records::read_file(path);

  std::string tail;
  const auto lines = complete_lines(text, &tail);
  ReplayResult out;
  out.session = DebateSession::start(config);
  if (lines.empty()) storage_fail("events.log of '" + id + "' has no header");
  auto header = Json::parse(lines.front(), nullptr, false);
  if (header.is_discarded()) storage_fail("events.log of '" + id + "' has a corrupt header");
  out.transcript = Transcript(records::parse_header(header));

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    try {
      auto j = Json::parse(lines[i], nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::kParse, "not valid JSON");
      auto se = records::event_from_json(j);
      if (se.seq <= out.transcript.last_seq()) {
        ++out.duplicates;
        continue;
      }
      auto next = apply_event(out.session, se.event);
      out.transcript.append(std::move(se));
      out.session = std::move(next);
    } catch (const Error& e) {
      out.truncated_at = std::make_pair(line_no, std::string(e.what()));
      return out;
    }
  }
  if (!tail.empty()) {
    out.truncated_at = std::make_pair(static_cast<int>(lines.size()) + 1,
                                      std::string("incomplete final line"));
  }
  return out;
}

std::vector<SequencedEvent> FileStore::read_events(const std::string& id, std::uint64_t after_seq) const {
  const auto path = events_path(id);
  if (!fs::exists(path)) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
  const auto lines = complete_lines(records::read_file(path), nullptr);
  std::vector<SequencedEvent> out;
  std::uint64_t last = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto j = Json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) break;
    SequencedEvent se;
    try {
      se = records::event_from_json(j);
    } catch (const Error&) {
      break;
    }
    if (se.seq <= last) continue;
    last = se.seq;
    if (se.seq > after_seq) out.push_back(std::move(se));
  }
  return out;
}

fs::path FileStore::save_report(const std::string& id, const std::string& name, const CritReport& report) {
  if (!valid_session_id(name)) throw Error(ErrorCode::kValidation, "invalid report name '" + name + "'");
  const auto path = dir(id) / "reports" / (name + ".json");
  Json j{{"record", "CritReport"}, {"report", records::to_json(report)}};
  write_durable(path, j.dump(2) + "\n", "wb");
  return path;
}

SessionRecord FileStore::record(const std::string& id) const {
  const auto path = events_path(id);
  if (!fs::exists(path)) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
  SessionRecord rec;
  rec.session_id = id;
  rec.directory = dir(id);
  rec.updated_ms = mtime_ms(path);
  rec.created_ms = mtime_ms(dir(id) / "config.snapshot");
  rec.status = "active";
  for (const auto& e : read_events(id)) {
    if (const auto* c = std::get_if<Concluded>(&e.event)) {
      rec.status = c->reason == TerminationReason::kError ? "error" : "concluded";
    }
  }
  return rec;
}

std::vector<SessionRecord> FileStore::list() const {
  std::vector<SessionRecord> out;
  const auto index = root_ / "index.jsonl";
  if (!fs::exists(index)) return out;
  for (const auto& line : complete_lines(records::read_file(index), nullptr)) {
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("session_id")) continue;
    const auto id = j["session_id"].get<std::string>();
    if (!exists(id)) continue;
    auto rec = record(id);
    rec.created_ms = j.value("created_ms", rec.created_ms);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace dialectic::store
