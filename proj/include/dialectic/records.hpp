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

// Line-delimited JSON encoding shared by the transcript log, the store, the
// HTTP service and the CLI. One object per line; every object carries a
// "record" field naming its type.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dialectic/crit_report.hpp"
#include "dialectic/error.hpp"
#include "dialectic/protocol.hpp"

namespace dialectic::records {

using Json = nlohmann::ordered_json;

/// Rounds to 12 significant digits; idempotent.
double round12(double x);

/// Snapshot with every metric rounded as it is stored on the wire.
MetricSnapshot canonical(MetricSnapshot s);

/// Compact single-line dump; invalid UTF-8 is replaced, never rejected.
std::string dump(const Json& j);

Json to_json(const PredictionSet& p);
PredictionSet prediction_from_json(const Json& j);

Json to_json(const CritReport& r);
CritReport crit_report_from_json(const Json& j);

Json to_json(const MetricSnapshot& s);
MetricSnapshot snapshot_from_json(const Json& j);

/// {"kind", "payload", "source"}. Parsing throws kParse for malformed
/// structure and kValidation for out-of-range values.
Json to_json(const ModeratorCommand& c);
ModeratorCommand command_from_json(const Json& j);

/// Event line body: {"seq", "record", ...fields}.
Json to_json(const SequencedEvent& e);
SequencedEvent event_from_json(const Json& j);

Json header_json(const std::string& session_id);
/// Returns the session id; throws kUnsupportedVersion or kParse.
std::string parse_header(const Json& j);

/// Header line followed by one line per event, each newline-terminated.
std::string serialize_transcript(const Transcript& t);
/// Strict inverse of serialize_transcript; any bad line throws kParse.
Transcript parse_transcript(std::string_view text);

Json to_json(const AgentSpec& a);
AgentSpec agent_from_json(const Json& j);

/// Unknown keys and wrong types are kValidation errors so typos surface.
Json to_json(const SessionConfig& c);
SessionConfig config_from_json(const Json& j);
SessionConfig load_config(const std::filesystem::path& path);

/// Public view of a session's state.
Json to_json(const DebateSession& s);

Json error_json(ErrorCode code, std::string_view message);

std::string read_file(const std::filesystem::path& path);

}  // namespace dialectic::records
