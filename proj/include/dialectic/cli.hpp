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

#include <iosfwd>
#include <string>
#include <vector>

#include "dialectic/protocol.hpp"

namespace dialectic::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsage = 2;

/// Entry point of the `dialectic` tool. `args` excludes the program name.
///
///   debate   --config F [--mode M] [--store DIR] [--commands F]
///   evaluate --doc F --judges F [--tau X] [--max-depth N] [--out F]
///   metrics  --transcript F [--json]
///   replay   --session ID [--store DIR]
///   serve    [--addr HOST:PORT] [--store DIR]
///
/// Bad arguments or configs exit 2, runtime failures exit 1.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Recomputes one snapshot per round from the debater turns' predictions.
/// Debater order follows the stored snapshot of that round when there is
/// one, otherwise first appearance in the transcript.
std::vector<MetricSnapshot> recompute_snapshots(const Transcript& t);

/// Human-readable rendering of a transcript.
std::string render_transcript(const Transcript& t);

/// "Chikungunya 50% | Dengue Fever 25% | ..." in stored label order.
std::string format_distribution(const PredictionSet& p);

}  // namespace dialectic::cli
