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

#include "dialectic/agent_spec.hpp"
#include "dialectic/gateway.hpp"
#include "dialectic/metrics.hpp"

// Deterministic stand-ins for live models, used by scripted agents.

namespace dialectic::simulators {

/// Distribution the predictor emits on its `call_index`-th call: the
/// geometric blend of start and target (or alternation when oscillating),
/// log-normal noise from the seed, then tempered as p^(1/temperature).
PredictionSet predictor_distribution(const PredictorSimSpec& spec, double temperature,
                                     std::size_t call_index);

gateway::ReplyGenerator make_predictor(PredictorSimSpec spec, double temperature,
                                       std::string agent_id);

/// Answers CRIT and rubric prompts with the configured scores.
gateway::ReplyGenerator make_judge(JudgeSimSpec spec);

}  // namespace dialectic::simulators
