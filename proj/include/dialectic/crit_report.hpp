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

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dialectic {

enum class EvidenceType { kTheory, kOpinion, kStatistics, kClaimFromOtherSource };

std::string_view to_string(EvidenceType t);
EvidenceType parse_evidence_type(std::string_view s);

/// One reason (or rival reason) with its validity and source-credibility
/// scores on the 1..10 scale.
struct ScoredReason {
  std::string text;
  double gamma = 1.0;
  double theta = 1.0;
  EvidenceType evidence_type = EvidenceType::kOpinion;
  bool retained = false;

  /// (gamma / 10) * (theta / 10), in [0.01, 1].
  double weight() const { return (gamma / 10.0) * (theta / 10.0); }
};

struct CritReport {
  std::string claim;
  std::vector<ScoredReason> reasons;
  std::vector<ScoredReason> rivals;
  double gamma_aggregate = 0.0;
  double tau = 0.5;
  int depth = 0;
  /// Keyed by reason id ("r<index>" into `reasons`).
  std::map<std::string, CritReport> children;
  std::string justification;
  bool vacuous = false;
  std::vector<std::string> notices;
};

/// Mean weight over the retained members of reasons and rivals; 0 if none.
double aggregate_gamma(const std::vector<ScoredReason>& reasons,
                       const std::vector<ScoredReason>& rivals);

inline double recompute_gamma(const CritReport& r) {
  return aggregate_gamma(r.reasons, r.rivals);
}

inline std::string reason_id(std::size_t index) {
  return "r" + std::to_string(index);
}

}  // namespace dialectic
