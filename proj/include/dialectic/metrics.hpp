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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Information-theoretic metric suite over discrete prediction distributions.
// All logarithms are base 2: entropies are in bits and JSD lies in [0, 1].

namespace dialectic {

/// Label that absorbs the mass an agent leaves undeclared.
inline constexpr std::string_view kResidualLabel = "other";

/// Smoothing applied to zero entries of the second argument of KL / CE.
inline constexpr double kSmoothing = 1e-10;

/// A normalized discrete distribution over labeled outcomes.
///
/// Labels keep the spelling the agent used; equality and alignment use the
/// case-folded form.
class PredictionSet {
 public:
  PredictionSet() = default;

  /// Validates and normalizes. Throws kValidation on negative mass, duplicate
  /// (case-folded) or empty labels, size mismatch, or zero total mass.
  static PredictionSet make(std::vector<std::string> labels,
                            std::vector<double> probs);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  /// Probability of `label` (case-folded lookup); 0 when absent.
  double prob(std::string_view label) const;

  /// Non-fatal notes recorded while building the set (e.g. rescaling).
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  friend bool operator==(const PredictionSet& a, const PredictionSet& b) {
    return a.labels_ == b.labels_ && a.probs_ == b.probs_;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<double> probs_;
  std::vector<std::string> warnings_;
};

std::string fold_case(std::string_view s);

/// Parses the fenced `===PREDICTIONS===` ... `===END===` block out of an
/// agent reply. Declared mass below 100% goes to "other"; mass above
/// 100% (+1e-6) is rescaled and a warning is recorded. Throws ParseError.
PredictionSet parse_prediction_block(std::string_view text);

/// Renders a set back into the fenced grammar (used by simulators and
/// fixtures). Percentages are printed with enough digits to round-trip.
std::string format_prediction_block(const PredictionSet& p,
                                    std::string_view justification = "");

/// Two sets aligned onto the case-folded union of their labels, in sorted
/// (canonical) order. Absent labels carry probability 0.
struct AlignedPair {
  std::vector<std::string> labels;
  std::vector<double> p;
  std::vector<double> q;
};

AlignedPair align(const PredictionSet& p, const PredictionSet& q);

double entropy(const PredictionSet& p);
double entropy(const std::vector<double>& probs);

/// Optional ground metric for Wasserstein distance, keyed by label.
struct GroundDistance {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> matrix;

  double distance(std::string_view a, std::string_view b) const;
};

struct Divergences {
  double cross_entropy = 0.0;  // H(p, q)
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  double jsd = 0.0;
  double wasserstein = 0.0;
};

/// Throws kValidation when the union support is empty.
Divergences divergences(const PredictionSet& p, const PredictionSet& q,
                        const GroundDistance* ground = nullptr);

double cross_entropy(const PredictionSet& p, const PredictionSet& q);
double kl_divergence(const PredictionSet& p, const PredictionSet& q);
double jensen_shannon(const PredictionSet& p, const PredictionSet& q);
double wasserstein(const PredictionSet& p, const PredictionSet& q,
                   const GroundDistance* ground = nullptr);

/// Earth mover's distance between two aligned mass vectors under an
/// arbitrary cost matrix (transportation problem, successive shortest paths).
double earth_movers_distance(const std::vector<double>& p,
                             const std::vector<double>& q,
                             const std::vector<std::vector<double>>& cost);

/// Joint distribution built by the agreement coupling: the diagonal holds
/// min(p_i, q_i) and the leftover mass is spread as the outer product of the
/// normalized residuals. Rows sum to p, columns to q.
std::vector<std::vector<double>> agreement_coupling(const std::vector<double>& p,
                                                    const std::vector<double>& q);

/// I(J) / sqrt(H(p) H(q)) over the agreement coupling; 0 if either entropy
/// is 0. Result clamped to [0, 1].
double normalized_mutual_information(const PredictionSet& p,
                                     const PredictionSet& q);

struct ConvergenceThresholds {
  double eps_self = 0.05;
  double eps_pair = 0.05;
  double crit_floor = 0.0;
  int min_rounds = 3;

  void validate() const;
};

/// Per-round metrics over the debaters' distributions.
///
/// Pairwise fields are taken over unordered debater pairs in configuration
/// order (p = earlier agent) and averaged when there are more than two.
struct MetricSnapshot {
  int round_index = 0;
  std::map<std::string, double> per_agent_entropy;
  double cross_entropy = 0.0;
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  double jsd = 0.0;
  double wasserstein = 0.0;
  double nmi = 0.0;
  /// The parsed distributions the metrics were computed from, in debater
  /// order. Needed for round-over-round comparisons.
  std::vector<std::pair<std::string, PredictionSet>> distributions;
};

/// Computes a snapshot. `distributions` is in debater order; agents without a
/// prediction are simply absent.
MetricSnapshot compute_snapshot(
    int round_index,
    const std::vector<std::pair<std::string, PredictionSet>>& distributions);

enum class ConvergenceDecision { kContinue, kConverged, kMaxRounds };

std::string_view to_string(ConvergenceDecision d);

/// `completed_rounds` is K, the number of rounds finished so far.
/// Returns kConverged iff K >= min_rounds, every agent's latest
/// round-over-round JSD <= eps_self, every pairwise JSD in the latest
/// snapshot <= eps_pair, and every CRIT score >= crit_floor. Otherwise
/// kMaxRounds iff K >= k_max, else kContinue.
ConvergenceDecision convergence_check(
    const std::vector<MetricSnapshot>& history,
    const std::map<std::string, double>& crit_scores,
    const ConvergenceThresholds& th, int completed_rounds, int k_max,
    const std::vector<std::string>& expected_agents = {});

}  // namespace dialectic
