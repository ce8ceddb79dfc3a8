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

#include "dialectic/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <cstdint>
#include <set>
#include <tuple>

#include "dialectic/error.hpp"

namespace dialectic {

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr double kOverMassTolerancePct = 1e-6;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

double log2_safe(double x) { return std::log2(x); }

}  // namespace

std::string fold_case(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

PredictionSet PredictionSet::make(std::vector<std::string> labels, std::vector<double> probs) {
  if (labels.size() != probs.size()) {
    throw Error(ErrorCode::kValidation, "labels and probabilities differ in length");
  }
  std::set<std::string> seen;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) throw Error(ErrorCode::kValidation, "empty label");
    if (!seen.insert(fold_case(labels[i])).second) {
      throw Error(ErrorCode::kValidation, "duplicate label: " + labels[i]);
    }
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i])) {
      throw Error(ErrorCode::kValidation, "negative or non-finite probability for " + labels[i]);
    }
    total += probs[i];
  }
  if (!labels.empty() && !(total > 0.0)) {
    throw Error(ErrorCode::kValidation, "distribution has zero mass");
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    for (auto& p : probs) p /= total;
  }
  PredictionSet out;
  out.labels_ = std::move(labels);
  out.probs_ = std::move(probs);
  return out;
}

double PredictionSet::prob(std::string_view label) const {
  const auto key = fold_case(label);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (fold_case(labels_[i]) == key) return probs_[i];
  }
  return 0.0;
}

PredictionSet parse_prediction_block(std::string_view text) {
  static constexpr std::string_view kOpen = "===PREDICTIONS===";
  static constexpr std::string_view kClose = "===END===";
  const auto lines = split_lines(text);
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) == kOpen) {
      if (open) throw ParseError("more than one prediction block", std::string(text));
      open = i;
    }
  }
  if (!open) throw ParseError("no prediction block found", std::string(text));
  std::optional<std::size_t> close;
  for (std::size_t i = *open + 1; i < lines.size(); ++i) {
    if (trim(lines[i]) == kClose) {
      close = i;
      break;
    }
  }
  if (!close) throw ParseError("prediction block is not closed", std::string(text));

  std::vector<std::string> labels;
  std::vector<double> percents;
  std::set<std::string> seen;
  for (std::size_t i = *open + 1; i < *close; ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError("malformed prediction line: '" + std::string(line) + "'", std::string(text));
    }
    const auto label = trim(line.substr(0, colon));
    auto rest = trim(line.substr(colon + 1));
    double value = 0.0;
    const auto* first = rest.data();
    const auto* last = rest.data() + rest.size();
    const auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
    if (label.empty() || ec != std::errc() || first == ptr || !std::isfinite(value) ||
        rest.front() == '-' || rest.front() == '+') {
      throw ParseError("malformed prediction line: '" + std::string(line) + "'", std::string(text));
    }
    rest = trim(rest.substr(static_cast<std::size_t>(ptr - first)));
    if (rest.empty() || rest.front() != '%') {
      throw ParseError("missing '%' in prediction line: '" + std::string(line) + "'",
                       std::string(text));
    }
    rest = trim(rest.substr(1));
    if (!rest.empty() && rest.front() != ':') {
      throw ParseError("unexpected text after percentage: '" + std::string(line) + "'",
                       std::string(text));
    }
    if (!seen.insert(fold_case(label)).second) {
      throw ParseError("duplicate label in prediction block: '" + std::string(label) + "'",
                       std::string(text));
    }
    labels.emplace_back(label);
    percents.push_back(value);
  }
  if (labels.empty()) throw ParseError("empty prediction block", std::string(text));

  double total = 0.0;
  for (double v : percents) total += v;
  if (!(total > 0.0)) throw ParseError("prediction block declares zero mass", std::string(text));

  std::vector<double> probs(percents.size());
  std::string warning;
  if (total > 100.0 + kOverMassTolerancePct) {
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = percents[i] / total;
    char buf[96];
    std::snprintf(buf, sizeof buf, "declared mass %.6g%% exceeds 100%%; rescaled", total);
    warning = buf;
  } else if (total < 100.0 - kSumTolerance) {
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = percents[i] / 100.0;
    const double residual = (100.0 - total) / 100.0;
    const auto key = std::string(kResidualLabel);
    auto it = std::find_if(labels.begin(), labels.end(),
                           [&](const std::string& l) { return fold_case(l) == key; });
    if (it != labels.end()) {
      probs[static_cast<std::size_t>(it - labels.begin())] += residual;
    } else {
      labels.push_back(key);
      probs.push_back(residual);
    }
  } else {
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = percents[i] / total;
  }
  auto out = PredictionSet::make(std::move(labels), std::move(probs));
  if (!warning.empty()) out.add_warning(std::move(warning));
  return out;
}

std::string format_prediction_block(const PredictionSet& p, std::string_view justification) {
  std::string out = "===PREDICTIONS===\n";
  char buf[64];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10f", p.probs()[i] * 100.0);
    out += p.labels()[i];
    out += " : ";
    out += buf;
    out += "%";
    if (!justification.empty()) {
      out += " : ";
      out += justification;
    }
    out += '\n';
  }
  out += "===END===\n";
  return out;
}

AlignedPair align(const PredictionSet& p, const PredictionSet& q) {
  // key -> (display label, p mass, q mass)
  std::map<std::string, std::tuple<std::string, double, double>> merged;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& slot = merged[fold_case(p.labels()[i])];
    std::get<0>(slot) = p.labels()[i];
    std::get<1>(slot) = p.probs()[i];
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    auto [it, inserted] = merged.try_emplace(fold_case(q.labels()[i]));
    if (inserted) std::get<0>(it->second) = q.labels()[i];
    std::get<2>(it->second) = q.probs()[i];
  }
  AlignedPair out;
  for (const auto& [key, slot] : merged) {
    out.labels.push_back(std::get<0>(slot));
    out.p.push_back(std::get<1>(slot));
    out.q.push_back(std::get<2>(slot));
  }
  return out;
}

double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double x : probs) {
    if (x > 0.0) h -= x * log2_safe(x);
  }
  return h;
}

double entropy(const PredictionSet& p) { return entropy(p.probs()); }

namespace {

double smoothed(double x) { return x > 0.0 ? x : kSmoothing; }

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) d += p[i] * log2_safe(p[i] / smoothed(q[i]));
  }
  return d;
}

double ce(const std::vector<double>& p, const std::vector<double>& q) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * log2_safe(smoothed(q[i]));
  }
  return h;
}

double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double tp = p[i] > 0.0 ? p[i] * log2_safe(p[i] / m) : 0.0;
    const double tq = q[i] > 0.0 ? q[i] * log2_safe(q[i] / m) : 0.0;
    d += 0.5 * (tp + tq);  // one addition per term keeps jsd(p,q) == jsd(q,p) bitwise
  }
  return std::clamp(d, 0.0, 1.0);
}

double w1_unit(const std::vector<double>& p, const std::vector<double>& q) {
  double cdf_gap = 0.0;
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    cdf_gap += p[i] - q[i];
    w += std::abs(cdf_gap);
  }
  return w;
}

AlignedPair checked_align(const PredictionSet& p, const PredictionSet& q) {
  auto a = align(p, q);
  if (a.labels.empty()) throw Error(ErrorCode::kValidation, "empty union support");
  return a;
}

std::vector<std::vector<double>> ground_matrix(const AlignedPair& a, const GroundDistance& g) {
  std::vector<std::vector<double>> cost(a.labels.size(), std::vector<double>(a.labels.size()));
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    for (std::size_t j = 0; j < a.labels.size(); ++j) {
      cost[i][j] = g.distance(a.labels[i], a.labels[j]);
    }
  }
  return cost;
}

}  // namespace

double GroundDistance::distance(std::string_view a, std::string_view b) const {
  auto index_of = [this](std::string_view l) {
    const auto key = fold_case(l);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold_case(labels[i]) == key) return i;
    }
    throw Error(ErrorCode::kValidation, "label missing from ground distance: " + std::string(l));
  };
  const auto i = index_of(a);
  const auto j = index_of(b);
  if (i >= matrix.size() || j >= matrix[i].size()) {
    throw Error(ErrorCode::kValidation, "ground distance matrix is smaller than its label list");
  }
  return matrix[i][j];
}

double earth_movers_distance(const std::vector<double>& p, const std::vector<double>& q,
                             const std::vector<std::vector<double>>& cost) {
  const std::size_t n = p.size();
  if (q.size() != n || cost.size() != n) {
    throw Error(ErrorCode::kValidation, "earth mover inputs differ in size");
  }
  for (const auto& row : cost) {
    if (row.size() != n) throw Error(ErrorCode::kValidation, "cost matrix is not square");
    for (double c : row) {
      if (!(c >= 0.0)) throw Error(ErrorCode::kValidation, "cost matrix has a negative entry");
    }
  }

  // Min-cost flow: source -> supply i -> demand j -> sink.
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };
  const std::size_t source = 2 * n;
  const std::size_t sink = 2 * n + 1;
  std::vector<std::vector<Edge>> g(2 * n + 2);
  auto add = [&g](std::size_t u, std::size_t v, double cap, double c) {
    g[u].push_back({v, cap, c, g[v].size()});
    g[v].push_back({u, 0.0, -c, g[u].size() - 1});
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kEps = 1e-15;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] > kEps) add(source, i, p[i], 0.0);
    if (q[i] > kEps) add(n + i, sink, q[i], 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] <= kEps) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (q[j] > kEps) add(i, n + j, kInf, cost[i][j]);
    }
  }

  double total = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    std::vector<double> dist(g.size(), kInf);
    std::vector<std::pair<std::size_t, std::size_t>> parent(g.size(), {SIZE_MAX, 0});
    dist[source] = 0.0;
    // Bellman-Ford; residual graph has negative reverse edges.
    for (std::size_t round = 0; round < g.size(); ++round) {
      bool changed = false;
      for (std::size_t u = 0; u < g.size(); ++u) {
        if (dist[u] == kInf) continue;
        for (std::size_t k = 0; k < g[u].size(); ++k) {
          const auto& e = g[u][k];
          if (e.cap > kEps && dist[u] + e.cost < dist[e.to] - 1e-15) {
            dist[e.to] = dist[u] + e.cost;
            parent[e.to] = {u, k};
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == kInf) break;
    double push = kInf;
    for (std::size_t v = sink; v != source; v = parent[v].first) {
      const auto [u, k] = parent[v];
      push = std::min(push, g[u][k].cap);
    }
    for (std::size_t v = sink; v != source; v = parent[v].first) {
      const auto [u, k] = parent[v];
      auto& e = g[u][k];
      e.cap -= push;
      g[e.to][e.rev].cap += push;
    }
    total += push * dist[sink];
  }
  return total;
}

double cross_entropy(const PredictionSet& p, const PredictionSet& q) {
  const auto a = checked_align(p, q);
  return ce(a.p, a.q);
}

double kl_divergence(const PredictionSet& p, const PredictionSet& q) {
  const auto a = checked_align(p, q);
  return kl(a.p, a.q);
}

double jensen_shannon(const PredictionSet& p, const PredictionSet& q) {
  const auto a = checked_align(p, q);
  return jsd(a.p, a.q);
}

double wasserstein(const PredictionSet& p, const PredictionSet& q, const GroundDistance* ground) {
  const auto a = checked_align(p, q);
  if (ground == nullptr) return w1_unit(a.p, a.q);
  return earth_movers_distance(a.p, a.q, ground_matrix(a, *ground));
}

Divergences divergences(const PredictionSet& p, const PredictionSet& q,
                        const GroundDistance* ground) {
  const auto a = checked_align(p, q);
  Divergences d;
  d.cross_entropy = ce(a.p, a.q);
  d.kl_pq = kl(a.p, a.q);
  d.kl_qp = kl(a.q, a.p);
  d.jsd = jsd(a.p, a.q);
  d.wasserstein =
      ground == nullptr ? w1_unit(a.p, a.q) : earth_movers_distance(a.p, a.q, ground_matrix(a, *ground));
  return d;
}

std::vector<std::vector<double>> agreement_coupling(const std::vector<double>& p,
                                                    const std::vector<double>& q) {
  const std::size_t n = p.size();
  std::vector<std::vector<double>> joint(n, std::vector<double>(n, 0.0));
  std::vector<double> rp(n), rq(n);
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double agree = std::min(p[i], q[i]);
    joint[i][i] = agree;
    rp[i] = p[i] - agree;
    rq[i] = q[i] - agree;
    sp += rp[i];
    sq += rq[i];
  }
  const double leftover = 0.5 * (sp + sq);
  if (sp > 0.0 && sq > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rp[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        joint[i][j] += (rp[i] / sp) * (rq[j] / sq) * leftover;
      }
    }
  }
  return joint;
}

double normalized_mutual_information(const PredictionSet& p, const PredictionSet& q) {
  const auto a = checked_align(p, q);
  const double hp = entropy(a.p);
  const double hq = entropy(a.q);
  if (hp <= 0.0 || hq <= 0.0) return 0.0;
  const auto joint = agreement_coupling(a.p, a.q);
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    for (std::size_t j = 0; j < joint.size(); ++j) {
      const double v = joint[i][j];
      if (v > 0.0) mi += v * log2_safe(v / (a.p[i] * a.q[j]));
    }
  }
  return std::clamp(mi / std::max(1e-12, std::sqrt(hp * hq)), 0.0, 1.0);
}

void ConvergenceThresholds::validate() const {
  if (!(eps_self >= 0.0) || !(eps_pair >= 0.0) || !(crit_floor >= 0.0 && crit_floor <= 1.0)) {
    throw Error(ErrorCode::kValidation, "convergence thresholds must be non-negative");
  }
  if (min_rounds < 1) throw Error(ErrorCode::kValidation, "min_rounds must be >= 1");
}

MetricSnapshot compute_snapshot(
    int round_index, const std::vector<std::pair<std::string, PredictionSet>>& distributions) {
  MetricSnapshot s;
  s.round_index = round_index;
  s.distributions = distributions;
  for (const auto& [agent, dist] : distributions) s.per_agent_entropy[agent] = entropy(dist);
  int pairs = 0;
  for (std::size_t i = 0; i < distributions.size(); ++i) {
    for (std::size_t j = i + 1; j < distributions.size(); ++j) {
      const auto& p = distributions[i].second;
      const auto& q = distributions[j].second;
      const auto d = divergences(p, q);
      s.cross_entropy += d.cross_entropy;
      s.kl_pq += d.kl_pq;
      s.kl_qp += d.kl_qp;
      s.jsd += d.jsd;
      s.wasserstein += d.wasserstein;
      s.nmi += normalized_mutual_information(p, q);
      ++pairs;
    }
  }
  if (pairs > 1) {
    const double n = pairs;
    s.cross_entropy /= n;
    s.kl_pq /= n;
    s.kl_qp /= n;
    s.jsd /= n;
    s.wasserstein /= n;
    s.nmi /= n;
  }
  return s;
}

std::string_view to_string(ConvergenceDecision d) {
  switch (d) {
    case ConvergenceDecision::kContinue: return "continue";
    case ConvergenceDecision::kConverged: return "converged";
    case ConvergenceDecision::kMaxRounds: return "max_rounds";
  }
  return "continue";
}

namespace {

const PredictionSet* find_dist(const MetricSnapshot& s, const std::string& agent) {
  for (const auto& [id, dist] : s.distributions) {
    if (id == agent) return &dist;
  }
  return nullptr;
}

bool converged(const std::vector<MetricSnapshot>& history,
               const std::map<std::string, double>& crit_scores, const ConvergenceThresholds& th,
               int completed_rounds, const std::vector<std::string>& expected_agents) {
  if (completed_rounds < th.min_rounds || history.size() < 2) return false;
  const auto& latest = history.back();
  const auto& previous = history[history.size() - 2];
  std::vector<std::string> agents = expected_agents;
  if (agents.empty()) {
    for (const auto& [id, dist] : latest.distributions) agents.push_back(id);
  }
  if (agents.size() < 2) return false;

  std::vector<const PredictionSet*> now;
  for (const auto& agent : agents) {
    const auto* cur = find_dist(latest, agent);
    const auto* prev = find_dist(previous, agent);
    if (cur == nullptr || prev == nullptr) return false;
    if (jensen_shannon(*prev, *cur) > th.eps_self) return false;
    now.push_back(cur);
  }
  for (std::size_t i = 0; i < now.size(); ++i) {
    for (std::size_t j = i + 1; j < now.size(); ++j) {
      if (jensen_shannon(*now[i], *now[j]) > th.eps_pair) return false;
    }
  }
  for (const auto& [agent, score] : crit_scores) {
    if (score < th.crit_floor) return false;
  }
  if (th.crit_floor > 0.0) {
    for (const auto& agent : agents) {
      if (!crit_scores.count(agent)) return false;
    }
  }
  return true;
}

}  // namespace

ConvergenceDecision convergence_check(const std::vector<MetricSnapshot>& history,
                                      const std::map<std::string, double>& crit_scores,
                                      const ConvergenceThresholds& th, int completed_rounds,
                                      int k_max, const std::vector<std::string>& expected_agents) {
  if (converged(history, crit_scores, th, completed_rounds, expected_agents)) {
    return ConvergenceDecision::kConverged;
  }
  if (completed_rounds >= k_max) return ConvergenceDecision::kMaxRounds;
  return ConvergenceDecision::kContinue;
}

}  // namespace dialectic
