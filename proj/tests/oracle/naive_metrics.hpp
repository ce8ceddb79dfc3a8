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

// Reference implementation of the metric suite written with plain loops over
// label-keyed maps. Shares no code with the library; tests compare the two.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Dist = std::map<std::string, double>;  // case-folded label -> mass

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline Dist make(const std::vector<std::string>& labels, const std::vector<double>& probs) {
  double total = 0;
  for (double v : probs) total += v;
  Dist d;
  for (std::size_t i = 0; i < labels.size(); ++i) d[lower(labels[i])] += probs[i] / total;
  return d;
}

// Both maps extended with zeros to the union of their keys.
inline void unite(Dist& p, Dist& q) {
  for (auto& [k, v] : p) q.emplace(k, 0.0);
  for (auto& [k, v] : q) p.emplace(k, 0.0);
}

inline double log2_(double x) { return std::log(x) / std::log(2.0); }

inline double H(const Dist& p) {
  double h = 0;
  for (auto& [k, v] : p) {
    if (v > 0) h -= v * log2_(v);
  }
  return h;
}

inline double CE(Dist p, Dist q) {
  unite(p, q);
  double s = 0;
  for (auto& [k, v] : p) {
    if (v <= 0) continue;
    double w = q[k] > 0 ? q[k] : 1e-10;
    s -= v * log2_(w);
  }
  return s;
}

inline double KL(Dist p, Dist q) {
  unite(p, q);
  double s = 0;
  for (auto& [k, v] : p) {
    if (v <= 0) continue;
    double w = q[k] > 0 ? q[k] : 1e-10;
    s += v * (log2_(v) - log2_(w));
  }
  return s;
}

inline double JSD(Dist p, Dist q) {
  unite(p, q);
  Dist m;
  for (auto& [k, v] : p) m[k] = 0.5 * (v + q[k]);
  return H(m) - 0.5 * (H(p) + H(q));
}

inline double W(Dist p, Dist q) {
  unite(p, q);
  double cp = 0, cq = 0, s = 0;
  auto last = std::prev(p.end());
  for (auto it = p.begin(); it != last; ++it) {
    cp += it->second;
    cq += q[it->first];
    s += std::fabs(cp - cq);
  }
  return s;
}

inline double NMI(Dist p, Dist q) {
  unite(p, q);
  std::vector<std::string> keys;
  for (auto& [k, v] : p) keys.push_back(k);
  const std::size_t n = keys.size();
  std::vector<double> a(n), b(n), d(n);
  double shared = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = p[keys[i]];
    b[i] = q[keys[i]];
    d[i] = std::min(a[i], b[i]);
    shared += d[i];
  }
  const double left = 1.0 - shared;
  double mi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double joint = (i == j ? d[i] : 0.0);
      if (left > 1e-15) joint += (a[i] - d[i]) * (b[j] - d[j]) / left;
      if (joint > 0) mi += joint * log2_(joint / (a[i] * b[j]));
    }
  }
  const double hp = H(p), hq = H(q);
  if (hp <= 0 || hq <= 0) return 0.0;
  return mi / std::sqrt(hp * hq);
}

}  // namespace oracle
