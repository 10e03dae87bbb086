// Copyright 2026 The apirec Authors.
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

// Independent reference implementations used by the tests. They are written
// from the metric definitions directly and share no code with the library.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace apirec::testing {

// |target ∩ answer| / |distinct target| by nested loops over raw strings.
inline double overlap_oracle(const std::vector<std::string>& target,
                             const std::vector<std::string>& answer) {
  std::vector<std::string> distinct;
  for (const auto& t : target) {
    bool seen = false;
    for (const auto& d : distinct) seen = seen || d == t;
    if (!seen) distinct.push_back(t);
  }
  std::size_t hits = 0;
  for (const auto& d : distinct) {
    for (const auto& a : answer) {
      if (a == d) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(distinct.size());
}

// Clipped n-gram precision counted with maps of joined n-grams.
inline std::pair<double, double> ngram_counts(const std::vector<std::string>& cand,
                                              const std::vector<std::string>& ref, int n) {
  auto grams = [n](const std::vector<std::string>& s) {
    std::map<std::string, int> out;
    for (int i = 0; i + n <= static_cast<int>(s.size()); ++i) {
      std::string key;
      for (int j = 0; j < n; ++j) key += s[static_cast<std::size_t>(i + j)] + '\x1f';
      ++out[key];
    }
    return out;
  };
  const auto c = grams(cand);
  const auto r = grams(ref);
  double clipped = 0;
  double total = 0;
  for (const auto& [g, k] : c) {
    total += k;
    const auto it = r.find(g);
    clipped += std::min(k, it == r.end() ? 0 : it->second);
  }
  return {clipped, total};
}

inline double bp_oracle(double c, double r) {
  if (c == 0) return 0.0;
  return c >= r ? 1.0 : std::exp(1.0 - r / c);
}

// Corpus BLEU-N: sums clipped counts and lengths, then BP times geometric mean.
inline double corpus_bleu_oracle(const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs,
                                 int order) {
  double c = 0;
  double r = 0;
  double log_sum = 0;
  for (int n = 1; n <= order; ++n) {
    double num = 0;
    double den = 0;
    for (const auto& [cand, ref] : pairs) {
      const auto [a, b] = ngram_counts(cand, ref, n);
      num += a;
      den += b;
    }
    if (num == 0 || den == 0) return 0.0;
    log_sum += std::log(num / den) / order;
  }
  for (const auto& [cand, ref] : pairs) {
    c += static_cast<double>(cand.size());
    r += static_cast<double>(ref.size());
  }
  return bp_oracle(c, r) * std::exp(log_sum);
}

// Two-sided exact Mann-Whitney p-value by enumerating every subset of pooled
// positions (bitmask), using U = #{(x,y): x > y} + 0.5 #{x = y}.
inline double mann_whitney_exact_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const int n = static_cast<int>(pooled.size());
  const int n1 = static_cast<int>(a.size());
  auto u_of = [&](const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0;
    for (double xi : x) {
      for (double yj : y) u += xi > yj ? 1.0 : (xi == yj ? 0.5 : 0.0);
    }
    return u;
  };
  const double mu = static_cast<double>(a.size() * b.size()) / 2.0;
  const double observed = std::abs(u_of(a, b) - mu);
  long extreme = 0;
  long total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != n1) continue;
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < n; ++i) ((mask >> i) & 1u ? x : y).push_back(pooled[static_cast<std::size_t>(i)]);
    ++total;
    if (std::abs(u_of(x, y) - mu) >= observed - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace apirec::testing
