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

#include "apirec/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apirec/error.hpp"

namespace apirec {
namespace {

double ranking_score(const Hypothesis& h, bool length_normalize) {
  if (!length_normalize || h.step_log_probs.empty()) return h.log_prob;
  return h.log_prob / static_cast<double>(h.step_log_probs.size());
}

void check_distribution(const std::vector<double>& dist, int vocab_size) {
  if (static_cast<int>(dist.size()) != vocab_size) {
    throw Error("decoder returned a distribution of the wrong size");
  }
}

}  // namespace

std::vector<std::vector<double>> NextTokenModel::step_distributions(
    std::span<const std::vector<int>> prefixes) const {
  std::vector<std::vector<double>> out;
  out.reserve(prefixes.size());
  for (const auto& p : prefixes) out.push_back(step_distribution(p));
  return out;
}

Hypothesis greedy_decode(const NextTokenModel& model, int max_decode_steps) {
  if (max_decode_steps < 1) throw UsageError("max_decode_steps must be >= 1");
  Hypothesis h;
  for (int step = 0; step < max_decode_steps; ++step) {
    const std::vector<double> dist = model.step_distribution(h.tokens);
    check_distribution(dist, model.vocab_size());
    // max_element returns the first maximum, i.e. the lowest id.
    const auto best = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    const double lp = std::log(dist[static_cast<std::size_t>(best)]);
    h.log_prob += lp;
    h.step_log_probs.push_back(lp);
    if (best == model.end_token()) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(best);
  }
  return h;
}

std::vector<Hypothesis> beam_search(const NextTokenModel& model, const BeamOptions& options) {
  if (options.beam_size < 1) throw UsageError("beam_size must be >= 1");
  if (options.max_decode_steps < 1) throw UsageError("max_decode_steps must be >= 1");
  const int end = model.end_token();
  const auto width = static_cast<std::size_t>(options.beam_size);

  auto better = [&](const Hypothesis& a, const Hypothesis& b) {
    const double sa = ranking_score(a, options.length_normalize);
    const double sb = ranking_score(b, options.length_normalize);
    if (sa != sb) return sa > sb;
    // Finished hypotheses compare as if the end token were appended.
    auto ta = a.tokens;
    auto tb = b.tokens;
    if (a.finished) ta.push_back(end);
    if (b.finished) tb.push_back(end);
    return ta < tb;
  };

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> pool;
  for (int step = 0; step < options.max_decode_steps && !live.empty(); ++step) {
    std::vector<std::vector<int>> prefixes;
    prefixes.reserve(live.size());
    for (const auto& h : live) prefixes.push_back(h.tokens);
    const auto dists = model.step_distributions(prefixes);

    // Cheap pre-selection: each hypothesis contributes at most `width`
    // expansions, which is all the global top-`width` can use.
    std::vector<Hypothesis> expansions;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto& dist = dists[i];
      check_distribution(dist, model.vocab_size());
      std::vector<int> ids(dist.size());
      for (std::size_t v = 0; v < ids.size(); ++v) ids[v] = static_cast<int>(v);
      const std::size_t take = std::min(width, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(take), ids.end(),
                        [&](int a, int b) {
                          if (dist[a] != dist[b]) return dist[a] > dist[b];
                          return a < b;
                        });
      for (std::size_t j = 0; j < take; ++j) {
        const int token = ids[j];
        const double p = dist[static_cast<std::size_t>(token)];
        if (!(p > 0.0)) continue;
        Hypothesis next = live[i];
        const double lp = std::log(p);
        next.log_prob += lp;
        next.step_log_probs.push_back(lp);
        if (token == end) {
          next.finished = true;
        } else {
          next.tokens.push_back(token);
        }
        expansions.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(width, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<long>(keep),
                      expansions.end(), better);
    expansions.resize(keep);

    live.clear();
    for (auto& h : expansions) {
      if (h.finished) {
        pool.push_back(std::move(h));
      } else {
        live.push_back(std::move(h));
      }
    }
  }
  for (auto& h : live) pool.push_back(std::move(h));
  std::sort(pool.begin(), pool.end(), better);
  return pool;
}

}  // namespace apirec
