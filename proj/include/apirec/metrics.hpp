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

#pragma once

#include <span>
#include <string>
#include <vector>

#include "apirec/corpus.hpp"

namespace apirec {

using Tokens = std::vector<std::string>;

struct Fraction {
  long numerator = 0;
  long denominator = 0;
  double value() const {
    return denominator == 0 ? 0.0 : static_cast<double>(numerator) / static_cast<double>(denominator);
  }
};

// Clipped n-gram precision. 0/0 when the candidate has no n-grams.
Fraction modified_precision(std::span<const std::string> candidate,
                            std::span<const std::string> reference, int n);

// 1 when c >= r, exp(1 - r/c) when 0 < c < r, and 0 when c == 0.
double brevity_penalty(long candidate_len, long reference_len);

struct BleuOptions {
  int max_order = 4;
  // Adds one to numerator and denominator of orders >= 2.
  bool smooth = false;
};

struct BleuReport {
  // cumulative[k-1] is BLEU-k with uniform weights 1/k over orders 1..k.
  std::vector<double> cumulative;
  std::vector<Fraction> precisions;
  double brevity_penalty = 0.0;
  long candidate_len = 0;
  long reference_len = 0;

  double bleu(int order) const { return cumulative.at(static_cast<std::size_t>(order - 1)); }
};

// Sufficient statistics; sentence and corpus scores are both derived from
// sums of these.
struct BleuStats {
  std::vector<Fraction> precisions;
  long candidate_len = 0;
  long reference_len = 0;

  void add(const BleuStats& other);
};

BleuStats bleu_stats(std::span<const std::string> candidate, std::span<const std::string> reference,
                     int max_order);
BleuReport bleu_from_stats(const BleuStats& stats, const BleuOptions& options = {});

BleuReport bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
                const BleuOptions& options = {});

struct ScoredPair {
  Tokens candidate;
  Tokens reference;
};

// Counts and lengths are summed over the corpus before the geometric mean.
BleuReport corpus_bleu(std::span<const ScoredPair> pairs, const BleuOptions& options = {});
// Arithmetic mean of sentence-level cumulative scores.
std::vector<double> mean_sentence_bleu(std::span<const ScoredPair> pairs,
                                       const BleuOptions& options = {});

struct PRReport {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t matched = 0;
  std::size_t predicted_size = 0;
  std::size_t target_size = 0;
};

// On distinct API sets. Precision is 0 for an empty prediction.
PRReport precision_recall(const ApiSequence& predicted, const ApiSequence& target);

enum class MatchCategory { kAllMatch, kPartialMatch, kNoMatch };

std::string to_string(MatchCategory category);
MatchCategory parse_match_category(std::string_view text);

struct MatchDistribution {
  std::size_t all = 0;
  std::size_t partial = 0;
  std::size_t none = 0;

  std::size_t total() const { return all + partial + none; }
  double all_fraction() const { return static_cast<double>(all) / static_cast<double>(total()); }
  double partial_fraction() const {
    return static_cast<double>(partial) / static_cast<double>(total());
  }
  double none_fraction() const { return static_cast<double>(none) / static_cast<double>(total()); }
};

// Throws DataError on empty input.
MatchDistribution match_distribution(std::span<const MatchCategory> categories);

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of the first sample
  double p_value = 1.0;
  bool exact = false;
};

// Two-sided. Exact permutation distribution over midranks when both samples
// have at most 8 values, otherwise the tie-corrected normal approximation
// with continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

}  // namespace apirec
