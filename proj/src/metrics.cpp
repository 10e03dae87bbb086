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

#include "apirec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <numeric>

#include "apirec/error.hpp"

namespace apirec {
namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts count_ngrams(std::span<const std::string> tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                      tokens.begin() + static_cast<long>(i) + n)];
  }
  return counts;
}

double cumulative_score(const std::vector<Fraction>& precisions, int order, double bp,
                        bool smooth) {
  double log_sum = 0.0;
  for (int k = 1; k <= order; ++k) {
    Fraction p = precisions[static_cast<std::size_t>(k - 1)];
    if (smooth && k >= 2) {
      ++p.numerator;
      ++p.denominator;
    }
    if (p.numerator == 0 || p.denominator == 0) return 0.0;
    log_sum += std::log(p.value()) / order;
  }
  return bp * std::exp(log_sum);
}

}  // namespace

Fraction modified_precision(std::span<const std::string> candidate,
                            std::span<const std::string> reference, int n) {
  if (n < 1) throw UsageError("n-gram order must be >= 1");
  const NgramCounts cand = count_ngrams(candidate, n);
  const NgramCounts ref = count_ngrams(reference, n);
  Fraction f;
  for (const auto& [gram, count] : cand) {
    f.denominator += count;
    auto it = ref.find(gram);
    if (it != ref.end()) f.numerator += std::min(count, it->second);
  }
  return f;
}

double brevity_penalty(long candidate_len, long reference_len) {
  if (candidate_len <= 0) return 0.0;
  if (candidate_len >= reference_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(reference_len) / static_cast<double>(candidate_len));
}

void BleuStats::add(const BleuStats& other) {
  if (precisions.empty()) precisions.resize(other.precisions.size());
  if (precisions.size() != other.precisions.size()) throw Error("BLEU order mismatch");
  for (std::size_t i = 0; i < precisions.size(); ++i) {
    precisions[i].numerator += other.precisions[i].numerator;
    precisions[i].denominator += other.precisions[i].denominator;
  }
  candidate_len += other.candidate_len;
  reference_len += other.reference_len;
}

BleuStats bleu_stats(std::span<const std::string> candidate, std::span<const std::string> reference,
                     int max_order) {
  if (max_order < 1) throw UsageError("BLEU order must be >= 1");
  BleuStats stats;
  for (int n = 1; n <= max_order; ++n) {
    stats.precisions.push_back(modified_precision(candidate, reference, n));
  }
  stats.candidate_len = static_cast<long>(candidate.size());
  stats.reference_len = static_cast<long>(reference.size());
  return stats;
}

BleuReport bleu_from_stats(const BleuStats& stats, const BleuOptions& options) {
  if (static_cast<int>(stats.precisions.size()) < options.max_order) {
    throw Error("BLEU statistics carry fewer orders than requested");
  }
  BleuReport report;
  report.precisions.assign(stats.precisions.begin(),
                           stats.precisions.begin() + options.max_order);
  report.candidate_len = stats.candidate_len;
  report.reference_len = stats.reference_len;
  report.brevity_penalty = brevity_penalty(stats.candidate_len, stats.reference_len);
  for (int order = 1; order <= options.max_order; ++order) {
    report.cumulative.push_back(
        cumulative_score(report.precisions, order, report.brevity_penalty, options.smooth));
  }
  return report;
}

BleuReport bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
                const BleuOptions& options) {
  return bleu_from_stats(bleu_stats(candidate, reference, options.max_order), options);
}

BleuReport corpus_bleu(std::span<const ScoredPair> pairs, const BleuOptions& options) {
  BleuStats total;
  total.precisions.resize(static_cast<std::size_t>(options.max_order));
  for (const auto& pair : pairs) {
    total.add(bleu_stats(pair.candidate, pair.reference, options.max_order));
  }
  return bleu_from_stats(total, options);
}

std::vector<double> mean_sentence_bleu(std::span<const ScoredPair> pairs,
                                       const BleuOptions& options) {
  std::vector<double> sums(static_cast<std::size_t>(options.max_order), 0.0);
  if (pairs.empty()) return sums;
  for (const auto& pair : pairs) {
    const BleuReport report = bleu(pair.candidate, pair.reference, options);
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += report.cumulative[i];
  }
  for (double& s : sums) s /= static_cast<double>(pairs.size());
  return sums;
}

PRReport precision_recall(const ApiSequence& predicted, const ApiSequence& target) {
  const std::vector<ApiCall> pred = predicted.as_set();
  const std::vector<ApiCall> gold = target.as_set();
  std::vector<ApiCall> common;
  std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(),
                        std::back_inserter(common));
  PRReport report;
  report.matched = common.size();
  report.predicted_size = pred.size();
  report.target_size = gold.size();
  report.precision = pred.empty() ? 0.0 : static_cast<double>(common.size()) / pred.size();
  report.recall = gold.empty() ? 0.0 : static_cast<double>(common.size()) / gold.size();
  return report;
}

std::string to_string(MatchCategory category) {
  switch (category) {
    case MatchCategory::kAllMatch:
      return "all";
    case MatchCategory::kPartialMatch:
      return "partial";
    case MatchCategory::kNoMatch:
      return "none";
  }
  return "none";
}

MatchCategory parse_match_category(std::string_view text) {
  if (text == "all") return MatchCategory::kAllMatch;
  if (text == "partial") return MatchCategory::kPartialMatch;
  if (text == "none") return MatchCategory::kNoMatch;
  throw DataError("unknown match category '" + std::string(text) + "'");
}

MatchDistribution match_distribution(std::span<const MatchCategory> categories) {
  if (categories.empty()) throw DataError("match distribution of an empty set");
  MatchDistribution d;
  for (MatchCategory c : categories) {
    switch (c) {
      case MatchCategory::kAllMatch:
        ++d.all;
        break;
      case MatchCategory::kPartialMatch:
        ++d.partial;
        break;
      case MatchCategory::kNoMatch:
        ++d.none;
        break;
    }
  }
  return d;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("Mann-Whitney U needs two non-empty samples");
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t total = n1 + n2;

  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(total);
  for (std::size_t i = 0; i < n1; ++i) pooled.emplace_back(a[i], i);
  for (std::size_t i = 0; i < n2; ++i) pooled.emplace_back(b[i], n1 + i);
  std::sort(pooled.begin(), pooled.end());

  std::vector<double> ranks(total);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[pooled[k].second] = midrank;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  const double d1 = static_cast<double>(n1);
  const double d2 = static_cast<double>(n2);
  const auto u_from_rank_sum = [&](double rank_sum) { return rank_sum - d1 * (d1 + 1.0) / 2.0; };
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum += ranks[i];

  MannWhitneyResult result;
  result.u = u_from_rank_sum(rank_sum);
  const double mu = d1 * d2 / 2.0;
  const double observed = std::abs(result.u - mu);

  if (n1 <= 8 && n2 <= 8) {
    // Every way of assigning n1 of the pooled midranks to the first sample.
    result.exact = true;
    std::vector<std::size_t> pick(n1);
    std::iota(pick.begin(), pick.end(), 0);
    long extreme = 0;
    long count = 0;
    while (true) {
      double sum = 0.0;
      for (std::size_t idx : pick) sum += ranks[idx];
      ++count;
      if (std::abs(u_from_rank_sum(sum) - mu) >= observed - 1e-9) ++extreme;
      std::size_t i = n1;
      while (i > 0 && pick[i - 1] == total - n1 + (i - 1)) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t k = i; k < n1; ++k) pick[k] = pick[k - 1] + 1;
    }
    result.p_value = static_cast<double>(extreme) / static_cast<double>(count);
    return result;
  }

  const double dn = static_cast<double>(total);
  const double variance = d1 * d2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (variance <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double z = std::max(0.0, observed - 0.5) / std::sqrt(variance);
  result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return result;
}

}  // namespace apirec
