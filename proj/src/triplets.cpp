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

#include "apirec/triplets.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <tuple>

#include "apirec/error.hpp"
#include "apirec/hashing.hpp"
#include "jsonl.hpp"

namespace apirec {

using detail::Json;

OverlapScore overlap_rate(const ApiSequence& target, const QAPost& post) {
  if (target.empty()) throw DataError("overlap rate of an empty target");
  OverlapScore score;
  const std::vector<ApiCall> target_set = target.as_set();
  score.target_size = target_set.size();
  std::vector<ApiCall> answer(post.answer_apis);
  std::sort(answer.begin(), answer.end());
  std::set_intersection(target_set.begin(), target_set.end(), answer.begin(), answer.end(),
                        std::back_inserter(score.matched));
  return score;
}

namespace {

std::vector<double> overlap_rates(const AnnotationPair& pair, const std::vector<QAPost>& posts) {
  std::vector<double> rates;
  rates.reserve(posts.size());
  for (const auto& post : posts) rates.push_back(overlap_rate(pair.target, post).value());
  return rates;
}

std::vector<ScoredPost> select_positives(const std::vector<QAPost>& posts,
                                         const std::vector<double>& rates, double threshold) {
  std::vector<ScoredPost> found;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (rates[i] >= threshold) found.push_back({&posts[i], rates[i]});
  }
  std::sort(found.begin(), found.end(), [](const ScoredPost& a, const ScoredPost& b) {
    if (a.rate != b.rate) return a.rate > b.rate;
    return a.post->id < b.post->id;
  });
  return found;
}

std::vector<const QAPost*> select_negatives(const std::vector<QAPost>& posts,
                                            const std::vector<double>& rates, double max_rate,
                                            int count, std::uint64_t seed) {
  if (count < 1) throw UsageError("negative count must be >= 1");
  std::vector<const QAPost*> eligible;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (rates[i] < max_rate) eligible.push_back(&posts[i]);
  }
  if (eligible.size() <= static_cast<std::size_t>(count)) return eligible;
  std::vector<const QAPost*> chosen;
  std::mt19937_64 rng(seed);
  std::sample(eligible.begin(), eligible.end(), std::back_inserter(chosen), count, rng);
  return chosen;
}

}  // namespace

std::vector<ScoredPost> find_positives(const AnnotationPair& pair, const std::vector<QAPost>& posts,
                                       double threshold) {
  return select_positives(posts, overlap_rates(pair, posts), threshold);
}

std::vector<const QAPost*> find_negatives(const AnnotationPair& pair,
                                          const std::vector<QAPost>& posts, double max_rate,
                                          int count, std::uint64_t seed) {
  return select_negatives(posts, overlap_rates(pair, posts), max_rate, count, seed);
}

std::vector<Triplet> generate_triplets(const AnnotationPair& pair, const std::vector<QAPost>& posts,
                                       const TripletParams& params, std::uint64_t seed) {
  if (params.positives < 1 || params.negatives < 1) {
    throw UsageError("p and n must be >= 1");
  }
  const std::vector<double> rates = overlap_rates(pair, posts);
  std::vector<ScoredPost> positives = select_positives(posts, rates, params.threshold);
  if (positives.empty()) return {};

  std::mt19937_64 rng(derive_seed(seed, pair.id));
  if (positives.size() > static_cast<std::size_t>(params.positives)) {
    std::vector<ScoredPost> chosen;
    std::sample(positives.begin(), positives.end(), std::back_inserter(chosen), params.positives,
                rng);
    positives = std::move(chosen);
  }
  const std::vector<const QAPost*> negatives =
      select_negatives(posts, rates, params.max_rate, params.negatives, rng());

  std::vector<Triplet> triplets;
  triplets.reserve(positives.size() * negatives.size());
  for (const auto& positive : positives) {
    for (const QAPost* negative : negatives) {
      if (positive.post->id == negative->id) continue;
      triplets.push_back({pair.annotation, positive.post->title, negative->title,
                          positive.post->id, negative->id});
    }
  }
  return triplets;
}

MiningResult mine_triplets(const std::vector<AnnotationPair>& pairs,
                           const std::vector<QAPost>& posts, const TripletParams& params,
                           std::uint64_t seed) {
  MiningResult result;
  for (const auto& pair : pairs) {
    std::vector<Triplet> triplets = generate_triplets(pair, posts, params, seed);
    if (triplets.empty()) {
      result.discarded_ids.push_back(pair.id);
      continue;
    }
    std::move(triplets.begin(), triplets.end(), std::back_inserter(result.triplets));
  }
  return result;
}

std::vector<LabeledPair> to_labeled_pairs(const std::vector<Triplet>& triplets) {
  std::set<std::tuple<std::string, std::string, int>> seen;
  std::vector<LabeledPair> pairs;
  auto emit = [&](const std::string& left, const std::string& right, int label) {
    if (seen.emplace(left, right, label).second) pairs.push_back({left, right, label});
  };
  for (const auto& t : triplets) {
    emit(t.anchor, t.positive, 1);
    emit(t.anchor, t.negative, 0);
  }
  return pairs;
}

void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets) {
  detail::write_jsonl<Triplet>(path, triplets, [](const Triplet& t) {
    Json j;
    j["anchor"] = t.anchor;
    j["positive"] = t.positive;
    j["negative"] = t.negative;
    j["positive_post_id"] = t.positive_post_id;
    j["negative_post_id"] = t.negative_post_id;
    return j;
  });
}

std::vector<Triplet> load_triplets(const std::filesystem::path& path) {
  return detail::load_jsonl<Triplet>(path, [](const Json& j) {
    return Triplet{j.at("anchor").get<std::string>(), j.at("positive").get<std::string>(),
                   j.at("negative").get<std::string>(), j.at("positive_post_id").get<std::string>(),
                   j.at("negative_post_id").get<std::string>()};
  });
}

void write_labeled_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs) {
  detail::write_jsonl<LabeledPair>(path, pairs, [](const LabeledPair& p) {
    Json j;
    j["left"] = p.left;
    j["right"] = p.right;
    j["label"] = p.label;
    return j;
  });
}

std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path) {
  return detail::load_jsonl<LabeledPair>(path, [](const Json& j) {
    const int label = j.at("label").get<int>();
    if (label != 0 && label != 1) throw DataError("label must be 0 or 1");
    return LabeledPair{j.at("left").get<std::string>(), j.at("right").get<std::string>(), label};
  });
}

}  // namespace apirec
