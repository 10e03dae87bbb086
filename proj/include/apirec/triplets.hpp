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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "apirec/corpus.hpp"

namespace apirec {

// Share of an annotation's distinct target APIs that a post's answer
// mentions. Kept as an exact ratio; value() is the double view.
struct OverlapScore {
  std::vector<ApiCall> matched;  // sorted
  std::size_t target_size = 0;

  double value() const {
    return static_cast<double>(matched.size()) / static_cast<double>(target_size);
  }
};

// Throws DataError when `target` is empty.
OverlapScore overlap_rate(const ApiSequence& target, const QAPost& post);

struct ScoredPost {
  const QAPost* post;
  double rate;
};

struct Triplet {
  std::string anchor;
  std::string positive;
  std::string negative;
  std::string positive_post_id;
  std::string negative_post_id;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct LabeledPair {
  std::string left;
  std::string right;
  int label = 0;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

struct TripletParams {
  double threshold = 0.75;  // positives: rate >= threshold
  double max_rate = 0.01;   // negatives: rate < max_rate
  int positives = 10;       // p
  int negatives = 10;       // n
};

// Posts with rate >= threshold, ordered by (rate desc, id asc).
std::vector<ScoredPost> find_positives(const AnnotationPair& pair, const std::vector<QAPost>& posts,
                                       double threshold = 0.75);

// Uniform sample without replacement of `count` posts with rate < max_rate.
// Returns every eligible post (in input order) if fewer than `count` qualify.
std::vector<const QAPost*> find_negatives(const AnnotationPair& pair,
                                          const std::vector<QAPost>& posts, double max_rate,
                                          int count, std::uint64_t seed);

// min(p, |positives|) x min(n, |negatives|) triplets. Positives beyond p are
// subsampled. The RNG stream is derived from (seed, pair.id).
std::vector<Triplet> generate_triplets(const AnnotationPair& pair, const std::vector<QAPost>& posts,
                                       const TripletParams& params, std::uint64_t seed);

struct MiningResult {
  std::vector<Triplet> triplets;
  std::vector<std::string> discarded_ids;  // pairs with no positive post
};

MiningResult mine_triplets(const std::vector<AnnotationPair>& pairs,
                           const std::vector<QAPost>& posts, const TripletParams& params,
                           std::uint64_t seed);

// Two labeled pairs per triplet, duplicates removed (first occurrence kept).
std::vector<LabeledPair> to_labeled_pairs(const std::vector<Triplet>& triplets);

void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets);
std::vector<Triplet> load_triplets(const std::filesystem::path& path);
void write_labeled_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs);
std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path);

}  // namespace apirec
