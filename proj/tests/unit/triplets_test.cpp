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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "apirec/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace apirec {
namespace {

using testing::ScratchDir;
using testing::post;
using testing::seq;

const ApiSequence kParseTarget =
    seq({"Integer.parseInt", "Long.parseLong", "Float.parseFloat", "Double.parseDouble"});

TEST(OverlapRate, WorkedExamples) {
  const auto three = overlap_rate(kParseTarget, post("1", "t", {"Float.parseFloat", "Integer.parseInt",
                                                                "Double.parseDouble"}));
  EXPECT_EQ(three.value(), 0.75);
  EXPECT_EQ(three.matched.size(), 3u);
  EXPECT_EQ(three.target_size, 4u);
  EXPECT_EQ(overlap_rate(kParseTarget, post("2", "t", {"Integer.parseInt"})).value(), 0.25);
  EXPECT_EQ(overlap_rate(kParseTarget, post("3", "t", {"String.valueOf"})).value(), 0.0);
}

TEST(OverlapRate, DuplicatesInTargetCountOnce) {
  EXPECT_EQ(overlap_rate(seq({"A.a", "A.a", "B.b"}), post("1", "t", {"A.a"})).value(), 0.5);
}

TEST(OverlapRate, EmptyTargetIsError) {
  EXPECT_THROW(overlap_rate(ApiSequence(), post("1", "t", {"A.a"})), DataError);
}

TEST(OverlapRate, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    for (int i = 0; i < 30; ++i) {
      std::vector<std::string> target;
      std::vector<ApiCall> calls;
      for (int k = 0, len = 1 + static_cast<int>(rng() % 5); k < len; ++k) {
        target.push_back("C" + std::to_string(rng() % 12) + ".m");
        calls.push_back(parse_api_call(target.back()));
      }
      std::vector<std::string> answer;
      QAPost p{"p", "t", {}};
      for (int k = 0, len = static_cast<int>(rng() % 7); k < len; ++k) {
        const std::string a = "C" + std::to_string(rng() % 12) + ".m";
        if (std::find(answer.begin(), answer.end(), a) != answer.end()) continue;
        answer.push_back(a);
        p.answer_apis.push_back(parse_api_call(a));
      }
      const OverlapScore s = overlap_rate(ApiSequence(calls), p);
      EXPECT_EQ(s.value(), testing::overlap_oracle(target, answer));
      for (const auto& m : s.matched) {
        EXPECT_NE(std::find(p.answer_apis.begin(), p.answer_apis.end(), m), p.answer_apis.end());
        EXPECT_NE(std::find(calls.begin(), calls.end(), m), calls.end());
      }
    }
  }
}

TEST(FindPositives, InclusiveThresholdSortedByRateThenId) {
  const AnnotationPair pair{"a", "parse numbers", kParseTarget};
  const std::vector<QAPost> posts = {
      post("z", "t", {"Float.parseFloat", "Integer.parseInt", "Double.parseDouble"}),
      post("b", "t", {"Integer.parseInt"}),
      post("y", "t", {"Float.parseFloat", "Integer.parseInt", "Double.parseDouble", "Long.parseLong"}),
      post("c", "t", {"Float.parseFloat", "Integer.parseInt", "Double.parseDouble"})};
  const auto found = find_positives(pair, posts);
  ASSERT_EQ(found.size(), 3u);
  EXPECT_EQ(found[0].post->id, "y");
  EXPECT_EQ(found[1].post->id, "c");
  EXPECT_EQ(found[2].post->id, "z");
  EXPECT_EQ(found[2].rate, 0.75);
  EXPECT_TRUE(find_positives(pair, {post("b", "t", {"Integer.parseInt"})}).empty());
}

TEST(FindNegatives, SamplesDistinctEligiblePosts) {
  const AnnotationPair pair{"a", "x", seq({"A.a"})};
  std::vector<QAPost> posts;
  for (int i = 0; i < 50; ++i) posts.push_back(post("n" + std::to_string(i), "t", {"B.b"}));
  posts.push_back(post("hit", "t", {"A.a"}));
  const auto negatives = find_negatives(pair, posts, 0.01, 10, 3);
  ASSERT_EQ(negatives.size(), 10u);
  std::set<std::string> ids;
  for (const auto* p : negatives) {
    ids.insert(p->id);
    EXPECT_NE(p->id, "hit");
  }
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(find_negatives(pair, posts, 0.01, 10, 3), negatives);
  EXPECT_EQ(find_negatives(pair, posts, 0.01, 100, 3).size(), 50u);
  EXPECT_THROW(find_negatives(pair, posts, 0.01, 0, 3), UsageError);
}

TEST(FindNegatives, RateBelowMaxIsEligible) {
  // 1 of 200 distinct target APIs mentioned: rate 0.005.
  std::vector<ApiCall> calls;
  for (int i = 0; i < 200; ++i) calls.emplace_back("C" + std::to_string(i), "m");
  const AnnotationPair pair{"a", "x", ApiSequence(calls)};
  const std::vector<QAPost> posts = {post("low", "t", {"C0.m"}),
                                     post("quarter", "t", {"C0.m", "C1.m", "C2.m"})};
  ASSERT_DOUBLE_EQ(overlap_rate(pair.target, posts[0]).value(), 0.005);
  const auto negatives = find_negatives(pair, posts, 0.01, 10, 1);
  ASSERT_EQ(negatives.size(), 1u);
  EXPECT_EQ(negatives[0]->id, "low");
  const AnnotationPair small{"b", "x", kParseTarget};
  EXPECT_TRUE(find_negatives(small, {post("q", "t", {"Integer.parseInt"})}, 0.01, 5, 1).empty());
}

// `positives` posts fully matching A.a, `negatives` posts with nothing shared.
std::vector<QAPost> triplet_fixture(int positives, int negatives) {
  std::vector<QAPost> posts;
  for (int i = 0; i < positives; ++i) posts.push_back(post("p" + std::to_string(i), "pos " + std::to_string(i), {"A.a"}));
  for (int i = 0; i < negatives; ++i) posts.push_back(post("n" + std::to_string(i), "neg " + std::to_string(i), {"Z.z"}));
  return posts;
}

TEST(GenerateTriplets, CountIsProductOfClippedSizes) {
  const AnnotationPair pair{"a", "anchor", seq({"A.a"})};
  for (int pos : {0, 1, 3, 10, 14}) {
    for (int neg : {0, 2, 10, 25}) {
      const auto triplets = generate_triplets(pair, triplet_fixture(pos, neg), {}, 9);
      EXPECT_EQ(triplets.size(), static_cast<std::size_t>(std::min(pos, 10) * std::min(neg, 10)))
          << pos << " positives, " << neg << " negatives";
    }
  }
  EXPECT_EQ(generate_triplets(pair, triplet_fixture(3, 10), {}, 1).size(), 30u);
}

TEST(GenerateTriplets, EveryTripletRespectsThresholds) {
  std::mt19937_64 rng(2);
  std::vector<QAPost> posts;
  for (int i = 0; i < 60; ++i) {
    QAPost p{"q" + std::to_string(i), "title " + std::to_string(i), {}};
    std::set<int> picks;
    for (int k = 0, len = static_cast<int>(rng() % 5); k < len; ++k) picks.insert(static_cast<int>(rng() % 8));
    for (int k : picks) p.answer_apis.emplace_back("K" + std::to_string(k), "m");
    posts.push_back(std::move(p));
  }
  std::map<std::string, const QAPost*> by_id;
  for (const auto& p : posts) by_id[p.id] = &p;
  for (int i = 0; i < 20; ++i) {
    std::vector<ApiCall> calls;
    for (int k = 0, len = 1 + static_cast<int>(rng() % 3); k < len; ++k) calls.emplace_back("K" + std::to_string(rng() % 8), "m");
    const AnnotationPair pair{"a" + std::to_string(i), "anchor", ApiSequence(calls)};
    const TripletParams params;
    const auto triplets = generate_triplets(pair, posts, params, 5);
    EXPECT_EQ(triplets, generate_triplets(pair, posts, params, 5));
    for (const auto& t : triplets) {
      EXPECT_NE(t.positive_post_id, t.negative_post_id);
      EXPECT_GE(overlap_rate(pair.target, *by_id.at(t.positive_post_id)).value(), params.threshold);
      EXPECT_LT(overlap_rate(pair.target, *by_id.at(t.negative_post_id)).value(), params.max_rate);
      EXPECT_FALSE(t.anchor.empty() || t.positive.empty() || t.negative.empty());
    }
  }
}

TEST(MineTriplets, DiscardsPairsWithoutPositives) {
  const std::vector<AnnotationPair> pairs = {{"keep", "x", seq({"A.a"})}, {"drop", "y", seq({"Q.q"})}};
  const MiningResult r = mine_triplets(pairs, triplet_fixture(2, 4), {}, 1);
  EXPECT_EQ(r.triplets.size(), 8u);
  ASSERT_EQ(r.discarded_ids.size(), 1u);
  EXPECT_EQ(r.discarded_ids[0], "drop");
}

TEST(ToLabeledPairs, DeduplicatesAcrossTriplets) {
  const AnnotationPair pair{"a", "anchor", seq({"A.a"})};
  const auto triplets = generate_triplets(pair, triplet_fixture(10, 10), {}, 1);
  ASSERT_EQ(triplets.size(), 100u);
  // Oracle: distinct (right, label) combinations by brute force.
  std::set<std::pair<std::string, int>> expected;
  for (const auto& t : triplets) {
    expected.emplace(t.positive, 1);
    expected.emplace(t.negative, 0);
  }
  const auto labeled = to_labeled_pairs(triplets);
  EXPECT_EQ(labeled.size(), expected.size());
  EXPECT_EQ(labeled.size(), 20u);
  EXPECT_EQ(to_labeled_pairs({triplets[0]}).size(), 2u);
  EXPECT_TRUE(to_labeled_pairs({}).empty());
}

TEST(TripletFiles, RoundTrip) {
  ScratchDir dir;
  const AnnotationPair pair{"a", "anchor \"quoted\"", seq({"A.a"})};
  const auto triplets = generate_triplets(pair, triplet_fixture(3, 4), {}, 1);
  write_triplets(dir / "t.jsonl", triplets);
  EXPECT_EQ(load_triplets(dir / "t.jsonl"), triplets);
  const auto labeled = to_labeled_pairs(triplets);
  write_labeled_pairs(dir / "l.jsonl", labeled);
  EXPECT_EQ(load_labeled_pairs(dir / "l.jsonl"), labeled);
}

}  // namespace
}  // namespace apirec
