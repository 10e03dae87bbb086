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

// Acceptance suite: one test suite per criterion, reported as "ACn PASS" or
// "ACn FAIL" lines after the run.

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "apirec/corpus.hpp"
#include "apirec/decoding.hpp"
#include "apirec/generator.hpp"
#include "apirec/hashing.hpp"
#include "apirec/linker.hpp"
#include "apirec/metrics.hpp"
#include "apirec/pipeline.hpp"
#include "apirec/synthetic.hpp"
#include "apirec/text.hpp"
#include "apirec/triplets.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/toy_models.hpp"

namespace apirec {
namespace {

namespace fs = std::filesystem;
using testing::post;
using testing::read_text;
using testing::ScratchDir;
using testing::seq;
using Tokens = std::vector<std::string>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string api_name(std::mt19937_64& rng, int classes, int methods) {
  return "C" + std::to_string(rng() % static_cast<unsigned>(classes)) + ".m" +
         std::to_string(rng() % static_cast<unsigned>(methods));
}

// ---------------------------------------------------------------- AC1

TEST(AC1_OverlapRate, MatchesNestedLoopOracleAndWorkedValues) {
  const auto start = Clock::now();
  std::mt19937_64 rng(2026);
  std::size_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n_pairs = 1 + static_cast<int>(rng() % 50);
    const int n_posts = 1 + static_cast<int>(rng() % 50);
    std::vector<ApiSequence> targets;
    for (int i = 0; i < n_pairs; ++i) {
      std::vector<ApiCall> calls;
      for (int j = 0, n = 1 + static_cast<int>(rng() % 6); j < n; ++j) calls.push_back(parse_api_call(api_name(rng, 6, 4)));
      targets.emplace_back(std::move(calls));
    }
    std::vector<QAPost> posts;
    for (int i = 0; i < n_posts; ++i) {
      QAPost p{"p" + std::to_string(i), "title", {}};
      for (int j = 0, n = static_cast<int>(rng() % 8); j < n; ++j) p.answer_apis.push_back(parse_api_call(api_name(rng, 6, 4)));
      posts.push_back(std::move(p));
    }
    for (const auto& target : targets) {
      Tokens target_names;
      for (const auto& c : target.calls()) target_names.push_back(c.render());
      for (const auto& p : posts) {
        Tokens answer_names;
        for (const auto& c : p.answer_apis) answer_names.push_back(c.render());
        ASSERT_EQ(overlap_rate(target, p).value(), testing::overlap_oracle(target_names, answer_names));
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000u);

  const ApiSequence four = seq({"A.a", "B.b", "C.c", "D.d"});
  EXPECT_EQ(overlap_rate(four, post("p", "t", {"A.a", "B.b", "C.c", "X.x"})).value(), 0.75);
  EXPECT_EQ(overlap_rate(four, post("p", "t", {"D.d", "Y.y"})).value(), 0.25);
  EXPECT_LT(seconds_since(start), 5.0);
}

// ---------------------------------------------------------------- AC2

// One anchor with target {A.a}, `positives` full-overlap posts and
// `negatives` zero-overlap posts.
std::vector<QAPost> triplet_fixture(int positives, int negatives) {
  std::vector<QAPost> posts;
  for (int i = 0; i < positives; ++i) posts.push_back(post("pos" + std::to_string(i), "pos title", {"A.a", "Z.z"}));
  for (int i = 0; i < negatives; ++i) posts.push_back(post("neg" + std::to_string(i), "neg title", {"N.n"}));
  return posts;
}

TEST(AC2_TripletCounting, HundredAndThirty) {
  const AnnotationPair pair{"a", "anchor", seq({"A.a"})};
  for (int pos : {10, 11, 25}) {
    for (int neg : {10, 40}) {
      EXPECT_EQ(generate_triplets(pair, triplet_fixture(pos, neg), {}, 1).size(), 100u) << pos << "/" << neg;
    }
  }
  EXPECT_EQ(generate_triplets(pair, triplet_fixture(3, 10), {}, 1).size(), 30u);
  EXPECT_EQ(generate_triplets(pair, triplet_fixture(3, 50), {}, 2).size(), 30u);
}

// ---------------------------------------------------------------- AC3

TEST(AC3_Bleu, HandDerivedCasesMatchOracle) {
  const std::vector<std::pair<Tokens, Tokens>> cases = {
      {{"a", "b", "c", "d", "e"}, {"a", "b", "c", "d", "f"}},
      {{"a", "b", "c", "d", "e"}, {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}},
      {{"the", "the", "the", "cat", "sat"}, {"the", "cat", "sat", "on", "mat"}},
      {{"x", "y", "z", "w", "x", "y"}, {"x", "y", "z", "w"}},
      {{"a", "b", "a", "b", "c", "d"}, {"a", "b", "c", "d", "a", "b"}},
  };
  for (const auto& [cand, ref] : cases) {
    const double expected = testing::corpus_bleu_oracle({{cand, ref}}, 4);
    EXPECT_NEAR(bleu(cand, ref).bleu(4), expected, 1e-9);
  }
  EXPECT_NEAR(bleu(cases[0].first, cases[0].second).bleu(4), 0.668740304976422, 1e-9);
  EXPECT_NEAR(bleu(cases[1].first, cases[1].second).brevity_penalty, std::exp(-1.0), 1e-9);
  EXPECT_NEAR(brevity_penalty(5, 10), std::exp(-1.0), 1e-12);
  const Tokens same = {"p", "q", "r", "s", "t"};
  EXPECT_EQ(bleu(same, same).bleu(4), 1.0);
  EXPECT_EQ(bleu(Tokens{"a", "b", "c", "d"}, Tokens{"e", "f", "g", "h"}).bleu(4), 0.0);
}

// ---------------------------------------------------------------- AC4

// Distributions depend only on the step index, not on the prefix.
class StepwiseModel : public NextTokenModel {
 public:
  StepwiseModel(int vocab, int end, std::uint64_t seed) : vocab_(vocab), end_(end) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> e(1.0);
    for (auto& dist : steps_) {
      dist.resize(static_cast<std::size_t>(vocab));
      double total = 0.0;
      for (auto& p : dist) total += (p = std::pow(e(rng), 2.0));
      for (auto& p : dist) p /= total;
    }
  }
  int vocab_size() const override { return vocab_; }
  int end_token() const override { return end_; }
  std::vector<double> step_distribution(std::span<const int> prefix) const override {
    return steps_[std::min<std::size_t>(prefix.size(), steps_.size() - 1)];
  }

 private:
  int vocab_;
  int end_;
  std::array<std::vector<double>, 3> steps_;
};

TEST(AC4_BeamSearch, ExhaustiveOptimumAndGreedyEquivalence) {
  const auto start = Clock::now();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const StepwiseModel stepwise(5, 4, seed);
    const testing::RandomTreeModel tree(5, 4, seed, 2.0);
    for (const NextTokenModel* model : {static_cast<const NextTokenModel*>(&stepwise),
                                        static_cast<const NextTokenModel*>(&tree)}) {
      const auto outcomes = testing::enumerate_outcomes(*model, 3);
      ASSERT_EQ(outcomes.size(), 85u);
      const auto best = std::max_element(outcomes.begin(), outcomes.end(),
                                         [](const auto& a, const auto& b) { return a.log_prob < b.log_prob; });
      for (int beam : {85, 100}) {
        const auto pool = beam_search(*model, {beam, 3, false});
        ASSERT_FALSE(pool.empty());
        EXPECT_EQ(pool.front().tokens, best->tokens) << "seed " << seed;
        EXPECT_NEAR(std::exp(pool.front().log_prob), std::exp(best->log_prob), 1e-12);
      }
    }
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const testing::RandomTreeModel model(5 + static_cast<int>(seed % 6), 1, 1000 + seed, 1.0 + 0.1 * static_cast<double>(seed % 10));
    const Hypothesis g = greedy_decode(model, 8);
    const auto beam = beam_search(model, {1, 8, false});
    EXPECT_EQ(beam.front().tokens, g.tokens) << "seed " << seed;
  }
  EXPECT_LT(seconds_since(start), 30.0);
}

// ---------------------------------------------------------------- AC5

TEST(AC5_LinkerSeparation, SameTopicPostRanksFirst) {
  const auto start = Clock::now();
  ScratchDir dir;
  SyntheticOptions so;
  so.topics = 3;
  so.pairs = 300;
  so.extra_posts = 150;
  so.seed = 5;
  const SyntheticCorpus corpus = make_synthetic_corpus(so);
  ASSERT_GE(corpus.posts.size(), 300u);
  ASSERT_GE(corpus.pairs.size(), 100u);
  fs::create_directories(dir / "data");
  write_pairs(dir / "data" / "pairs.jsonl", corpus.pairs);
  write_posts(dir / "data" / "posts.jsonl", corpus.posts);

  RunConfig config;
  config.pairs_path = dir / "data" / "pairs.jsonl";
  config.posts_path = dir / "data" / "posts.jsonl";
  config.workdir = dir / "work";
  std::ostringstream log;
  Pipeline pipeline(config, log);
  pipeline.prepare();
  pipeline.train_linker();

  const fs::path linker = pipeline.linker_dir();
  const TextEmbedder embedder = TextEmbedder::load(linker / "embedder.bin");
  const PairClassifier classifier = PairClassifier::load(linker / "classifier.bin");
  const auto posts = load_posts(config.workdir / "corpus" / "posts.jsonl");
  const RetrievalIndex index = RetrievalIndex::load(linker / "index.bin", embedder, posts);

  const auto valid = load_pairs(pipeline.split_path("valid"));
  ASSERT_GE(valid.size(), 20u);
  std::size_t same_topic = 0;
  for (const auto& pair : valid) {
    const RankedPost top = link(embedder, classifier, index, pair.annotation, config.top_k);
    same_topic += corpus.topic.at(top.post.id) == corpus.topic.at(pair.id);
  }
  const double rate = static_cast<double>(same_topic) / static_cast<double>(valid.size());
  std::cout << "  same-topic top-1 on validation: " << same_topic << "/" << valid.size() << "\n";
  EXPECT_GE(rate, 0.9);

  // filter_top_k against a brute-force cosine argsort over every post.
  for (const auto& pair : valid) {
    const auto q = embedder.embed(pair.annotation);
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < index.size(); ++i) {
      double dot = 0.0;
      for (Eigen::Index d = 0; d < q.dimension(); ++d) {
        dot += static_cast<double>(index.vectors()(static_cast<Eigen::Index>(i), d)) * q.values()(d);
      }
      all.emplace_back(std::clamp(dot, -1.0, 1.0), index.posts()[i].id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (int k : {1, 10, static_cast<int>(index.size())}) {
      const auto ranked = filter_top_k(embedder, index, pair.annotation, k);
      ASSERT_EQ(ranked.size(), static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) EXPECT_EQ(ranked[static_cast<std::size_t>(i)].post.id, all[static_cast<std::size_t>(i)].second);
    }
  }
  EXPECT_LT(seconds_since(start), 600.0);
}

// ---------------------------------------------------------------- AC6

TEST(AC6_QueryExpansion, TitleAndApisImproveBleu) {
  const auto start = Clock::now();
  ScratchDir dir;
  SyntheticOptions so;
  so.topics = 6;
  so.pairs = 2000;
  so.seed = 1;
  const SyntheticCorpus corpus = make_synthetic_corpus(so);
  fs::create_directories(dir / "data");
  write_pairs(dir / "data" / "pairs.jsonl", corpus.pairs);
  write_posts(dir / "data" / "posts.jsonl", corpus.posts);

  RunConfig config;  // default generator: 6-layer decoder, 30 epochs
  config.pairs_path = dir / "data" / "pairs.jsonl";
  config.posts_path = dir / "data" / "posts.jsonl";
  config.workdir = dir / "work";
  ASSERT_EQ(config.generator.decoder_layers, 6);
  ASSERT_EQ(config.generator.epochs, 30);
  Pipeline pipeline(config, std::cout);
  pipeline.prepare();
  pipeline.train_linker();
  pipeline.link();
  std::vector<fs::path> files;
  for (Variant v : kAllVariants) {
    pipeline.train_generator(v);
    pipeline.predict(v);
    files.push_back(pipeline.predictions_path(v));
  }
  const EvaluationReport report = pipeline.evaluate(files);
  std::cout << report.table();
  ASSERT_EQ(report.rows.size(), 3u);
  const double base = report.rows[0].bleu.bleu(4);
  const double title = report.rows[1].bleu.bleu(4);
  const double full = report.rows[2].bleu.bleu(4);
  ASSERT_EQ(report.rows[2].name, "plus_title_api");
  EXPECT_GT(full, base);
  EXPECT_LE(base, title);
  EXPECT_LE(title, full);
  ASSERT_EQ(report.comparisons.size(), 2u);
  std::cout << "  Mann-Whitney p (plus_title_api vs annotation_only): " << report.comparisons[1].test.p_value
            << "\n";
  EXPECT_LT(report.comparisons[1].test.p_value, 0.05);
  EXPECT_LT(seconds_since(start), 45.0 * 60.0);
}

// ---------------------------------------------------------------- AC7

std::map<std::string, std::string> run_hashes(const fs::path& root) {
  SyntheticOptions so;
  so.topics = 3;
  so.pairs = 100;
  so.seed = 3;
  const SyntheticCorpus corpus = make_synthetic_corpus(so);
  fs::create_directories(root / "data");
  write_pairs(root / "data" / "pairs.jsonl", corpus.pairs);
  write_posts(root / "data" / "posts.jsonl", corpus.posts);
  RunConfig config;
  config.pairs_path = root / "data" / "pairs.jsonl";
  config.posts_path = root / "data" / "posts.jsonl";
  config.workdir = root / "work";
  config.generator.dim = 32;
  config.generator.ff_dim = 64;
  config.generator.decoder_layers = 1;
  config.generator.epochs = 1;
  std::ostringstream log;
  Pipeline pipeline(config, log);
  pipeline.prepare();
  EXPECT_EQ(load_pairs(pipeline.split_path("train")).size(), 80u);
  EXPECT_EQ(load_pairs(pipeline.split_path("valid")).size(), 10u);
  EXPECT_EQ(load_pairs(pipeline.split_path("test")).size(), 10u);
  pipeline.train_linker();
  pipeline.link();
  pipeline.train_generator(Variant::kPlusTitleApi);
  pipeline.predict(Variant::kPlusTitleApi);

  std::map<std::string, std::string> hashes;
  for (const auto& entry : fs::recursive_directory_iterator(config.workdir)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    hashes[fs::relative(entry.path(), config.workdir).generic_string()] = sha256_file(entry.path());
  }
  return hashes;
}

TEST(AC7_Splits, ExactSizesAndDeterministicArtifacts) {
  std::vector<AnnotationPair> pairs;
  for (int i = 0; i < 100; ++i) pairs.push_back({"id" + std::to_string(i), "annotation", seq({"A.a"})});
  const CorpusSplit split = split_corpus(pairs, 42);
  EXPECT_EQ(split.train.size(), 80u);
  EXPECT_EQ(split.valid.size(), 10u);
  EXPECT_EQ(split.test.size(), 10u);

  ScratchDir dir;
  const auto a = run_hashes(dir / "a");
  const auto b = run_hashes(dir / "b");
  EXPECT_GE(a.size(), 15u);
  EXPECT_EQ(a, b);
}

// ---------------------------------------------------------------- AC8

MatchCategory category_oracle(const ApiSequence& target, const QAPost& linked) {
  std::set<std::string> t;
  std::set<std::string> answer;
  for (const auto& c : target.calls()) t.insert(c.render());
  for (const auto& c : linked.answer_apis) answer.insert(c.render());
  std::size_t common = 0;
  for (const auto& x : t) common += answer.count(x);
  if (common == 0) return MatchCategory::kNoMatch;
  return common == t.size() ? MatchCategory::kAllMatch : MatchCategory::kPartialMatch;
}

TEST(AC8_MatchCategories, KnownFixtureAndOracle) {
  std::vector<MatchCategory> categories;
  for (int i = 0; i < 100; ++i) {
    const ApiSequence target = seq({"A.a", "B.b"});
    const QAPost linked = i < 74   ? post("p", "t", {"X.x"})
                          : i < 94 ? post("p", "t", {"B.b", "X.x"})
                                   : post("p", "t", {"B.b", "A.a"});
    categories.push_back(categorize_link(target, linked));
    EXPECT_EQ(categories.back(), category_oracle(target, linked));
  }
  const MatchDistribution d = match_distribution(categories);
  EXPECT_EQ(d.none, 74u);
  EXPECT_EQ(d.partial, 20u);
  EXPECT_EQ(d.all, 6u);
  EXPECT_EQ(d.none_fraction(), 0.74);
  EXPECT_EQ(d.partial_fraction(), 0.20);
  EXPECT_EQ(d.all_fraction(), 0.06);

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<ApiCall> target;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 5); i < n; ++i) target.push_back(parse_api_call(api_name(rng, 4, 3)));
    QAPost linked{"p", "t", {}};
    for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) linked.answer_apis.push_back(parse_api_call(api_name(rng, 4, 3)));
    const ApiSequence t(target);
    EXPECT_EQ(categorize_link(t, linked), category_oracle(t, linked));
  }
}

// ---------------------------------------------------------------- AC9

TEST(AC9_PrecisionRecall, SetOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<ApiCall> predicted;
    std::vector<ApiCall> target;
    for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) predicted.push_back(parse_api_call(api_name(rng, 4, 3)));
    for (int i = 0, n = 1 + static_cast<int>(rng() % 6); i < n; ++i) target.push_back(parse_api_call(api_name(rng, 4, 3)));
    std::set<std::string> p;
    std::set<std::string> t;
    for (const auto& c : predicted) p.insert(c.render());
    for (const auto& c : target) t.insert(c.render());
    std::size_t common = 0;
    for (const auto& x : p) common += t.count(x);
    const PRReport r = precision_recall(ApiSequence(predicted), ApiSequence(target));
    EXPECT_EQ(r.precision, p.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(p.size()));
    EXPECT_EQ(r.recall, static_cast<double>(common) / static_cast<double>(t.size()));
  }
}

// ---------------------------------------------------------------- AC10

TEST(AC10_RoundTrip, DetokenizeInvertsSubtokenize) {
  std::mt19937_64 rng(10);
  const std::string first = "abcdefgXYZ_$";
  const std::string rest = "abcdefgXYZ_$0123456789";
  auto ident = [&] {
    std::string s(1, first[rng() % first.size()]);
    for (int i = 0, n = static_cast<int>(rng() % 10); i < n; ++i) s += rest[rng() % rest.size()];
    return s;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ApiCall> calls;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 8); i < n; ++i) calls.emplace_back(ident(), ident());
    const ApiSequence s(calls);
    const auto d = detokenize_apis(subtokenize(s.render(), SubtokenMode::kApi));
    ASSERT_EQ(d.sequence, s) << s.render();
    EXPECT_EQ(d.malformed, 0);
  }
}

// Prints one verdict line per criterion once all tests have run.
class CriterionReporter : public ::testing::EmptyTestEventListener {
 public:
  void OnTestSuiteEnd(const ::testing::TestSuite& suite) override {
    const std::string name = suite.name();
    verdicts_.emplace_back(name.substr(0, name.find('_')), suite.Passed());
  }
  void OnTestProgramEnd(const ::testing::UnitTest&) override {
    std::cout << "\nAcceptance criteria\n";
    for (const auto& [criterion, passed] : verdicts_) {
      std::cout << criterion << " " << (passed ? "PASS" : "FAIL") << "\n";
    }
  }

 private:
  std::vector<std::pair<std::string, bool>> verdicts_;
};

}  // namespace
}  // namespace apirec

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new apirec::CriterionReporter);
  return RUN_ALL_TESTS();
}
