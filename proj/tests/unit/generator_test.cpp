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

#include "apirec/generator.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "apirec/error.hpp"
#include "apirec/text.hpp"
#include "support/fixtures.hpp"

namespace apirec {
namespace {

using testing::ScratchDir;
using Tokens = std::vector<std::string>;

GeneratorConfig tiny_config() {
  GeneratorConfig c;
  c.dim = 32;
  c.heads = 4;
  c.ff_dim = 64;
  c.encoder_layers = 1;
  c.decoder_layers = 2;
  c.max_len = 16;
  c.max_decode_steps = 16;
  c.epochs = 0;
  c.seed = 3;
  return c;
}

SubtokenVocab letters_vocab(int n = 10) {
  Tokens t;
  for (int i = 0; i < n; ++i) t.push_back("t" + std::to_string(i));
  return SubtokenVocab(t);
}

ExpandedQuery random_query(std::mt19937_64& rng, int vocab_size, int max_len) {
  ExpandedQuery q;
  for (auto& ch : q.channels) {
    for (int i = 0, n = static_cast<int>(rng() % static_cast<unsigned>(max_len + 1)); i < n; ++i) {
      ch.push_back(4 + static_cast<int>(rng() % static_cast<unsigned>(vocab_size - 4)));
    }
  }
  return q;
}

TEST(SubtokenVocab, ReservedIdsAndRoundTrip) {
  const std::vector<Tokens> streams = {{"b", "a", "."}, {"a", "c"}};
  const SubtokenVocab vocab = SubtokenVocab::build(streams);
  EXPECT_EQ(vocab.size(), 8);
  EXPECT_EQ(vocab.token(SubtokenVocab::kPad), "<pad>");
  EXPECT_EQ(vocab.token(SubtokenVocab::kStart), "<s>");
  EXPECT_EQ(vocab.token(SubtokenVocab::kEnd), "</s>");
  EXPECT_EQ(vocab.token(SubtokenVocab::kUnknown), "<unk>");
  for (int id = 0; id < vocab.size(); ++id) EXPECT_EQ(vocab.id(vocab.token(id)), id);
  EXPECT_EQ(vocab.id("zzz"), SubtokenVocab::kUnknown);
  const Tokens known = {"a", ".", "c"};
  EXPECT_EQ(vocab.decode(vocab.encode(known)), known);
  EXPECT_EQ(SubtokenVocab::build(streams, 2).size(), 5);  // only "a" repeats
  EXPECT_THROW(vocab.token(99), Error);
}

TEST(Variant, NamesAndMasking) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("everything"), UsageError);
  const ExpandedRecord r{"1", "parse text", "How to parse", "Integer.parseInt", "Integer.parseInt"};
  const auto a = apply_variant(r, Variant::kAnnotationOnly);
  EXPECT_TRUE(a.title.empty());
  EXPECT_TRUE(a.apis.empty());
  EXPECT_EQ(a.annotation, r.annotation);
  const auto t = apply_variant(r, Variant::kPlusTitle);
  EXPECT_EQ(t.title, r.title);
  EXPECT_TRUE(t.apis.empty());
  const auto full = apply_variant(r, Variant::kPlusTitleApi);
  EXPECT_EQ(full.apis, r.apis);
}

TEST(ExpandedQuery, ChannelsAndHeadTruncation) {
  const ExpandedRecord r{"1", "Parse string to object", "a b c d e f", "Float.parseFloat", "Float.parseFloat"};
  const auto streams = channel_subtokens(r);
  EXPECT_EQ(streams[0], (Tokens{"parse", "string", "to", "object"}));
  EXPECT_EQ(streams[2], (Tokens{"Float", ".", "parseFloat"}));
  EXPECT_EQ(target_subtokens(r), (Tokens{"Float", ".", "parseFloat"}));
  const std::vector<Tokens> all = {streams[0], streams[1], streams[2]};
  const SubtokenVocab vocab = SubtokenVocab::build(all);
  const ExpandedQuery q = make_query(vocab, r, 3);
  for (const auto& ch : q.channels) EXPECT_LE(ch.size(), 3u);
  EXPECT_EQ(vocab.decode(q.title_tokens()), (Tokens{"a", "b", "c"}));
  const ExpandedQuery base = make_query(vocab, apply_variant(r, Variant::kAnnotationOnly), 64);
  EXPECT_TRUE(base.title_tokens().empty());
  EXPECT_TRUE(base.api_tokens().empty());
}

TEST(MakeExamples, RejectsEmptyTargets) {
  const SubtokenVocab vocab = letters_vocab();
  const std::vector<ExpandedRecord> records = {{"bad-record", "x", "", "", ""}};
  try {
    make_examples(vocab, records, 8);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-record"), std::string::npos);
  }
}

TEST(Seq2SeqModel, StepDistributionsNormalise) {
  const SubtokenVocab vocab = letters_vocab(20);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GeneratorConfig config = tiny_config();
    config.seed = seed;
    const Seq2SeqModel model(vocab, config);
    std::mt19937_64 rng(seed);
    for (int trial = 0; trial < 5; ++trial) {
      const ExpandedQuery q = random_query(rng, vocab.size(), 8);
      std::vector<int> prefix;
      for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) prefix.push_back(4 + static_cast<int>(rng() % 16));
      const auto dist = model.step_distribution(q, prefix);
      ASSERT_EQ(static_cast<int>(dist.size()), vocab.size());
      double sum = 0.0;
      for (double p : dist) {
        EXPECT_GE(p, 0.0);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-5);
      EXPECT_EQ(dist, model.step_distribution(q, prefix));
    }
  }
}

TEST(Seq2SeqModel, BatchedStepsMatchSingleSteps) {
  const SubtokenVocab vocab = letters_vocab(12);
  const Seq2SeqModel model(vocab, tiny_config());
  std::mt19937_64 rng(1);
  const ExpandedQuery q = random_query(rng, vocab.size(), 6);
  const QueryDecoder decoder(model, q);
  const std::vector<std::vector<int>> prefixes = {{}, {5}, {5, 6, 7}};
  const auto batched = decoder.step_distributions(prefixes);
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    const auto single = model.step_distribution(q, prefixes[i]);
    for (std::size_t v = 0; v < single.size(); ++v) EXPECT_NEAR(batched[i][v], single[v], 1e-6);
  }
}

TEST(Seq2SeqModel, PrefixLimitAndChannelOverflow) {
  const SubtokenVocab vocab = letters_vocab();
  GeneratorConfig config = tiny_config();
  config.max_decode_steps = 4;
  const Seq2SeqModel model(vocab, config);
  const ExpandedQuery q;
  EXPECT_NO_THROW(model.step_distribution(q, std::vector<int>(4, 5)));
  EXPECT_THROW(model.step_distribution(q, std::vector<int>(5, 5)), UsageError);
  EXPECT_THROW(model.encode_channel(Channel::kTitle, std::vector<int>(17, 5)), DataError);
}

TEST(Seq2SeqModel, EncodingConcatenatesChannelsInOrder) {
  const SubtokenVocab vocab = letters_vocab();
  const Seq2SeqModel model(vocab, tiny_config());
  ExpandedQuery q;
  q.channels[0] = {4, 5, 6};
  const nn::Matrix memory = model.encode(q);
  // Each channel contributes its start row plus its tokens.
  ASSERT_EQ(memory.rows(), 4 + 1 + 1);
  EXPECT_TRUE(memory.topRows(4).isApprox(model.encode_channel(Channel::kAnnotation, q.channels[0])));
  EXPECT_TRUE(memory.row(4).isApprox(model.encode_channel(Channel::kTitle, {}).row(0)));
  EXPECT_TRUE(memory.row(5).isApprox(model.encode_channel(Channel::kApi, {}).row(0)));
  EXPECT_TRUE(memory.isApprox(model.encode(q)));

  ExpandedQuery swapped;
  swapped.channels[1] = q.channels[0];
  EXPECT_FALSE(model.encode(swapped).isApprox(memory));
}

TEST(Seq2SeqModel, SaveLoadRoundTrip) {
  ScratchDir dir;
  const SubtokenVocab vocab = letters_vocab();
  const Seq2SeqModel model(vocab, tiny_config());
  model.save(dir / "g.bin");
  const Seq2SeqModel loaded = Seq2SeqModel::load(dir / "g.bin");
  EXPECT_EQ(loaded.fingerprint(), model.fingerprint());
  EXPECT_EQ(loaded.vocab().tokens(), vocab.tokens());
  ExpandedQuery q;
  q.channels[0] = {4, 7};
  EXPECT_EQ(loaded.step_distribution(q, std::vector<int>{5}), model.step_distribution(q, std::vector<int>{5}));
}

std::vector<GeneratorExample> copy_task(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GeneratorExample> out;
  for (int i = 0; i < count; ++i) {
    GeneratorExample ex;
    ex.id = "c" + std::to_string(i);
    for (int j = 0, n = 2 + static_cast<int>(rng() % 4); j < n; ++j) ex.target.push_back(4 + static_cast<int>(rng() % 10));
    ex.query.channels[0] = ex.target;
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(TrainGenerator, LearnsCopyTask) {
  const auto examples = copy_task(50, 1);
  GeneratorConfig config = tiny_config();
  config.dim = 64;
  config.ff_dim = 128;
  config.epochs = 30;
  config.batch_size = 8;
  config.learning_rate = 3e-3;
  config.warmup_steps = 20;
  std::vector<double> losses;
  GeneratorTrainOptions options;
  options.epoch_losses = &losses;
  const Seq2SeqModel model = train_generator(letters_vocab(), examples, config, options);
  ASSERT_EQ(losses.size(), 30u);
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_GE(exact_match_rate(model, examples), 0.9);
}

TEST(TrainGenerator, CheckpointsPerEpochAndRetention) {
  ScratchDir dir;
  const auto examples = copy_task(10, 2);
  GeneratorConfig config = tiny_config();
  config.epochs = 3;
  GeneratorTrainOptions options;
  options.checkpoint_dir = dir / "all";
  train_generator(letters_vocab(), examples, config, options);
  for (const char* name : {"epoch-01.bin", "epoch-02.bin", "epoch-03.bin"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "all" / name)) << name;
  }
  options.checkpoint_dir = dir / "kept";
  options.keep_checkpoints = 1;
  const Seq2SeqModel last = train_generator(letters_vocab(), examples, config, options);
  EXPECT_FALSE(std::filesystem::exists(dir / "kept" / "epoch-02.bin"));
  EXPECT_EQ(Seq2SeqModel::load(dir / "kept" / "epoch-03.bin").fingerprint(), last.fingerprint());

  config.epochs = 0;
  options.checkpoint_dir = dir / "none";
  const Seq2SeqModel init = train_generator(letters_vocab(), examples, config, options);
  EXPECT_FALSE(std::filesystem::exists(dir / "none"));
  EXPECT_EQ(init.fingerprint(), Seq2SeqModel(letters_vocab(), config).fingerprint());
}

TEST(TrainGenerator, ValidatesTargets) {
  auto examples = copy_task(5, 3);
  examples[2].id = "the-pad-record";
  examples[2].target = {SubtokenVocab::kPad, SubtokenVocab::kPad};
  try {
    train_generator(letters_vocab(), examples, tiny_config());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("the-pad-record"), std::string::npos);
  }
  EXPECT_THROW(train_generator(letters_vocab(), {}, tiny_config()), DataError);
}

TEST(Seq2SeqModel, BeamOneMatchesGreedy) {
  GeneratorConfig config = tiny_config();
  config.epochs = 2;
  const Seq2SeqModel model = train_generator(letters_vocab(), copy_task(20, 4), config);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const ExpandedQuery q = random_query(rng, model.vocab().size(), 6);
    const Hypothesis g = model.greedy(q);
    const auto beam = model.beam_search(q, 1);
    EXPECT_EQ(beam.front().tokens, g.tokens);
    EXPECT_EQ(beam.front().log_prob, g.log_prob);
  }
}

TEST(DetokenizeApis, Examples) {
  const auto one = detokenize_apis(Tokens{"Float", ".", "parseFloat"});
  EXPECT_EQ(one.sequence.render(), "Float.parseFloat");
  EXPECT_EQ(one.malformed, 0);
  const Tokens two = {"Integer", ".", "parseInt", "Long", ".", "parseLong"};
  EXPECT_EQ(detokenize_apis(two).sequence.render(), "Integer.parseInt Long.parseLong");
  EXPECT_EQ(subtokenize("Integer.parseInt Long.parseLong", SubtokenMode::kApi), two);
  const auto bad = detokenize_apis(Tokens{"parse"});
  EXPECT_TRUE(bad.sequence.empty());
  EXPECT_EQ(bad.malformed, 1);
  const auto mixed = detokenize_apis(Tokens{"x", ".", "A", ".", "b", "y", "z", "C", ".", "d", "."});
  EXPECT_EQ(mixed.sequence.render(), "x.A C.d");
  EXPECT_EQ(mixed.malformed, 2);  // ". b y z" and the trailing "."
}

TEST(DetokenizeApis, InvertsSubtokenize) {
  std::mt19937_64 rng(6);
  const std::string alpha = "abcXYZ_09$";
  auto ident = [&] {
    std::string s(1, "abcdefXYZ_$"[rng() % 11]);
    for (int i = 0, n = static_cast<int>(rng() % 8); i < n; ++i) s += alpha[rng() % alpha.size()];
    return s;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ApiCall> calls;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 6); i < n; ++i) calls.emplace_back(ident(), ident());
    const ApiSequence s(calls);
    const auto d = detokenize_apis(subtokenize(s.render(), SubtokenMode::kApi));
    EXPECT_EQ(d.sequence, s);
    EXPECT_EQ(d.malformed, 0);
  }
}

}  // namespace
}  // namespace apirec
