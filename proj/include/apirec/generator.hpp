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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apirec/corpus.hpp"
#include "apirec/decoding.hpp"
#include "apirec/nn/parameters.hpp"
#include "apirec/nn/tape.hpp"

namespace apirec {

class SubtokenVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnknown = 3;
  static constexpr std::array<std::string_view, 4> kReserved = {"<pad>", "<s>", "</s>", "<unk>"};

  // Reserved tokens only.
  SubtokenVocab();
  // `tokens` excludes the reserved entries; ids follow the given order.
  explicit SubtokenVocab(std::vector<std::string> tokens);
  // Tokens seen at least `min_count` times, sorted for a stable id order.
  static SubtokenVocab build(std::span<const std::vector<std::string>> streams, int min_count = 1);

  int id(std::string_view token) const;  // kUnknown when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> tokens_;  // reserved first
  std::unordered_map<std::string, int> ids_;
};

enum class Variant { kAnnotationOnly, kPlusTitle, kPlusTitleApi };

std::string to_string(Variant variant);
Variant parse_variant(std::string_view text);  // throws UsageError
inline constexpr std::array<Variant, 3> kAllVariants = {
    Variant::kAnnotationOnly, Variant::kPlusTitle, Variant::kPlusTitleApi};

// Raw text of the three generator inputs plus the target rendering.
struct ExpandedRecord {
  std::string id;
  std::string annotation;
  std::string title;
  std::string apis;    // linked post's APIs, space separated, first-mention order
  std::string target;  // rendered target ApiSequence
};

// Empties the channels the variant does not use.
ExpandedRecord apply_variant(ExpandedRecord record, Variant variant);

std::vector<ExpandedRecord> load_expanded(const std::filesystem::path& path);
void write_expanded(const std::filesystem::path& path, std::span<const ExpandedRecord> records);

enum class Channel { kAnnotation = 0, kTitle = 1, kApi = 2 };
inline constexpr int kChannelCount = 3;

struct ExpandedQuery {
  std::array<std::vector<int>, kChannelCount> channels;

  const std::vector<int>& annotation_tokens() const { return channels[0]; }
  const std::vector<int>& title_tokens() const { return channels[1]; }
  const std::vector<int>& api_tokens() const { return channels[2]; }
};

// Channel subtoken streams of a record: query-mode words for annotation and
// title, API-mode subtokens for the API channel.
std::array<std::vector<std::string>, kChannelCount> channel_subtokens(const ExpandedRecord& record);
std::vector<std::string> target_subtokens(const ExpandedRecord& record);

// Head-truncates every channel to max_len subtokens.
ExpandedQuery make_query(const SubtokenVocab& vocab, const ExpandedRecord& record, int max_len);

struct GeneratorExample {
  std::string id;
  ExpandedQuery query;
  std::vector<int> target;  // subtoken ids without the end token
};

// Builds examples, truncating the target to max_len. Throws DataError naming
// the record when a target is empty.
std::vector<GeneratorExample> make_examples(const SubtokenVocab& vocab,
                                            std::span<const ExpandedRecord> records, int max_len);

struct GeneratorConfig {
  int dim = 128;
  int heads = 4;
  int ff_dim = 256;
  int encoder_layers = 2;
  int decoder_layers = 6;
  int max_len = 64;
  int max_decode_steps = 64;
  int beam_size = 5;
  int epochs = 30;
  double learning_rate = 1e-3;
  int warmup_steps = 100;
  int batch_size = 32;
  bool share_encoders = false;
  bool length_normalize = false;
  std::uint64_t seed = 7;
};

// Three transformer encoders (one per channel) whose outputs are concatenated
// along the sequence axis into the decoder memory, and a causal transformer
// decoder with cross-attention over that memory.
class Seq2SeqModel {
 public:
  Seq2SeqModel(SubtokenVocab vocab, const GeneratorConfig& config);
  Seq2SeqModel(Seq2SeqModel&&) = default;
  Seq2SeqModel& operator=(Seq2SeqModel&&) = default;

  const SubtokenVocab& vocab() const { return vocab_; }
  const GeneratorConfig& config() const { return config_; }
  nn::ParameterSet& parameters() { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }
  std::string fingerprint() const;

  // Encoding of one channel: (1 + tokens) x dim, the start token first.
  // Throws DataError when tokens exceed max_len.
  nn::Matrix encode_channel(Channel channel, std::span<const int> tokens) const;
  // Annotation, title and API encodings stacked in that order.
  nn::Matrix encode(const ExpandedQuery& query) const;

  // Next-token distribution after `prefix` (generated ids, start excluded).
  std::vector<double> step_distribution(const ExpandedQuery& query, std::span<const int> prefix) const;
  std::vector<std::vector<double>> step_distributions(const nn::Matrix& memory,
                                                      std::span<const std::vector<int>> prefixes) const;

  std::vector<Hypothesis> beam_search(const ExpandedQuery& query, int beam_size) const;
  Hypothesis greedy(const ExpandedQuery& query) const;

  // Mean per-token cross-entropy of a batch under teacher forcing.
  nn::Var loss(nn::Tape& tape, std::span<const GeneratorExample* const> batch) const;

  void save(const std::filesystem::path& path) const;
  static Seq2SeqModel load(const std::filesystem::path& path);

 private:
  std::string channel_prefix(Channel channel) const;
  nn::Var encode_batch(nn::Tape& tape, Channel channel, std::span<const std::vector<int>* const> inputs,
                       std::vector<int>& offsets) const;
  nn::Var decode_batch(nn::Tape& tape, nn::Var memory, std::span<const int> memory_offsets,
                       std::span<const std::vector<int>> inputs, std::vector<int>& offsets) const;
  nn::Var block(nn::Tape& tape, const std::string& prefix, nn::Var x, std::span<const int> offsets,
                bool causal, std::optional<nn::Var> memory, std::span<const int> memory_offsets) const;
  nn::Var norm(nn::Tape& tape, const std::string& name, nn::Var x) const;

  SubtokenVocab vocab_;
  GeneratorConfig config_;
  mutable nn::ParameterSet params_;
};

// Adapter exposing one query's decoder to the generic search routines.
class QueryDecoder : public NextTokenModel {
 public:
  QueryDecoder(const Seq2SeqModel& model, const ExpandedQuery& query);

  int vocab_size() const override { return model_.vocab().size(); }
  int end_token() const override { return SubtokenVocab::kEnd; }
  std::vector<double> step_distribution(std::span<const int> prefix) const override;
  std::vector<std::vector<double>> step_distributions(
      std::span<const std::vector<int>> prefixes) const override;

 private:
  const Seq2SeqModel& model_;
  nn::Matrix memory_;
};

struct GeneratorTrainOptions {
  // When set, "epoch-NN.bin" is written after every epoch.
  std::optional<std::filesystem::path> checkpoint_dir;
  int keep_checkpoints = 0;  // most recent ones kept; 0 keeps all
  std::vector<double>* epoch_losses = nullptr;
};

// Teacher-forced cross-entropy with Adam and linear warm-up. Throws
// DataError on an empty dataset and TrainingError on a non-finite loss.
Seq2SeqModel train_generator(SubtokenVocab vocab, std::span<const GeneratorExample> examples,
                             const GeneratorConfig& config, const GeneratorTrainOptions& options = {});

// Fraction of examples whose greedy output equals the target exactly.
double exact_match_rate(const Seq2SeqModel& model, std::span<const GeneratorExample> examples);

struct Detokenized {
  ApiSequence sequence;
  int malformed = 0;  // fragments dropped for lacking a "name . name" shape
};

Detokenized detokenize_apis(std::span<const std::string> subtokens);

}  // namespace apirec
