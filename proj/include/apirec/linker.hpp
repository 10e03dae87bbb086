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

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apirec/corpus.hpp"
#include "apirec/metrics.hpp"
#include "apirec/nn/parameters.hpp"
#include "apirec/nn/tape.hpp"
#include "apirec/triplets.hpp"

namespace apirec {

// Word vocabulary for the linker models. Words never seen in training hash
// into a fixed set of bucket ids, so two texts sharing an unseen word still
// share an embedding row.
class TokenVocabulary {
 public:
  static constexpr int kEmptyText = 0;

  TokenVocabulary() = default;
  TokenVocabulary(std::vector<std::string> words, int oov_buckets);
  static TokenVocabulary build(std::span<const std::string> texts, int oov_buckets);

  std::vector<int> encode(std::string_view text) const;
  int size() const { return 1 + static_cast<int>(words_.size()) + oov_buckets_; }
  const std::vector<std::string>& words() const { return words_; }
  int oov_buckets() const { return oov_buckets_; }

 private:
  std::vector<std::string> words_;  // sorted
  std::unordered_map<std::string, int> ids_;
  int oov_buckets_ = 0;
};

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(Eigen::VectorXf values) : values_(std::move(values)) {}

  const Eigen::VectorXf& values() const { return values_; }
  Eigen::Index dimension() const { return values_.size(); }

 private:
  Eigen::VectorXf values_;
};

// Unit-norm signed random projection of a text's word multiset, seeded by
// word hashes; zero rows for texts without words.
nn::Matrix lexical_signature(std::span<const std::string> texts, int dim);

// Clamped to [-1, 1]; 0 when either vector has zero norm.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct EmbedderConfig {
  int dim = 64;
  int hidden = 128;
  double margin = 0.3;
  int epochs = 5;
  double learning_rate = 3e-3;
  int batch_size = 32;
  int oov_buckets = 512;
  // Fixed hashed bag-of-words channel appended to the trained embedding
  // (0 disables it). It keeps exact word identity visible to retrieval,
  // which a small model trained from scratch otherwise washes out.
  int lexical_dim = 64;
  double lexical_weight = 1.0;
  std::uint64_t seed = 17;
};

// Bag-of-words sentence encoder: mean of unit token embeddings plus a
// residual feed-forward block, L2-normalised, then joined with the weighted
// lexical channel and normalised again. Embeddings have dim + lexical_dim
// entries. Annotations and titles are encoded
// independently so titles can be indexed ahead of time.
class TextEmbedder {
 public:
  TextEmbedder(TokenVocabulary vocab, const EmbedderConfig& config);
  TextEmbedder(TextEmbedder&&) = default;
  TextEmbedder& operator=(TextEmbedder&&) = default;

  EmbeddingVector embed(std::string_view text) const;
  // One unit-norm row per text.
  nn::Matrix embed_all(std::span<const std::string> texts) const;

  const EmbedderConfig& config() const { return config_; }
  const TokenVocabulary& vocabulary() const { return vocab_; }
  nn::ParameterSet& parameters() { return params_; }
  // Changes whenever a parameter or the vocabulary changes.
  std::string fingerprint() const;

  void save(const std::filesystem::path& path) const;
  static TextEmbedder load(const std::filesystem::path& path);

  // Training hook: encoded token ids -> normalised rows on `tape`.
  struct Encoded {
    std::vector<int> ids;
    std::vector<int> offsets;
    nn::Matrix lexical;  // one row per text, lexical_dim columns
  };
  Encoded encode(std::span<const std::string> texts) const;
  nn::Var forward(nn::Tape& tape, const Encoded& encoded) const;

 private:
  TokenVocabulary vocab_;
  EmbedderConfig config_;
  // Gradients land here during training; values are read-only otherwise.
  mutable nn::ParameterSet params_;
};

struct TrainingHistory {
  std::vector<double> epoch_losses;
};

// Minimises mean max(0, margin - cos(a, p) + cos(a, n)). Zero epochs returns
// the seeded initial model. Throws TrainingError on an empty set or a
// non-finite loss.
TextEmbedder train_embedder(std::span<const Triplet> triplets, const EmbedderConfig& config,
                            TrainingHistory* history = nullptr);

// Mean triplet loss of `model` over `triplets` (no training).
double triplet_loss(const TextEmbedder& model, std::span<const Triplet> triplets, double margin);

struct ClassifierConfig {
  int dim = 64;
  int hidden = 64;
  int epochs = 8;
  double learning_rate = 3e-3;
  int batch_size = 32;
  int oov_buckets = 512;
  std::uint64_t seed = 29;
};

// Scores an (annotation, title) pair jointly: the element-wise product and
// squared difference of both sides' pooled embeddings plus word-overlap
// features feed an MLP whose sigmoid output is the relevance probability.
// Only symmetric interactions are used, so the model cannot learn a
// per-title prior.
class PairClassifier {
 public:
  static constexpr int kOverlapFeatures = 3;

  PairClassifier(TokenVocabulary vocab, const ClassifierConfig& config);
  PairClassifier(PairClassifier&&) = default;
  PairClassifier& operator=(PairClassifier&&) = default;

  double score(std::string_view left, std::string_view right) const;
  std::vector<double> score_all(std::span<const std::string> lefts,
                                std::span<const std::string> rights) const;

  const ClassifierConfig& config() const { return config_; }
  const TokenVocabulary& vocabulary() const { return vocab_; }
  nn::ParameterSet& parameters() { return params_; }
  std::string fingerprint() const;

  void save(const std::filesystem::path& path) const;
  static PairClassifier load(const std::filesystem::path& path);

  // Training hook: builds n x 1 logits on `tape`.
  nn::Var forward(nn::Tape& tape, std::span<const std::string> lefts,
                  std::span<const std::string> rights) const;

 private:
  TokenVocabulary vocab_;
  ClassifierConfig config_;
  mutable nn::ParameterSet params_;
};

// Throws TrainingError when every label is the same or the loss diverges.
PairClassifier train_classifier(std::span<const LabeledPair> pairs, const ClassifierConfig& config,
                                TrainingHistory* history = nullptr);

// Fraction of pairs where (score >= 0.5) agrees with the label.
double classifier_accuracy(const PairClassifier& model, std::span<const LabeledPair> pairs);

struct RankedPost {
  QAPost post;
  double filter_similarity = 0.0;
  std::optional<double> rerank_score;
};

// Unit-norm title embeddings for a post collection, tagged with the
// fingerprint of the embedder that produced them.
class RetrievalIndex {
 public:
  static RetrievalIndex build(const TextEmbedder& embedder, std::vector<QAPost> posts);

  // File layout: magic "APIRECX\0", embedder fingerprint, u32 dim, u32 count,
  // then per post: id string, dim f32 values. `posts` resolves ids back to
  // records; throws DataError when the index is stale for `embedder`.
  void save(const std::filesystem::path& path) const;
  static RetrievalIndex load(const std::filesystem::path& path, const TextEmbedder& embedder,
                             const std::vector<QAPost>& posts);

  const std::vector<QAPost>& posts() const { return posts_; }
  const nn::Matrix& vectors() const { return vectors_; }
  const std::string& embedder_fingerprint() const { return fingerprint_; }
  std::size_t size() const { return posts_.size(); }

 private:
  std::vector<QAPost> posts_;
  nn::Matrix vectors_;
  std::string fingerprint_;
};

// The k most cosine-similar posts, descending; ties by post id ascending.
std::vector<RankedPost> filter_top_k(const TextEmbedder& embedder, const RetrievalIndex& index,
                                     std::string_view annotation, int k = 10);

// Fills rerank_score; sorts by (score desc, filter similarity desc, id asc).
std::vector<RankedPost> rerank(const PairClassifier& classifier, std::string_view annotation,
                               std::vector<RankedPost> candidates);

// Top-1 post after filtering and re-ranking.
RankedPost link(const TextEmbedder& embedder, const PairClassifier& classifier,
                const RetrievalIndex& index, std::string_view annotation, int k = 10);

MatchCategory categorize_link(const ApiSequence& target, const QAPost& linked);

}  // namespace apirec
