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

#include "apirec/linker.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "apirec/error.hpp"
#include "apirec/hashing.hpp"
#include "apirec/nn/container.hpp"
#include "apirec/text.hpp"
#include "json.hpp"

namespace apirec {
namespace {

using nlohmann::json;
using nn::Matrix;
using nn::Tape;
using nn::Var;

constexpr std::array<char, 8> kIndexMagic = {'A', 'P', 'I', 'R', 'E', 'C', 'X', '\0'};

TextEmbedder::Encoded concat_encoded(const std::vector<const std::vector<int>*>& parts) {
  TextEmbedder::Encoded out;
  out.offsets.reserve(parts.size() + 1);
  out.offsets.push_back(0);
  for (const auto* ids : parts) {
    out.ids.insert(out.ids.end(), ids->begin(), ids->end());
    out.offsets.push_back(static_cast<int>(out.ids.size()));
  }
  return out;
}

void check_finite(double loss, const char* what, int epoch) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(what) + ": non-finite loss at epoch " + std::to_string(epoch));
  }
}

json vocabulary_json(const TokenVocabulary& vocab) {
  return json{{"words", vocab.words()}, {"oov_buckets", vocab.oov_buckets()}};
}

TokenVocabulary vocabulary_from_json(const json& j) {
  return TokenVocabulary(j.at("words").get<std::vector<std::string>>(),
                         j.at("oov_buckets").get<int>());
}

// Jaccard, left coverage and right coverage of the two word sets.
Matrix overlap_features(std::span<const std::string> lefts, std::span<const std::string> rights) {
  Matrix features(static_cast<Eigen::Index>(lefts.size()), PairClassifier::kOverlapFeatures);
  for (std::size_t i = 0; i < lefts.size(); ++i) {
    const auto lw = word_tokens(lefts[i]);
    const auto rw = word_tokens(rights[i]);
    const std::set<std::string> ls(lw.begin(), lw.end());
    const std::set<std::string> rs(rw.begin(), rw.end());
    std::size_t common = 0;
    for (const auto& w : ls) common += rs.count(w);
    const std::size_t uni = ls.size() + rs.size() - common;
    const auto row = static_cast<Eigen::Index>(i);
    features(row, 0) = uni == 0 ? 0.0f : static_cast<float>(common) / static_cast<float>(uni);
    features(row, 1) = ls.empty() ? 0.0f : static_cast<float>(common) / static_cast<float>(ls.size());
    features(row, 2) = rs.empty() ? 0.0f : static_cast<float>(common) / static_cast<float>(rs.size());
  }
  return features;
}

}  // namespace

TokenVocabulary::TokenVocabulary(std::vector<std::string> words, int oov_buckets)
    : words_(std::move(words)), oov_buckets_(oov_buckets) {
  if (oov_buckets_ < 0) throw UsageError("oov_buckets must be >= 0");
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
  for (std::size_t i = 0; i < words_.size(); ++i) ids_.emplace(words_[i], static_cast<int>(i) + 1);
}

TokenVocabulary TokenVocabulary::build(std::span<const std::string> texts, int oov_buckets) {
  std::set<std::string> words;
  for (const auto& text : texts) {
    for (auto& w : word_tokens(text)) words.insert(std::move(w));
  }
  return TokenVocabulary(std::vector<std::string>(words.begin(), words.end()), oov_buckets);
}

std::vector<int> TokenVocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : word_tokens(text)) {
    auto it = ids_.find(w);
    if (it != ids_.end()) {
      ids.push_back(it->second);
    } else if (oov_buckets_ > 0) {
      const auto bucket = static_cast<int>(fnv1a64(w) % static_cast<std::uint64_t>(oov_buckets_));
      ids.push_back(1 + static_cast<int>(words_.size()) + bucket);
    }
  }
  if (ids.empty()) ids.push_back(kEmptyText);
  return ids;
}

nn::Matrix lexical_signature(std::span<const std::string> texts, int dim) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(texts.size()), dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto row = out.row(static_cast<Eigen::Index>(i));
    for (const auto& w : word_tokens(texts[i])) {
      const std::uint64_t h = fnv1a64(w);
      for (int d = 0; d < dim; ++d) {
        row(d) += (splitmix64(h + static_cast<std::uint64_t>(d)) & 1U) ? 1.0f : -1.0f;
      }
    }
    const float norm = row.norm();
    if (norm > 0.0f) row /= norm;
  }
  return out;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) throw Error("cosine_similarity: dimension mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (Eigen::Index i = 0; i < a.dimension(); ++i) {
    const double x = a.values()(i);
    const double y = b.values()(i);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// TextEmbedder

TextEmbedder::TextEmbedder(TokenVocabulary vocab, const EmbedderConfig& config)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.dim < 1 || config_.hidden < 1) throw UsageError("embedder dimensions must be >= 1");
  if (config_.lexical_dim < 0 || config_.lexical_weight < 0.0) {
    throw UsageError("lexical channel settings must be >= 0");
  }
  std::mt19937_64 rng(config_.seed);
  params_.add("embed.tokens", nn::normal_init(vocab_.size(), config_.dim, 0.3f, rng));
  params_.add("mlp.w1", nn::xavier_uniform(config_.dim, config_.hidden, rng));
  params_.add("mlp.b1", Matrix::Zero(1, config_.hidden));
  params_.add("mlp.w2", nn::xavier_uniform(config_.hidden, config_.dim, rng) * 0.5f);
  params_.add("mlp.b2", Matrix::Zero(1, config_.dim));
}

TextEmbedder::Encoded TextEmbedder::encode(std::span<const std::string> texts) const {
  std::vector<std::vector<int>> ids;
  ids.reserve(texts.size());
  for (const auto& t : texts) ids.push_back(vocab_.encode(t));
  std::vector<const std::vector<int>*> parts;
  for (const auto& v : ids) parts.push_back(&v);
  Encoded out = concat_encoded(parts);
  out.lexical = lexical_signature(texts, config_.lexical_dim);
  return out;
}

Var TextEmbedder::forward(Tape& tape, const Encoded& encoded) const {
  // Unit-length word vectors: every word, including a hashed unseen one,
  // carries the same weight in the pooled mean.
  Var tokens = nn::l2_normalize_rows(tape, nn::gather(tape, params_.at("embed.tokens"), encoded.ids));
  Var pooled = nn::segment_mean(tape, tokens, encoded.offsets);
  Var hidden = nn::tanh(tape, nn::linear(tape, pooled, params_.at("mlp.w1"), params_.at("mlp.b1")));
  Var out = nn::add(tape, pooled, nn::linear(tape, hidden, params_.at("mlp.w2"), params_.at("mlp.b2")));
  Var dense = nn::l2_normalize_rows(tape, out);
  if (config_.lexical_dim <= 0) return dense;
  if (encoded.lexical.rows() != tape.value(dense).rows() ||
      encoded.lexical.cols() != config_.lexical_dim) {
    throw Error("embedder: lexical rows do not match the encoded texts");
  }
  const std::array<Var, 2> parts = {
      dense, tape.constant(encoded.lexical * static_cast<float>(config_.lexical_weight))};
  return nn::l2_normalize_rows(tape, nn::concat_cols(tape, parts));
}

nn::Matrix TextEmbedder::embed_all(std::span<const std::string> texts) const {
  if (texts.empty()) return Matrix(0, config_.dim);
  Tape tape(false);
  return tape.value(forward(tape, encode(texts)));
}

EmbeddingVector TextEmbedder::embed(std::string_view text) const {
  const std::string owned(text);
  const Matrix row = embed_all(std::span<const std::string>(&owned, 1));
  return EmbeddingVector(row.row(0).transpose());
}

std::string TextEmbedder::fingerprint() const {
  return sha256_hex(params_.fingerprint() + vocabulary_json(vocab_).dump());
}

void TextEmbedder::save(const std::filesystem::path& path) const {
  json config{{"dim", config_.dim},
              {"hidden", config_.hidden},
              {"margin", config_.margin},
              {"epochs", config_.epochs},
              {"learning_rate", config_.learning_rate},
              {"batch_size", config_.batch_size},
              {"oov_buckets", config_.oov_buckets},
              {"lexical_dim", config_.lexical_dim},
              {"lexical_weight", config_.lexical_weight},
              {"vocabulary", vocabulary_json(vocab_)}};
  nn::write_container(path, {"embedder", config.dump(), config_.seed}, params_);
}

TextEmbedder TextEmbedder::load(const std::filesystem::path& path) {
  const nn::ContainerHeader header = nn::read_container_header(path);
  const json j = json::parse(header.config_json);
  EmbedderConfig config;
  config.dim = j.at("dim").get<int>();
  config.hidden = j.at("hidden").get<int>();
  config.margin = j.at("margin").get<double>();
  config.epochs = j.at("epochs").get<int>();
  config.learning_rate = j.at("learning_rate").get<double>();
  config.batch_size = j.at("batch_size").get<int>();
  config.oov_buckets = j.at("oov_buckets").get<int>();
  config.lexical_dim = j.at("lexical_dim").get<int>();
  config.lexical_weight = j.at("lexical_weight").get<double>();
  config.seed = header.seed;
  TextEmbedder model(vocabulary_from_json(j.at("vocabulary")), config);
  nn::read_container(path, "embedder", model.params_);
  return model;
}

namespace {

struct TripletBatchSource {
  std::vector<std::string> texts;
  std::vector<std::array<int, 3>> rows;
};

TripletBatchSource index_triplets(std::span<const Triplet> triplets) {
  TripletBatchSource src;
  std::unordered_map<std::string, int> ids;
  auto id_of = [&](const std::string& text) {
    auto [it, inserted] = ids.emplace(text, static_cast<int>(src.texts.size()));
    if (inserted) src.texts.push_back(text);
    return it->second;
  };
  for (const auto& t : triplets) {
    src.rows.push_back({id_of(t.anchor), id_of(t.positive), id_of(t.negative)});
  }
  return src;
}

// Loss over rows [begin, end) of `order`; records gradients when the tape does.
double triplet_batch_loss(const TextEmbedder& model, Tape& tape, const TripletBatchSource& src,
                          const std::vector<std::vector<int>>& encoded, const Matrix& lexical,
                          std::span<const std::size_t> batch, double margin, bool backward) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<const std::vector<int>*> parts;
  std::vector<int> text_rows;
  parts.reserve(3 * batch.size());
  for (int slot = 0; slot < 3; ++slot) {
    for (std::size_t row : batch) {
      parts.push_back(&encoded[src.rows[row][slot]]);
      text_rows.push_back(src.rows[row][slot]);
    }
  }
  TextEmbedder::Encoded input = concat_encoded(parts);
  input.lexical = lexical(text_rows, Eigen::all);
  Var all = model.forward(tape, input);
  Var anchors = nn::slice_rows(tape, all, 0, n);
  Var positives = nn::slice_rows(tape, all, n, n);
  Var negatives = nn::slice_rows(tape, all, 2 * n, n);
  Var gap = nn::sub(tape, nn::row_dot(tape, anchors, negatives),
                    nn::row_dot(tape, anchors, positives));
  Var loss = nn::mean(tape, nn::relu(tape, nn::add_scalar(tape, gap, static_cast<float>(margin))));
  const double value = tape.value(loss)(0, 0);
  if (backward) tape.backward(loss);
  return value;
}

}  // namespace

TextEmbedder train_embedder(std::span<const Triplet> triplets, const EmbedderConfig& config,
                            TrainingHistory* history) {
  if (triplets.empty()) throw TrainingError("no training triplets for the embedder");
  const TripletBatchSource src = index_triplets(triplets);
  TextEmbedder model(TokenVocabulary::build(src.texts, config.oov_buckets), config);
  if (config.epochs <= 0) return model;

  std::vector<std::vector<int>> encoded;
  encoded.reserve(src.texts.size());
  for (const auto& t : src.texts) encoded.push_back(model.vocabulary().encode(t));
  const Matrix lexical = lexical_signature(src.texts, model.config().lexical_dim);

  nn::Adam::Options options;
  options.learning_rate = static_cast<float>(config.learning_rate);
  model.parameters().zero_grad();
  nn::Adam adam(model.parameters(), options);
  std::mt19937_64 rng(derive_seed(config.seed, "embedder-order"));
  std::vector<std::size_t> order(src.rows.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t count = std::min(batch_size, order.size() - begin);
      Tape tape;
      const double loss = triplet_batch_loss(model, tape, src, encoded, lexical,
                                             std::span(order).subspan(begin, count), config.margin,
                                             true);
      check_finite(loss, "embedder", epoch);
      adam.step();
      total += loss * static_cast<double>(count);
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    check_finite(epoch_loss, "embedder", epoch);
    if (history != nullptr) history->epoch_losses.push_back(epoch_loss);
  }
  return model;
}

double triplet_loss(const TextEmbedder& model, std::span<const Triplet> triplets, double margin) {
  if (triplets.empty()) return 0.0;
  const TripletBatchSource src = index_triplets(triplets);
  std::vector<std::vector<int>> encoded;
  for (const auto& t : src.texts) encoded.push_back(model.vocabulary().encode(t));
  const Matrix lexical = lexical_signature(src.texts, model.config().lexical_dim);
  std::vector<std::size_t> order(src.rows.size());
  std::iota(order.begin(), order.end(), 0);
  Tape tape(false);
  return triplet_batch_loss(model, tape, src, encoded, lexical, order, margin, false);
}

// ---------------------------------------------------------------------------
// PairClassifier

PairClassifier::PairClassifier(TokenVocabulary vocab, const ClassifierConfig& config)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.dim < 1 || config_.hidden < 1) throw UsageError("classifier dimensions must be >= 1");
  std::mt19937_64 rng(config_.seed);
  params_.add("embed.tokens", nn::normal_init(vocab_.size(), config_.dim, 0.3f, rng));
  params_.add("mlp.w1", nn::xavier_uniform(2 * config_.dim + kOverlapFeatures, config_.hidden, rng));
  params_.add("mlp.b1", Matrix::Zero(1, config_.hidden));
  params_.add("mlp.w2", nn::xavier_uniform(config_.hidden, 1, rng));
  params_.add("mlp.b2", Matrix::Zero(1, 1));
}

Var PairClassifier::forward(Tape& tape, std::span<const std::string> lefts,
                            std::span<const std::string> rights) const {
  if (lefts.size() != rights.size()) throw Error("classifier: left/right count mismatch");
  auto pooled = [&](std::span<const std::string> texts) {
    std::vector<int> ids;
    std::vector<int> offsets{0};
    for (const auto& t : texts) {
      const auto encoded = vocab_.encode(t);
      ids.insert(ids.end(), encoded.begin(), encoded.end());
      offsets.push_back(static_cast<int>(ids.size()));
    }
    return nn::segment_mean(tape, nn::gather(tape, params_.at("embed.tokens"), ids), offsets);
  };
  Var u = pooled(lefts);
  Var v = pooled(rights);
  Var diff = nn::sub(tape, u, v);
  const std::array<Var, 3> parts = {nn::mul(tape, u, v), nn::mul(tape, diff, diff),
                                    tape.constant(overlap_features(lefts, rights))};
  Var features = nn::concat_cols(tape, parts);
  Var hidden = nn::relu(tape, nn::linear(tape, features, params_.at("mlp.w1"), params_.at("mlp.b1")));
  return nn::linear(tape, hidden, params_.at("mlp.w2"), params_.at("mlp.b2"));
}

std::vector<double> PairClassifier::score_all(std::span<const std::string> lefts,
                                              std::span<const std::string> rights) const {
  if (lefts.empty()) return {};
  Tape tape(false);
  const Matrix& logits = tape.value(forward(tape, lefts, rights));
  std::vector<double> scores;
  scores.reserve(lefts.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    scores.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(logits(i, 0)))));
  }
  return scores;
}

double PairClassifier::score(std::string_view left, std::string_view right) const {
  const std::string l(left);
  const std::string r(right);
  return score_all(std::span<const std::string>(&l, 1), std::span<const std::string>(&r, 1))[0];
}

std::string PairClassifier::fingerprint() const {
  return sha256_hex(params_.fingerprint() + vocabulary_json(vocab_).dump());
}

void PairClassifier::save(const std::filesystem::path& path) const {
  json config{{"dim", config_.dim},
              {"hidden", config_.hidden},
              {"epochs", config_.epochs},
              {"learning_rate", config_.learning_rate},
              {"batch_size", config_.batch_size},
              {"oov_buckets", config_.oov_buckets},
              {"vocabulary", vocabulary_json(vocab_)}};
  nn::write_container(path, {"classifier", config.dump(), config_.seed}, params_);
}

PairClassifier PairClassifier::load(const std::filesystem::path& path) {
  const nn::ContainerHeader header = nn::read_container_header(path);
  const json j = json::parse(header.config_json);
  ClassifierConfig config;
  config.dim = j.at("dim").get<int>();
  config.hidden = j.at("hidden").get<int>();
  config.epochs = j.at("epochs").get<int>();
  config.learning_rate = j.at("learning_rate").get<double>();
  config.batch_size = j.at("batch_size").get<int>();
  config.oov_buckets = j.at("oov_buckets").get<int>();
  config.seed = header.seed;
  PairClassifier model(vocabulary_from_json(j.at("vocabulary")), config);
  nn::read_container(path, "classifier", model.params_);
  return model;
}

PairClassifier train_classifier(std::span<const LabeledPair> pairs, const ClassifierConfig& config,
                                TrainingHistory* history) {
  if (pairs.empty()) throw TrainingError("no labeled pairs for the classifier");
  const bool has_positive = std::any_of(pairs.begin(), pairs.end(), [](auto& p) { return p.label == 1; });
  const bool has_negative = std::any_of(pairs.begin(), pairs.end(), [](auto& p) { return p.label == 0; });
  if (!has_positive || !has_negative) {
    throw TrainingError("classifier training data holds a single class");
  }
  std::vector<std::string> texts;
  for (const auto& p : pairs) {
    texts.push_back(p.left);
    texts.push_back(p.right);
  }
  PairClassifier model(TokenVocabulary::build(texts, config.oov_buckets), config);
  if (config.epochs <= 0) return model;

  nn::Adam::Options options;
  options.learning_rate = static_cast<float>(config.learning_rate);
  model.parameters().zero_grad();
  nn::Adam adam(model.parameters(), options);
  std::mt19937_64 rng(derive_seed(config.seed, "classifier-order"));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t count = std::min(batch_size, order.size() - begin);
      std::vector<std::string> lefts;
      std::vector<std::string> rights;
      std::vector<float> labels;
      for (std::size_t i = begin; i < begin + count; ++i) {
        lefts.push_back(pairs[order[i]].left);
        rights.push_back(pairs[order[i]].right);
        labels.push_back(static_cast<float>(pairs[order[i]].label));
      }
      Tape tape;
      Var loss = nn::bce_with_logits(tape, model.forward(tape, lefts, rights), labels);
      const double value = tape.value(loss)(0, 0);
      check_finite(value, "classifier", epoch);
      tape.backward(loss);
      adam.step();
      total += value * static_cast<double>(count);
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    if (history != nullptr) history->epoch_losses.push_back(epoch_loss);
  }
  return model;
}

double classifier_accuracy(const PairClassifier& model, std::span<const LabeledPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::vector<std::string> lefts;
  std::vector<std::string> rights;
  for (const auto& p : pairs) {
    lefts.push_back(p.left);
    rights.push_back(p.right);
  }
  const std::vector<double> scores = model.score_all(lefts, rights);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    correct += static_cast<std::size_t>((scores[i] >= 0.5) == (pairs[i].label == 1));
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Retrieval

RetrievalIndex RetrievalIndex::build(const TextEmbedder& embedder, std::vector<QAPost> posts) {
  RetrievalIndex index;
  std::vector<std::string> titles;
  titles.reserve(posts.size());
  for (const auto& p : posts) titles.push_back(p.title);
  index.vectors_ = embedder.embed_all(titles);
  index.posts_ = std::move(posts);
  index.fingerprint_ = embedder.fingerprint();
  return index;
}

void RetrievalIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_str = [&](const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  out.write(kIndexMagic.data(), kIndexMagic.size());
  put_str(fingerprint_);
  put_u32(static_cast<std::uint32_t>(vectors_.cols()));
  put_u32(static_cast<std::uint32_t>(posts_.size()));
  for (std::size_t i = 0; i < posts_.size(); ++i) {
    put_str(posts_[i].id);
    out.write(reinterpret_cast<const char*>(vectors_.row(static_cast<Eigen::Index>(i)).data()),
              static_cast<std::streamsize>(vectors_.cols() * sizeof(float)));
  }
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path, const TextEmbedder& embedder,
                                    const std::vector<QAPost>& posts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  auto fail = [&]() -> void { throw DataError("truncated index file " + path.string()); };
  auto get_u32 = [&] {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) fail();
    return v;
  };
  auto get_str = [&] {
    const std::uint32_t n = get_u32();
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) fail();
    return s;
  };
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kIndexMagic) throw DataError(path.string() + " is not a retrieval index");

  RetrievalIndex index;
  index.fingerprint_ = get_str();
  if (index.fingerprint_ != embedder.fingerprint()) {
    throw DataError("stale index " + path.string() + ": built by a different embedder");
  }
  const std::uint32_t dim = get_u32();
  const std::uint32_t count = get_u32();
  std::unordered_map<std::string, const QAPost*> by_id;
  for (const auto& p : posts) by_id.emplace(p.id, &p);
  index.vectors_.resize(count, dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string id = get_str();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("index references unknown post '" + id + "'");
    index.posts_.push_back(*it->second);
    in.read(reinterpret_cast<char*>(index.vectors_.row(i).data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) fail();
  }
  return index;
}

std::vector<RankedPost> filter_top_k(const TextEmbedder& embedder, const RetrievalIndex& index,
                                     std::string_view annotation, int k) {
  if (k < 1) throw UsageError("k must be >= 1");
  if (index.size() == 0) throw DataError("empty post index");
  if (index.embedder_fingerprint() != embedder.fingerprint()) {
    throw DataError("stale index: built by a different embedder");
  }
  const EmbeddingVector query = embedder.embed(annotation);
  const Matrix& vectors = index.vectors();
  std::vector<double> sims(index.size());
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    double dot = 0.0;
    for (Eigen::Index d = 0; d < vectors.cols(); ++d) {
      dot += static_cast<double>(vectors(i, d)) * static_cast<double>(query.values()(d));
    }
    sims[static_cast<std::size_t>(i)] = std::clamp(dot, -1.0, 1.0);
  }
  const auto& posts = index.posts();
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(k));
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return posts[a].id < posts[b].id;
                    });
  std::vector<RankedPost> ranked;
  ranked.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    ranked.push_back({posts[order[i]], sims[order[i]], std::nullopt});
  }
  return ranked;
}

std::vector<RankedPost> rerank(const PairClassifier& classifier, std::string_view annotation,
                               std::vector<RankedPost> candidates) {
  std::vector<std::string> lefts(candidates.size(), std::string(annotation));
  std::vector<std::string> rights;
  rights.reserve(candidates.size());
  for (const auto& c : candidates) rights.push_back(c.post.title);
  const std::vector<double> scores = classifier.score_all(lefts, rights);
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].rerank_score = scores[i];
  std::sort(candidates.begin(), candidates.end(), [](const RankedPost& a, const RankedPost& b) {
    if (*a.rerank_score != *b.rerank_score) return *a.rerank_score > *b.rerank_score;
    if (a.filter_similarity != b.filter_similarity) return a.filter_similarity > b.filter_similarity;
    return a.post.id < b.post.id;
  });
  return candidates;
}

RankedPost link(const TextEmbedder& embedder, const PairClassifier& classifier,
                const RetrievalIndex& index, std::string_view annotation, int k) {
  return rerank(classifier, annotation, filter_top_k(embedder, index, annotation, k)).front();
}

MatchCategory categorize_link(const ApiSequence& target, const QAPost& linked) {
  const std::vector<ApiCall> wanted = target.as_set();
  const std::set<ApiCall> answer(linked.answer_apis.begin(), linked.answer_apis.end());
  std::size_t hits = 0;
  for (const auto& call : wanted) hits += answer.count(call);
  if (hits == 0) return MatchCategory::kNoMatch;
  return hits == wanted.size() ? MatchCategory::kAllMatch : MatchCategory::kPartialMatch;
}

}  // namespace apirec
