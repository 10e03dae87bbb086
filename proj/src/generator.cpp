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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "apirec/error.hpp"
#include "apirec/hashing.hpp"
#include "apirec/nn/container.hpp"
#include "apirec/text.hpp"
#include "jsonl.hpp"

namespace apirec {
namespace {

using detail::Json;
using nn::Matrix;
using nn::Tape;
using nn::Var;

constexpr std::array<const char*, kChannelCount> kChannelNames = {"annotation", "title", "api"};

int position_rows(const GeneratorConfig& c) { return std::max(c.max_len, c.max_decode_steps) + 1; }

Matrix scaled_xavier(int rows, int cols, float factor, std::mt19937_64& rng) {
  return nn::xavier_uniform(rows, cols, rng) * factor;
}

void add_linear(nn::ParameterSet& params, const std::string& name, int in, int out,
                std::mt19937_64& rng, float factor = 1.0f) {
  params.add(name + ".w", scaled_xavier(in, out, factor, rng));
  params.add(name + ".b", Matrix::Zero(1, out));
}

void add_norm(nn::ParameterSet& params, const std::string& name, int dim) {
  params.add(name + ".g", Matrix::Ones(1, dim));
  params.add(name + ".b", Matrix::Zero(1, dim));
}

void add_block(nn::ParameterSet& params, const std::string& prefix, const GeneratorConfig& c,
               bool cross, std::mt19937_64& rng) {
  // Residual output projections start small so deep stacks begin near identity.
  const float residual = 1.0f / std::sqrt(2.0f * static_cast<float>(c.decoder_layers));
  add_norm(params, prefix + ".ln1", c.dim);
  for (const char* p : {".attn.q", ".attn.k", ".attn.v"}) add_linear(params, prefix + p, c.dim, c.dim, rng);
  add_linear(params, prefix + ".attn.o", c.dim, c.dim, rng, residual);
  if (cross) {
    add_norm(params, prefix + ".lnx", c.dim);
    for (const char* p : {".cross.q", ".cross.k", ".cross.v"}) {
      add_linear(params, prefix + p, c.dim, c.dim, rng);
    }
    add_linear(params, prefix + ".cross.o", c.dim, c.dim, rng, residual);
  }
  add_norm(params, prefix + ".ln2", c.dim);
  add_linear(params, prefix + ".ff1", c.dim, c.ff_dim, rng);
  add_linear(params, prefix + ".ff2", c.ff_dim, c.dim, rng, residual);
}

Json config_json(const GeneratorConfig& c) {
  return Json{{"dim", c.dim},
              {"heads", c.heads},
              {"ff_dim", c.ff_dim},
              {"encoder_layers", c.encoder_layers},
              {"decoder_layers", c.decoder_layers},
              {"max_len", c.max_len},
              {"max_decode_steps", c.max_decode_steps},
              {"beam_size", c.beam_size},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"warmup_steps", c.warmup_steps},
              {"batch_size", c.batch_size},
              {"share_encoders", c.share_encoders},
              {"length_normalize", c.length_normalize}};
}

GeneratorConfig config_from_json(const Json& j, std::uint64_t seed) {
  GeneratorConfig c;
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.max_decode_steps = j.at("max_decode_steps").get<int>();
  c.beam_size = j.at("beam_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.warmup_steps = j.at("warmup_steps").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.share_encoders = j.at("share_encoders").get<bool>();
  c.length_normalize = j.at("length_normalize").get<bool>();
  c.seed = seed;
  return c;
}

std::vector<double> softmax_row(const Matrix& logits, Eigen::Index row) {
  std::vector<double> p(static_cast<std::size_t>(logits.cols()));
  double max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.cols(); ++j) max = std::max(max, static_cast<double>(logits(row, j)));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    p[static_cast<std::size_t>(j)] = std::exp(static_cast<double>(logits(row, j)) - max);
    sum += p[static_cast<std::size_t>(j)];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// SubtokenVocab

SubtokenVocab::SubtokenVocab() : SubtokenVocab(std::vector<std::string>{}) {}

SubtokenVocab::SubtokenVocab(std::vector<std::string> tokens) {
  tokens_.assign(kReserved.begin(), kReserved.end());
  for (auto& t : tokens) {
    if (std::find(kReserved.begin(), kReserved.end(), t) != kReserved.end()) continue;
    tokens_.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate subtoken '" + tokens_[i] + "'");
    }
  }
}

SubtokenVocab SubtokenVocab::build(std::span<const std::vector<std::string>> streams, int min_count) {
  if (min_count < 1) throw UsageError("min_count must be >= 1");
  std::map<std::string, int> counts;
  for (const auto& stream : streams) {
    for (const auto& t : stream) ++counts[t];
  }
  std::vector<std::string> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_count) kept.push_back(token);
  }
  return SubtokenVocab(std::move(kept));
}

int SubtokenVocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknown : it->second;
}

const std::string& SubtokenVocab::token(int id) const {
  if (id < 0 || id >= size()) throw Error("subtoken id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> SubtokenVocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> SubtokenVocab::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

// ---------------------------------------------------------------------------
// Records and examples

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kAnnotationOnly:
      return "annotation_only";
    case Variant::kPlusTitle:
      return "plus_title";
    case Variant::kPlusTitleApi:
      return "plus_title_api";
  }
  return "unknown";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == text) return v;
  }
  throw UsageError("unknown variant '" + std::string(text) +
                   "' (expected annotation_only, plus_title or plus_title_api)");
}

ExpandedRecord apply_variant(ExpandedRecord record, Variant variant) {
  if (variant == Variant::kAnnotationOnly) record.title.clear();
  if (variant != Variant::kPlusTitleApi) record.apis.clear();
  return record;
}

std::vector<ExpandedRecord> load_expanded(const std::filesystem::path& path) {
  return detail::load_jsonl<ExpandedRecord>(path, [](const Json& j) {
    return ExpandedRecord{j.at("id").get<std::string>(), j.at("annotation").get<std::string>(),
                          j.at("title").get<std::string>(), j.at("apis").get<std::string>(),
                          j.at("target").get<std::string>()};
  });
}

void write_expanded(const std::filesystem::path& path, std::span<const ExpandedRecord> records) {
  detail::write_jsonl<ExpandedRecord>(path, records, [](const ExpandedRecord& r) {
    Json j;
    j["id"] = r.id;
    j["annotation"] = r.annotation;
    j["title"] = r.title;
    j["apis"] = r.apis;
    j["target"] = r.target;
    return j;
  });
}

std::array<std::vector<std::string>, kChannelCount> channel_subtokens(const ExpandedRecord& record) {
  return {subtokenize(record.annotation, SubtokenMode::kQuery),
          subtokenize(record.title, SubtokenMode::kQuery),
          subtokenize(record.apis, SubtokenMode::kApi)};
}

std::vector<std::string> target_subtokens(const ExpandedRecord& record) {
  return subtokenize(record.target, SubtokenMode::kApi);
}

ExpandedQuery make_query(const SubtokenVocab& vocab, const ExpandedRecord& record, int max_len) {
  if (max_len < 1) throw UsageError("max_len must be >= 1");
  ExpandedQuery query;
  const auto streams = channel_subtokens(record);
  for (int c = 0; c < kChannelCount; ++c) {
    auto ids = vocab.encode(streams[static_cast<std::size_t>(c)]);
    if (static_cast<int>(ids.size()) > max_len) ids.resize(static_cast<std::size_t>(max_len));
    query.channels[static_cast<std::size_t>(c)] = std::move(ids);
  }
  return query;
}

std::vector<GeneratorExample> make_examples(const SubtokenVocab& vocab,
                                            std::span<const ExpandedRecord> records, int max_len) {
  std::vector<GeneratorExample> examples;
  examples.reserve(records.size());
  for (const auto& r : records) {
    GeneratorExample ex{r.id, make_query(vocab, r, max_len), vocab.encode(target_subtokens(r))};
    if (ex.target.empty()) throw DataError("record '" + r.id + "' has an empty target");
    if (static_cast<int>(ex.target.size()) > max_len) ex.target.resize(static_cast<std::size_t>(max_len));
    examples.push_back(std::move(ex));
  }
  return examples;
}

// ---------------------------------------------------------------------------
// Seq2SeqModel

Seq2SeqModel::Seq2SeqModel(SubtokenVocab vocab, const GeneratorConfig& config)
    : vocab_(std::move(vocab)), config_(config) {
  const auto& c = config_;
  if (c.dim < 1 || c.ff_dim < 1 || c.heads < 1 || c.dim % c.heads != 0) {
    throw UsageError("generator dim must be a positive multiple of heads");
  }
  if (c.encoder_layers < 1 || c.decoder_layers < 1) throw UsageError("layer counts must be >= 1");
  if (c.max_len < 1 || c.max_decode_steps < 1 || c.beam_size < 1) {
    throw UsageError("max_len, max_decode_steps and beam_size must be >= 1");
  }
  std::mt19937_64 rng(c.seed);
  const int v = vocab_.size();
  const int encoders = c.share_encoders ? 1 : kChannelCount;
  for (int e = 0; e < encoders; ++e) {
    const std::string p = c.share_encoders ? "enc.shared" : std::string("enc.") + kChannelNames[e];
    params_.add(p + ".embed", nn::normal_init(v, c.dim, 0.1f, rng));
    params_.add(p + ".pos", nn::normal_init(c.max_len + 1, c.dim, 0.1f, rng));
    for (int l = 0; l < c.encoder_layers; ++l) add_block(params_, p + ".layer" + std::to_string(l), c, false, rng);
    add_norm(params_, p + ".final", c.dim);
  }
  params_.add("dec.embed", nn::normal_init(v, c.dim, 0.1f, rng));
  params_.add("dec.pos", nn::normal_init(position_rows(c), c.dim, 0.1f, rng));
  for (int l = 0; l < c.decoder_layers; ++l) add_block(params_, "dec.layer" + std::to_string(l), c, true, rng);
  add_norm(params_, "dec.final", c.dim);
  add_linear(params_, "dec.out", c.dim, v, rng);
}

std::string Seq2SeqModel::channel_prefix(Channel channel) const {
  if (config_.share_encoders) return "enc.shared";
  return std::string("enc.") + kChannelNames[static_cast<std::size_t>(channel)];
}

Var Seq2SeqModel::norm(Tape& tape, const std::string& name, Var x) const {
  return nn::layer_norm(tape, x, tape.parameter(params_.at(name + ".g")),
                        tape.parameter(params_.at(name + ".b")));
}

Var Seq2SeqModel::block(Tape& tape, const std::string& p, Var x, std::span<const int> offsets,
                        bool causal, std::optional<Var> memory,
                        std::span<const int> memory_offsets) const {
  auto lin = [&](Var in, const std::string& name) {
    return nn::linear(tape, in, params_.at(name + ".w"), params_.at(name + ".b"));
  };
  Var h = norm(tape, p + ".ln1", x);
  Var a = nn::attention(tape, lin(h, p + ".attn.q"), lin(h, p + ".attn.k"), lin(h, p + ".attn.v"),
                        offsets, offsets, config_.heads, causal);
  x = nn::add(tape, x, lin(a, p + ".attn.o"));
  if (memory) {
    h = norm(tape, p + ".lnx", x);
    a = nn::attention(tape, lin(h, p + ".cross.q"), lin(*memory, p + ".cross.k"),
                      lin(*memory, p + ".cross.v"), offsets, memory_offsets, config_.heads, false);
    x = nn::add(tape, x, lin(a, p + ".cross.o"));
  }
  h = norm(tape, p + ".ln2", x);
  return nn::add(tape, x, lin(nn::relu(tape, lin(h, p + ".ff1")), p + ".ff2"));
}

Var Seq2SeqModel::encode_batch(Tape& tape, Channel channel,
                               std::span<const std::vector<int>* const> inputs,
                               std::vector<int>& offsets) const {
  std::vector<int> ids;
  std::vector<int> positions;
  offsets.assign(1, 0);
  for (const auto* tokens : inputs) {
    if (static_cast<int>(tokens->size()) > config_.max_len) {
      throw DataError("channel overflow: " + std::to_string(tokens->size()) +
                      " subtokens exceed max_len " + std::to_string(config_.max_len));
    }
    ids.push_back(SubtokenVocab::kStart);
    ids.insert(ids.end(), tokens->begin(), tokens->end());
    for (std::size_t i = 0; i <= tokens->size(); ++i) positions.push_back(static_cast<int>(i));
    offsets.push_back(static_cast<int>(ids.size()));
  }
  const std::string p = channel_prefix(channel);
  Var x = nn::add(tape, nn::gather(tape, params_.at(p + ".embed"), ids),
                  nn::gather(tape, params_.at(p + ".pos"), positions));
  for (int l = 0; l < config_.encoder_layers; ++l) {
    x = block(tape, p + ".layer" + std::to_string(l), x, offsets, false, std::nullopt, {});
  }
  return norm(tape, p + ".final", x);
}

Var Seq2SeqModel::decode_batch(Tape& tape, Var memory, std::span<const int> memory_offsets,
                               std::span<const std::vector<int>> inputs,
                               std::vector<int>& offsets) const {
  std::vector<int> ids;
  std::vector<int> positions;
  offsets.assign(1, 0);
  for (const auto& tokens : inputs) {
    if (static_cast<int>(tokens.size()) > position_rows(config_)) {
      throw DataError("decoder input longer than the position table");
    }
    ids.insert(ids.end(), tokens.begin(), tokens.end());
    for (std::size_t i = 0; i < tokens.size(); ++i) positions.push_back(static_cast<int>(i));
    offsets.push_back(static_cast<int>(ids.size()));
  }
  Var x = nn::add(tape, nn::gather(tape, params_.at("dec.embed"), ids),
                  nn::gather(tape, params_.at("dec.pos"), positions));
  for (int l = 0; l < config_.decoder_layers; ++l) {
    x = block(tape, "dec.layer" + std::to_string(l), x, offsets, true, memory, memory_offsets);
  }
  return norm(tape, "dec.final", x);
}

Matrix Seq2SeqModel::encode_channel(Channel channel, std::span<const int> tokens) const {
  Tape tape(false);
  const std::vector<int> owned(tokens.begin(), tokens.end());
  const std::vector<int>* inputs[] = {&owned};
  std::vector<int> offsets;
  return tape.value(encode_batch(tape, channel, inputs, offsets));
}

Matrix Seq2SeqModel::encode(const ExpandedQuery& query) const {
  std::array<Matrix, kChannelCount> parts;
  Eigen::Index rows = 0;
  for (int c = 0; c < kChannelCount; ++c) {
    parts[static_cast<std::size_t>(c)] =
        encode_channel(static_cast<Channel>(c), query.channels[static_cast<std::size_t>(c)]);
    rows += parts[static_cast<std::size_t>(c)].rows();
  }
  Matrix memory(rows, config_.dim);
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    memory.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  return memory;
}

std::vector<std::vector<double>> Seq2SeqModel::step_distributions(
    const Matrix& memory, std::span<const std::vector<int>> prefixes) const {
  if (prefixes.empty()) return {};
  std::vector<std::vector<int>> inputs;
  inputs.reserve(prefixes.size());
  for (const auto& prefix : prefixes) {
    if (static_cast<int>(prefix.size()) > config_.max_decode_steps) {
      throw UsageError("prefix of " + std::to_string(prefix.size()) +
                       " tokens exceeds max_decode_steps " +
                       std::to_string(config_.max_decode_steps));
    }
    std::vector<int> in{SubtokenVocab::kStart};
    in.insert(in.end(), prefix.begin(), prefix.end());
    inputs.push_back(std::move(in));
  }
  const auto n = static_cast<Eigen::Index>(prefixes.size());
  Matrix tiled(memory.rows() * n, memory.cols());
  std::vector<int> memory_offsets{0};
  for (Eigen::Index i = 0; i < n; ++i) {
    tiled.middleRows(i * memory.rows(), memory.rows()) = memory;
    memory_offsets.push_back(static_cast<int>((i + 1) * memory.rows()));
  }
  Tape tape(false);
  std::vector<int> offsets;
  Var hidden = decode_batch(tape, tape.constant(std::move(tiled)), memory_offsets, inputs, offsets);
  std::vector<int> last;
  for (std::size_t i = 1; i < offsets.size(); ++i) last.push_back(offsets[i] - 1);
  Var logits = nn::linear(tape, nn::select_rows(tape, hidden, last), params_.at("dec.out.w"),
                          params_.at("dec.out.b"));
  const Matrix& values = tape.value(logits);
  std::vector<std::vector<double>> out;
  out.reserve(prefixes.size());
  for (Eigen::Index i = 0; i < values.rows(); ++i) out.push_back(softmax_row(values, i));
  return out;
}

std::vector<double> Seq2SeqModel::step_distribution(const ExpandedQuery& query,
                                                    std::span<const int> prefix) const {
  const std::vector<std::vector<int>> prefixes{std::vector<int>(prefix.begin(), prefix.end())};
  return step_distributions(encode(query), prefixes).front();
}

std::vector<Hypothesis> Seq2SeqModel::beam_search(const ExpandedQuery& query, int beam_size) const {
  const QueryDecoder decoder(*this, query);
  return apirec::beam_search(decoder, {beam_size, config_.max_decode_steps, config_.length_normalize});
}

Hypothesis Seq2SeqModel::greedy(const ExpandedQuery& query) const {
  const QueryDecoder decoder(*this, query);
  return greedy_decode(decoder, config_.max_decode_steps);
}

Var Seq2SeqModel::loss(Tape& tape, std::span<const GeneratorExample* const> batch) const {
  if (batch.empty()) throw Error("empty generator batch");
  std::array<Var, kChannelCount> encoded;
  std::array<std::vector<int>, kChannelCount> channel_offsets;
  for (int c = 0; c < kChannelCount; ++c) {
    std::vector<const std::vector<int>*> inputs;
    inputs.reserve(batch.size());
    for (const auto* ex : batch) inputs.push_back(&ex->query.channels[static_cast<std::size_t>(c)]);
    encoded[static_cast<std::size_t>(c)] =
        encode_batch(tape, static_cast<Channel>(c), inputs, channel_offsets[static_cast<std::size_t>(c)]);
  }
  // Regroup the channel-major rows so each example's memory is contiguous:
  // annotation rows, then title rows, then API rows.
  std::vector<int> order;
  std::vector<int> memory_offsets{0};
  std::array<int, kChannelCount> base{};
  for (int c = 1; c < kChannelCount; ++c) {
    base[static_cast<std::size_t>(c)] =
        base[static_cast<std::size_t>(c - 1)] + channel_offsets[static_cast<std::size_t>(c - 1)].back();
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int c = 0; c < kChannelCount; ++c) {
      const auto& off = channel_offsets[static_cast<std::size_t>(c)];
      for (int r = off[i]; r < off[i + 1]; ++r) order.push_back(base[static_cast<std::size_t>(c)] + r);
    }
    memory_offsets.push_back(static_cast<int>(order.size()));
  }
  Var memory = nn::select_rows(tape, nn::concat_rows(tape, encoded), order);

  std::vector<std::vector<int>> inputs;
  std::vector<int> targets;
  for (const auto* ex : batch) {
    std::vector<int> in{SubtokenVocab::kStart};
    in.insert(in.end(), ex->target.begin(), ex->target.end());
    inputs.push_back(std::move(in));
    targets.insert(targets.end(), ex->target.begin(), ex->target.end());
    targets.push_back(SubtokenVocab::kEnd);
  }
  std::vector<int> offsets;
  Var hidden = decode_batch(tape, memory, memory_offsets, inputs, offsets);
  Var logits = nn::linear(tape, hidden, params_.at("dec.out.w"), params_.at("dec.out.b"));
  return nn::cross_entropy(tape, logits, targets);
}

std::string Seq2SeqModel::fingerprint() const {
  Json vocab = vocab_.tokens();
  return sha256_hex(params_.fingerprint() + vocab.dump() + config_json(config_).dump());
}

void Seq2SeqModel::save(const std::filesystem::path& path) const {
  Json config = config_json(config_);
  config["vocabulary"] = vocab_.tokens();
  nn::write_container(path, {"generator", config.dump(), config_.seed}, params_);
}

Seq2SeqModel Seq2SeqModel::load(const std::filesystem::path& path) {
  const nn::ContainerHeader header = nn::read_container_header(path);
  const Json j = Json::parse(header.config_json);
  auto tokens = j.at("vocabulary").get<std::vector<std::string>>();
  if (tokens.size() < SubtokenVocab::kReserved.size()) throw DataError("truncated vocabulary in " + path.string());
  tokens.erase(tokens.begin(), tokens.begin() + SubtokenVocab::kReserved.size());
  Seq2SeqModel model(SubtokenVocab(std::move(tokens)), config_from_json(j, header.seed));
  nn::read_container(path, "generator", model.params_);
  return model;
}

QueryDecoder::QueryDecoder(const Seq2SeqModel& model, const ExpandedQuery& query)
    : model_(model), memory_(model.encode(query)) {}

std::vector<double> QueryDecoder::step_distribution(std::span<const int> prefix) const {
  const std::vector<std::vector<int>> prefixes{std::vector<int>(prefix.begin(), prefix.end())};
  return model_.step_distributions(memory_, prefixes).front();
}

std::vector<std::vector<double>> QueryDecoder::step_distributions(
    std::span<const std::vector<int>> prefixes) const {
  return model_.step_distributions(memory_, prefixes);
}

// ---------------------------------------------------------------------------
// Training

Seq2SeqModel train_generator(SubtokenVocab vocab, std::span<const GeneratorExample> examples,
                             const GeneratorConfig& config, const GeneratorTrainOptions& options) {
  if (examples.empty()) throw DataError("empty generator training set");
  for (const auto& ex : examples) {
    const bool all_pad = std::all_of(ex.target.begin(), ex.target.end(),
                                     [](int id) { return id == SubtokenVocab::kPad; });
    if (ex.target.empty() || all_pad) {
      throw DataError("record '" + ex.id + "' has an empty or all-pad target");
    }
  }
  Seq2SeqModel model(std::move(vocab), config);
  if (config.epochs <= 0) return model;
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  nn::Adam::Options adam_options;
  adam_options.learning_rate = static_cast<float>(config.learning_rate);
  model.parameters().zero_grad();
  nn::Adam adam(model.parameters(), adam_options);
  std::mt19937_64 rng(derive_seed(config.seed, "generator-order"));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
  long step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t count = std::min(batch_size, order.size() - begin);
      std::vector<const GeneratorExample*> batch;
      for (std::size_t i = begin; i < begin + count; ++i) batch.push_back(&examples[order[i]]);
      const double warm = config.warmup_steps > 0
                              ? std::min(1.0, static_cast<double>(step + 1) / config.warmup_steps)
                              : 1.0;
      adam.set_learning_rate(static_cast<float>(config.learning_rate * warm));
      Tape tape;
      Var loss = model.loss(tape, batch);
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw TrainingError("generator: non-finite loss at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
      }
      tape.backward(loss);
      adam.step();
      ++step;
      total += value * static_cast<double>(count);
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    if (options.epoch_losses != nullptr) options.epoch_losses->push_back(epoch_loss);
    if (options.checkpoint_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch-%02d.bin", epoch);
      model.save(*options.checkpoint_dir / name);
      const int stale = epoch - options.keep_checkpoints;
      if (options.keep_checkpoints > 0 && stale >= 1) {
        std::snprintf(name, sizeof name, "epoch-%02d.bin", stale);
        std::filesystem::remove(*options.checkpoint_dir / name);
      }
    }
  }
  return model;
}

double exact_match_rate(const Seq2SeqModel& model, std::span<const GeneratorExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    const Hypothesis h = model.greedy(ex.query);
    hits += static_cast<std::size_t>(h.finished && h.tokens == ex.target);
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

Detokenized detokenize_apis(std::span<const std::string> subtokens) {
  Detokenized out;
  std::vector<ApiCall> calls;
  bool in_fragment = false;
  std::size_t i = 0;
  while (i < subtokens.size()) {
    if (i + 2 < subtokens.size() && subtokens[i] != "." && subtokens[i + 1] == "." &&
        subtokens[i + 2] != ".") {
      try {
        calls.emplace_back(subtokens[i], subtokens[i + 2]);
        i += 3;
        in_fragment = false;
        continue;
      } catch (const DataError&) {
        // Falls through: the triple is not a valid identifier pair.
      }
    }
    if (!in_fragment) ++out.malformed;
    in_fragment = true;
    ++i;
  }
  out.sequence = ApiSequence(std::move(calls));
  return out;
}

}  // namespace apirec
