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

#include "apirec/pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "apirec/error.hpp"
#include "apirec/hashing.hpp"
#include "apirec/text.hpp"
#include "jsonl.hpp"

namespace apirec {
namespace fs = std::filesystem;
using detail::Json;

namespace {

constexpr std::array<const char*, 3> kSplits = {"train", "valid", "test"};

// ---------------------------------------------------------------------------
// Config fields

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw UsageError("config '" + key + "': cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config '" + key + "': expected true or false, got '" + value + "'");
}

// Shortest text that parses back to the same value.
std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field number_field(std::string key, T RunConfig::*member) {
  return {key,
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          },
          [member, key](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

template <typename S, typename T>
Field nested_field(std::string key, S RunConfig::*outer, T S::*member) {
  return {key,
          [outer, member](const RunConfig& c) {
            if constexpr (std::is_same_v<T, bool>) {
              return std::string((c.*outer).*member ? "true" : "false");
            } else if constexpr (std::is_floating_point_v<T>) {
              return format_double((c.*outer).*member);
            } else {
              return std::to_string((c.*outer).*member);
            }
          },
          [outer, member, key](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) {
              (c.*outer).*member = parse_bool(key, v);
            } else {
              (c.*outer).*member = parse_number<T>(key, v);
            }
          }};
}

Field path_field(std::string key, fs::path RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return (c.*member).string(); },
          [member](RunConfig& c, const std::string& v) { c.*member = v; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(path_field("pairs", &RunConfig::pairs_path));
    f.push_back(path_field("posts", &RunConfig::posts_path));
    f.push_back(path_field("workdir", &RunConfig::workdir));
    f.push_back(number_field("seed", &RunConfig::seed));
    f.push_back({"strict", [](const RunConfig& c) { return std::string(c.strict ? "true" : "false"); },
                 [](RunConfig& c, const std::string& v) { c.strict = parse_bool("strict", v); }});
    f.push_back(number_field("min_frequency", &RunConfig::min_frequency));
    f.push_back(number_field("split_seed", &RunConfig::split_seed));
    f.push_back(nested_field("triplet.threshold", &RunConfig::triplets, &TripletParams::threshold));
    f.push_back(nested_field("triplet.max_rate", &RunConfig::triplets, &TripletParams::max_rate));
    f.push_back(nested_field("triplet.positives", &RunConfig::triplets, &TripletParams::positives));
    f.push_back(nested_field("triplet.negatives", &RunConfig::triplets, &TripletParams::negatives));
    f.push_back(nested_field("embedder.dim", &RunConfig::embedder, &EmbedderConfig::dim));
    f.push_back(nested_field("embedder.hidden", &RunConfig::embedder, &EmbedderConfig::hidden));
    f.push_back(nested_field("embedder.margin", &RunConfig::embedder, &EmbedderConfig::margin));
    f.push_back(nested_field("embedder.epochs", &RunConfig::embedder, &EmbedderConfig::epochs));
    f.push_back(nested_field("embedder.learning_rate", &RunConfig::embedder,
                             &EmbedderConfig::learning_rate));
    f.push_back(nested_field("embedder.batch_size", &RunConfig::embedder, &EmbedderConfig::batch_size));
    f.push_back(nested_field("embedder.oov_buckets", &RunConfig::embedder, &EmbedderConfig::oov_buckets));
    f.push_back(nested_field("embedder.lexical_dim", &RunConfig::embedder, &EmbedderConfig::lexical_dim));
    f.push_back(nested_field("embedder.lexical_weight", &RunConfig::embedder,
                             &EmbedderConfig::lexical_weight));
    f.push_back(nested_field("classifier.dim", &RunConfig::classifier, &ClassifierConfig::dim));
    f.push_back(nested_field("classifier.hidden", &RunConfig::classifier, &ClassifierConfig::hidden));
    f.push_back(nested_field("classifier.epochs", &RunConfig::classifier, &ClassifierConfig::epochs));
    f.push_back(nested_field("classifier.learning_rate", &RunConfig::classifier,
                             &ClassifierConfig::learning_rate));
    f.push_back(nested_field("classifier.batch_size", &RunConfig::classifier,
                             &ClassifierConfig::batch_size));
    f.push_back(nested_field("classifier.oov_buckets", &RunConfig::classifier,
                             &ClassifierConfig::oov_buckets));
    f.push_back(number_field("linker.k", &RunConfig::top_k));
    f.push_back(nested_field("generator.dim", &RunConfig::generator, &GeneratorConfig::dim));
    f.push_back(nested_field("generator.heads", &RunConfig::generator, &GeneratorConfig::heads));
    f.push_back(nested_field("generator.ff_dim", &RunConfig::generator, &GeneratorConfig::ff_dim));
    f.push_back(nested_field("generator.encoder_layers", &RunConfig::generator,
                             &GeneratorConfig::encoder_layers));
    f.push_back(nested_field("generator.decoder_layers", &RunConfig::generator,
                             &GeneratorConfig::decoder_layers));
    f.push_back(nested_field("generator.max_len", &RunConfig::generator, &GeneratorConfig::max_len));
    f.push_back(nested_field("generator.max_decode_steps", &RunConfig::generator,
                             &GeneratorConfig::max_decode_steps));
    f.push_back(nested_field("generator.beam_size", &RunConfig::generator, &GeneratorConfig::beam_size));
    f.push_back(nested_field("generator.epochs", &RunConfig::generator, &GeneratorConfig::epochs));
    f.push_back(nested_field("generator.learning_rate", &RunConfig::generator,
                             &GeneratorConfig::learning_rate));
    f.push_back(nested_field("generator.warmup_steps", &RunConfig::generator,
                             &GeneratorConfig::warmup_steps));
    f.push_back(nested_field("generator.batch_size", &RunConfig::generator,
                             &GeneratorConfig::batch_size));
    f.push_back(nested_field("generator.share_encoders", &RunConfig::generator,
                             &GeneratorConfig::share_encoders));
    f.push_back(nested_field("generator.length_normalize", &RunConfig::generator,
                             &GeneratorConfig::length_normalize));
    f.push_back(number_field("generator.keep_checkpoints", &RunConfig::keep_checkpoints));
    f.push_back({"variant", [](const RunConfig& c) { return to_string(c.variant); },
                 [](RunConfig& c, const std::string& v) { c.variant = parse_variant(v); }});
    f.push_back({"evaluate.aggregation",
                 [](const RunConfig& c) {
                   return std::string(c.bleu_aggregation == BleuAggregation::kCorpus ? "corpus"
                                                                                     : "sentence_mean");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "corpus") {
                     c.bleu_aggregation = BleuAggregation::kCorpus;
                   } else if (v == "sentence_mean") {
                     c.bleu_aggregation = BleuAggregation::kSentenceMean;
                   } else {
                     throw UsageError("evaluate.aggregation must be corpus or sentence_mean");
                   }
                 }});
    f.push_back({"evaluate.unit",
                 [](const RunConfig& c) {
                   return std::string(c.bleu_unit == BleuUnit::kSubtoken ? "subtoken" : "call");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "subtoken") {
                     c.bleu_unit = BleuUnit::kSubtoken;
                   } else if (v == "call") {
                     c.bleu_unit = BleuUnit::kCall;
                   } else {
                     throw UsageError("evaluate.unit must be subtoken or call");
                   }
                 }});
    f.push_back({"evaluate.smooth",
                 [](const RunConfig& c) { return std::string(c.bleu_smooth ? "true" : "false"); },
                 [](RunConfig& c, const std::string& v) { c.bleu_smooth = parse_bool("evaluate.smooth", v); }});
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw UsageError("unknown config key '" + key + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// Manifest

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

class Manifest {
 public:
  Manifest(fs::path workdir, std::string config_hash)
      : workdir_(std::move(workdir)), path_(workdir_ / "manifest.json") {
    if (fs::exists(path_)) {
      std::ifstream in(path_);
      try {
        data_ = Json::parse(in);
      } catch (const std::exception& e) {
        throw DataError("corrupt manifest " + path_.string() + ": " + e.what());
      }
    }
    if (!data_.is_object()) data_ = Json::object();
    data_["config_hash"] = std::move(config_hash);
    if (!data_.contains("stages")) data_["stages"] = Json::object();
  }

  // True when the stage completed under `key` and its outputs are intact.
  bool fresh(const std::string& stage, const std::string& key) const {
    const Json& stages = data_.at("stages");
    if (!stages.contains(stage)) return false;
    const Json& entry = stages.at(stage);
    if (entry.value("status", "") != "done" || entry.value("key", "") != key) return false;
    for (const auto& [rel, hash] : entry.at("outputs").items()) {
      const fs::path p = workdir_ / rel;
      if (!fs::exists(p) || sha256_file(p) != hash.get<std::string>()) return false;
    }
    return true;
  }

  std::vector<fs::path> outputs(const std::string& stage) const {
    std::vector<fs::path> out;
    for (const auto& [rel, hash] : data_.at("stages").at(stage).at("outputs").items()) {
      out.push_back(workdir_ / rel);
    }
    return out;
  }

  void note_cache_hit(const std::string& stage) {
    Json& entry = data_["stages"][stage];
    entry["cache_hits"] = entry.value("cache_hits", 0) + 1;
    entry["last_cache_hit"] = utc_now();
    save();
  }

  void record(const std::string& stage, const std::string& key, const Json& inputs,
              const std::vector<fs::path>& outputs, const std::string& started, Json extra) {
    Json entry;
    entry["status"] = "done";
    entry["key"] = key;
    entry["inputs"] = inputs;
    Json out = Json::object();
    for (const auto& p : outputs) out[fs::relative(p, workdir_).generic_string()] = sha256_file(p);
    entry["outputs"] = std::move(out);
    entry["started"] = started;
    entry["finished"] = utc_now();
    entry["cache_hits"] = 0;
    if (!extra.is_null()) entry["details"] = std::move(extra);
    data_["stages"][stage] = std::move(entry);
    save();
  }

  void mark_failed(const std::string& stage, const std::string& message) {
    Json& entry = data_["stages"][stage];
    entry["status"] = "failed";
    entry["error"] = message;
    entry["finished"] = utc_now();
    save();
  }

 private:
  void save() const { write_atomically(path_, data_.dump(2) + "\n"); }

  fs::path workdir_;
  fs::path path_;
  Json data_;
};

// Re-throws `e` with the stage name prepended, keeping its category.
[[noreturn]] void rethrow_in_stage(const std::string& stage) {
  try {
    throw;
  } catch (const UsageError& e) {
    throw UsageError(stage + ": " + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const Error& e) {
    throw Error(stage + ": " + e.what());
  } catch (const fs::filesystem_error& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const Json::exception& e) {
    throw DataError(stage + ": " + e.what());
  }
}

struct StageBody {
  std::vector<fs::path> outputs;
  Json details;
};

std::string config_subset(const RunConfig& config, std::initializer_list<const char*> prefixes) {
  std::string out;
  for (const auto& key : RunConfig::keys()) {
    for (const char* prefix : prefixes) {
      if (key.rfind(prefix, 0) == 0) {
        out += key + "=" + config.get(key) + "\n";
        break;
      }
    }
  }
  return out;
}

Json hash_inputs(const std::vector<std::pair<std::string, fs::path>>& inputs) {
  Json out = Json::object();
  for (const auto& [name, path] : inputs) {
    if (!fs::exists(path)) throw DataError("missing input " + path.string());
    out[name] = sha256_file(path);
  }
  return out;
}

StageResult run_stage(const RunConfig& config, std::ostream& log, const std::string& stage,
                      const std::string& settings,
                      const std::vector<std::pair<std::string, fs::path>>& inputs,
                      const std::function<StageBody()>& body) {
  try {
    fs::create_directories(config.workdir);
    Manifest manifest(config.workdir, sha256_hex(config.render()));
    Json input_hashes;
    try {
      input_hashes = hash_inputs(inputs);
    } catch (const std::exception& e) {
      manifest.mark_failed(stage, e.what());
      throw;
    }
    const std::string key = sha256_hex(stage + "\n" + settings + input_hashes.dump());
    if (manifest.fresh(stage, key)) {
      manifest.note_cache_hit(stage);
      log << "[" << stage << "] up to date (cache hit)\n";
      return {stage, true, manifest.outputs(stage)};
    }
    const std::string started = utc_now();
    log << "[" << stage << "] running\n";
    StageBody result;
    try {
      result = body();
    } catch (const std::exception& e) {
      manifest.mark_failed(stage, e.what());
      throw;
    }
    manifest.record(stage, key, input_hashes, result.outputs, started, std::move(result.details));
    log << "[" << stage << "] done\n";
    return {stage, false, result.outputs};
  } catch (...) {
    rethrow_in_stage(stage);
  }
}

std::vector<AnnotationPair> read_split(const fs::path& path) {
  return load_pairs(path, IngestMode::kStrict);
}

std::string join_calls(const std::vector<ApiCall>& calls) {
  std::string out;
  for (const auto& c : calls) {
    if (!out.empty()) out += ' ';
    out += c.render();
  }
  return out;
}

ApiSequence parse_rendered(const std::string& rendered) {
  std::vector<ApiCall> calls;
  std::istringstream in(rendered);
  std::string token;
  while (in >> token) calls.push_back(parse_api_call(token));
  return ApiSequence(std::move(calls));
}

Tokens call_tokens(const std::string& rendered) {
  Tokens out;
  std::istringstream in(rendered);
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

std::string RunConfig::render() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      config.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  const fs::path base = path.parent_path();
  for (fs::path* p : {&config.pairs_path, &config.posts_path, &config.workdir}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return config;
}

void RunConfig::validate() const {
  auto fraction = [](const char* key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(key) + " must be in [0,1]");
  };
  auto positive = [](const char* key, long v) {
    if (v < 1) throw UsageError(std::string(key) + " must be >= 1");
  };
  fraction("triplet.threshold", triplets.threshold);
  fraction("triplet.max_rate", triplets.max_rate);
  positive("min_frequency", min_frequency);
  positive("triplet.positives", triplets.positives);
  positive("triplet.negatives", triplets.negatives);
  positive("linker.k", top_k);
  positive("embedder.dim", embedder.dim);
  positive("embedder.batch_size", embedder.batch_size);
  positive("classifier.dim", classifier.dim);
  positive("classifier.batch_size", classifier.batch_size);
  positive("generator.dim", generator.dim);
  positive("generator.heads", generator.heads);
  positive("generator.encoder_layers", generator.encoder_layers);
  positive("generator.decoder_layers", generator.decoder_layers);
  positive("generator.max_len", generator.max_len);
  positive("generator.max_decode_steps", generator.max_decode_steps);
  positive("generator.beam_size", generator.beam_size);
  positive("generator.batch_size", generator.batch_size);
  if (embedder.epochs < 0 || classifier.epochs < 0 || generator.epochs < 0) {
    throw UsageError("epoch counts must be >= 0");
  }
  if (embedder.margin < 0.0) throw UsageError("embedder.margin must be >= 0");
  if (generator.dim % generator.heads != 0) {
    throw UsageError("generator.dim must be a multiple of generator.heads");
  }
  if (keep_checkpoints < 0) throw UsageError("generator.keep_checkpoints must be >= 0");
}

// ---------------------------------------------------------------------------
// Records

std::vector<PredictionRecord> load_predictions(const fs::path& path) {
  return detail::load_jsonl<PredictionRecord>(path, [](const Json& j) {
    return PredictionRecord{j.at("id").get<std::string>(), j.at("prediction").get<std::string>(),
                            j.at("subtokens").get<std::vector<std::string>>(),
                            j.at("log_probability").get<double>(), j.at("beam_size").get<int>()};
  });
}

void write_predictions(const fs::path& path, std::span<const PredictionRecord> records) {
  detail::write_jsonl<PredictionRecord>(path, records, [](const PredictionRecord& r) {
    Json j;
    j["id"] = r.id;
    j["prediction"] = r.prediction;
    j["subtokens"] = r.subtokens;
    j["log_probability"] = r.log_probability;
    j["beam_size"] = r.beam_size;
    return j;
  });
}

std::vector<LinkedRecord> load_linked(const fs::path& path) {
  return detail::load_jsonl<LinkedRecord>(path, [](const Json& j) {
    return LinkedRecord{j.at("id").get<std::string>(),
                        j.at("annotation").get<std::string>(),
                        j.at("target").get<std::string>(),
                        j.at("post_id").get<std::string>(),
                        j.at("title").get<std::string>(),
                        j.at("answer_apis").get<std::vector<std::string>>(),
                        j.at("filter_similarity").get<double>(),
                        j.at("rerank_score").get<double>(),
                        parse_match_category(j.at("category").get<std::string>())};
  });
}

void write_linked(const fs::path& path, std::span<const LinkedRecord> records) {
  detail::write_jsonl<LinkedRecord>(path, records, [](const LinkedRecord& r) {
    Json j;
    j["id"] = r.id;
    j["annotation"] = r.annotation;
    j["target"] = r.target;
    j["post_id"] = r.post_id;
    j["title"] = r.title;
    j["answer_apis"] = r.answer_apis;
    j["filter_similarity"] = r.filter_similarity;
    j["rerank_score"] = r.rerank_score;
    j["category"] = to_string(r.category);
    return j;
  });
}

std::string EvaluationReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(24) << "system" << std::right;
  for (const char* h : {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "P", "R", "n"}) out << std::setw(9) << h;
  out << "\n";
  out << std::fixed << std::setprecision(5);
  for (const auto& row : rows) {
    out << std::left << std::setw(24) << row.name << std::right;
    for (int k = 1; k <= 4; ++k) out << std::setw(9) << row.bleu.bleu(k);
    out << std::setw(9) << row.precision << std::setw(9) << row.recall << std::setw(9)
        << row.examples << "\n";
  }
  for (const auto& c : comparisons) {
    out << "Mann-Whitney U (" << c.other << " vs " << c.baseline << ", per-example BLEU-4): U = "
        << std::setprecision(1) << c.test.u << ", p = " << std::scientific << std::setprecision(3)
        << c.test.p_value << (c.test.exact ? " (exact)" : "") << std::fixed << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(RunConfig config, std::ostream& log) : config_(std::move(config)), log_(log) {
  config_.validate();
}

fs::path Pipeline::manifest_path() const { return config_.workdir / "manifest.json"; }
fs::path Pipeline::split_path(const std::string& split) const {
  if (std::find(kSplits.begin(), kSplits.end(), split) == kSplits.end()) {
    throw UsageError("unknown split '" + split + "' (expected train, valid or test)");
  }
  return config_.workdir / "corpus" / (split + ".jsonl");
}
fs::path Pipeline::vocabulary_path() const { return config_.workdir / "corpus" / "vocab.txt"; }
fs::path Pipeline::linker_dir() const { return config_.workdir / "linker"; }
fs::path Pipeline::linked_path(const std::string& split) const {
  split_path(split);  // validates the name
  return config_.workdir / "linked" / (split + ".jsonl");
}
fs::path Pipeline::expanded_path(Variant variant, const std::string& split) const {
  split_path(split);
  return config_.workdir / "expanded" / to_string(variant) / (split + ".jsonl");
}
fs::path Pipeline::generator_path(Variant variant) const {
  return config_.workdir / "generator" / to_string(variant) / "model.bin";
}
fs::path Pipeline::predictions_path(Variant variant) const {
  return config_.workdir / "predictions" / (to_string(variant) + ".jsonl");
}

StageResult Pipeline::prepare() {
  const fs::path corpus = config_.workdir / "corpus";
  const fs::path posts_out = corpus / "posts.jsonl";
  return run_stage(
      config_, log_, "prepare", config_subset(config_, {"min_frequency", "split_seed", "strict"}),
      {{"pairs", config_.pairs_path}, {"posts", config_.posts_path}}, [&]() -> StageBody {
        fs::create_directories(corpus);
        const IngestMode mode = config_.strict ? IngestMode::kStrict : IngestMode::kLenient;
        std::vector<std::string> skipped;
        const auto pairs = load_pairs(config_.pairs_path, mode, &skipped);
        const auto posts = load_posts(config_.posts_path, mode, &skipped);
        for (const auto& s : skipped) log_ << "[prepare] skipped " << s << "\n";

        const auto deduped = dedup_pairs(pairs);
        const fs::path dedup_out = corpus / "deduped.jsonl";
        write_pairs(dedup_out, deduped);
        const ApiVocabulary vocab = build_vocabulary(posts, config_.min_frequency);
        write_vocabulary(vocabulary_path(), vocab);
        const auto kept = filter_pairs(deduped, vocab);
        const CorpusSplit split = split_corpus(kept, config_.split_seed);
        write_pairs(split_path("train"), split.train);
        write_pairs(split_path("valid"), split.valid);
        write_pairs(split_path("test"), split.test);
        write_posts(posts_out, posts);

        log_ << "[prepare] " << pairs.size() << " pairs, " << deduped.size() << " after dedup, "
             << kept.size() << " after vocabulary filter (" << vocab.size() << " APIs); split "
             << split.train.size() << "/" << split.valid.size() << "/" << split.test.size() << "\n";

        Json details;
        details["counts"] = {{"pairs", pairs.size()},       {"deduplicated", deduped.size()},
                             {"filtered", kept.size()},     {"vocabulary", vocab.size()},
                             {"train", split.train.size()}, {"valid", split.valid.size()},
                             {"test", split.test.size()},   {"posts", posts.size()},
                             {"skipped", skipped.size()}};
        details["substages"] = {
            {"dedup", sha256_file(dedup_out)},
            {"vocabulary", sha256_file(vocabulary_path())},
            {"filter_split", sha256_hex(sha256_file(split_path("train")) + sha256_file(split_path("valid")) +
                                        sha256_file(split_path("test")))}};
        return {{dedup_out, vocabulary_path(), split_path("train"), split_path("valid"),
                 split_path("test"), posts_out},
                std::move(details)};
      });
}

StageResult Pipeline::train_linker() {
  const fs::path dir = linker_dir();
  const fs::path posts_path = config_.workdir / "corpus" / "posts.jsonl";
  return run_stage(
      config_, log_, "train-linker",
      config_subset(config_, {"triplet.", "embedder.", "classifier.", "seed"}),
      {{"train", split_path("train")}, {"posts", posts_path}}, [&]() -> StageBody {
        fs::create_directories(dir);
        const auto train = read_split(split_path("train"));
        const auto posts = load_posts(posts_path);

        // Linker-internal 9:1 validation slice of the training split.
        std::vector<AnnotationPair> fit(train);
        std::mt19937_64 rng(derive_seed(config_.seed, "linker-validation"));
        std::shuffle(fit.begin(), fit.end(), rng);
        const auto held = static_cast<std::size_t>(std::llround(static_cast<double>(fit.size()) / 10.0));
        std::vector<AnnotationPair> held_out(fit.end() - static_cast<long>(held), fit.end());
        fit.resize(fit.size() - held);

        const std::uint64_t triplet_seed = derive_seed(config_.seed, "triplets");
        const MiningResult mined = mine_triplets(fit, posts, config_.triplets, triplet_seed);
        if (mined.triplets.empty()) throw TrainingError("no positive posts above threshold");
        const auto labeled = to_labeled_pairs(mined.triplets);
        write_triplets(dir / "triplets.jsonl", mined.triplets);
        write_labeled_pairs(dir / "labeled_pairs.jsonl", labeled);
        log_ << "[train-linker] " << mined.triplets.size() << " triplets from " << fit.size()
             << " pairs (" << mined.discarded_ids.size() << " without a positive), "
             << labeled.size() << " labeled pairs\n";

        EmbedderConfig ec = config_.embedder;
        ec.seed = derive_seed(config_.seed, "embedder");
        TrainingHistory eh;
        const TextEmbedder embedder = train_embedder(mined.triplets, ec, &eh);
        embedder.save(dir / "embedder.bin");

        ClassifierConfig cc = config_.classifier;
        cc.seed = derive_seed(config_.seed, "classifier");
        TrainingHistory ch;
        const PairClassifier classifier = train_classifier(labeled, cc, &ch);
        classifier.save(dir / "classifier.bin");

        const RetrievalIndex index = RetrievalIndex::build(embedder, posts);
        index.save(dir / "index.bin");

        // Quality report on the held-out slice.
        Json report;
        report["embedder_epoch_losses"] = eh.epoch_losses;
        report["classifier_epoch_losses"] = ch.epoch_losses;
        report["classifier_train_accuracy"] = classifier_accuracy(classifier, labeled);
        const MiningResult check = mine_triplets(held_out, posts, config_.triplets, triplet_seed);
        double pos = 0.0;
        double neg = 0.0;
        std::map<std::string, std::pair<double, double>> best;  // anchor -> (best pos, best neg)
        for (const auto& t : check.triplets) {
          const auto a = embedder.embed(t.anchor);
          const double cp = cosine_similarity(a, embedder.embed(t.positive));
          const double cn = cosine_similarity(a, embedder.embed(t.negative));
          pos += cp;
          neg += cn;
          auto [it, fresh] = best.emplace(t.anchor, std::make_pair(cp, cn));
          if (!fresh) {
            it->second.first = std::max(it->second.first, cp);
            it->second.second = std::max(it->second.second, cn);
          }
        }
        if (!check.triplets.empty()) {
          const double n = static_cast<double>(check.triplets.size());
          std::size_t separated = 0;
          for (const auto& [anchor, b] : best) separated += static_cast<std::size_t>(b.first > b.second);
          report["validation_triplets"] = check.triplets.size();
          report["mean_positive_cosine"] = pos / n;
          report["mean_negative_cosine"] = neg / n;
          report["separation"] = (pos - neg) / n;
          report["anchors_separated"] = static_cast<double>(separated) / static_cast<double>(best.size());
        }
        if (!held_out.empty()) {
          std::vector<MatchCategory> categories;
          for (const auto& p : held_out) {
            categories.push_back(
                categorize_link(p.target, apirec::link(embedder, classifier, index, p.annotation, config_.top_k).post));
          }
          const MatchDistribution d = match_distribution(categories);
          report["validation_matches"] = {{"all", d.all_fraction()},
                                          {"partial", d.partial_fraction()},
                                          {"none", d.none_fraction()}};
        }
        const fs::path report_path = dir / "report.json";
        write_atomically(report_path, report.dump(2) + "\n");
        if (report.contains("separation")) {
          log_ << "[train-linker] separation " << report["separation"].get<double>() << "\n";
        }
        return {{dir / "triplets.jsonl", dir / "labeled_pairs.jsonl", dir / "embedder.bin",
                 dir / "classifier.bin", dir / "index.bin", report_path},
                Json()};
      });
}

StageResult Pipeline::link() {
  const fs::path dir = linker_dir();
  const fs::path posts_path = config_.workdir / "corpus" / "posts.jsonl";
  std::vector<std::pair<std::string, fs::path>> inputs = {
      {"embedder", dir / "embedder.bin"}, {"classifier", dir / "classifier.bin"},
      {"index", dir / "index.bin"},       {"posts", posts_path}};
  for (const char* s : kSplits) inputs.emplace_back(s, split_path(s));
  return run_stage(config_, log_, "link", config_subset(config_, {"linker."}), inputs, [&]() -> StageBody {
    const auto posts = load_posts(posts_path);
    const TextEmbedder embedder = TextEmbedder::load(dir / "embedder.bin");
    const PairClassifier classifier = PairClassifier::load(dir / "classifier.bin");
    const RetrievalIndex index = RetrievalIndex::load(dir / "index.bin", embedder, posts);
    if (index.size() == 0) throw DataError("empty post index");

    std::vector<fs::path> outputs;
    Json details;
    for (const char* split : kSplits) {
      const auto pairs = read_split(split_path(split));
      std::vector<LinkedRecord> linked;
      std::vector<ExpandedRecord> expanded;
      linked.reserve(pairs.size());
      for (const auto& p : pairs) {
        const RankedPost best = apirec::link(embedder, classifier, index, p.annotation, config_.top_k);
        LinkedRecord r;
        r.id = p.id;
        r.annotation = p.annotation;
        r.target = p.target.render();
        r.post_id = best.post.id;
        r.title = best.post.title;
        for (const auto& c : best.post.answer_apis) r.answer_apis.push_back(c.render());
        r.filter_similarity = best.filter_similarity;
        r.rerank_score = best.rerank_score.value_or(0.0);
        r.category = categorize_link(p.target, best.post);
        linked.push_back(std::move(r));
        expanded.push_back({p.id, p.annotation, best.post.title, join_calls(best.post.answer_apis),
                            p.target.render()});
      }
      fs::create_directories(linked_path(split).parent_path());
      write_linked(linked_path(split), linked);
      outputs.push_back(linked_path(split));
      for (Variant v : kAllVariants) {
        std::vector<ExpandedRecord> masked;
        masked.reserve(expanded.size());
        for (const auto& r : expanded) masked.push_back(apply_variant(r, v));
        fs::create_directories(expanded_path(v, split).parent_path());
        write_expanded(expanded_path(v, split), masked);
        outputs.push_back(expanded_path(v, split));
      }
      if (!linked.empty()) {
        std::vector<MatchCategory> cats;
        for (const auto& r : linked) cats.push_back(r.category);
        const MatchDistribution d = match_distribution(cats);
        details[split] = {{"all", d.all}, {"partial", d.partial}, {"none", d.none}};
        log_ << "[link] " << split << ": " << linked.size() << " linked (all " << d.all
             << ", partial " << d.partial << ", none " << d.none << ")\n";
      }
    }
    return {outputs, std::move(details)};
  });
}

StageResult Pipeline::train_generator(Variant variant) {
  const std::string stage = "train-generator:" + to_string(variant);
  const fs::path model_path = generator_path(variant);
  const fs::path dir = model_path.parent_path();
  std::string settings = config_subset(config_, {"generator.", "seed"});
  return run_stage(
      config_, log_, stage, settings, {{"train", expanded_path(variant, "train")}}, [&]() -> StageBody {
        const auto records = load_expanded(expanded_path(variant, "train"));
        if (records.empty()) throw DataError("empty generator training set");
        // Vocabulary from the training split only.
        std::vector<std::vector<std::string>> streams;
        for (const auto& r : records) {
          for (auto& s : channel_subtokens(r)) streams.push_back(std::move(s));
          streams.push_back(target_subtokens(r));
        }
        SubtokenVocab vocab = SubtokenVocab::build(streams);
        const auto examples = make_examples(vocab, records, config_.generator.max_len);

        GeneratorConfig gc = config_.generator;
        gc.seed = derive_seed(config_.seed, "generator");
        std::vector<double> losses;
        GeneratorTrainOptions options;
        options.checkpoint_dir = dir / "checkpoints";
        options.keep_checkpoints = config_.keep_checkpoints;
        options.epoch_losses = &losses;
        fs::remove_all(*options.checkpoint_dir);
        const auto start = std::chrono::steady_clock::now();
        const Seq2SeqModel model = apirec::train_generator(std::move(vocab), examples, gc, options);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        model.save(model_path);

        Json report;
        report["examples"] = examples.size();
        report["vocabulary"] = model.vocab().size();
        report["parameters"] = model.parameter_count();
        report["epoch_losses"] = losses;
        const fs::path report_path = dir / "report.json";
        write_atomically(report_path, report.dump(2) + "\n");
        if (!losses.empty()) {
          log_ << "[" << stage << "] " << losses.size() << " epochs, loss " << losses.front() << " -> "
               << losses.back() << " (" << seconds << " s)\n";
        }
        std::vector<fs::path> outputs{model_path, report_path};
        if (fs::exists(*options.checkpoint_dir)) {
          std::vector<fs::path> checkpoints;
          for (const auto& e : fs::directory_iterator(*options.checkpoint_dir)) checkpoints.push_back(e.path());
          std::sort(checkpoints.begin(), checkpoints.end());
          outputs.insert(outputs.end(), checkpoints.begin(), checkpoints.end());
        }
        // Timing stays in the manifest so that artifacts are reproducible.
        return {outputs, Json{{"seconds", seconds}}};
      });
}

StageResult Pipeline::predict(Variant variant, const PredictOptions& options) {
  const fs::path out = options.output ? *options.output
                                      : (options.greedy ? config_.workdir / "predictions" /
                                                              (to_string(variant) + "-greedy.jsonl")
                                                        : predictions_path(variant));
  const std::string stage = "predict:" + to_string(variant) + (options.greedy ? ":greedy" : "") +
                            (options.split == "test" ? "" : ":" + options.split);
  std::string settings = config_subset(config_, {"generator.beam_size", "generator.length_normalize",
                                                 "generator.max_decode_steps"});
  settings += "greedy=" + std::string(options.greedy ? "true" : "false") + "\noutput=" + out.string() + "\n";
  return run_stage(
      config_, log_, stage, settings,
      {{"model", generator_path(variant)}, {"queries", expanded_path(variant, options.split)}},
      [&]() -> StageBody {
        const Seq2SeqModel model = Seq2SeqModel::load(generator_path(variant));
        const auto records = load_expanded(expanded_path(variant, options.split));
        const int beam = config_.generator.beam_size;
        std::vector<PredictionRecord> predictions;
        predictions.reserve(records.size());
        std::size_t malformed = 0;
        for (const auto& r : records) {
          const ExpandedQuery q = make_query(model.vocab(), r, model.config().max_len);
          const Hypothesis h = options.greedy ? model.greedy(q) : model.beam_search(q, beam).front();
          PredictionRecord p;
          p.id = r.id;
          p.subtokens = model.vocab().decode(h.tokens);
          const Detokenized d = detokenize_apis(p.subtokens);
          malformed += static_cast<std::size_t>(d.malformed);
          p.prediction = d.sequence.render();
          p.log_probability = h.log_prob;
          p.beam_size = options.greedy ? 1 : beam;
          predictions.push_back(std::move(p));
        }
        fs::create_directories(out.parent_path());
        write_predictions(out, predictions);
        log_ << "[" << stage << "] " << predictions.size() << " predictions, " << malformed
             << " malformed fragments dropped\n";
        return {{out}, Json{{"malformed_fragments", malformed}}};
      });
}

EvaluationReport Pipeline::evaluate(const std::vector<fs::path>& predictions, const std::string& split) {
  try {
    if (predictions.empty()) throw UsageError("no prediction files to evaluate");
    const auto pairs = read_split(split_path(split));
    std::map<std::string, const AnnotationPair*> targets;
    for (const auto& p : pairs) targets.emplace(p.id, &p);

    BleuOptions bleu_options;
    bleu_options.smooth = config_.bleu_smooth;
    EvaluationReport report;
    Json out;
    for (const auto& file : predictions) {
      const auto records = load_predictions(file);
      std::set<std::string> seen;
      for (const auto& r : records) {
        if (!targets.count(r.id)) {
          throw DataError("alignment error: " + file.string() + " predicts unknown id '" + r.id + "'");
        }
        if (!seen.insert(r.id).second) {
          throw DataError("alignment error: " + file.string() + " repeats id '" + r.id + "'");
        }
      }
      if (seen.size() != targets.size()) {
        throw DataError("alignment error: " + file.string() + " covers " + std::to_string(seen.size()) +
                        " of " + std::to_string(targets.size()) + " " + split + " ids");
      }

      EvaluationRow row;
      row.name = file.stem().string();
      row.examples = records.size();
      std::vector<ScoredPair> scored;
      double precision = 0.0;
      double recall = 0.0;
      Json per_example = Json::array();
      for (const auto& r : records) {
        const ApiSequence& target = targets.at(r.id)->target;
        ScoredPair sp;
        if (config_.bleu_unit == BleuUnit::kSubtoken) {
          sp.candidate = r.subtokens;
          sp.reference = subtokenize(target.render(), SubtokenMode::kApi);
        } else {
          sp.candidate = call_tokens(r.prediction);
          sp.reference = call_tokens(target.render());
        }
        const ApiSequence predicted = parse_rendered(r.prediction);
        const PRReport pr = precision_recall(predicted, target);
        precision += pr.precision;
        recall += pr.recall;
        const double b4 = bleu(sp.candidate, sp.reference, bleu_options).bleu(4);
        row.per_example_bleu4.push_back(b4);
        per_example.push_back({{"id", r.id}, {"bleu4", b4}, {"precision", pr.precision}, {"recall", pr.recall}});
        scored.push_back(std::move(sp));
      }
      row.precision = precision / static_cast<double>(records.size());
      row.recall = recall / static_cast<double>(records.size());
      if (config_.bleu_aggregation == BleuAggregation::kCorpus) {
        row.bleu = corpus_bleu(scored, bleu_options);
      } else {
        row.bleu = corpus_bleu(scored, bleu_options);
        row.bleu.cumulative = mean_sentence_bleu(scored, bleu_options);
      }
      out["rows"].push_back({{"name", row.name},
                             {"file", file.string()},
                             {"bleu", row.bleu.cumulative},
                             {"brevity_penalty", row.bleu.brevity_penalty},
                             {"precision", row.precision},
                             {"recall", row.recall},
                             {"examples", row.examples},
                             {"per_example", std::move(per_example)}});
      report.rows.push_back(std::move(row));
    }
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      Comparison c{report.rows[0].name, report.rows[i].name,
                   mann_whitney_u(report.rows[i].per_example_bleu4, report.rows[0].per_example_bleu4)};
      out["comparisons"].push_back({{"baseline", c.baseline},
                                    {"other", c.other},
                                    {"u", c.test.u},
                                    {"p_value", c.test.p_value},
                                    {"exact", c.test.exact}});
      report.comparisons.push_back(std::move(c));
    }
    out["aggregation"] = config_.get("evaluate.aggregation");
    out["unit"] = config_.get("evaluate.unit");
    const fs::path dir = config_.workdir / "evaluation";
    fs::create_directories(dir);
    std::string name;
    for (const auto& r : report.rows) name += (name.empty() ? "" : "+") + r.name;
    write_atomically(dir / (name + "." + split + ".json"), out.dump(2) + "\n");
    return report;
  } catch (...) {
    rethrow_in_stage("evaluate");
  }
}

MatchDistribution Pipeline::analyze_matches(const std::string& split) {
  try {
    const auto linked = load_linked(linked_path(split));
    std::vector<MatchCategory> categories;
    categories.reserve(linked.size());
    for (const auto& r : linked) categories.push_back(r.category);
    const MatchDistribution d = match_distribution(categories);
    const Json out = {{"split", split},
                      {"total", d.total()},
                      {"counts", {{"all", d.all}, {"partial", d.partial}, {"none", d.none}}},
                      {"fractions",
                       {{"all", d.all_fraction()}, {"partial", d.partial_fraction()}, {"none", d.none_fraction()}}}};
    const fs::path dir = config_.workdir / "evaluation";
    fs::create_directories(dir);
    write_atomically(dir / ("matches." + split + ".json"), out.dump(2) + "\n");
    return d;
  } catch (...) {
    rethrow_in_stage("analyze-matches");
  }
}

}  // namespace apirec
