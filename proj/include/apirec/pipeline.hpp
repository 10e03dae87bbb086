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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "apirec/corpus.hpp"
#include "apirec/generator.hpp"
#include "apirec/linker.hpp"
#include "apirec/metrics.hpp"
#include "apirec/triplets.hpp"

namespace apirec {

enum class BleuAggregation { kCorpus, kSentenceMean };
enum class BleuUnit { kSubtoken, kCall };

// Every tunable of a run. Serialised as flat `key = value` lines; `#` starts
// a comment. Relative paths in a config file resolve against the file's
// directory.
struct RunConfig {
  std::filesystem::path pairs_path;
  std::filesystem::path posts_path;
  std::filesystem::path workdir = "work";

  int min_frequency = 5;
  std::uint64_t split_seed = 42;
  bool strict = true;

  TripletParams triplets;
  EmbedderConfig embedder;
  ClassifierConfig classifier;
  int top_k = 10;

  GeneratorConfig generator;
  int keep_checkpoints = 2;  // per-epoch generator checkpoints retained; 0 keeps all
  Variant variant = Variant::kPlusTitleApi;

  BleuAggregation bleu_aggregation = BleuAggregation::kCorpus;
  BleuUnit bleu_unit = BleuUnit::kSubtoken;
  bool bleu_smooth = false;

  // Model seeds are derived from this one.
  std::uint64_t seed = 1;

  static RunConfig load(const std::filesystem::path& path);
  // Throws UsageError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();
  // All keys with their current values, one per line.
  std::string render() const;
  // Throws UsageError when a threshold or count is out of range.
  void validate() const;
};

struct StageResult {
  std::string stage;
  bool cache_hit = false;
  std::vector<std::filesystem::path> outputs;
};

struct PredictOptions {
  bool greedy = false;
  std::string split = "test";
  std::optional<std::filesystem::path> output;
};

struct EvaluationRow {
  std::string name;
  BleuReport bleu;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t examples = 0;
  std::size_t malformed = 0;
  std::vector<double> per_example_bleu4;
};

struct Comparison {
  std::string baseline;
  std::string other;
  MannWhitneyResult test;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  std::vector<Comparison> comparisons;  // every later row against the first

  // Rows = systems, columns = BLEU-1..4, plus precision and recall.
  std::string table() const;
};

// Runs the experiment stages inside config.workdir. Each stage records its
// input and output hashes in workdir/manifest.json and is skipped when they
// are unchanged. Errors keep their type and gain the stage name.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::ostream& log);

  const RunConfig& config() const { return config_; }

  StageResult prepare();
  StageResult train_linker();
  StageResult link();
  StageResult train_generator(Variant variant);
  StageResult predict(Variant variant, const PredictOptions& options = {});
  EvaluationReport evaluate(const std::vector<std::filesystem::path>& predictions,
                            const std::string& split = "test");
  MatchDistribution analyze_matches(const std::string& split = "test");

  // Artifact locations.
  std::filesystem::path manifest_path() const;
  std::filesystem::path split_path(const std::string& split) const;
  std::filesystem::path vocabulary_path() const;
  std::filesystem::path linker_dir() const;
  std::filesystem::path linked_path(const std::string& split) const;
  std::filesystem::path expanded_path(Variant variant, const std::string& split) const;
  std::filesystem::path generator_path(Variant variant) const;
  std::filesystem::path predictions_path(Variant variant) const;

 private:
  RunConfig config_;
  std::ostream& log_;
};

// One line of a prediction file.
struct PredictionRecord {
  std::string id;
  std::string prediction;  // rendered API sequence
  std::vector<std::string> subtokens;
  double log_probability = 0.0;
  int beam_size = 1;
};

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);

// One line of a linked-dataset file.
struct LinkedRecord {
  std::string id;
  std::string annotation;
  std::string target;
  std::string post_id;
  std::string title;
  std::vector<std::string> answer_apis;
  double filter_similarity = 0.0;
  double rerank_score = 0.0;
  MatchCategory category = MatchCategory::kNoMatch;
};

std::vector<LinkedRecord> load_linked(const std::filesystem::path& path);
void write_linked(const std::filesystem::path& path, std::span<const LinkedRecord> records);

}  // namespace apirec
