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

// Command-line driver for the recommendation pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "apirec/error.hpp"
#include "apirec/pipeline.hpp"
#include "apirec/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using apirec::RunConfig;
using apirec::Variant;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

struct GlobalOptions {
  std::optional<fs::path> config_path;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  bool lenient = false;
  std::vector<std::string> overrides;  // key=value
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig config = g.config_path ? RunConfig::load(*g.config_path) : RunConfig{};
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw apirec::UsageError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.seed = *g.seed;
  if (g.strict && g.lenient) throw apirec::UsageError("--strict and --lenient are exclusive");
  if (g.strict) config.strict = true;
  if (g.lenient) config.strict = false;
  config.validate();
  return config;
}

std::vector<Variant> resolve_variants(const std::string& name, const RunConfig& config) {
  if (name.empty()) return {config.variant};
  if (name == "all") return {apirec::kAllVariants.begin(), apirec::kAllVariants.end()};
  return {apirec::parse_variant(name)};
}

void report(const apirec::StageResult& r) {
  std::cout << r.stage << ": " << (r.cache_hit ? "cached" : "done") << "\n";
  for (const auto& p : r.outputs) std::cout << "  " << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"API sequence recommendation pipeline"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Run configuration file (key = value lines)");
  app.add_option("--seed", g.seed, "Override the global seed");
  app.add_flag("--strict", g.strict, "Reject malformed input records");
  app.add_flag("--lenient", g.lenient, "Skip malformed input records with a warning");
  app.add_option("--set", g.overrides, "Override a config key (key=value); repeatable");

  std::string variant_name;
  auto add_variant = [&](CLI::App* cmd, const char* help) {
    cmd->add_option("--variant", variant_name, help)
        ->check(CLI::IsMember({"annotation_only", "plus_title", "plus_title_api", "all"}));
  };

  auto* prepare = app.add_subcommand("prepare", "Deduplicate, build the API vocabulary, filter and split");
  auto* train_linker = app.add_subcommand("train-linker", "Mine triplets and train the post linker");
  auto* link = app.add_subcommand("link", "Link every pair to a post and write expanded queries");
  auto* train_generator = app.add_subcommand("train-generator", "Train the sequence generator");
  add_variant(train_generator, "Ablation variant, or 'all' (default: config 'variant')");

  auto* predict = app.add_subcommand("predict", "Decode API sequences for a split");
  add_variant(predict, "Ablation variant, or 'all' (default: config 'variant')");
  apirec::PredictOptions predict_options;
  std::optional<fs::path> predict_output;
  predict->add_flag("--greedy", predict_options.greedy, "Greedy decoding instead of beam search");
  predict->add_option("--split", predict_options.split, "Split to decode")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  predict->add_option("--output", predict_output, "Prediction file (single variant only)");

  auto* evaluate = app.add_subcommand("evaluate", "Score prediction files against a split");
  std::vector<fs::path> prediction_files;
  std::string eval_split = "test";
  evaluate->add_option("--predictions", prediction_files,
                       "Prediction file; repeatable, the first is the baseline "
                       "(default: all three variants)");
  evaluate->add_option("--split", eval_split, "Reference split")->check(CLI::IsMember({"train", "valid", "test"}));

  auto* analyze = app.add_subcommand("analyze-matches", "Match-category distribution of linked posts");
  std::string analyze_split = "test";
  analyze->add_option("--split", analyze_split, "Split")->check(CLI::IsMember({"train", "valid", "test"}));

  auto* show_config = app.add_subcommand("show-config", "Print the effective configuration");

  auto* run = app.add_subcommand("run", "Run every stage for all three variants, then evaluate");

  auto* synthesize = app.add_subcommand("synthesize", "Write a synthetic corpus with known structure");
  apirec::SyntheticOptions synth;
  fs::path synth_dir;
  synthesize->add_option("--out", synth_dir, "Output directory (pairs.jsonl, posts.jsonl)")->required();
  synthesize->add_option("--pairs", synth.pairs, "Annotation pairs")->check(CLI::PositiveNumber);
  synthesize->add_option("--topics", synth.topics, "Topics (1..6)")->check(CLI::Range(1, 6));
  synthesize->add_option("--extra-posts", synth.extra_posts, "Unlinked distractor posts")
      ->check(CLI::NonNegativeNumber);
  synthesize->add_option("--cue-rate", synth.cue_rate, "Chance a post title names its family")
      ->check(CLI::Range(0.0, 1.0));
  synthesize->add_option("--corpus-seed", synth.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synthesize) {
      const auto corpus = apirec::make_synthetic_corpus(synth);
      fs::create_directories(synth_dir);
      apirec::write_pairs(synth_dir / "pairs.jsonl", corpus.pairs);
      apirec::write_posts(synth_dir / "posts.jsonl", corpus.posts);
      std::cout << corpus.pairs.size() << " pairs, " << corpus.posts.size() << " posts written to "
                << synth_dir.string() << "\n";
      return kExitOk;
    }

    const RunConfig config = resolve_config(g);
    if (*show_config) {
      std::cout << config.render();
      return kExitOk;
    }

    apirec::Pipeline pipeline(config, std::cerr);
    if (*prepare) {
      report(pipeline.prepare());
    } else if (*train_linker) {
      report(pipeline.train_linker());
    } else if (*link) {
      report(pipeline.link());
    } else if (*train_generator) {
      for (Variant v : resolve_variants(variant_name, config)) report(pipeline.train_generator(v));
    } else if (*predict) {
      const auto variants = resolve_variants(variant_name, config);
      if (predict_output && variants.size() != 1) {
        throw apirec::UsageError("--output needs a single --variant");
      }
      predict_options.output = predict_output;
      for (Variant v : variants) report(pipeline.predict(v, predict_options));
    } else if (*evaluate) {
      if (prediction_files.empty()) {
        for (Variant v : apirec::kAllVariants) prediction_files.push_back(pipeline.predictions_path(v));
      }
      std::cout << pipeline.evaluate(prediction_files, eval_split).table();
    } else if (*analyze) {
      const auto d = pipeline.analyze_matches(analyze_split);
      std::cout << "All match:     " << d.all << " (" << d.all_fraction() << ")\n"
                << "Partial match: " << d.partial << " (" << d.partial_fraction() << ")\n"
                << "No match:      " << d.none << " (" << d.none_fraction() << ")\n";
    } else if (*run) {
      report(pipeline.prepare());
      report(pipeline.train_linker());
      report(pipeline.link());
      std::vector<fs::path> files;
      for (Variant v : apirec::kAllVariants) {
        report(pipeline.train_generator(v));
        report(pipeline.predict(v, {}));
        files.push_back(pipeline.predictions_path(v));
      }
      std::cout << pipeline.evaluate(files, "test").table();
    }
    return kExitOk;
  } catch (const apirec::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const apirec::TrainingError& e) {
    std::cerr << "training failure: " << e.what() << "\n";
    return kExitTraining;
  } catch (const apirec::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
