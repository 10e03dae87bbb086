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

#include "apirec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "apirec/error.hpp"
#include "json.hpp"

namespace apirec {
namespace {

using Json = nlohmann::ordered_json;

bool has_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

const Json& require_field(const Json& record, const char* name) {
  auto it = record.find(name);
  if (it == record.end()) throw DataError(std::string("missing field '") + name + "'");
  return *it;
}

std::string require_string(const Json& record, const char* name) {
  const Json& value = require_field(record, name);
  if (!value.is_string()) throw DataError(std::string("field '") + name + "' must be a string");
  return value.get<std::string>();
}

std::string require_id(const Json& record) {
  const Json& value = require_field(record, "id");
  std::string id;
  if (value.is_string()) {
    id = value.get<std::string>();
  } else if (value.is_number_integer()) {
    id = std::to_string(value.get<long long>());
  } else {
    throw DataError("field 'id' must be a string or integer");
  }
  if (id.empty()) throw DataError("empty id");
  return id;
}

std::vector<ApiCall> require_api_list(const Json& record, const char* name) {
  const Json& value = require_field(record, name);
  if (!value.is_array()) throw DataError(std::string("field '") + name + "' must be a list");
  std::vector<ApiCall> calls;
  calls.reserve(value.size());
  for (const auto& item : value) {
    if (!item.is_string()) throw DataError(std::string("field '") + name + "' holds a non-string");
    calls.push_back(parse_api_call(item.get<std::string>()));
  }
  return calls;
}

Json parse_json_line(std::string_view line) {
  Json record;
  try {
    record = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!record.is_object()) throw DataError("record is not a JSON object");
  return record;
}

template <typename Record, typename Parse>
std::vector<Record> load_records(const std::filesystem::path& path, IngestMode mode,
                                 std::vector<std::string>* skipped, Parse parse) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Record> records;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      Record record = parse(line);
      if (!ids.insert(record.id).second) throw DataError("duplicate id '" + record.id + "'");
      records.push_back(std::move(record));
    } catch (const DataError& e) {
      ParseError error(path.string(), line_no, e.what());
      if (mode == IngestMode::kStrict) throw error;
      if (skipped != nullptr) skipped->push_back(error.what());
    }
  }
  return records;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

}  // namespace

ApiCall::ApiCall(std::string class_name, std::string method_name)
    : class_name_(std::move(class_name)), method_name_(std::move(method_name)) {
  if (class_name_.empty() || method_name_.empty() || has_space(class_name_) ||
      has_space(method_name_) || class_name_.find('.') != std::string::npos ||
      method_name_.find('.') != std::string::npos) {
    throw DataError("malformed API identifier '" + class_name_ + "." + method_name_ + "'");
  }
}

ApiCall parse_api_call(std::string_view text) {
  const auto last_dot = text.rfind('.');
  if (last_dot == std::string_view::npos) {
    throw DataError("malformed API identifier '" + std::string(text) + "': no dot");
  }
  std::string_view qualified = text.substr(0, last_dot);
  std::string_view method = text.substr(last_dot + 1);
  const auto class_dot = qualified.rfind('.');
  std::string_view class_name =
      class_dot == std::string_view::npos ? qualified : qualified.substr(class_dot + 1);
  if (class_name.empty() || method.empty() || has_space(class_name) || has_space(method)) {
    throw DataError("malformed API identifier '" + std::string(text) + "'");
  }
  return ApiCall(std::string(class_name), std::string(method));
}

ApiSequence::ApiSequence(std::vector<ApiCall> calls) : calls_(std::move(calls)) {}

std::vector<ApiCall> ApiSequence::as_set() const {
  std::vector<ApiCall> set = calls_;
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

std::string ApiSequence::render() const {
  std::string out;
  for (const auto& call : calls_) {
    if (!out.empty()) out += ' ';
    out += call.render();
  }
  return out;
}

ApiVocabulary::ApiVocabulary(std::vector<ApiCall> entries, int min_frequency)
    : entries_(std::move(entries)), min_frequency_(min_frequency) {
  std::sort(entries_.begin(), entries_.end());
  entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
}

bool ApiVocabulary::contains(const ApiCall& call) const {
  return std::binary_search(entries_.begin(), entries_.end(), call);
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(c);
  }
  return out;
}

AnnotationPair parse_pair_record(std::string_view line) {
  Json record = parse_json_line(line);
  AnnotationPair pair;
  pair.id = require_id(record);
  pair.annotation = normalize_whitespace(require_string(record, "annotation"));
  if (pair.annotation.empty()) throw DataError("empty annotation in record '" + pair.id + "'");
  std::vector<ApiCall> calls = require_api_list(record, "apis");
  if (calls.empty()) throw DataError("empty API sequence in record '" + pair.id + "'");
  pair.target = ApiSequence(std::move(calls));
  return pair;
}

QAPost parse_post_record(std::string_view line) {
  Json record = parse_json_line(line);
  QAPost post;
  post.id = require_id(record);
  post.title = normalize_whitespace(require_string(record, "title"));
  if (post.title.empty()) throw DataError("empty title in post '" + post.id + "'");
  std::set<ApiCall> seen;
  for (auto& call : require_api_list(record, "answer_apis")) {
    if (seen.insert(call).second) post.answer_apis.push_back(std::move(call));
  }
  return post;
}

std::string format_pair_record(const AnnotationPair& pair) {
  Json record;
  record["id"] = pair.id;
  record["annotation"] = pair.annotation;
  Json apis = Json::array();
  for (const auto& call : pair.target.calls()) apis.push_back(call.render());
  record["apis"] = std::move(apis);
  return record.dump();
}

std::string format_post_record(const QAPost& post) {
  Json record;
  record["id"] = post.id;
  record["title"] = post.title;
  Json apis = Json::array();
  for (const auto& call : post.answer_apis) apis.push_back(call.render());
  record["answer_apis"] = std::move(apis);
  return record.dump();
}

std::vector<AnnotationPair> load_pairs(const std::filesystem::path& path, IngestMode mode,
                                       std::vector<std::string>* skipped) {
  return load_records<AnnotationPair>(path, mode, skipped, parse_pair_record);
}

std::vector<QAPost> load_posts(const std::filesystem::path& path, IngestMode mode,
                               std::vector<std::string>* skipped) {
  return load_records<QAPost>(path, mode, skipped, parse_post_record);
}

void write_pairs(const std::filesystem::path& path, const std::vector<AnnotationPair>& pairs) {
  std::vector<std::string> lines;
  lines.reserve(pairs.size());
  for (const auto& pair : pairs) lines.push_back(format_pair_record(pair));
  write_lines(path, lines);
}

void write_posts(const std::filesystem::path& path, const std::vector<QAPost>& posts) {
  std::vector<std::string> lines;
  lines.reserve(posts.size());
  for (const auto& post : posts) lines.push_back(format_post_record(post));
  write_lines(path, lines);
}

ApiVocabulary build_vocabulary(const std::vector<QAPost>& posts, int min_frequency) {
  if (min_frequency < 1) throw UsageError("min_frequency must be >= 1");
  std::map<ApiCall, int> counts;
  for (const auto& post : posts) {
    std::set<ApiCall> distinct(post.answer_apis.begin(), post.answer_apis.end());
    for (const auto& call : distinct) ++counts[call];
  }
  std::vector<ApiCall> entries;
  for (const auto& [call, count] : counts) {
    if (count >= min_frequency) entries.push_back(call);
  }
  return ApiVocabulary(std::move(entries), min_frequency);
}

void write_vocabulary(const std::filesystem::path& path, const ApiVocabulary& vocab) {
  std::vector<std::string> lines;
  for (const auto& call : vocab.entries()) lines.push_back(call.render());
  std::sort(lines.begin(), lines.end());
  write_lines(path, lines);
}

ApiVocabulary load_vocabulary(const std::filesystem::path& path, int min_frequency) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ApiCall> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      entries.push_back(parse_api_call(normalize_whitespace(line)));
    } catch (const DataError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return ApiVocabulary(std::move(entries), min_frequency);
}

std::vector<AnnotationPair> filter_pairs(const std::vector<AnnotationPair>& pairs,
                                         const ApiVocabulary& vocab) {
  std::vector<AnnotationPair> kept;
  for (const auto& pair : pairs) {
    const auto& calls = pair.target.calls();
    if (!calls.empty() && std::all_of(calls.begin(), calls.end(),
                                      [&](const ApiCall& c) { return vocab.contains(c); })) {
      kept.push_back(pair);
    }
  }
  return kept;
}

std::vector<AnnotationPair> dedup_pairs(const std::vector<AnnotationPair>& pairs) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<AnnotationPair> kept;
  for (const auto& pair : pairs) {
    if (seen.emplace(pair.annotation, pair.target.render()).second) kept.push_back(pair);
  }
  return kept;
}

CorpusSplit split_corpus(const std::vector<AnnotationPair>& pairs, std::uint64_t seed) {
  if (pairs.size() < 10) {
    throw DataError("too few pairs to split: " + std::to_string(pairs.size()) + " < 10");
  }
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto held_out = static_cast<std::size_t>(std::llround(pairs.size() / 10.0));
  const std::size_t train_size = pairs.size() - 2 * held_out;
  CorpusSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& pair = pairs[order[i]];
    if (i < train_size) {
      split.train.push_back(pair);
    } else if (i < train_size + held_out) {
      split.valid.push_back(pair);
    } else {
      split.test.push_back(pair);
    }
  }
  return split;
}

}  // namespace apirec
