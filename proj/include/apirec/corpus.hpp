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
#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace apirec {

// A single `Class.method` invocation. Package prefixes are stripped at parse
// time so two sources naming the same method compare equal.
class ApiCall {
 public:
  ApiCall(std::string class_name, std::string method_name);

  const std::string& class_name() const { return class_name_; }
  const std::string& method_name() const { return method_name_; }
  std::string render() const { return class_name_ + "." + method_name_; }

  friend bool operator==(const ApiCall&, const ApiCall&) = default;
  friend auto operator<=>(const ApiCall& a, const ApiCall& b) {
    return a.render() <=> b.render();
  }

 private:
  std::string class_name_;
  std::string method_name_;
};

// Parses "pkg.Class.method" / "Class.method". Throws DataError on malformed
// identifiers (no dot, empty side, embedded whitespace).
ApiCall parse_api_call(std::string_view text);

class ApiSequence {
 public:
  ApiSequence() = default;
  explicit ApiSequence(std::vector<ApiCall> calls);

  const std::vector<ApiCall>& calls() const { return calls_; }
  std::size_t size() const { return calls_.size(); }
  bool empty() const { return calls_.empty(); }

  // Distinct calls, sorted.
  std::vector<ApiCall> as_set() const;
  // Space-separated canonical renderings, in order.
  std::string render() const;

  friend bool operator==(const ApiSequence&, const ApiSequence&) = default;

 private:
  std::vector<ApiCall> calls_;
};

struct AnnotationPair {
  std::string id;
  std::string annotation;
  ApiSequence target;
};

struct QAPost {
  std::string id;
  std::string title;
  // Distinct calls in first-mention order.
  std::vector<ApiCall> answer_apis;
};

class ApiVocabulary {
 public:
  ApiVocabulary() = default;
  ApiVocabulary(std::vector<ApiCall> entries, int min_frequency);

  const std::vector<ApiCall>& entries() const { return entries_; }
  int min_frequency() const { return min_frequency_; }
  bool contains(const ApiCall& call) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<ApiCall> entries_;  // sorted, distinct
  int min_frequency_ = 5;
};

struct CorpusSplit {
  std::vector<AnnotationPair> train;
  std::vector<AnnotationPair> valid;
  std::vector<AnnotationPair> test;
  std::uint64_t seed = 0;
};

enum class IngestMode { kStrict, kLenient };

// Collapses runs of whitespace to single spaces and trims both ends.
std::string normalize_whitespace(std::string_view text);

// In strict mode the first bad line throws ParseError. In lenient mode bad
// lines are skipped and their errors appended to `skipped` when non-null.
std::vector<AnnotationPair> load_pairs(const std::filesystem::path& path,
                                       IngestMode mode = IngestMode::kStrict,
                                       std::vector<std::string>* skipped = nullptr);
std::vector<QAPost> load_posts(const std::filesystem::path& path,
                               IngestMode mode = IngestMode::kStrict,
                               std::vector<std::string>* skipped = nullptr);

void write_pairs(const std::filesystem::path& path, const std::vector<AnnotationPair>& pairs);
void write_posts(const std::filesystem::path& path, const std::vector<QAPost>& posts);

// Single-record codecs shared by the file loaders; throw DataError.
AnnotationPair parse_pair_record(std::string_view line);
QAPost parse_post_record(std::string_view line);
std::string format_pair_record(const AnnotationPair& pair);
std::string format_post_record(const QAPost& post);

// Mention counts are per post: an API named twice in one answer counts once.
// Keeps APIs with count >= min_frequency.
ApiVocabulary build_vocabulary(const std::vector<QAPost>& posts, int min_frequency = 5);
void write_vocabulary(const std::filesystem::path& path, const ApiVocabulary& vocab);
ApiVocabulary load_vocabulary(const std::filesystem::path& path, int min_frequency = 5);

// Keeps pairs whose whole target API set lies inside the vocabulary.
std::vector<AnnotationPair> filter_pairs(const std::vector<AnnotationPair>& pairs,
                                         const ApiVocabulary& vocab);

// Drops repeats of (annotation, rendered target); first occurrence wins.
std::vector<AnnotationPair> dedup_pairs(const std::vector<AnnotationPair>& pairs);

// 8:1:1 split after a seeded shuffle. valid and test get round(n / 10) each.
CorpusSplit split_corpus(const std::vector<AnnotationPair>& pairs, std::uint64_t seed);

}  // namespace apirec
