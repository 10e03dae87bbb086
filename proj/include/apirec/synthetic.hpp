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
#include <map>
#include <string>
#include <vector>

#include "apirec/corpus.hpp"

namespace apirec {

// Generator for desk-scale corpora with known structure. Each topic has three
// annotation phrasings shared by two API families; a family is named in post
// titles only through an optional cue word. Every annotation mentions a
// unique made-up entity word that its own post's title (a paraphrase of the
// same request) repeats, so the
// family behind an annotation is recoverable only through the linked post.
struct SyntheticOptions {
  int topics = 6;              // 1..6
  int pairs = 2000;            // one linked post per pair
  int extra_posts = 0;         // unlinked posts with fresh entities
  double cue_rate = 0.7;       // chance a title carries its family cue
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  std::vector<AnnotationPair> pairs;
  std::vector<QAPost> posts;
  // Keyed by pair id and post id.
  std::map<std::string, int> topic;
  std::map<std::string, int> family;  // 0 or 1 within the topic
  // Pair id -> id of the post written for it.
  std::map<std::string, std::string> own_post;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options);

}  // namespace apirec
