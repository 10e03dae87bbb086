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

#include "apirec/synthetic.hpp"

#include <array>
#include <cstdio>
#include <random>
#include <set>

#include "apirec/error.hpp"
#include "apirec/hashing.hpp"

namespace apirec {
namespace {

struct Family {
  const char* cue;
  std::array<const char*, 5> apis;
};

struct Topic {
  std::array<const char*, 3> annotations;  // "{}" marks the entity
  std::array<const char*, 3> titles;
  std::array<Family, 2> families;
};

const std::array<Topic, 6> kTopics = {{
    {{"read the contents of the {} text file", "load every line from the {} file",
      "open the {} file and return its text"},
     {"how to read the {} text file", "reading all lines of {} file",
      "best way to get text from {} file"},
     {{{"nio",
        {"Paths.get", "Files.exists", "Files.readAllLines", "Files.newBufferedReader", "Files.size"}},
       {"reader",
        {"FileReader.read", "BufferedReader.readLine", "BufferedReader.close", "File.exists",
         "File.length"}}}}},
    {{"parse the {} string into a number", "convert the {} text to a numeric value",
      "turn the {} input into a number"},
     {"parse {} string to number", "converting {} text into numeric value",
      "how do i get a number from {} input"},
     {{{"integer",
        {"String.trim", "Integer.parseInt", "Integer.valueOf", "Integer.toString",
         "Character.isDigit"}},
       {"decimal",
        {"Double.parseDouble", "BigDecimal.valueOf", "NumberFormat.parse", "DecimalFormat.format",
         "Double.isNaN"}}}}},
    {{"sort the {} list of items", "order the {} entries by value",
      "arrange the {} elements in order"},
     {"sort {} list", "ordering {} entries by value", "how to arrange {} elements"},
     {{{"collections",
        {"ArrayList.add", "Collections.sort", "Comparator.comparing", "Collections.reverse",
         "List.size"}},
       {"array",
        {"Arrays.asList", "Arrays.sort", "Arrays.copyOf", "Arrays.fill", "Arrays.binarySearch"}}}}},
    {{"download the {} page from a url", "send a request to the {} server",
      "fetch the {} resource over the web"},
     {"download {} page from url", "sending request to {} server", "fetch {} resource from web"},
     {{{"connection",
        {"URL.openConnection", "HttpURLConnection.setRequestMethod",
         "HttpURLConnection.getInputStream", "HttpURLConnection.getResponseCode",
         "HttpURLConnection.disconnect"}},
       {"client",
        {"HttpClient.newHttpClient", "HttpRequest.newBuilder", "HttpClient.send",
         "HttpResponse.body", "HttpResponse.statusCode"}}}}},
    {{"format the {} date as text", "get the current time for the {} record",
      "compute the days until the {} deadline"},
     {"format {} date as string", "current time for {} record", "days until {} deadline"},
     {{{"calendar",
        {"Calendar.getInstance", "Calendar.get", "SimpleDateFormat.format", "Date.getTime",
         "Calendar.add"}},
       {"time",
        {"LocalDate.now", "DateTimeFormatter.ofPattern", "LocalDate.format", "ChronoUnit.between",
         "LocalDate.plusDays"}}}}},
    {{"run the {} task in the background", "wait for the {} job to finish",
      "schedule the {} work on a pool"},
     {"run {} task in background", "waiting for {} job to finish", "schedule {} work on pool"},
     {{{"thread",
        {"Thread.currentThread", "Thread.start", "Thread.join", "Thread.sleep",
         "Thread.interrupt"}},
       {"executor",
        {"Executors.newFixedThreadPool", "ExecutorService.submit", "Future.get",
         "ExecutorService.shutdown", "ExecutorService.awaitTermination"}}}}},
}};

// Target call order per phrasing, as indices into the family's API list.
const std::array<std::vector<int>, 3> kTargetShapes = {{{0, 1, 2}, {1, 3, 0, 4}, {2, 4, 3}}};

std::string fill(const char* pattern, const std::string& entity) {
  std::string out(pattern);
  const auto at = out.find("{}");
  if (at != std::string::npos) out.replace(at, 2, entity);
  return out;
}

// Pronounceable nonsense words; never clash with the English template text.
std::string make_entity(std::mt19937_64& rng, std::set<std::string>& used) {
  static constexpr const char* kConsonants = "bdfgklmnprstvz";
  static constexpr const char* kVowels = "aeiou";
  std::uniform_int_distribution<int> consonant(0, 13);
  std::uniform_int_distribution<int> vowel(0, 4);
  for (;;) {
    std::string word;
    for (int s = 0; s < 3; ++s) {
      word += kConsonants[consonant(rng)];
      word += kVowels[vowel(rng)];
    }
    word += kConsonants[consonant(rng)];
    if (used.insert(word).second) return word;
  }
}

std::string make_id(char prefix, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%05d", prefix, index);
  return buf;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options) {
  if (options.topics < 1 || options.topics > static_cast<int>(kTopics.size())) {
    throw UsageError("synthetic topics must be in 1.." + std::to_string(kTopics.size()));
  }
  if (options.pairs < 0 || options.extra_posts < 0) throw UsageError("negative synthetic size");
  if (options.cue_rate < 0.0 || options.cue_rate > 1.0) throw UsageError("cue_rate must be in [0,1]");

  std::mt19937_64 rng(derive_seed(options.seed, "synthetic"));
  std::uniform_int_distribution<int> pick_topic(0, options.topics - 1);
  std::uniform_int_distribution<int> pick_family(0, 1);
  std::uniform_int_distribution<int> pick_phrase(0, 2);
  std::bernoulli_distribution cue(options.cue_rate);
  std::set<std::string> used;

  SyntheticCorpus corpus;
  auto add_post = [&](int t, int f, int phrase, const std::string& entity) {
    const Topic& topic = kTopics[static_cast<std::size_t>(t)];
    const Family& family = topic.families[static_cast<std::size_t>(f)];
    QAPost post;
    post.id = make_id('q', static_cast<int>(corpus.posts.size()));
    post.title = fill(topic.titles[static_cast<std::size_t>(phrase)], entity);
    if (cue(rng)) post.title += std::string(" using ") + family.cue;
    for (const char* api : family.apis) post.answer_apis.push_back(parse_api_call(api));
    corpus.topic[post.id] = t;
    corpus.family[post.id] = f;
    corpus.posts.push_back(std::move(post));
    return corpus.posts.back().id;
  };

  for (int i = 0; i < options.pairs; ++i) {
    const int t = pick_topic(rng);
    const int f = pick_family(rng);
    const int phrase = pick_phrase(rng);
    const std::string entity = make_entity(rng, used);
    const Topic& topic = kTopics[static_cast<std::size_t>(t)];
    const Family& family = topic.families[static_cast<std::size_t>(f)];

    AnnotationPair pair;
    pair.id = make_id('a', i);
    pair.annotation = fill(topic.annotations[static_cast<std::size_t>(phrase)], entity);
    std::vector<ApiCall> calls;
    for (int index : kTargetShapes[static_cast<std::size_t>(phrase)]) {
      calls.push_back(parse_api_call(family.apis[static_cast<std::size_t>(index)]));
    }
    pair.target = ApiSequence(std::move(calls));
    corpus.topic[pair.id] = t;
    corpus.family[pair.id] = f;
    corpus.own_post[pair.id] = add_post(t, f, phrase, entity);
    corpus.pairs.push_back(std::move(pair));
  }
  for (int i = 0; i < options.extra_posts; ++i) {
    const int t = pick_topic(rng);
    const int f = pick_family(rng);
    const int phrase = pick_phrase(rng);
    add_post(t, f, phrase, make_entity(rng, used));
  }
  return corpus;
}

}  // namespace apirec
