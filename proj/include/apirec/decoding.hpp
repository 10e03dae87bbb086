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

#include <span>
#include <vector>

namespace apirec {

// Anything that yields a next-token distribution for a generated prefix.
// The prefix never includes the implicit start token.
class NextTokenModel {
 public:
  virtual ~NextTokenModel() = default;

  virtual int vocab_size() const = 0;
  virtual int end_token() const = 0;
  virtual std::vector<double> step_distribution(std::span<const int> prefix) const = 0;
  // Batched form; the default evaluates prefixes one at a time.
  virtual std::vector<std::vector<double>> step_distributions(
      std::span<const std::vector<int>> prefixes) const;
};

struct Hypothesis {
  std::vector<int> tokens;  // end token stripped
  double log_prob = 0.0;    // sum of per-step log probabilities, end step included
  std::vector<double> step_log_probs;
  bool finished = false;
};

struct BeamOptions {
  int beam_size = 5;
  int max_decode_steps = 64;
  // Rank by log_prob / steps instead of raw log_prob.
  bool length_normalize = false;
};

// Argmax per step (lowest id on ties) until the end token or the step limit.
Hypothesis greedy_decode(const NextTokenModel& model, int max_decode_steps);

// Keeps the beam_size best expansions per step; expansions ending in the end
// token retire to the result pool. Unfinished hypotheses join the pool when
// the step limit is hit. The pool is sorted best first, ties broken by
// lexicographic token ids.
std::vector<Hypothesis> beam_search(const NextTokenModel& model, const BeamOptions& options);

}  // namespace apirec
