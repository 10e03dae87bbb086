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

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace apirec::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Owns named parameters in registration order. Parameter addresses are stable
// for the lifetime of the set (including across moves).
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter& add(std::string name, Matrix init);
  Parameter& at(const std::string& name);
  const std::vector<std::unique_ptr<Parameter>>& items() const { return params_; }

  void zero_grad();
  std::size_t scalar_count() const;
  // SHA-256 over names, shapes and values.
  std::string fingerprint() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

Matrix xavier_uniform(int rows, int cols, std::mt19937_64& rng);
Matrix normal_init(int rows, int cols, float stddev, std::mt19937_64& rng);

class Adam {
 public:
  struct Options {
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    float clip_norm = 1.0f;  // <= 0 disables global-norm clipping
  };

  Adam(ParameterSet& params, Options options);

  // Applies accumulated gradients then zeroes them. Returns the pre-clip
  // global gradient norm.
  float step();
  void set_learning_rate(float lr) { options_.learning_rate = lr; }

 private:
  ParameterSet* params_;
  Options options_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  long steps_ = 0;
};

}  // namespace apirec::nn
