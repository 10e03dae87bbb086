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

#include "apirec/nn/parameters.hpp"

#include <cmath>
#include <cstring>

#include "apirec/error.hpp"
#include "apirec/hashing.hpp"

namespace apirec::nn {

Parameter& ParameterSet::add(std::string name, Matrix init) {
  for (const auto& p : params_) {
    if (p->name == name) throw Error("duplicate parameter name '" + name + "'");
  }
  auto param = std::make_unique<Parameter>();
  param->name = std::move(name);
  param->value = std::move(init);
  params_.push_back(std::move(param));
  return *params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw Error("unknown parameter '" + name + "'");
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p->value.size());
  return total;
}

std::string ParameterSet::fingerprint() const {
  std::string buffer;
  for (const auto& p : params_) {
    buffer += p->name;
    buffer += '\0';
    buffer += std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols());
    buffer += '\0';
    const auto bytes = static_cast<std::size_t>(p->value.size()) * sizeof(float);
    const std::size_t at = buffer.size();
    buffer.resize(at + bytes);
    std::memcpy(buffer.data() + at, p->value.data(), bytes);
  }
  return sha256_hex(buffer);
}

Matrix xavier_uniform(int rows, int cols, std::mt19937_64& rng) {
  const float limit = std::sqrt(6.0f / static_cast<float>(rows + cols));
  std::uniform_real_distribution<float> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix normal_init(int rows, int cols, float stddev, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Adam::Adam(ParameterSet& params, Options options) : params_(&params), options_(options) {
  for (const auto& p : params.items()) {
    first_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    second_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

float Adam::step() {
  const auto& items = params_->items();
  double squared = 0.0;
  for (const auto& p : items) {
    if (p->grad.size() != 0) squared += static_cast<double>(p->grad.squaredNorm());
  }
  const auto norm = static_cast<float>(std::sqrt(squared));
  if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
  const float clip =
      options_.clip_norm > 0.0f && norm > options_.clip_norm ? options_.clip_norm / norm : 1.0f;

  ++steps_;
  const float b1 = options_.beta1;
  const float b2 = options_.beta2;
  const float correction1 = 1.0f - std::pow(b1, static_cast<float>(steps_));
  const float correction2 = 1.0f - std::pow(b2, static_cast<float>(steps_));
  const float step_size = options_.learning_rate * std::sqrt(correction2) / correction1;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Parameter& p = *items[i];
    if (p.grad.size() == 0) continue;
    Matrix& m = first_[i];
    Matrix& v = second_[i];
    m = b1 * m + (1.0f - b1) * clip * p.grad;
    v = b2 * v + (1.0f - b2) * (clip * p.grad).cwiseAbs2();
    p.value.array() -= step_size * m.array() / (v.array().sqrt() + options_.epsilon);
    p.grad.setZero();
  }
  return norm;
}

}  // namespace apirec::nn
