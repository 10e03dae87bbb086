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

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "apirec/nn/parameters.hpp"

namespace apirec::nn {

// Handle to a node on a Tape.
struct Var {
  int index = -1;
};

// Reverse-mode autodiff recorder. Every op pushes a node holding its forward
// value and a closure that routes the node's gradient to its inputs.
// A tape built with record=false only evaluates values (inference).
class Tape {
 public:
  // Closure arguments: the tape, d(loss)/d(output), and the output value.
  using Backward = std::function<void(Tape&, const Matrix& grad, const Matrix& value)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  const Matrix& value(Var v) const { return nodes_[v.index].value; }
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  // Parameter gradients accumulate into Parameter::grad.
  void backward(Var loss);

  // Op plumbing.
  Var push(Matrix value, bool requires_grad, Backward back);
  void accumulate(Var v, const Matrix& grad);
  template <typename Fn>
  void accumulate_with(Var v, Eigen::Index rows, Eigen::Index cols, Fn&& fn) {
    Node& node = nodes_[v.index];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) node.grad = Matrix::Zero(rows, cols);
    fn(node.grad);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward back;
  };

  bool record_;
  std::deque<Node> nodes_;
};

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, float factor);
Var add_scalar(Tape& t, Var a, float value);
// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(Tape& t, Var a, Var row);
Var relu(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var layer_norm(Tape& t, Var x, Var gain, Var bias);
// x W + b
Var linear(Tape& t, Var x, Parameter& weight, Parameter& bias);

// Rows of an embedding table; gradients scatter straight into table.grad.
Var gather(Tape& t, Parameter& table, std::span<const int> ids);
Var select_rows(Tape& t, Var x, std::span<const int> rows);
Var slice_rows(Tape& t, Var x, Eigen::Index begin, Eigen::Index count);
Var concat_rows(Tape& t, std::span<const Var> parts);
Var concat_cols(Tape& t, std::span<const Var> parts);

// offsets has one more entry than there are segments; segment s spans rows
// [offsets[s], offsets[s+1]). Empty segments produce zero rows.
Var segment_mean(Tape& t, Var x, std::span<const int> offsets);
Var l2_normalize_rows(Tape& t, Var x);
// n x 1 column of row-wise dot products.
Var row_dot(Tape& t, Var a, Var b);
Var mean(Tape& t, Var x);

// Mean token cross-entropy; target -1 rows are ignored.
Var cross_entropy(Tape& t, Var logits, std::span<const int> targets);
// Mean binary cross-entropy on an n x 1 column of logits.
Var bce_with_logits(Tape& t, Var logits, std::span<const float> labels);

// Multi-head scaled dot-product attention applied independently per segment.
// Queries of segment s (rows q_offsets[s]..) attend to keys/values of the same
// segment (rows k_offsets[s]..). With causal=true a query row attends only to
// key rows at or before its own position; it requires equal segment lengths.
Var attention(Tape& t, Var q, Var k, Var v, std::span<const int> q_offsets,
              std::span<const int> k_offsets, int heads, bool causal);

}  // namespace apirec::nn
