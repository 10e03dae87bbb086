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

#include "apirec/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "apirec/error.hpp"

namespace apirec::nn {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Parameter& p) {
  Parameter* param = &p;
  return push(p.value, true, [param](Tape&, const Matrix& g, const Matrix&) {
    if (param->grad.size() == 0) param->grad = Matrix::Zero(g.rows(), g.cols());
    param->grad += g;
  });
}

Var Tape::push(Matrix value, bool requires_grad, Backward back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_ && requires_grad;
  if (node.requires_grad) node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Matrix& grad) {
  Node& node = nodes_[v.index];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = grad;
  } else {
    node.grad += grad;
  }
}

void Tape::backward(Var loss) {
  if (!record_) throw Error("backward on a non-recording tape");
  Node& root = nodes_[loss.index];
  if (root.value.size() != 1) throw Error("backward expects a scalar loss");
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int i = loss.index; i >= 0; --i) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.size() == 0 || !node.back) continue;
    node.back(*this, node.grad, node.value);
    node.grad.resize(0, 0);
  }
}

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.cols() != bv.rows()) throw Error("matmul: inner dimension mismatch");
  Matrix out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape& tape, const Matrix& g, const Matrix&) {
                  const Matrix& av = tape.value(a);
                  const Matrix& bv = tape.value(b);
                  tape.accumulate_with(a, av.rows(), av.cols(),
                                       [&](Matrix& da) { da.noalias() += g * bv.transpose(); });
                  tape.accumulate_with(b, bv.rows(), bv.cols(),
                                       [&](Matrix& db) { db.noalias() += av.transpose() * g; });
                });
}

Var add(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "add");
  return t.push(t.value(a) + t.value(b), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate(a, g);
                  tape.accumulate(b, g);
                });
}

Var sub(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "sub");
  return t.push(t.value(a) - t.value(b), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate(a, g);
                  tape.accumulate_with(b, g.rows(), g.cols(), [&](Matrix& db) { db -= g; });
                });
}

Var mul(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "mul");
  return t.push(t.value(a).cwiseProduct(t.value(b)), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate_with(a, g.rows(), g.cols(), [&](Matrix& da) {
                    da += g.cwiseProduct(tape.value(b));
                  });
                  tape.accumulate_with(b, g.rows(), g.cols(), [&](Matrix& db) {
                    db += g.cwiseProduct(tape.value(a));
                  });
                });
}

Var scale(Tape& t, Var a, float factor) {
  return t.push(t.value(a) * factor, t.requires_grad(a),
                [a, factor](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate_with(a, g.rows(), g.cols(), [&](Matrix& da) { da += g * factor; });
                });
}

Var add_scalar(Tape& t, Var a, float value) {
  Matrix out = t.value(a).array() + value;
  return t.push(std::move(out), t.requires_grad(a),
                [a](Tape& tape, const Matrix& g, const Matrix&) { tape.accumulate(a, g); });
}

Var add_row(Tape& t, Var a, Var row) {
  const Matrix& av = t.value(a);
  const Matrix& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw Error("add_row: shape mismatch");
  Matrix out = av.rowwise() + rv.row(0);
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(row),
                [a, row](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate(a, g);
                  tape.accumulate_with(row, 1, g.cols(),
                                       [&](Matrix& dr) { dr += g.colwise().sum(); });
                });
}

Var relu(Tape& t, Var a) {
  Matrix out = t.value(a).cwiseMax(0.0f);
  return t.push(std::move(out), t.requires_grad(a),
                [a](Tape& tape, const Matrix& g, const Matrix& y) {
                  tape.accumulate_with(a, g.rows(), g.cols(), [&](Matrix& da) {
                    da.array() += (y.array() > 0.0f).select(g.array(), 0.0f);
                  });
                });
}

Var tanh(Tape& t, Var a) {
  Matrix out = t.value(a).array().tanh();
  return t.push(std::move(out), t.requires_grad(a),
                [a](Tape& tape, const Matrix& g, const Matrix& y) {
                  tape.accumulate_with(a, g.rows(), g.cols(), [&](Matrix& da) {
                    da.array() += g.array() * (1.0f - y.array().square());
                  });
                });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias) {
  constexpr float kEps = 1e-5f;
  const Matrix& xv = t.value(x);
  const Eigen::Index n = xv.rows();
  const Eigen::Index d = xv.cols();
  auto normalized = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<Eigen::VectorXf>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const float mu = xv.row(i).mean();
    const float var = (xv.row(i).array() - mu).square().mean();
    (*inv_std)(i) = 1.0f / std::sqrt(var + kEps);
    normalized->row(i) = (xv.row(i).array() - mu) * (*inv_std)(i);
  }
  const Matrix& gv = t.value(gain);
  const Matrix& bv = t.value(bias);
  Matrix out = (normalized->array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();
  const bool needs = t.requires_grad(x) || t.requires_grad(gain) || t.requires_grad(bias);
  return t.push(std::move(out), needs,
                [x, gain, bias, normalized, inv_std](Tape& tape, const Matrix& g, const Matrix&) {
                  const Matrix& xhat = *normalized;
                  const Matrix& gv = tape.value(gain);
                  tape.accumulate_with(gain, 1, g.cols(), [&](Matrix& dg) {
                    dg += g.cwiseProduct(xhat).colwise().sum();
                  });
                  tape.accumulate_with(bias, 1, g.cols(),
                                       [&](Matrix& db) { db += g.colwise().sum(); });
                  tape.accumulate_with(x, g.rows(), g.cols(), [&](Matrix& dx) {
                    Matrix dxhat = g.array().rowwise() * gv.row(0).array();
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                      const float m1 = dxhat.row(i).mean();
                      const float m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                      dx.row(i).array() +=
                          (*inv_std)(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                    }
                  });
                });
}

Var linear(Tape& t, Var x, Parameter& weight, Parameter& bias) {
  return add_row(t, matmul(t, x, t.parameter(weight)), t.parameter(bias));
}

Var gather(Tape& t, Parameter& table, std::span<const int> ids) {
  const Matrix& tv = table.value;
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) throw Error("gather: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  Parameter* param = &table;
  return t.push(std::move(out), true,
                [param, saved = std::move(saved)](Tape&, const Matrix& g, const Matrix&) {
                  if (param->grad.size() == 0) {
                    param->grad = Matrix::Zero(param->value.rows(), param->value.cols());
                  }
                  for (std::size_t i = 0; i < saved.size(); ++i) {
                    param->grad.row(saved[i]) += g.row(static_cast<Eigen::Index>(i));
                  }
                });
}

Var select_rows(Tape& t, Var x, std::span<const int> rows) {
  const Matrix& xv = t.value(x);
  Matrix out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= xv.rows()) throw Error("select_rows: row out of range");
    out.row(static_cast<Eigen::Index>(i)) = xv.row(rows[i]);
  }
  std::vector<int> saved(rows.begin(), rows.end());
  const Eigen::Index src_rows = xv.rows();
  return t.push(std::move(out), t.requires_grad(x),
                [x, src_rows, saved = std::move(saved)](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate_with(x, src_rows, g.cols(), [&](Matrix& dx) {
                    for (std::size_t i = 0; i < saved.size(); ++i) {
                      dx.row(saved[i]) += g.row(static_cast<Eigen::Index>(i));
                    }
                  });
                });
}

Var slice_rows(Tape& t, Var x, Eigen::Index begin, Eigen::Index count) {
  const Matrix& xv = t.value(x);
  if (begin < 0 || count < 0 || begin + count > xv.rows()) throw Error("slice_rows: out of range");
  Matrix out = xv.middleRows(begin, count);
  const Eigen::Index src_rows = xv.rows();
  return t.push(std::move(out), t.requires_grad(x),
                [x, begin, count, src_rows](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate_with(x, src_rows, g.cols(), [&](Matrix& dx) {
                    dx.middleRows(begin, count) += g;
                  });
                });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.value(parts[0]).cols();
  bool needs = false;
  for (Var p : parts) {
    if (t.value(p).cols() != cols) throw Error("concat_rows: column mismatch");
    rows += t.value(p).rows();
    needs = needs || t.requires_grad(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, t.value(p).rows()) = t.value(p);
    at += t.value(p).rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.push(std::move(out), needs,
                [saved = std::move(saved)](Tape& tape, const Matrix& g, const Matrix&) {
                  Eigen::Index at = 0;
                  for (Var p : saved) {
                    const Eigen::Index r = tape.value(p).rows();
                    tape.accumulate_with(p, r, g.cols(),
                                         [&](Matrix& dp) { dp += g.middleRows(at, r); });
                    at += r;
                  }
                });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  const Eigen::Index rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool needs = false;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) throw Error("concat_cols: row mismatch");
    cols += t.value(p).cols();
    needs = needs || t.requires_grad(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, t.value(p).cols()) = t.value(p);
    at += t.value(p).cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.push(std::move(out), needs,
                [saved = std::move(saved)](Tape& tape, const Matrix& g, const Matrix&) {
                  Eigen::Index at = 0;
                  for (Var p : saved) {
                    const Eigen::Index c = tape.value(p).cols();
                    tape.accumulate_with(p, g.rows(), c,
                                         [&](Matrix& dp) { dp += g.middleCols(at, c); });
                    at += c;
                  }
                });
}

Var segment_mean(Tape& t, Var x, std::span<const int> offsets) {
  const Matrix& xv = t.value(x);
  if (offsets.empty() || offsets.back() != xv.rows()) throw Error("segment_mean: bad offsets");
  const auto segments = static_cast<Eigen::Index>(offsets.size() - 1);
  Matrix out = Matrix::Zero(segments, xv.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    const int len = offsets[s + 1] - offsets[s];
    if (len > 0) out.row(s) = xv.middleRows(offsets[s], len).colwise().mean();
  }
  std::vector<int> saved(offsets.begin(), offsets.end());
  const Eigen::Index src_rows = xv.rows();
  return t.push(std::move(out), t.requires_grad(x),
                [x, src_rows, saved = std::move(saved)](Tape& tape, const Matrix& g, const Matrix&) {
                  tape.accumulate_with(x, src_rows, g.cols(), [&](Matrix& dx) {
                    for (std::size_t s = 0; s + 1 < saved.size(); ++s) {
                      const int len = saved[s + 1] - saved[s];
                      if (len == 0) continue;
                      const float inv = 1.0f / static_cast<float>(len);
                      for (int r = saved[s]; r < saved[s + 1]; ++r) {
                        dx.row(r) += g.row(static_cast<Eigen::Index>(s)) * inv;
                      }
                    }
                  });
                });
}

Var l2_normalize_rows(Tape& t, Var x) {
  constexpr float kEps = 1e-12f;
  const Matrix& xv = t.value(x);
  auto norms = std::make_shared<Eigen::VectorXf>(xv.rows());
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    (*norms)(i) = std::max(xv.row(i).norm(), kEps);
    out.row(i) = xv.row(i) / (*norms)(i);
  }
  return t.push(std::move(out), t.requires_grad(x),
                [x, norms](Tape& tape, const Matrix& g, const Matrix& y) {
                  tape.accumulate_with(x, g.rows(), g.cols(), [&](Matrix& dx) {
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                      const float proj = y.row(i).dot(g.row(i));
                      dx.row(i) += (g.row(i) - proj * y.row(i)) / (*norms)(i);
                    }
                  });
                });
}

Var row_dot(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "row_dot");
  Matrix out = t.value(a).cwiseProduct(t.value(b)).rowwise().sum();
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape& tape, const Matrix& g, const Matrix&) {
                  const Matrix& av = tape.value(a);
                  const Matrix& bv = tape.value(b);
                  tape.accumulate_with(a, av.rows(), av.cols(), [&](Matrix& da) {
                    da.array() += bv.array().colwise() * g.col(0).array();
                  });
                  tape.accumulate_with(b, bv.rows(), bv.cols(), [&](Matrix& db) {
                    db.array() += av.array().colwise() * g.col(0).array();
                  });
                });
}

Var mean(Tape& t, Var x) {
  const Matrix& xv = t.value(x);
  Matrix out(1, 1);
  out(0, 0) = xv.size() == 0 ? 0.0f : xv.mean();
  const Eigen::Index rows = xv.rows();
  const Eigen::Index cols = xv.cols();
  return t.push(std::move(out), t.requires_grad(x),
                [x, rows, cols](Tape& tape, const Matrix& g, const Matrix&) {
                  const float share = g(0, 0) / static_cast<float>(rows * cols);
                  tape.accumulate_with(x, rows, cols, [&](Matrix& dx) { dx.array() += share; });
                });
}

Var cross_entropy(Tape& t, Var logits, std::span<const int> targets) {
  const Matrix& lv = t.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != lv.rows()) {
    throw Error("cross_entropy: target count mismatch");
  }
  auto probs = std::make_shared<Matrix>(lv.rows(), lv.cols());
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index i = 0; i < lv.rows(); ++i) {
    const float max = lv.row(i).maxCoeff();
    probs->row(i) = (lv.row(i).array() - max).exp();
    const float sum = probs->row(i).sum();
    probs->row(i) /= sum;
    const int target = targets[static_cast<std::size_t>(i)];
    if (target < 0) continue;
    if (target >= lv.cols()) throw Error("cross_entropy: target out of range");
    total += static_cast<double>(max) + std::log(static_cast<double>(sum)) - lv(i, target);
    ++counted;
  }
  Matrix out(1, 1);
  out(0, 0) = counted == 0 ? 0.0f : static_cast<float>(total / counted);
  std::vector<int> saved(targets.begin(), targets.end());
  return t.push(
      std::move(out), t.requires_grad(logits) && counted > 0,
      [logits, probs, counted, saved = std::move(saved)](Tape& tape, const Matrix& g,
                                                         const Matrix&) {
        const float share = g(0, 0) / static_cast<float>(counted);
        tape.accumulate_with(logits, probs->rows(), probs->cols(), [&](Matrix& dl) {
          for (Eigen::Index i = 0; i < probs->rows(); ++i) {
            const int target = saved[static_cast<std::size_t>(i)];
            if (target < 0) continue;
            dl.row(i) += probs->row(i) * share;
            dl(i, target) -= share;
          }
        });
      });
}

Var bce_with_logits(Tape& t, Var logits, std::span<const float> labels) {
  const Matrix& lv = t.value(logits);
  if (lv.cols() != 1 || static_cast<Eigen::Index>(labels.size()) != lv.rows()) {
    throw Error("bce_with_logits: shape mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < lv.rows(); ++i) {
    const double z = lv(i, 0);
    const double y = labels[static_cast<std::size_t>(i)];
    total += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * y;
  }
  Matrix out(1, 1);
  out(0, 0) = lv.rows() == 0 ? 0.0f : static_cast<float>(total / lv.rows());
  std::vector<float> saved(labels.begin(), labels.end());
  return t.push(std::move(out), t.requires_grad(logits),
                [logits, saved = std::move(saved)](Tape& tape, const Matrix& g, const Matrix&) {
                  const Matrix& lv = tape.value(logits);
                  const float share = g(0, 0) / static_cast<float>(lv.rows());
                  tape.accumulate_with(logits, lv.rows(), 1, [&](Matrix& dl) {
                    for (Eigen::Index i = 0; i < lv.rows(); ++i) {
                      const float p = 1.0f / (1.0f + std::exp(-lv(i, 0)));
                      dl(i, 0) += (p - saved[static_cast<std::size_t>(i)]) * share;
                    }
                  });
                });
}

Var attention(Tape& t, Var q, Var k, Var v, std::span<const int> q_offsets,
              std::span<const int> k_offsets, int heads, bool causal) {
  const Matrix& qv = t.value(q);
  const Matrix& kv = t.value(k);
  const Matrix& vv = t.value(v);
  const Eigen::Index dim = qv.cols();
  if (kv.cols() != dim || vv.cols() != dim || kv.rows() != vv.rows()) {
    throw Error("attention: shape mismatch");
  }
  if (heads < 1 || dim % heads != 0) throw Error("attention: dim not divisible by heads");
  if (q_offsets.size() != k_offsets.size() || q_offsets.empty() ||
      q_offsets.back() != qv.rows() || k_offsets.back() != kv.rows()) {
    throw Error("attention: bad offsets");
  }
  const Eigen::Index head_dim = dim / heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(head_dim));
  const std::size_t segments = q_offsets.size() - 1;

  // Softmax weights per (segment, head), kept for the backward pass.
  auto weights = std::make_shared<std::vector<Matrix>>(segments * heads);
  Matrix out = Matrix::Zero(qv.rows(), dim);
  for (std::size_t s = 0; s < segments; ++s) {
    const int q0 = q_offsets[s];
    const int nq = q_offsets[s + 1] - q0;
    const int k0 = k_offsets[s];
    const int nk = k_offsets[s + 1] - k0;
    if (nq == 0) continue;
    if (nk == 0) throw Error("attention: segment with queries but no keys");
    if (causal && nq != nk) throw Error("attention: causal segments must be square");
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index c0 = h * head_dim;
      Matrix scores(nq, nk);
      scores.noalias() =
          qv.block(q0, c0, nq, head_dim) * kv.block(k0, c0, nk, head_dim).transpose();
      scores *= inv_sqrt;
      for (int i = 0; i < nq; ++i) {
        if (causal) {
          for (int j = i + 1; j < nk; ++j) scores(i, j) = -std::numeric_limits<float>::infinity();
        }
        const float max = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - max).exp();
        scores.row(i) /= scores.row(i).sum();
      }
      out.block(q0, c0, nq, head_dim).noalias() = scores * vv.block(k0, c0, nk, head_dim);
      (*weights)[s * heads + h] = std::move(scores);
    }
  }
  if (!t.recording()) return t.push(std::move(out), false, nullptr);

  std::vector<int> qo(q_offsets.begin(), q_offsets.end());
  std::vector<int> ko(k_offsets.begin(), k_offsets.end());
  const bool needs = t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v);
  return t.push(
      std::move(out), needs,
      [q, k, v, weights, heads, head_dim, inv_sqrt, qo = std::move(qo), ko = std::move(ko)](
          Tape& tape, const Matrix& g, const Matrix&) {
        const Matrix& qv = tape.value(q);
        const Matrix& kv = tape.value(k);
        const Matrix& vv = tape.value(v);
        Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
        Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
        Matrix dv = Matrix::Zero(vv.rows(), vv.cols());
        for (std::size_t s = 0; s + 1 < qo.size(); ++s) {
          const int q0 = qo[s];
          const int nq = qo[s + 1] - q0;
          const int k0 = ko[s];
          const int nk = ko[s + 1] - k0;
          if (nq == 0) continue;
          for (int h = 0; h < heads; ++h) {
            const Eigen::Index c0 = h * head_dim;
            const Matrix& p = (*weights)[s * heads + h];
            const Matrix go = g.block(q0, c0, nq, head_dim);
            Matrix dp(nq, nk);
            dp.noalias() = go * vv.block(k0, c0, nk, head_dim).transpose();
            dv.block(k0, c0, nk, head_dim).noalias() += p.transpose() * go;
            Matrix ds = p.cwiseProduct(dp);
            const Eigen::VectorXf row_sums = ds.rowwise().sum();
            ds.array() -= p.array().colwise() * row_sums.array();
            ds *= inv_sqrt;
            dq.block(q0, c0, nq, head_dim).noalias() += ds * kv.block(k0, c0, nk, head_dim);
            dk.block(k0, c0, nk, head_dim).noalias() +=
                ds.transpose() * qv.block(q0, c0, nq, head_dim);
          }
        }
        tape.accumulate(q, dq);
        tape.accumulate(k, dk);
        tape.accumulate(v, dv);
      });
}

}  // namespace apirec::nn
