/*
 * Copyright 2026 The PaveGraph Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every recorded value is a 2-D tensor; vectors are N x 1 columns
// or 1 x N rows and scalars are 1 x 1. Higher-rank data (node x time x
// feature) is carried as a sequence of 2-D slices by the callers.
//
// A Tape records nodes in creation order, so reverse creation order is a
// valid topological order for backpropagation.

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pavegraph::ad {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// "[rows x cols]" for diagnostics.
std::string shape_string(const Tensor& t);
std::string shape_string(Index rows, Index cols);

class Tape;

// Lightweight handle to a node on a Tape. Copyable; only valid while the
// owning Tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf without gradient. Throws NumericError on non-finite entries.
  Var constant(Tensor value);
  // Leaf that accumulates a gradient during backward().
  Var variable(Tensor value);

  // Runs reverse accumulation from a 1 x 1 node. May be called once per tape.
  void backward(Var loss);

  // Gradient of a node after backward(); a zero tensor of matching shape if
  // the node was not reached.
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // ---- interface for operator implementations ----
  Var record(Tensor value, std::vector<int> inputs, Backprop backprop);
  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& upstream(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    Backprop backprop;
    bool requires_grad = false;
  };

  Var push(Tensor value, bool requires_grad);

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// ---- linear algebra and shape ops ----
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                 // elementwise
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var add_row(Var a, Var row);           // a (r x c) + row (1 x c) broadcast over rows
Var mul_col(Var a, Var col);           // a (r x c) * col (r x 1) broadcast over columns
Var mul_row(Var a, Var row);           // a (r x c) * row (1 x c) broadcast over rows
Var concat(std::span<const Var> parts, int axis);
Var slice(Var a, int axis, Index start, Index length);
Var transpose(Var a);
Var sum(Var a);
Var mean(Var a);

// ---- message passing ----
// out[k] = a[index[k]]
Var gather_rows(Var a, std::span<const int> index);
// out[index[k]] += a[k], out has `rows` rows
Var scatter_add_rows(Var a, std::span<const int> index, Index rows);
// Softmax of an E x 1 score column within groups sharing a segment id.
// Every segment in [0, num_segments) must own at least one entry.
Var segment_softmax(Var scores, std::span<const int> segment, Index num_segments);

// ---- elementwise nonlinearities ----
// Derivatives at exactly 0 take the positive branch.
Var leaky_relu(Var a, double negative_slope);
Var elu(Var a, double alpha = 1.0);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var square(Var a);
// Values are clipped to [lo, hi]; gradient is zero outside the interval.
Var clamp(Var a, double lo, double hi);

// Row-wise layer normalization with per-column gain and bias (1 x c).
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);

// Inverted dropout: zeroes entries with probability p and rescales the rest
// by 1 / (1 - p). Identity when p == 0.
Var dropout(Var a, double p, std::mt19937_64& rng);

}  // namespace pavegraph::ad
