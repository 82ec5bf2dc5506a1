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

#include "pavegraph/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "pavegraph/error.hpp"

namespace pavegraph::ad {

std::string shape_string(Index rows, Index cols) {
  std::ostringstream os;
  os << '[' << rows << " x " << cols << ']';
  return os.str();
}

std::string shape_string(const Tensor& t) { return shape_string(t.rows(), t.cols()); }

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Tensor value, bool requires_grad) {
  if (!value.allFinite()) {
    throw NumericError("non-finite value entering computation graph " + shape_string(value));
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), false); }

Var Tape::variable(Tensor value) { return push(std::move(value), true); }

Var Tape::record(Tensor value, std::vector<int> inputs, Backprop backprop) {
  bool needs = false;
  for (int id : inputs) needs = needs || nodes_[id].requires_grad;
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) {
    n.inputs = std::move(inputs);
    n.backprop = std::move(backprop);
  }
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw Error("backward: variable belongs to another tape");
  const Tensor& v = nodes_[loss.id_].value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_string(v));
  }
  if (backward_done_) throw Error("backward: already called on this tape");
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad = Tensor::Ones(1, 1);
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.backprop && n.grad.size() != 0) n.backprop(*this, id);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

void require_same_tape(const char* op, Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands on different tapes");
}

using Shared = std::shared_ptr<const std::vector<int>>;

Shared share(std::span<const int> index) {
  return std::make_shared<const std::vector<int>>(index.begin(), index.end());
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = a.tape();
  Tensor out = a.value().unaryExpr(fwd);
  return t.record(std::move(out), {a.id()}, [a, deriv](Tape& tape, int self) {
    const Tensor& x = tape.value(a.id());
    const Tensor& y = tape.value(self);
    Tensor g = tape.upstream(self);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] *= deriv(x.data()[i], y.data()[i]);
    tape.accumulate(a.id(), g);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.value()) + " * " +
                     shape_string(b.value()));
  }
  Tape& t = a.tape();
  Tensor out = a.value() * b.value();
  return t.record(std::move(out), {a.id(), b.id()}, [a, b](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    if (tape.requires_grad(a.id())) tape.accumulate(a.id(), g * tape.value(b.id()).transpose());
    if (tape.requires_grad(b.id())) tape.accumulate(b.id(), tape.value(a.id()).transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  require_same_shape("add", a.value(), b.value());
  Tape& t = a.tape();
  return t.record(a.value() + b.value(), {a.id(), b.id()}, [a, b](Tape& tape, int self) {
    tape.accumulate(a.id(), tape.upstream(self));
    tape.accumulate(b.id(), tape.upstream(self));
  });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  require_same_shape("sub", a.value(), b.value());
  Tape& t = a.tape();
  return t.record(a.value() - b.value(), {a.id(), b.id()}, [a, b](Tape& tape, int self) {
    tape.accumulate(a.id(), tape.upstream(self));
    tape.accumulate(b.id(), -tape.upstream(self));
  });
}

Var mul(Var a, Var b) {
  require_same_tape("mul", a, b);
  require_same_shape("mul", a.value(), b.value());
  Tape& t = a.tape();
  Tensor out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), {a.id(), b.id()}, [a, b](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    if (tape.requires_grad(a.id())) tape.accumulate(a.id(), g.cwiseProduct(tape.value(b.id())));
    if (tape.requires_grad(b.id())) tape.accumulate(b.id(), g.cwiseProduct(tape.value(a.id())));
  });
}

Var scale(Var a, double factor) {
  Tape& t = a.tape();
  return t.record(a.value() * factor, {a.id()}, [a, factor](Tape& tape, int self) {
    tape.accumulate(a.id(), tape.upstream(self) * factor);
  });
}

Var add_scalar(Var a, double offset) {
  Tape& t = a.tape();
  Tensor out = a.value().array() + offset;
  return t.record(std::move(out), {a.id()}, [a](Tape& tape, int self) {
    tape.accumulate(a.id(), tape.upstream(self));
  });
}

Var add_row(Var a, Var row) {
  require_same_tape("add_row", a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: expected row " + shape_string(1, a.cols()) + ", got " +
                     shape_string(row.value()));
  }
  Tape& t = a.tape();
  Tensor out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a.id(), row.id()}, [a, row](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    tape.accumulate(a.id(), g);
    if (tape.requires_grad(row.id())) tape.accumulate(row.id(), g.colwise().sum());
  });
}

Var mul_col(Var a, Var col) {
  require_same_tape("mul_col", a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("mul_col: expected column " + shape_string(a.rows(), 1) + ", got " +
                     shape_string(col.value()));
  }
  Tape& t = a.tape();
  Tensor out = a.value().array().colwise() * col.value().col(0).array();
  return t.record(std::move(out), {a.id(), col.id()}, [a, col](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    if (tape.requires_grad(a.id())) {
      Tensor ga = g.array().colwise() * tape.value(col.id()).col(0).array();
      tape.accumulate(a.id(), ga);
    }
    if (tape.requires_grad(col.id())) {
      Tensor gc = g.cwiseProduct(tape.value(a.id())).rowwise().sum();
      tape.accumulate(col.id(), gc);
    }
  });
}

Var mul_row(Var a, Var row) {
  require_same_tape("mul_row", a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("mul_row: expected row " + shape_string(1, a.cols()) + ", got " +
                     shape_string(row.value()));
  }
  Tape& t = a.tape();
  Tensor out = a.value().array().rowwise() * row.value().row(0).array();
  return t.record(std::move(out), {a.id(), row.id()}, [a, row](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    if (tape.requires_grad(a.id())) {
      Tensor ga = g.array().rowwise() * tape.value(row.id()).row(0).array();
      tape.accumulate(a.id(), ga);
    }
    if (tape.requires_grad(row.id())) {
      Tensor gr = g.cwiseProduct(tape.value(a.id())).colwise().sum();
      tape.accumulate(row.id(), gr);
    }
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Tape& t = parts.front().tape();
  Index rows = 0;
  Index cols = 0;
  for (const Var& p : parts) {
    require_same_tape("concat", parts.front(), p);
    if (axis == 0) {
      if (p.cols() != parts.front().cols()) {
        throw ShapeError("concat(axis=0): column mismatch " + shape_string(parts.front().value()) +
                         " vs " + shape_string(p.value()));
      }
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts.front().rows()) {
        throw ShapeError("concat(axis=1): row mismatch " + shape_string(parts.front().value()) +
                         " vs " + shape_string(p.value()));
      }
      cols += p.cols();
      rows = p.rows();
    }
  }
  Tensor out(rows, cols);
  std::vector<int> ids;
  std::vector<Index> offsets;
  Index offset = 0;
  for (const Var& p : parts) {
    if (axis == 0) {
      out.middleRows(offset, p.rows()) = p.value();
      offsets.push_back(offset);
      offset += p.rows();
    } else {
      out.middleCols(offset, p.cols()) = p.value();
      offsets.push_back(offset);
      offset += p.cols();
    }
    ids.push_back(p.id());
  }
  return t.record(std::move(out), ids, [ids, offsets, axis](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const Tensor& v = tape.value(ids[k]);
      if (axis == 0) {
        tape.accumulate(ids[k], g.middleRows(offsets[k], v.rows()));
      } else {
        tape.accumulate(ids[k], g.middleCols(offsets[k], v.cols()));
      }
    }
  });
}

Var slice(Var a, int axis, Index start, Index length) {
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  const Index extent = axis == 0 ? a.rows() : a.cols();
  if (start < 0 || length < 0 || start + length > extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside axis of " + shape_string(a.value()));
  }
  Tape& t = a.tape();
  Tensor out = axis == 0 ? Tensor(a.value().middleRows(start, length))
                         : Tensor(a.value().middleCols(start, length));
  return t.record(std::move(out), {a.id()}, [a, axis, start, length](Tape& tape, int self) {
    Tensor g = Tensor::Zero(a.rows(), a.cols());
    if (axis == 0) {
      g.middleRows(start, length) = tape.upstream(self);
    } else {
      g.middleCols(start, length) = tape.upstream(self);
    }
    tape.accumulate(a.id(), g);
  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  Tensor out = a.value().transpose();
  return t.record(std::move(out), {a.id()}, [a](Tape& tape, int self) {
    tape.accumulate(a.id(), tape.upstream(self).transpose());
  });
}

Var sum(Var a) {
  Tape& t = a.tape();
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a.id()}, [a](Tape& tape, int self) {
    const double g = tape.upstream(self)(0, 0);
    tape.accumulate(a.id(), Tensor::Constant(a.rows(), a.cols(), g));
  });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty tensor");
  const double n = static_cast<double>(a.value().size());
  Tape& t = a.tape();
  Tensor out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return t.record(std::move(out), {a.id()}, [a, n](Tape& tape, int self) {
    const double g = tape.upstream(self)(0, 0) / n;
    tape.accumulate(a.id(), Tensor::Constant(a.rows(), a.cols(), g));
  });
}

Var gather_rows(Var a, std::span<const int> index) {
  for (int i : index) {
    if (i < 0 || i >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(i) + " outside " +
                       shape_string(a.value()));
    }
  }
  Tape& t = a.tape();
  Tensor out(static_cast<Index>(index.size()), a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) out.row(k) = a.value().row(index[k]);
  auto idx = share(index);
  return t.record(std::move(out), {a.id()}, [a, idx](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    Tensor ga = Tensor::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < idx->size(); ++k) ga.row((*idx)[k]) += g.row(k);
    tape.accumulate(a.id(), ga);
  });
}

Var scatter_add_rows(Var a, std::span<const int> index, Index rows) {
  if (static_cast<Index>(index.size()) != a.rows()) {
    throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " +
                     shape_string(a.value()));
  }
  for (int i : index) {
    if (i < 0 || i >= rows) {
      throw ShapeError("scatter_add_rows: index " + std::to_string(i) + " outside " +
                       std::to_string(rows) + " rows");
    }
  }
  Tape& t = a.tape();
  Tensor out = Tensor::Zero(rows, a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) out.row(index[k]) += a.value().row(k);
  auto idx = share(index);
  return t.record(std::move(out), {a.id()}, [a, idx](Tape& tape, int self) {
    const Tensor& g = tape.upstream(self);
    Tensor ga(a.rows(), a.cols());
    for (std::size_t k = 0; k < idx->size(); ++k) ga.row(k) = g.row((*idx)[k]);
    tape.accumulate(a.id(), ga);
  });
}

Var segment_softmax(Var scores, std::span<const int> segment, Index num_segments) {
  if (scores.cols() != 1 || scores.rows() != static_cast<Index>(segment.size())) {
    throw ShapeError("segment_softmax: expected " + shape_string(segment.size(), 1) +
                     " scores, got " + shape_string(scores.value()));
  }
  const double kLowest = -std::numeric_limits<double>::infinity();
  std::vector<double> max_score(num_segments, kLowest);
  for (std::size_t k = 0; k < segment.size(); ++k) {
    const int s = segment[k];
    if (s < 0 || s >= num_segments) {
      throw ShapeError("segment_softmax: segment id " + std::to_string(s) + " out of range");
    }
    const double v = scores.value()(k, 0);
    if (!std::isfinite(v)) throw NumericError("segment_softmax: non-finite score");
    max_score[s] = std::max(max_score[s], v);
  }
  for (Index s = 0; s < num_segments; ++s) {
    if (max_score[s] == kLowest) {
      throw ShapeError("segment_softmax: segment " + std::to_string(s) + " is empty");
    }
  }
  std::vector<double> denom(num_segments, 0.0);
  Tensor out(scores.rows(), 1);
  for (std::size_t k = 0; k < segment.size(); ++k) {
    out(k, 0) = std::exp(scores.value()(k, 0) - max_score[segment[k]]);
    denom[segment[k]] += out(k, 0);
  }
  for (std::size_t k = 0; k < segment.size(); ++k) out(k, 0) /= denom[segment[k]];
  auto seg = share(segment);
  return scores.tape().record(
      std::move(out), {scores.id()}, [scores, seg, num_segments](Tape& tape, int self) {
        const Tensor& y = tape.value(self);
        const Tensor& g = tape.upstream(self);
        std::vector<double> dot(num_segments, 0.0);
        for (std::size_t k = 0; k < seg->size(); ++k) dot[(*seg)[k]] += y(k, 0) * g(k, 0);
        Tensor gs(y.rows(), 1);
        for (std::size_t k = 0; k < seg->size(); ++k) {
          gs(k, 0) = y(k, 0) * (g(k, 0) - dot[(*seg)[k]]);
        }
        tape.accumulate(scores.id(), gs);
      });
}

Var leaky_relu(Var a, double negative_slope) {
  return unary(
      a, [negative_slope](double x) { return x >= 0.0 ? x : negative_slope * x; },
      [negative_slope](double x, double) { return x >= 0.0 ? 1.0 : negative_slope; });
}

Var elu(Var a, double alpha) {
  return unary(
      a, [alpha](double x) { return x >= 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x >= 0.0 ? 1.0 : y + alpha; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x >= 0.0 ? x : 0.0; },
      [](double x, double) { return x >= 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) throw NumericError("log: non-positive argument");
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ConfigError("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  require_same_tape("layer_norm", a, gain);
  require_same_tape("layer_norm", a, bias);
  const Index c = a.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
    throw ShapeError("layer_norm: gain/bias must be " + shape_string(1, c) + ", got " +
                     shape_string(gain.value()) + " and " + shape_string(bias.value()));
  }
  const Tensor& x = a.value();
  Tensor xhat(x.rows(), c);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Tensor out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  auto cache = std::make_shared<std::pair<Tensor, Eigen::VectorXd>>(std::move(xhat), inv_std);
  return a.tape().record(
      std::move(out), {a.id(), gain.id(), bias.id()},
      [a, gain, bias, cache](Tape& tape, int self) {
        const Tensor& g = tape.upstream(self);
        const Tensor& xh = cache->first;
        if (tape.requires_grad(gain.id())) {
          Tensor gg = g.cwiseProduct(xh).colwise().sum();
          tape.accumulate(gain.id(), gg);
        }
        if (tape.requires_grad(bias.id())) {
          Tensor gb = g.colwise().sum();
          tape.accumulate(bias.id(), gb);
        }
        if (tape.requires_grad(a.id())) {
          Tensor dxhat = g.array().rowwise() * tape.value(gain.id()).row(0).array();
          Tensor gx(g.rows(), g.cols());
          for (Index r = 0; r < g.rows(); ++r) {
            const double m1 = dxhat.row(r).mean();
            const double m2 = dxhat.row(r).cwiseProduct(xh.row(r)).mean();
            gx.row(r) = (dxhat.row(r).array() - m1 - xh.row(r).array() * m2) * cache->second(r);
          }
          tape.accumulate(a.id(), gx);
        }
      });
}

Var dropout(Var a, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: probability must lie in [0, 1)");
  if (p == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  Tensor mask(a.rows(), a.cols());
  const double kept = 1.0 / (1.0 - p);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? kept : 0.0;
  return mul(a, a.tape().constant(std::move(mask)));
}

}  // namespace pavegraph::ad
