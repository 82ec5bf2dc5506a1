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

#include "pavegraph/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pavegraph/error.hpp"

namespace pavegraph {

using ad::Tape;
using ad::Var;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) {
    throw ConfigError("scheduler factor must lie in (0, 1)");
  }
  if (scheduler_patience < 1 || early_stop_patience < 1) {
    throw ConfigError("patience values must be at least 1");
  }
  if (scheduler_threshold < 0.0) throw ConfigError("scheduler threshold must be non-negative");
  if (window < 1) throw ConfigError("window must be at least 1");
}

namespace {

void check_mask(std::size_t n, std::span<const int> mask) {
  if (mask.empty()) throw ConfigError("loss mask is empty");
  for (int i : mask) {
    if (i < 0 || static_cast<std::size_t>(i) >= n) {
      throw ShapeError("loss mask index " + std::to_string(i) + " outside " + std::to_string(n) +
                       " nodes");
    }
  }
}

std::vector<int> all_nodes(std::size_t n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

double masked_mse(const Vector& pred, const Vector& target, std::span<const int> mask) {
  if (pred.size() != target.size()) {
    throw ShapeError("masked_mse: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  }
  check_mask(static_cast<std::size_t>(pred.size()), mask);
  double acc = 0.0;
  for (int i : mask) acc += (pred(i) - target(i)) * (pred(i) - target(i));
  return acc / static_cast<double>(mask.size());
}

Var masked_mse(Var pred, const Vector& target, std::span<const int> mask) {
  if (pred.cols() != 1 || pred.rows() != target.size()) {
    throw ShapeError("masked_mse: predictions " + ad::shape_string(pred.value()) + " vs " +
                     std::to_string(target.size()) + " targets");
  }
  check_mask(static_cast<std::size_t>(target.size()), mask);
  Tensor picked(static_cast<Eigen::Index>(mask.size()), 1);
  for (std::size_t k = 0; k < mask.size(); ++k) picked(k, 0) = target(mask[k]);
  const Var diff = ad::sub(ad::gather_rows(pred, mask), pred.tape().constant(std::move(picked)));
  return ad::mean(ad::square(diff));
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double learning_rate, double weight_decay, bool decoupled) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters vs " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.push_back(Tensor::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Tensor::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks a different parameter count");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g0 = grads[k];
    if (g0.rows() != p.rows() || g0.cols() != p.cols() ||
        state.first_moment[k].rows() != p.rows() || state.first_moment[k].cols() != p.cols()) {
      throw ShapeError("adam_step: gradient " + ad::shape_string(g0) + " for parameter " +
                       ad::shape_string(p));
    }
    Tensor g = g0;
    if (weight_decay != 0.0) {
      if (decoupled) {
        p *= 1.0 - learning_rate * weight_decay;
      } else {
        g += weight_decay * p;
      }
    }
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

PlateauScheduler::PlateauScheduler(double initial_lr, double factor, int patience, double threshold)
    : lr_(initial_lr),
      factor_(factor),
      patience_(patience),
      threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_ * (1.0 - threshold_) || best_ == std::numeric_limits<double>::infinity()) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    ++reductions_;
    bad_epochs_ = 0;
  }
  return lr_;
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
       << format_double(e.learning_rate) << '\n';
  }
  os << "# best_epoch=" << best_epoch << '\n';
  os << "# best_val_loss=" << format_double(best_val_loss) << '\n';
  os << "# stop_reason=" << stop_reason << '\n';
  return os.str();
}

TrainingMonitor::TrainingMonitor(const TrainConfig& config)
    : scheduler_(config.learning_rate, config.scheduler_factor, config.scheduler_patience,
                 config.scheduler_threshold),
      stopper_(config.early_stop_patience),
      early_stopping_(config.early_stopping) {}

TrainingMonitor::Decision TrainingMonitor::observe(double val_loss) {
  Decision d;
  d.improved = stopper_.observe(val_loss);
  d.next_learning_rate = scheduler_.observe(val_loss);
  d.stop = early_stopping_ && stopper_.should_stop();
  return d;
}

std::vector<Tensor> loss_gradients(const Model& model, const TemporalSample& sample,
                                   const MessageGraph& graph, std::span<const int> nodes,
                                   double* loss) {
  Tape tape;
  const BoundParams bound = model.bind(tape, true);
  const Var pred = model.forward(tape, bound, sample, graph);
  const Var l = masked_mse(pred, sample.target, nodes);
  tape.backward(l);
  if (loss) *loss = l.value()(0, 0);
  std::vector<Tensor> grads;
  visit_params(bound, [&](const std::string&, const Var& v) {
    grads.push_back(v.valid() ? tape.grad(v) : Tensor());
  });
  return grads;
}

TrainResult train(const ModelConfig& model_config, std::span<const TemporalSample> train_samples,
                  std::span<const TemporalSample> val_samples, const RoadGraph& graph,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (train_samples.empty()) throw ConfigError("training needs at least one training window");
  if (val_samples.empty()) throw ConfigError("training needs at least one validation window");

  Model model = Model::init(model_config, derive_seed(config.seed, 0));
  Rng dropout_rng(derive_seed(config.seed, 1));
  const MessageGraph messages = MessageGraph::from(graph);
  const std::vector<int> train_nodes =
      options.train_nodes.empty() ? all_nodes(graph.num_nodes()) : options.train_nodes;
  const std::vector<int> val_nodes = all_nodes(graph.num_nodes());

  std::vector<Tensor*> slots;
  visit_params(model.mutable_params(), [&](const std::string&, Tensor& t) {
    if (t.size() > 0) slots.push_back(&t);
  });

  AdamState adam;
  TrainingMonitor monitor(config);
  TrainResult result;
  result.model = model;
  result.report.best_val_loss = std::numeric_limits<double>::infinity();
  result.report.stop_reason = "max_epochs";
  double lr = config.learning_rate;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double train_loss = 0.0;
    for (const TemporalSample& sample : train_samples) {
      Tape tape;
      const BoundParams bound = model.bind(tape, true);
      ForwardOptions fwd;
      fwd.training = true;
      fwd.rng = &dropout_rng;
      const Var loss = masked_mse(model.forward(tape, bound, sample, messages, fwd), sample.target,
                                  train_nodes);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           " (target year " + std::to_string(sample.target_year) + ")");
      }
      tape.backward(loss);
      std::vector<Tensor> grads;
      visit_params(bound, [&](const std::string&, const Var& v) {
        if (v.valid()) grads.push_back(tape.grad(v));
      });
      for (const Tensor& g : grads) {
        if (!g.allFinite()) {
          throw NumericError("non-finite gradient at epoch " + std::to_string(epoch));
        }
      }
      adam_step(slots, grads, adam, lr, config.weight_decay, config.decoupled_weight_decay);
      train_loss += value;
    }
    train_loss /= static_cast<double>(train_samples.size());

    double val_loss = 0.0;
    for (const TemporalSample& sample : val_samples) {
      val_loss += masked_mse(model.predict(sample, messages), sample.target, val_nodes);
    }
    val_loss /= static_cast<double>(val_samples.size());
    if (!std::isfinite(val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }

    const EpochRecord record{epoch, train_loss, val_loss, lr};
    result.report.epochs.push_back(record);
    if (options.on_epoch) options.on_epoch(record, model);

    const auto decision = monitor.observe(val_loss);
    if (decision.improved) {
      result.model = model;
      result.report.best_epoch = epoch;
      result.report.best_val_loss = val_loss;
    }
    lr = decision.next_learning_rate;
    if (decision.stop) {
      result.report.stop_reason = "early_stop";
      break;
    }
  }
  return result;
}

}  // namespace pavegraph
