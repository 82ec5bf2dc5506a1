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

// Masked MSE objective, Adam, plateau learning-rate schedule, early stopping
// and the full-batch training loop.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pavegraph/autodiff.hpp"
#include "pavegraph/graph.hpp"
#include "pavegraph/model.hpp"

namespace pavegraph {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int max_epochs = 200;
  double scheduler_factor = 0.5;
  int scheduler_patience = 8;
  // Relative improvement below this counts as a plateau epoch.
  double scheduler_threshold = 1e-4;
  int early_stop_patience = 25;
  bool early_stopping = true;
  // false: L2 term added to the gradient before the moment updates.
  // true: decay applied directly to the weights (AdamW style).
  bool decoupled_weight_decay = false;
  std::uint64_t seed = 0;
  int window = 2;

  void validate() const;
};

// Mean of squared errors over the listed node indices.
double masked_mse(const Vector& pred, const Vector& target, std::span<const int> mask);
ad::Var masked_mse(ad::Var pred, const Vector& target, std::span<const int> mask);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// One bias-corrected Adam update of every tensor in `params` using the
// matching entry of `grads`. Moments are allocated on the first call.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double learning_rate, double weight_decay, bool decoupled = false);

// Multiplies the learning rate by `factor` once `patience` consecutive epochs
// fail to improve on the best loss by more than the relative threshold.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor, int patience, double threshold);

  // Records an epoch's validation loss and returns the rate for the next epoch.
  double observe(double val_loss);
  double learning_rate() const { return lr_; }
  int reductions() const { return reductions_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double threshold_;
  double best_;
  int bad_epochs_ = 0;
  int reductions_ = 0;
};

// Signals a stop after `patience` consecutive epochs without a strict
// improvement of the best loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Returns true when this loss is a new best.
  bool observe(double val_loss);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_;
  int bad_epochs_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::string stop_reason;  // "max_epochs" or "early_stop"

  // epoch,train_loss,val_loss,lr rows followed by summary comment lines.
  std::string to_csv() const;
};

// Scheduler and early stopping driven by one validation loss per epoch.
class TrainingMonitor {
 public:
  explicit TrainingMonitor(const TrainConfig& config);

  struct Decision {
    bool improved = false;
    bool stop = false;
    double next_learning_rate = 0.0;
  };
  Decision observe(double val_loss);
  double learning_rate() const { return scheduler_.learning_rate(); }

 private:
  PlateauScheduler scheduler_;
  EarlyStopping stopper_;
  bool early_stopping_;
};

struct TrainOptions {
  // Node indices contributing to the training loss; empty means all nodes.
  std::vector<int> train_nodes;
  // Called after every epoch with the current (not best) model.
  std::function<void(const EpochRecord&, const Model&)> on_epoch;
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  TrainReport report;
};

// Expects standardized samples. One Adam step per training window per epoch,
// windows visited in chronological order. Throws NumericError on a
// non-finite loss.
TrainResult train(const ModelConfig& model_config, std::span<const TemporalSample> train_samples,
                  std::span<const TemporalSample> val_samples, const RoadGraph& graph,
                  const TrainConfig& config, const TrainOptions& options = {});

// Gradient of the masked MSE of one sample w.r.t. every parameter, in
// visit_params order (empty tensors for inactive slots).
std::vector<Tensor> loss_gradients(const Model& model, const TemporalSample& sample,
                                   const MessageGraph& graph, std::span<const int> nodes,
                                   double* loss = nullptr);

}  // namespace pavegraph
