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

// Model explanations: permutation feature importance over the whole network
// and a GNNExplainer-style mask optimizer for a single segment.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pavegraph/graph.hpp"
#include "pavegraph/model.hpp"

namespace pavegraph {

struct FeatureImportance {
  std::vector<std::string> names;
  std::vector<double> raw;         // I_f, may be negative
  std::vector<double> normalized;  // max(I_f, 0) / sum, zeros when no score is positive

  // Feature indices by descending normalized score (ties by index).
  std::vector<std::size_t> ranking() const;
};

FeatureImportance normalize_importance(std::vector<std::string> names, std::vector<double> raw);

std::vector<std::string> default_feature_names(std::size_t count);

using Predictor = std::function<Vector(const TemporalSample&)>;
// Permutation of node indices for feature f, repeat r.
using PermutationSource = std::function<std::vector<int>(std::size_t feature, std::size_t repeat)>;

// For each feature, permutes its column across nodes (the same permutation at
// every time step), re-predicts and averages the MSE increase over repeats.
FeatureImportance permutation_importance(const Predictor& predict, const TemporalSample& sample,
                                         const Vector& actual, std::vector<std::string> names,
                                         std::uint64_t seed, int repeats);
FeatureImportance permutation_importance(const Predictor& predict, const TemporalSample& sample,
                                         const Vector& actual, std::vector<std::string> names,
                                         const PermutationSource& permutations, int repeats);
FeatureImportance permutation_importance(const Model& model, const TemporalSample& sample,
                                         const RoadGraph& graph, const Vector& actual,
                                         std::uint64_t seed, int repeats);

struct ExplainConfig {
  double l1_feature = 0.005;
  double entropy_feature = 0.1;
  double l1_edge = 0.005;
  int steps = 200;
  double learning_rate = 0.01;
  double init_std = 0.01;  // std of the initial mask logits around 0
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExplanationMasks {
  int node = 0;
  Vector feature_mask;  // F entries in [0, 1]
  Vector edge_mask;     // one entry per undirected edge, in RoadGraph::edges() order
  double objective = 0.0;
  std::vector<double> objective_trace;  // objective before each step, then final
};

// Objective value and its gradient with respect to the mask values.
struct MaskObjective {
  double objective = 0.0;
  double prediction_loss = 0.0;
  Vector feature_grad;
  Vector edge_grad;
};

// L_pred + l1_f |M_f|_1 + entropy_f H(M_f) + l1_e |M_e|_1 where L_pred is the
// squared change of the node's prediction relative to `reference`.
MaskObjective explanation_objective(const Model& model, const TemporalSample& sample,
                                    const MessageGraph& graph, int node, double reference,
                                    const Vector& feature_mask, const Vector& edge_mask,
                                    const ExplainConfig& config);

// Optimizes sigmoid-parameterized masks with Adam. Deterministic per seed.
ExplanationMasks explain_node(const Model& model, const TemporalSample& sample,
                              const RoadGraph& graph, int node, const ExplainConfig& config);

// Repeats an N x F matrix across `window` time steps.
std::vector<Tensor> temporal_wrapper(const Tensor& static_features, int window);

// Explains a static feature matrix by repeating it across the model window.
ExplanationMasks explain_node_static(const Model& model, const Tensor& static_features,
                                     const RoadGraph& graph, int node,
                                     const ExplainConfig& config);

// Feature mask normalized to sum to one, as a local importance profile.
FeatureImportance local_importance(const ExplanationMasks& masks, std::vector<std::string> names);

}  // namespace pavegraph
