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

#include "pavegraph/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pavegraph/error.hpp"
#include "pavegraph/random.hpp"
#include "pavegraph/training.hpp"

namespace pavegraph {

using ad::Tape;
using ad::Var;

std::vector<std::size_t> FeatureImportance::ranking() const {
  std::vector<std::size_t> order(normalized.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return normalized[a] > normalized[b]; });
  return order;
}

FeatureImportance normalize_importance(std::vector<std::string> names, std::vector<double> raw) {
  if (names.size() != raw.size()) throw ShapeError("importance: names and scores differ in length");
  FeatureImportance fi;
  fi.names = std::move(names);
  fi.raw = std::move(raw);
  fi.normalized.assign(fi.raw.size(), 0.0);
  double total = 0.0;
  for (double v : fi.raw) total += std::max(v, 0.0);
  if (total > 0.0) {
    for (std::size_t f = 0; f < fi.raw.size(); ++f) fi.normalized[f] = std::max(fi.raw[f], 0.0) / total;
  }
  return fi;
}

std::vector<std::string> default_feature_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < count; ++f) {
    names.emplace_back(count == kNumFeatures ? std::string(kFeatureColumns[f])
                                             : "feature_" + std::to_string(f));
  }
  return names;
}

FeatureImportance permutation_importance(const Predictor& predict, const TemporalSample& sample,
                                         const Vector& actual, std::vector<std::string> names,
                                         const PermutationSource& permutations, int repeats) {
  if (repeats < 1) throw ConfigError("permutation importance needs at least one repeat");
  const std::size_t f_count = sample.num_features();
  const auto n = static_cast<Eigen::Index>(sample.num_nodes());
  if (names.size() != f_count) throw ShapeError("importance: one name per feature required");
  if (actual.size() != n) throw ShapeError("importance: actual values do not match node count");
  std::vector<int> everyone(static_cast<std::size_t>(n));
  std::iota(everyone.begin(), everyone.end(), 0);

  const double base = masked_mse(predict(sample), actual, everyone);
  std::vector<double> raw(f_count, 0.0);
  for (std::size_t f = 0; f < f_count; ++f) {
    double acc = 0.0;
    for (int r = 0; r < repeats; ++r) {
      const std::vector<int> perm = permutations(f, static_cast<std::size_t>(r));
      if (static_cast<Eigen::Index>(perm.size()) != n) {
        throw ShapeError("importance: permutation length differs from node count");
      }
      TemporalSample shuffled = sample;
      for (std::size_t t = 0; t < sample.window(); ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
          shuffled.inputs[t](i, static_cast<Eigen::Index>(f)) =
              sample.inputs[t](perm[i], static_cast<Eigen::Index>(f));
        }
      }
      acc += masked_mse(predict(shuffled), actual, everyone);
    }
    raw[f] = acc / static_cast<double>(repeats) - base;
  }
  return normalize_importance(std::move(names), std::move(raw));
}

FeatureImportance permutation_importance(const Predictor& predict, const TemporalSample& sample,
                                         const Vector& actual, std::vector<std::string> names,
                                         std::uint64_t seed, int repeats) {
  Rng rng(seed);
  const std::size_t n = sample.num_nodes();
  PermutationSource source = [&rng, n](std::size_t, std::size_t) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(std::span<int>(perm), rng);
    return perm;
  };
  return permutation_importance(predict, sample, actual, std::move(names), source, repeats);
}

FeatureImportance permutation_importance(const Model& model, const TemporalSample& sample,
                                         const RoadGraph& graph, const Vector& actual,
                                         std::uint64_t seed, int repeats) {
  if (static_cast<int>(sample.num_features()) != model.config().num_features) {
    throw ShapeError("importance: sample features do not match the model");
  }
  const MessageGraph messages = MessageGraph::from(graph);
  Predictor predict = [&](const TemporalSample& s) { return model.predict(s, messages); };
  return permutation_importance(predict, sample, actual,
                                default_feature_names(sample.num_features()), seed, repeats);
}

void ExplainConfig::validate() const {
  if (l1_feature < 0.0 || entropy_feature < 0.0 || l1_edge < 0.0) {
    throw ConfigError("explainer regularization weights must be non-negative");
  }
  if (steps < 0) throw ConfigError("explainer steps must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("explainer learning rate must be positive");
}

namespace {

constexpr double kEntropyClamp = 1e-6;

// Objective from mask variables. `arc_edge_mask` is the mask seen by the
// forward pass (graph-local), `all_edge_mask` carries the L1 penalty.
Var objective_terms(Tape& tape, const Model& model, const BoundParams& params,
                    const TemporalSample& sample, const MessageGraph& graph, int node,
                    double reference, Var feature_mask, std::optional<Var> arc_edge_mask,
                    std::optional<Var> all_edge_mask, const ExplainConfig& config,
                    double* prediction_loss) {
  ForwardOptions opts;
  opts.feature_mask = feature_mask;
  if (uses_graph(model.config().variant)) opts.edge_mask = arc_edge_mask;
  const Var pred = model.forward(tape, params, sample, graph, opts);
  const Var diff = ad::add_scalar(ad::slice(pred, 0, node, 1), -reference);
  const Var lpred = ad::square(diff);
  if (prediction_loss) *prediction_loss = lpred.value()(0, 0);

  const Var m = ad::clamp(feature_mask, kEntropyClamp, 1.0 - kEntropyClamp);
  const Var one_minus = ad::add_scalar(ad::scale(m, -1.0), 1.0);
  const Var plogp = ad::add(ad::mul(m, ad::log(m)), ad::mul(one_minus, ad::log(one_minus)));
  const Var entropy = ad::scale(ad::sum(plogp), -1.0);

  Var total = ad::add(lpred, ad::scale(ad::sum(feature_mask), config.l1_feature));
  total = ad::add(total, ad::scale(entropy, config.entropy_feature));
  if (all_edge_mask) total = ad::add(total, ad::scale(ad::sum(*all_edge_mask), config.l1_edge));
  return total;
}

struct Neighborhood {
  TemporalSample sample;
  MessageGraph graph;
  int node = 0;
  std::vector<int> edge_of;  // local undirected edge -> index in the full graph
};

// The one-hop neighborhood determines a node's prediction exactly for the
// single attention layer used here.
Neighborhood neighborhood(const TemporalSample& sample, const RoadGraph& graph, int node) {
  std::vector<int> members = graph.neighbors(node);
  members.push_back(node);
  std::sort(members.begin(), members.end());
  std::vector<std::string> ids;
  std::vector<SegmentPair> pairs;
  for (int j : members) ids.push_back(graph.node_ids()[j]);
  for (int j : graph.neighbors(node)) pairs.emplace_back(graph.node_ids()[node], graph.node_ids()[j]);
  const RoadGraph local = RoadGraph::build(ids, pairs);

  Neighborhood nb;
  nb.graph = MessageGraph::from(local);
  nb.node = *local.index_of(graph.node_ids()[node]);
  for (const auto& [a, b] : local.edges()) {
    const std::pair<int, int> full{members[a], members[b]};
    const auto it = std::lower_bound(graph.edges().begin(), graph.edges().end(), full);
    nb.edge_of.push_back(static_cast<int>(it - graph.edges().begin()));
  }
  nb.sample.input_years = sample.input_years;
  nb.sample.target_year = sample.target_year;
  nb.sample.target = Vector(static_cast<Eigen::Index>(members.size()));
  for (const Tensor& x : sample.inputs) {
    Tensor rows(static_cast<Eigen::Index>(members.size()), x.cols());
    for (std::size_t k = 0; k < members.size(); ++k) rows.row(k) = x.row(members[k]);
    nb.sample.inputs.push_back(std::move(rows));
  }
  for (std::size_t k = 0; k < members.size(); ++k) nb.sample.target(k) = sample.target(members[k]);
  return nb;
}

void check_node(const RoadGraph& graph, int node) {
  if (node < 0 || static_cast<std::size_t>(node) >= graph.num_nodes()) {
    throw ConfigError("explain: node index " + std::to_string(node) + " out of range");
  }
}

}  // namespace

MaskObjective explanation_objective(const Model& model, const TemporalSample& sample,
                                    const MessageGraph& graph, int node, double reference,
                                    const Vector& feature_mask, const Vector& edge_mask,
                                    const ExplainConfig& config) {
  if (node < 0 || node >= graph.num_nodes) throw ConfigError("explain: node index out of range");
  Tape tape;
  const BoundParams params = model.bind(tape, false);
  const Var fm = tape.variable(feature_mask.transpose());
  std::optional<Var> em;
  if (graph.num_undirected_edges > 0) em = tape.variable(edge_mask);
  MaskObjective out;
  const Var total =
      objective_terms(tape, model, params, sample, graph, node, reference, fm, em, em, config,
                      &out.prediction_loss);
  tape.backward(total);
  out.objective = total.value()(0, 0);
  out.feature_grad = tape.grad(fm).row(0).transpose();
  out.edge_grad = em ? Vector(tape.grad(*em).col(0)) : Vector(Vector::Zero(edge_mask.size()));
  return out;
}

ExplanationMasks explain_node(const Model& model, const TemporalSample& sample,
                              const RoadGraph& graph, int node, const ExplainConfig& config) {
  config.validate();
  check_node(graph, node);
  if (static_cast<int>(sample.num_features()) != model.config().num_features) {
    throw ShapeError("explain: sample features do not match the model");
  }
  const Neighborhood nb = neighborhood(sample, graph, node);
  const double reference = model.predict(nb.sample, nb.graph)(nb.node);

  const auto f = static_cast<Eigen::Index>(sample.num_features());
  const auto e = static_cast<Eigen::Index>(graph.num_edges());
  Rng rng(config.seed);
  Tensor feature_logits(1, f);
  for (Eigen::Index k = 0; k < f; ++k) feature_logits(0, k) = normal(rng, 0.0, config.init_std);
  Tensor edge_logits(e, 1);
  for (Eigen::Index k = 0; k < e; ++k) edge_logits(k, 0) = normal(rng, 0.0, config.init_std);

  ExplanationMasks out;
  out.node = node;

  auto evaluate = [&](bool step) {
    Tape tape;
    const BoundParams params = model.bind(tape, false);
    const Var fl = tape.variable(feature_logits);
    const Var el = tape.variable(edge_logits);
    const Var fm = ad::sigmoid(fl);
    std::optional<Var> all_edges;
    std::optional<Var> local_edges;
    if (e > 0) {
      all_edges = ad::sigmoid(el);
      if (!nb.edge_of.empty()) local_edges = ad::gather_rows(*all_edges, nb.edge_of);
    }
    const Var total = objective_terms(tape, model, params, nb.sample, nb.graph, nb.node, reference,
                                      fm, local_edges, all_edges, config, nullptr);
    const double value = total.value()(0, 0);
    if (!std::isfinite(value)) throw NumericError("explain: non-finite objective");
    if (step) {
      tape.backward(total);
      feature_logits -= config.learning_rate * tape.grad(fl);
      edge_logits -= config.learning_rate * tape.grad(el);
    }
    return value;
  };

  for (int s = 0; s < config.steps; ++s) out.objective_trace.push_back(evaluate(true));
  out.objective = evaluate(false);
  out.objective_trace.push_back(out.objective);

  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  out.feature_mask = feature_logits.row(0).transpose().unaryExpr(sigmoid);
  out.edge_mask = edge_logits.col(0).unaryExpr(sigmoid);
  return out;
}

std::vector<Tensor> temporal_wrapper(const Tensor& static_features, int window) {
  if (window < 1) throw ConfigError("temporal wrapper: window must be at least 1");
  return std::vector<Tensor>(static_cast<std::size_t>(window), static_features);
}

ExplanationMasks explain_node_static(const Model& model, const Tensor& static_features,
                                     const RoadGraph& graph, int node,
                                     const ExplainConfig& config) {
  if (static_features.cols() != model.config().num_features ||
      static_features.rows() != static_cast<Eigen::Index>(graph.num_nodes())) {
    throw ShapeError("explain: static features " + ad::shape_string(static_features) +
                     " do not match the model and graph");
  }
  TemporalSample sample;
  sample.inputs = temporal_wrapper(static_features, model.config().window);
  sample.target = Vector::Zero(static_features.rows());
  return explain_node(model, sample, graph, node, config);
}

FeatureImportance local_importance(const ExplanationMasks& masks, std::vector<std::string> names) {
  return normalize_importance(
      std::move(names), std::vector<double>(masks.feature_mask.begin(), masks.feature_mask.end()));
}

}  // namespace pavegraph
