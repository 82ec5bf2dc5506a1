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

// Spatio-temporal residual graph-attention network and its ablations.
//
// Per time step a single multi-head graph attention layer embeds every node
// from its neighborhood (self-loops included). A linear projection of the raw
// features is added, passed through ELU, layer-normalized and dropped out.
// The per-step embeddings feed a GRU whose final state goes through a
// two-layer ReLU regression head.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pavegraph/autodiff.hpp"
#include "pavegraph/graph.hpp"
#include "pavegraph/random.hpp"

namespace pavegraph {

enum class Variant {
  kFull,        // attention + residual + GRU
  kNoResidual,  // ST-GAT: attention + GRU
  kNoTemporal,  // ResGAT: attention + residual on the newest step
  kVanilla,     // attention on the newest step
  kMlp,         // head on the flattened window, no graph
};

// CLI names: full, st_gat, resgat, vanilla, mlp.
std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
bool uses_graph(Variant v);
bool uses_residual(Variant v);
bool uses_gru(Variant v);

struct ModelConfig {
  Variant variant = Variant::kFull;
  int num_features = static_cast<int>(kNumFeatures);
  int window = 2;
  int heads = 4;
  int head_dim = 64;
  int gru_hidden = 256;
  int head_hidden = 128;
  double spatial_dropout = 0.0;
  double head_dropout = 0.0;
  double leaky_slope = 0.2;
  double elu_alpha = 1.0;
  double norm_eps = 1e-5;

  int spatial_dim() const { return heads * head_dim; }
  // Input width of the regression head for the configured variant.
  int head_input_dim() const;
  // Throws ConfigError on non-positive sizes or invalid probabilities.
  void validate() const;
};

template <typename T>
struct GatParamsT {
  std::vector<T> weight;     // per head: F x d_head
  std::vector<T> attention;  // per head: 2 d_head x 1, target half first
};

template <typename T>
struct ResidualParamsT {
  T projection;  // F x K d_head
  T norm_gain;   // 1 x K d_head
  T norm_bias;   // 1 x K d_head
};

template <typename T>
struct GruParamsT {
  T w_z, w_r, w_h;  // input x hidden
  T u_z, u_r, u_h;  // hidden x hidden
  T b_z, b_r, b_h;  // 1 x hidden
};

template <typename T>
struct HeadParamsT {
  T w1, b1;  // in x head_hidden, 1 x head_hidden
  T w2, b2;  // head_hidden x 1, 1 x 1
};

template <typename T>
struct ParamSetT {
  GatParamsT<T> gat;
  ResidualParamsT<T> residual;
  GruParamsT<T> gru;
  HeadParamsT<T> head;
};

using ParamSet = ParamSetT<Tensor>;
using BoundParams = ParamSetT<ad::Var>;

// Visits every parameter slot in a fixed order as f(name, slot). Slots of
// inactive sub-modules are empty tensors / invalid vars.
template <typename P, typename F>
void visit_params(P& p, F&& f) {
  for (std::size_t k = 0; k < p.gat.weight.size(); ++k) {
    f("gat.weight." + std::to_string(k), p.gat.weight[k]);
    f("gat.attention." + std::to_string(k), p.gat.attention[k]);
  }
  f(std::string("residual.projection"), p.residual.projection);
  f(std::string("residual.norm_gain"), p.residual.norm_gain);
  f(std::string("residual.norm_bias"), p.residual.norm_bias);
  f(std::string("gru.w_z"), p.gru.w_z);
  f(std::string("gru.w_r"), p.gru.w_r);
  f(std::string("gru.w_h"), p.gru.w_h);
  f(std::string("gru.u_z"), p.gru.u_z);
  f(std::string("gru.u_r"), p.gru.u_r);
  f(std::string("gru.u_h"), p.gru.u_h);
  f(std::string("gru.b_z"), p.gru.b_z);
  f(std::string("gru.b_r"), p.gru.b_r);
  f(std::string("gru.b_h"), p.gru.b_h);
  f(std::string("head.w1"), p.head.w1);
  f(std::string("head.b1"), p.head.b1);
  f(std::string("head.w2"), p.head.w2);
  f(std::string("head.b2"), p.head.b2);
}

// Edge list used for message passing: one entry per directed arc plus one
// self-loop per node, sorted by (target, source).
struct MessageGraph {
  int num_nodes = 0;
  std::vector<int> source;
  std::vector<int> target;
  // Index into RoadGraph::edges() for real arcs, -1 for self-loops.
  std::vector<int> edge;
  int num_undirected_edges = 0;

  // Throws DataError for an isolated node when self-loops are disabled.
  static MessageGraph from(const RoadGraph& graph, bool self_loops = true);
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
  // 1 x F multiplier applied to every time slice.
  std::optional<ad::Var> feature_mask;
  // |E| x 1 multiplier on the attention coefficients of both arcs of each
  // undirected edge. Self-loops are never masked.
  std::optional<ad::Var> edge_mask;
  // When set, receives attention coefficients [time step][head] over
  // MessageGraph entries.
  std::vector<std::vector<Vector>>* attention = nullptr;
};

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, ParamSet params);

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weight matrices, zero
  // biases, unit layer-norm gain. Deterministic per seed.
  static Model init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParamSet& params() const { return params_; }
  ParamSet& mutable_params() { return params_; }
  std::size_t num_parameters() const;

  // Records every parameter on the tape as a variable (trainable) or constant.
  BoundParams bind(ad::Tape& tape, bool trainable) const;

  // N x 1 standardized PCI prediction.
  ad::Var forward(ad::Tape& tape, const BoundParams& params, const TemporalSample& sample,
                  const MessageGraph& graph, const ForwardOptions& options = {}) const;

  // Inference convenience: standardized predictions as a vector.
  Vector predict(const TemporalSample& sample, const MessageGraph& graph) const;
  Vector predict(const TemporalSample& sample, const RoadGraph& graph) const;

 private:
  void check_sample(const TemporalSample& sample) const;

  ModelConfig config_;
  ParamSet params_;
};

// Building blocks, exposed for testing.
ad::Var gat_forward(const GatParamsT<ad::Var>& params, ad::Var features, const MessageGraph& graph,
                    const ModelConfig& config, const ForwardOptions& options,
                    std::vector<Vector>* attention = nullptr);
ad::Var residual_forward(const ResidualParamsT<ad::Var>& params, ad::Var attention_out,
                         std::optional<ad::Var> raw_features, const ModelConfig& config,
                         const ForwardOptions& options);
ad::Var gru_forward(const GruParamsT<ad::Var>& params, std::span<const ad::Var> sequence);
ad::Var head_forward(const HeadParamsT<ad::Var>& params, ad::Var input, const ModelConfig& config,
                     const ForwardOptions& options);

}  // namespace pavegraph
