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

#include "pavegraph/model.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "pavegraph/error.hpp"

namespace pavegraph {

using ad::Tape;
using ad::Var;

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "full";
    case Variant::kNoResidual:
      return "st_gat";
    case Variant::kNoTemporal:
      return "resgat";
    case Variant::kVanilla:
      return "vanilla";
    case Variant::kMlp:
      return "mlp";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : {Variant::kFull, Variant::kNoResidual, Variant::kNoTemporal, Variant::kVanilla,
                    Variant::kMlp}) {
    if (variant_name(v) == name) return v;
  }
  if (name == "no_residual") return Variant::kNoResidual;
  if (name == "no_temporal") return Variant::kNoTemporal;
  return std::nullopt;
}

bool uses_graph(Variant v) { return v != Variant::kMlp; }
bool uses_residual(Variant v) { return v == Variant::kFull || v == Variant::kNoTemporal; }
bool uses_gru(Variant v) { return v == Variant::kFull || v == Variant::kNoResidual; }

int ModelConfig::head_input_dim() const {
  if (variant == Variant::kMlp) return window * num_features;
  return uses_gru(variant) ? gru_hidden : spatial_dim();
}

void ModelConfig::validate() const {
  if (num_features <= 0 || window <= 0 || heads <= 0 || head_dim <= 0 || gru_hidden <= 0 ||
      head_hidden <= 0) {
    throw ConfigError("model dimensions must be positive (features " + std::to_string(num_features) +
                      ", window " + std::to_string(window) + ", heads " + std::to_string(heads) +
                      ", head_dim " + std::to_string(head_dim) + ", gru_hidden " +
                      std::to_string(gru_hidden) + ", head_hidden " + std::to_string(head_hidden) +
                      ")");
  }
  if (spatial_dropout < 0.0 || spatial_dropout >= 1.0 || head_dropout < 0.0 || head_dropout >= 1.0) {
    throw ConfigError("dropout probabilities must lie in [0, 1)");
  }
  if (!(norm_eps > 0.0)) throw ConfigError("layer-norm epsilon must be positive");
}

MessageGraph MessageGraph::from(const RoadGraph& graph, bool self_loops) {
  MessageGraph m;
  m.num_nodes = static_cast<int>(graph.num_nodes());
  m.num_undirected_edges = static_cast<int>(graph.num_edges());
  std::vector<std::tuple<int, int, int>> arcs;  // target, source, edge
  for (std::size_t e = 0; e < graph.edges().size(); ++e) {
    const auto [i, j] = graph.edges()[e];
    arcs.emplace_back(j, i, static_cast<int>(e));
    arcs.emplace_back(i, j, static_cast<int>(e));
  }
  if (self_loops) {
    for (int i = 0; i < m.num_nodes; ++i) arcs.emplace_back(i, i, -1);
  } else {
    for (int i = 0; i < m.num_nodes; ++i) {
      if (graph.neighbors(i).empty()) {
        throw DataError("segment '" + graph.node_ids()[i] +
                        "' has no neighbors and self-loops are disabled");
      }
    }
  }
  std::sort(arcs.begin(), arcs.end());
  for (const auto& [t, s, e] : arcs) {
    m.target.push_back(t);
    m.source.push_back(s);
    m.edge.push_back(e);
  }
  return m;
}

Model::Model(ModelConfig config, ParamSet params) : config_(config), params_(std::move(params)) {
  config_.validate();
}

namespace {

Tensor uniform_matrix(Rng& rng, int rows, int cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -bound, bound);
  return t;
}

}  // namespace

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamSet p;
  const int f = config.num_features;
  const int d = config.spatial_dim();
  const int h = config.gru_hidden;
  if (uses_graph(config.variant)) {
    for (int k = 0; k < config.heads; ++k) {
      p.gat.weight.push_back(uniform_matrix(rng, f, config.head_dim));
      p.gat.attention.push_back(uniform_matrix(rng, 2 * config.head_dim, 1));
    }
    if (uses_residual(config.variant)) p.residual.projection = uniform_matrix(rng, f, d);
    p.residual.norm_gain = Tensor::Ones(1, d);
    p.residual.norm_bias = Tensor::Zero(1, d);
  }
  if (uses_gru(config.variant)) {
    p.gru.w_z = uniform_matrix(rng, d, h);
    p.gru.w_r = uniform_matrix(rng, d, h);
    p.gru.w_h = uniform_matrix(rng, d, h);
    p.gru.u_z = uniform_matrix(rng, h, h);
    p.gru.u_r = uniform_matrix(rng, h, h);
    p.gru.u_h = uniform_matrix(rng, h, h);
    p.gru.b_z = Tensor::Zero(1, h);
    p.gru.b_r = Tensor::Zero(1, h);
    p.gru.b_h = Tensor::Zero(1, h);
  }
  p.head.w1 = uniform_matrix(rng, config.head_input_dim(), config.head_hidden);
  p.head.b1 = Tensor::Zero(1, config.head_hidden);
  p.head.w2 = uniform_matrix(rng, config.head_hidden, 1);
  p.head.b2 = Tensor::Zero(1, 1);
  return Model(config, std::move(p));
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  visit_params(params_, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

BoundParams Model::bind(Tape& tape, bool trainable) const {
  BoundParams b;
  b.gat.weight.resize(params_.gat.weight.size());
  b.gat.attention.resize(params_.gat.attention.size());
  std::vector<const Tensor*> src;
  visit_params(params_, [&](const std::string&, const Tensor& t) { src.push_back(&t); });
  std::size_t k = 0;
  visit_params(b, [&](const std::string&, Var& v) {
    const Tensor& t = *src[k++];
    if (t.size() > 0) v = trainable ? tape.variable(t) : tape.constant(t);
  });
  return b;
}

Var gat_forward(const GatParamsT<Var>& params, Var features, const MessageGraph& graph,
                const ModelConfig& config, const ForwardOptions& options,
                std::vector<Vector>* attention) {
  if (params.weight.empty()) throw ConfigError("gat_forward: model has no attention parameters");
  if (features.rows() != graph.num_nodes) {
    throw ShapeError("gat_forward: " + std::to_string(graph.num_nodes) + " graph nodes but features " +
                     ad::shape_string(features.value()));
  }
  Tape& tape = features.tape();
  std::optional<Var> arc_mask;
  if (options.edge_mask) {
    const Var& m = *options.edge_mask;
    if (m.cols() != 1 || m.rows() != graph.num_undirected_edges) {
      throw ShapeError("edge mask must be " + ad::shape_string(graph.num_undirected_edges, 1) +
                       ", got " + ad::shape_string(m.value()));
    }
    // Self-loops read the trailing constant 1.
    const Var padded = ad::concat(std::vector<Var>{m, tape.constant(Tensor::Ones(1, 1))}, 0);
    std::vector<int> slot(graph.edge.size());
    for (std::size_t a = 0; a < slot.size(); ++a) {
      slot[a] = graph.edge[a] >= 0 ? graph.edge[a] : graph.num_undirected_edges;
    }
    arc_mask = ad::gather_rows(padded, slot);
  }
  const int d = config.head_dim;
  std::vector<Var> heads;
  for (std::size_t k = 0; k < params.weight.size(); ++k) {
    const Var h = ad::matmul(features, params.weight[k]);
    const Var a_target = ad::slice(params.attention[k], 0, 0, d);
    const Var a_source = ad::slice(params.attention[k], 0, d, d);
    const Var score_target = ad::matmul(h, a_target);
    const Var score_source = ad::matmul(h, a_source);
    const Var raw = ad::add(ad::gather_rows(score_target, graph.target),
                            ad::gather_rows(score_source, graph.source));
    const Var e = ad::leaky_relu(raw, config.leaky_slope);
    Var alpha = ad::segment_softmax(e, graph.target, graph.num_nodes);
    if (attention) attention->push_back(alpha.value().col(0));
    if (arc_mask) alpha = ad::mul(alpha, *arc_mask);
    const Var messages = ad::mul_col(ad::gather_rows(h, graph.source), alpha);
    const Var aggregated = ad::scatter_add_rows(messages, graph.target, graph.num_nodes);
    heads.push_back(ad::elu(aggregated, config.elu_alpha));
  }
  return heads.size() == 1 ? heads.front() : ad::concat(heads, 1);
}

Var residual_forward(const ResidualParamsT<Var>& params, Var attention_out,
                     std::optional<Var> raw_features, const ModelConfig& config,
                     const ForwardOptions& options) {
  Var z = attention_out;
  if (raw_features) {
    if (!params.projection.valid()) throw ConfigError("residual_forward: no projection parameters");
    z = ad::add(z, ad::matmul(*raw_features, params.projection));
  }
  z = ad::elu(z, config.elu_alpha);
  z = ad::layer_norm(z, params.norm_gain, params.norm_bias, config.norm_eps);
  if (options.training && config.spatial_dropout > 0.0) {
    if (!options.rng) throw ConfigError("dropout requires a random generator");
    z = ad::dropout(z, config.spatial_dropout, *options.rng);
  }
  return z;
}

Var gru_forward(const GruParamsT<Var>& p, std::span<const Var> sequence) {
  if (sequence.empty()) throw ShapeError("gru_forward: empty sequence");
  Tape& tape = sequence.front().tape();
  const auto hidden = p.u_z.cols();
  Var h = tape.constant(Tensor::Zero(sequence.front().rows(), hidden));
  for (const Var& x : sequence) {
    const Var z = ad::sigmoid(
        ad::add_row(ad::add(ad::matmul(x, p.w_z), ad::matmul(h, p.u_z)), p.b_z));
    const Var r = ad::sigmoid(
        ad::add_row(ad::add(ad::matmul(x, p.w_r), ad::matmul(h, p.u_r)), p.b_r));
    const Var candidate = ad::tanh(
        ad::add_row(ad::add(ad::matmul(x, p.w_h), ad::matmul(ad::mul(r, h), p.u_h)), p.b_h));
    // (1 - z) h + z h~ == h + z (h~ - h)
    h = ad::add(h, ad::mul(z, ad::sub(candidate, h)));
  }
  return h;
}

Var head_forward(const HeadParamsT<Var>& p, Var input, const ModelConfig& config,
                 const ForwardOptions& options) {
  if (input.cols() != p.w1.rows()) {
    throw ShapeError("head_forward: input " + ad::shape_string(input.value()) + " vs weight " +
                     ad::shape_string(p.w1.value()));
  }
  Var hidden = ad::relu(ad::add_row(ad::matmul(input, p.w1), p.b1));
  if (options.training && config.head_dropout > 0.0) {
    if (!options.rng) throw ConfigError("dropout requires a random generator");
    hidden = ad::dropout(hidden, config.head_dropout, *options.rng);
  }
  return ad::add_row(ad::matmul(hidden, p.w2), p.b2);
}

void Model::check_sample(const TemporalSample& sample) const {
  if (static_cast<int>(sample.window()) != config_.window) {
    throw ShapeError("model expects window " + std::to_string(config_.window) + ", sample has " +
                     std::to_string(sample.window()));
  }
  for (const Tensor& x : sample.inputs) {
    if (x.cols() != config_.num_features || x.rows() != sample.target.size()) {
      throw ShapeError("sample slice " + ad::shape_string(x) + " does not match " +
                       std::to_string(config_.num_features) + " features");
    }
  }
}

Var Model::forward(Tape& tape, const BoundParams& params, const TemporalSample& sample,
                   const MessageGraph& graph, const ForwardOptions& options) const {
  check_sample(sample);
  const Variant v = config_.variant;
  const bool graph_variant = uses_graph(v);
  if (graph_variant && params.gat.weight.empty()) {
    throw ConfigError("variant " + std::string(variant_name(v)) + " requires attention parameters");
  }
  if (uses_gru(v) && !params.gru.w_z.valid()) {
    throw ConfigError("variant " + std::string(variant_name(v)) + " requires GRU parameters");
  }
  std::vector<Var> slices;
  for (const Tensor& x : sample.inputs) {
    Var xt = tape.constant(x);
    if (options.feature_mask) xt = ad::mul_row(xt, *options.feature_mask);
    slices.push_back(xt);
  }
  if (!graph_variant) {
    return head_forward(params.head, ad::concat(slices, 1), config_, options);
  }
  // Graph variants without a GRU only encode the newest slice.
  const std::size_t first = uses_gru(v) ? 0 : slices.size() - 1;
  std::vector<Var> embeddings;
  for (std::size_t t = first; t < slices.size(); ++t) {
    std::vector<Vector>* trace = nullptr;
    if (options.attention) trace = &options.attention->emplace_back();
    const Var h = gat_forward(params.gat, slices[t], graph, config_, options, trace);
    std::optional<Var> raw;
    if (uses_residual(v)) raw = slices[t];
    embeddings.push_back(residual_forward(params.residual, h, raw, config_, options));
  }
  const Var encoded = uses_gru(v) ? gru_forward(params.gru, embeddings) : embeddings.back();
  return head_forward(params.head, encoded, config_, options);
}

Vector Model::predict(const TemporalSample& sample, const MessageGraph& graph) const {
  Tape tape;
  const BoundParams bound = bind(tape, false);
  return forward(tape, bound, sample, graph).value().col(0);
}

Vector Model::predict(const TemporalSample& sample, const RoadGraph& graph) const {
  return predict(sample, MessageGraph::from(graph));
}

}  // namespace pavegraph
