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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "pavegraph/checkpoint.hpp"
#include "pavegraph/error.hpp"
#include "pavegraph/model.hpp"
#include "pavegraph/training.hpp"
#include "test_support.hpp"

using namespace pavegraph;
using namespace pavegraph::testing;
using ad::Tape;
using ad::Var;

namespace {

ModelConfig small_config(Variant v, int f = 3, int t0 = 2) {
  ModelConfig c;
  c.variant = v;
  c.num_features = f;
  c.window = t0;
  c.heads = 2;
  c.head_dim = 3;
  c.gru_hidden = 5;
  c.head_hidden = 4;
  return c;
}

double elu(double x) { return x > 0 ? x : std::exp(x) - 1.0; }
double lrelu(double x) { return x >= 0 ? x : 0.2 * x; }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<int> random_permutation(Rng& rng, int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  shuffle(std::span<int>(p), rng);
  return p;
}

// Relabels nodes: new index perm[i] holds old node i.
std::pair<RoadGraph, TemporalSample> permuted(const RoadGraph& g, const TemporalSample& s,
                                              const std::vector<int>& perm) {
  const int n = static_cast<int>(g.num_nodes());
  const auto ids = make_ids(n);
  std::vector<SegmentPair> pairs;
  for (const auto& [a, b] : g.edges()) pairs.emplace_back(ids[perm[a]], ids[perm[b]]);
  TemporalSample out = s;
  for (std::size_t t = 0; t < s.window(); ++t) {
    for (int i = 0; i < n; ++i) out.inputs[t].row(perm[i]) = s.inputs[t].row(i);
  }
  for (int i = 0; i < n; ++i) out.target(perm[i]) = s.target(i);
  return {RoadGraph::build(ids, pairs), out};
}

}  // namespace

TEST_CASE("default dimensions") {
  ModelConfig c;
  CHECK(c.heads == 4);
  CHECK(c.head_dim == 64);
  CHECK(c.spatial_dim() == 256);
  CHECK(c.gru_hidden == 256);
  CHECK(c.head_hidden == 128);
  CHECK(c.num_features == 11);
}

TEST_CASE("init is deterministic and validates sizes") {
  const ModelConfig c = small_config(Variant::kFull);
  CHECK(same_parameters(Model::init(c, 1).params(), Model::init(c, 1).params()));
  CHECK_FALSE(same_parameters(Model::init(c, 1).params(), Model::init(c, 2).params()));
  ModelConfig bad = c;
  bad.heads = 0;
  CHECK_THROWS_AS(Model::init(bad, 1), ConfigError);
  bad = c;
  bad.head_dim = -1;
  CHECK_THROWS_AS(Model::init(bad, 1), ConfigError);
}

TEST_CASE("init draws within the fan-in bound") {
  const Model m = Model::init(small_config(Variant::kFull), 3);
  ParamSet p = m.params();
  visit_params(p, [](const std::string& name, const Tensor& t) {
    if (t.size() == 0 || name.find("norm_gain") != std::string::npos) return;
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.rows()));
    INFO(name);
    CHECK(t.cwiseAbs().maxCoeff() <= bound);
  });
}

TEST_CASE("variants activate the expected sub-modules") {
  auto active = [](Variant v) {
    std::vector<std::string> names;
    ParamSet p = Model::init(small_config(v), 1).params();
    visit_params(p, [&](const std::string& n, const Tensor& t) {
      if (t.size() > 0) names.push_back(n);
    });
    return names;
  };
  auto has = [](const std::vector<std::string>& names, const std::string& prefix) {
    return std::any_of(names.begin(), names.end(),
                       [&](const std::string& n) { return n.rfind(prefix, 0) == 0; });
  };
  const auto full = active(Variant::kFull);
  CHECK(has(full, "gat."));
  CHECK(has(full, "residual.projection"));
  CHECK(has(full, "gru."));
  const auto st = active(Variant::kNoResidual);
  CHECK_FALSE(has(st, "residual.projection"));
  CHECK(has(st, "gru."));
  const auto res = active(Variant::kNoTemporal);
  CHECK(has(res, "residual.projection"));
  CHECK_FALSE(has(res, "gru."));
  const auto van = active(Variant::kVanilla);
  CHECK(has(van, "gat."));
  CHECK_FALSE(has(van, "gru."));
  CHECK_FALSE(has(van, "residual.projection"));
  const auto mlp = active(Variant::kMlp);
  CHECK_FALSE(has(mlp, "gat."));
  CHECK_FALSE(has(mlp, "gru."));
  CHECK(has(mlp, "head.w1"));
  CHECK(Model::init(small_config(Variant::kMlp), 1).params().head.w1.rows() == 6);
}

TEST_CASE("variant names parse") {
  for (const char* name : {"full", "st_gat", "resgat", "vanilla", "mlp"}) {
    REQUIRE(parse_variant(name));
    CHECK(variant_name(*parse_variant(name)) == name);
  }
  CHECK(parse_variant("no_residual") == Variant::kNoResidual);
  CHECK(parse_variant("no_temporal") == Variant::kNoTemporal);
  CHECK_FALSE(parse_variant("transformer"));
}

TEST_CASE("isolated node attends only to itself") {
  Rng rng(1);
  ModelConfig c = small_config(Variant::kVanilla);
  const RoadGraph g = RoadGraph::build({"A", "B", "C"}, std::vector<SegmentPair>{{"A", "B"}});
  const MessageGraph mg = MessageGraph::from(g);
  Tape tape;
  GatParamsT<Var> p;
  std::vector<Tensor> w;
  for (int k = 0; k < c.heads; ++k) {
    w.push_back(random_tensor(rng, 3, c.head_dim));
    p.weight.push_back(tape.constant(w.back()));
    p.attention.push_back(tape.constant(random_tensor(rng, 2 * c.head_dim, 1)));
  }
  const Tensor x = random_tensor(rng, 3, 3);
  const Var h = gat_forward(p, tape.constant(x), mg, c, {});
  for (int k = 0; k < c.heads; ++k) {
    const Tensor wx = x.row(2) * w[k];
    for (int d = 0; d < c.head_dim; ++d) CHECK(h.value()(2, k * c.head_dim + d) == elu(wx(0, d)));
  }
  CHECK_THROWS_AS(MessageGraph::from(g, false), DataError);
}

TEST_CASE("attention on a 3-node path by hand") {
  ModelConfig c = small_config(Variant::kVanilla, 1);
  c.heads = 1;
  c.head_dim = 1;
  const RoadGraph g =
      RoadGraph::build({"A", "B", "C"}, std::vector<SegmentPair>{{"A", "B"}, {"B", "C"}});
  const MessageGraph mg = MessageGraph::from(g);
  Tape tape;
  GatParamsT<Var> p;
  p.weight.push_back(tape.constant(Tensor::Constant(1, 1, 2.0)));
  Tensor a(2, 1);
  a << 0.5, -1.0;  // target half, source half
  p.attention.push_back(tape.constant(a));
  Tensor x(3, 1);
  x << 1.0, -0.5, 2.0;
  std::vector<Vector> att;
  const Var h = gat_forward(p, tape.constant(x), mg, c, {}, &att);

  const double wx[3] = {2.0, -1.0, 4.0};
  auto score = [&](int i, int j) { return lrelu(0.5 * wx[i] - 1.0 * wx[j]); };
  // Node B attends to A, B, C.
  const double eA = std::exp(score(1, 0));
  const double eB = std::exp(score(1, 1));
  const double eC = std::exp(score(1, 2));
  const double sum = eA + eB + eC;
  const double hB = elu((eA * wx[0] + eB * wx[1] + eC * wx[2]) / sum);
  CHECK(h.value()(1, 0) == doctest::Approx(hB).epsilon(1e-12));
  // Node A attends to A and B.
  const double fA = std::exp(score(0, 0));
  const double fB = std::exp(score(0, 1));
  CHECK(h.value()(0, 0) == doctest::Approx(elu((fA * wx[0] + fB * wx[1]) / (fA + fB))).epsilon(1e-12));
  REQUIRE(att.size() == 1);
  CHECK(att[0].size() == static_cast<Eigen::Index>(mg.source.size()));
}

TEST_CASE("identical symmetric nodes get identical embeddings") {
  Rng rng(2);
  const ModelConfig c = small_config(Variant::kVanilla);
  const RoadGraph g = RoadGraph::build({"A", "B"}, std::vector<SegmentPair>{{"A", "B"}});
  const Model m = Model::init(c, 4);
  TemporalSample s;
  const Tensor row = random_tensor(rng, 1, 3);
  Tensor x(2, 3);
  x << row, row;
  s.inputs = {x, x};
  s.target = Vector::Zero(2);
  const Vector y = m.predict(s, g);
  CHECK(y(0) == y(1));
}

TEST_CASE("attention coefficients sum to one per node") {
  Rng rng(3);
  const Model m = Model::init(small_config(Variant::kFull), 5);
  for (int trial = 0; trial < 10; ++trial) {
    const RoadGraph g = random_graph(rng, 3 + static_cast<int>(uniform_index(rng, 20)), 10);
    const MessageGraph mg = MessageGraph::from(g);
    const TemporalSample s = random_sample(rng, static_cast<int>(g.num_nodes()), 3, 2);
    std::vector<std::vector<Vector>> att;
    ForwardOptions opts;
    opts.attention = &att;
    Tape tape;
    m.forward(tape, m.bind(tape, false), s, mg, opts);
    REQUIRE(att.size() == 2);
    for (const auto& step : att) {
      for (const Vector& a : step) {
        std::vector<double> sums(g.num_nodes(), 0.0);
        for (std::size_t k = 0; k < mg.target.size(); ++k) sums[mg.target[k]] += a(k);
        for (double v : sums) CHECK(std::abs(v - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("residual cancellation gives the norm bias") {
  ModelConfig c = small_config(Variant::kFull);
  Rng rng(6);
  Tape tape;
  const Tensor x = random_tensor(rng, 4, 3);
  const Tensor wr = random_tensor(rng, 3, c.spatial_dim());
  ResidualParamsT<Var> p;
  p.projection = tape.constant(wr);
  p.norm_gain = tape.constant(Tensor::Ones(1, c.spatial_dim()));
  p.norm_bias = tape.constant(Tensor::Zero(1, c.spatial_dim()));
  const Var z = residual_forward(p, tape.constant(-(x * wr)), tape.constant(x), c, {});
  CHECK(z.value().cwiseAbs().maxCoeff() < 1e-6);

  const Var r = residual_forward(p, tape.constant(random_tensor(rng, 4, c.spatial_dim())),
                                 tape.constant(x), c, {});
  for (Eigen::Index i = 0; i < 4; ++i) {
    const auto row = r.value().row(i).array();
    CHECK(std::abs(row.mean()) < 1e-9);
    CHECK(std::sqrt((row - row.mean()).square().mean()) == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("dropout zero leaves training forward deterministic") {
  Rng rng(7);
  ModelConfig c = small_config(Variant::kFull);
  const Model m = Model::init(c, 1);
  const RoadGraph g = random_graph(rng, 6, 3);
  const TemporalSample s = random_sample(rng, 6, 3, 2);
  Rng r1(1), r2(2);
  ForwardOptions o1{.training = true, .rng = &r1};
  ForwardOptions o2{.training = true, .rng = &r2};
  Tape t1, t2;
  const MessageGraph mg = MessageGraph::from(g);
  CHECK(m.forward(t1, m.bind(t1, false), s, mg, o1).value() ==
        m.forward(t2, m.bind(t2, false), s, mg, o2).value());
}

TEST_CASE("gru with saturated update gate keeps only the candidate") {
  Rng rng(8);
  Tape tape;
  const int in = 3, hid = 2;
  GruParamsT<Var> p;
  const Tensor wh = random_tensor(rng, in, hid);
  p.w_z = tape.constant(random_tensor(rng, in, hid));
  p.w_r = tape.constant(random_tensor(rng, in, hid));
  p.w_h = tape.constant(wh);
  p.u_z = tape.constant(random_tensor(rng, hid, hid));
  p.u_r = tape.constant(random_tensor(rng, hid, hid));
  p.u_h = tape.constant(Tensor::Zero(hid, hid));
  p.b_z = tape.constant(Tensor::Constant(1, hid, 1e3));
  p.b_r = tape.constant(Tensor::Zero(1, hid));
  p.b_h = tape.constant(Tensor::Zero(1, hid));
  const Tensor x1 = random_tensor(rng, 4, in);
  const Tensor x2 = random_tensor(rng, 4, in);
  const Var seq[] = {tape.constant(x1), tape.constant(x2)};
  const Var h = gru_forward(p, seq);
  const Tensor expect = (x2 * wh).array().tanh().matrix();
  CHECK((h.value() - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gru fixed point at zero input") {
  const ModelConfig c = small_config(Variant::kFull);
  const Model m = Model::init(c, 2);
  Tape tape;
  const BoundParams p = m.bind(tape, false);
  const Var zero = tape.constant(Tensor::Zero(3, c.spatial_dim()));
  const Var seq[] = {zero, zero, zero};
  CHECK(gru_forward(p.gru, seq).value() == Tensor::Zero(3, c.gru_hidden));
}

TEST_CASE("gru scalar step by hand") {
  Tape tape;
  auto s = [&](double v) { return tape.constant(Tensor::Constant(1, 1, v)); };
  GruParamsT<Var> p{s(0.5), s(-0.3), s(0.8), s(0.1), s(0.2), s(0.3), s(0.05), s(-0.1), s(0.2)};
  const Var seq[] = {s(1.5)};
  const double x = 1.5;
  const double z = sigmoid(0.5 * x + 0.05);
  const double h_tilde = std::tanh(0.8 * x + 0.2);
  CHECK(gru_forward(p, seq).value()(0, 0) == doctest::Approx(z * h_tilde).epsilon(1e-14));

  // Second step exercises the reset gate and recurrent weights.
  const Var seq2[] = {s(1.5), s(-0.7)};
  const double h1 = z * h_tilde;
  const double z2 = sigmoid(0.5 * -0.7 + 0.1 * h1 + 0.05);
  const double r2 = sigmoid(-0.3 * -0.7 + 0.2 * h1 - 0.1);
  const double c2 = std::tanh(0.8 * -0.7 + 0.3 * r2 * h1 + 0.2);
  CHECK(gru_forward(p, seq2).value()(0, 0) ==
        doctest::Approx((1 - z2) * h1 + z2 * c2).epsilon(1e-14));
}

TEST_CASE("full and resgat differ on a single step") {
  Rng rng(9);
  const RoadGraph g = random_graph(rng, 5, 2);
  const TemporalSample s = random_sample(rng, 5, 3, 1);
  const Model full = Model::init(small_config(Variant::kFull, 3, 1), 3);
  ModelConfig rc = small_config(Variant::kNoTemporal, 3, 1);
  ParamSet p = full.params();
  // The resgat head reads the spatial embedding directly.
  p.gru = {};
  p.head.w1 = random_tensor(rng, rc.spatial_dim(), rc.head_hidden);
  const Model res(rc, p);
  CHECK(full.predict(s, g).size() == 5);
  CHECK(res.predict(s, g).size() == 5);
  CHECK(full.predict(s, g) != res.predict(s, g));
}

TEST_CASE("permutation equivariance") {
  Rng rng(10);
  for (Variant v : {Variant::kFull, Variant::kNoResidual, Variant::kNoTemporal,
                    Variant::kVanilla, Variant::kMlp}) {
    const Model m = Model::init(small_config(v), 11);
    for (int trial = 0; trial < 5; ++trial) {
      const RoadGraph g = random_graph(rng, 12, 8);
      const TemporalSample s = random_sample(rng, 12, 3, 2);
      const auto perm = random_permutation(rng, 12);
      const auto [pg, ps] = permuted(g, s, perm);
      const Vector y = m.predict(s, g);
      const Vector py = m.predict(ps, pg);
      for (int i = 0; i < 12; ++i) CHECK(std::abs(py(perm[i]) - y(i)) < 1e-9);
    }
  }
}

TEST_CASE("mlp ignores the edge set") {
  Rng rng(12);
  const Model m = Model::init(small_config(Variant::kMlp), 1);
  const RoadGraph g = random_graph(rng, 8, 4);
  const RoadGraph empty = RoadGraph::build(g.node_ids(), {});
  const TemporalSample s = random_sample(rng, 8, 3, 2);
  CHECK(m.predict(s, g) == m.predict(s, empty));
}

TEST_CASE("prediction depends only on the one-hop neighborhood") {
  Rng rng(13);
  const RoadGraph g = random_graph(rng, 15, 6);
  for (Variant v : {Variant::kFull, Variant::kNoResidual, Variant::kNoTemporal,
                    Variant::kVanilla}) {
    const Model m = Model::init(small_config(v), 2);
    const TemporalSample s = random_sample(rng, 15, 3, 2);
    const Vector y = m.predict(s, g);
    const int i = 0;
    std::vector<int> near = g.neighbors(i);
    near.push_back(i);
    for (int j = 0; j < 15; ++j) {
      if (std::find(near.begin(), near.end(), j) != near.end()) continue;
      TemporalSample t = s;
      for (auto& x : t.inputs) x.row(j) = random_tensor(rng, 1, 3, 5.0);
      CHECK(m.predict(t, g)(i) == y(i));
    }
  }
}

TEST_CASE("edge mask of ones changes nothing") {
  Rng rng(14);
  const RoadGraph g = random_graph(rng, 6, 3);
  const MessageGraph mg = MessageGraph::from(g);
  const Model m = Model::init(small_config(Variant::kVanilla), 3);
  const TemporalSample s = random_sample(rng, 6, 3, 2);
  const Vector base = m.predict(s, mg);
  auto masked = [&](const TemporalSample& x, double v) {
    Tape tape;
    ForwardOptions o;
    o.edge_mask = tape.constant(Tensor::Constant(static_cast<Eigen::Index>(g.num_edges()), 1, v));
    return Vector(m.forward(tape, m.bind(tape, false), x, mg, o).value().col(0));
  };
  CHECK((masked(s, 1.0) - base).cwiseAbs().maxCoeff() < 1e-12);
  TemporalSample poked = s;
  for (auto& step : poked.inputs) step.row(0).array() += 5.0;
  const Vector before = masked(s, 0.0);
  const Vector after = masked(poked, 0.0);
  CHECK(std::abs(after(0) - before(0)) > 1e-6);
  // Masked neighbors still enter the softmax denominator; only non-neighbors are untouched.
  for (Eigen::Index i = 1; i < before.size(); ++i) {
    const auto& nb = g.neighbors(0);
    if (std::find(nb.begin(), nb.end(), static_cast<int>(i)) == nb.end()) CHECK(after(i) == before(i));
  }
}

TEST_CASE("wrong sample shapes are rejected") {
  Rng rng(15);
  const Model m = Model::init(small_config(Variant::kFull), 1);
  const RoadGraph g = random_graph(rng, 4, 1);
  CHECK_THROWS_AS(m.predict(random_sample(rng, 4, 5, 2), g), ShapeError);
  CHECK_THROWS_AS(m.predict(random_sample(rng, 4, 3, 3), g), ShapeError);
  CHECK_THROWS_AS(m.predict(random_sample(rng, 5, 3, 2), g), ShapeError);
}

TEST_CASE("end-to-end gradients match finite differences") {
  Rng rng(16);
  for (Variant v : {Variant::kFull, Variant::kNoResidual, Variant::kNoTemporal,
                    Variant::kVanilla, Variant::kMlp}) {
    const ModelConfig c = small_config(v);
    const Model m = Model::init(c, 21);
    const RoadGraph g = random_graph(rng, 5, 2);
    const MessageGraph mg = MessageGraph::from(g);
    const TemporalSample s = random_sample(rng, 5, 3, 2);
    const std::vector<int> nodes{0, 1, 2, 3, 4};
    const std::vector<Tensor> grads = loss_gradients(m, s, mg, nodes);
    ParamSet base = m.params();
    std::size_t slot = 0;
    visit_params(base, [&](const std::string& name, Tensor& t) {
      const std::size_t k = slot++;
      if (t.size() == 0) return;
      auto loss = [&](const Tensor& value) {
        ParamSet p = base;
        std::size_t s2 = 0;
        visit_params(p, [&](const std::string&, Tensor& u) {
          if (s2++ == k) u = value;
        });
        return masked_mse(Model(c, p).predict(s, mg), s.target, nodes);
      };
      INFO(variant_name(v), " ", name);
      CHECK(max_relative_error(grads[k], numeric_gradient(loss, t), 1e-6) < 1e-3);
    });
  }
}
