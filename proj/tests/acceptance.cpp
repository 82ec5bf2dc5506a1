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

// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Usage: pavegraph_acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "pavegraph/checkpoint.hpp"
#include "pavegraph/decision.hpp"
#include "pavegraph/explain.hpp"
#include "pavegraph/metrics.hpp"
#include "pavegraph/pipeline.hpp"
#include "pavegraph/synth.hpp"
#include "pavegraph/training.hpp"
#include "test_support.hpp"

using namespace pavegraph;
using namespace pavegraph::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

ModelConfig small_model(Variant v, int f, int t0) {
  ModelConfig c;
  c.variant = v;
  c.num_features = f;
  c.window = t0;
  c.heads = 2;
  c.head_dim = 3;
  c.gru_hidden = 4;
  c.head_hidden = 5;
  return c;
}

// ---- 1 ----
Outcome gradient_fidelity() {
  const auto start = Clock::now();
  Rng rng(101);
  const ModelConfig c = small_model(Variant::kFull, 3, 2);
  const Model m = Model::init(c, 7);
  const RoadGraph g = random_graph(rng, 5, 2);
  const MessageGraph mg = MessageGraph::from(g);
  const TemporalSample s = random_sample(rng, 5, 3, 2);
  const std::vector<int> nodes{0, 1, 2, 3, 4};
  const std::vector<Tensor> grads = loss_gradients(m, s, mg, nodes);
  ParamSet base = m.params();
  double worst = 0.0;
  std::size_t slot = 0, checked = 0;
  visit_params(base, [&](const std::string&, Tensor& t) {
    const std::size_t k = slot++;
    if (t.size() == 0) return;
    auto loss = [&](const Tensor& value) {
      ParamSet p = base;
      std::size_t j = 0;
      visit_params(p, [&](const std::string&, Tensor& u) {
        if (j++ == k) u = value;
      });
      return masked_mse(Model(c, p).predict(s, mg), s.target, nodes);
    };
    worst = std::max(worst, max_relative_error(grads[k], numeric_gradient(loss, t, 1e-5), 1e-6));
    checked += static_cast<std::size_t>(t.size());
  });
  const double secs = seconds_since(start);
  return {worst < 1e-3 && secs < 10.0,
          fmt("%zu parameters, max relative error %.2e, %.2f s", checked, worst, secs)};
}

// ---- 2 ----
Outcome attention_normalization() {
  Rng rng(202);
  const Model m = Model::init(small_model(Variant::kFull, 3, 2), 3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 40));
    const RoadGraph g = random_graph(rng, n, static_cast<int>(uniform_index(rng, 2 * n)));
    const MessageGraph mg = MessageGraph::from(g);
    const TemporalSample s = random_sample(rng, n, 3, 2);
    std::vector<std::vector<Vector>> att;
    ForwardOptions opts;
    opts.attention = &att;
    ad::Tape tape;
    m.forward(tape, m.bind(tape, false), s, mg, opts);
    for (const auto& step : att) {
      for (const Vector& a : step) {
        std::vector<double> sums(static_cast<std::size_t>(n), 0.0);
        for (std::size_t k = 0; k < mg.target.size(); ++k) sums[mg.target[k]] += a(static_cast<Eigen::Index>(k));
        for (double v : sums) worst = std::max(worst, std::abs(v - 1.0));
      }
    }
  }
  return {worst <= 1e-9, fmt("100 graphs, max |sum - 1| = %.2e", worst)};
}

// ---- 3 ----
Outcome permutation_equivariance() {
  Rng rng(303);
  const int n = 30;
  const Model m = Model::init(small_model(Variant::kFull, 3, 2), 5);
  const RoadGraph g = random_graph(rng, n, 25);
  const TemporalSample s = random_sample(rng, n, 3, 2);
  const Vector y = m.predict(s, g);
  const auto ids = make_ids(n);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    shuffle(std::span<int>(perm), rng);
    std::vector<SegmentPair> pairs;
    for (const auto& [a, b] : g.edges()) pairs.emplace_back(ids[perm[a]], ids[perm[b]]);
    TemporalSample ps = s;
    for (std::size_t t = 0; t < s.window(); ++t) {
      for (int i = 0; i < n; ++i) ps.inputs[t].row(perm[i]) = s.inputs[t].row(i);
    }
    const Vector py = m.predict(ps, RoadGraph::build(ids, pairs));
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(py(perm[i]) - y(i)));
  }
  return {worst <= 1e-9, fmt("20 permutations, max deviation %.2e", worst)};
}

// Test R2 of one variant on one synthetic dataset.
double synth_r2(const SynthDataset& d, const PreparedData& data, Variant v, std::uint64_t seed) {
  ModelConfig mc;
  mc.variant = v;
  TrainConfig tc;
  tc.seed = seed;
  return run_experiment(data, d.graph, mc, tc).test.report.r2;
}

SynthDataset desk_dataset(std::uint64_t seed, bool drift) {
  SynthConfig sc;
  sc.num_segments = 200;
  sc.target_arcs = 2 * (sc.num_segments - 1);
  sc.seed = seed;
  sc.drift = drift;
  return generate(sc);
}

// ---- 4 ----
Outcome contagion_ablation() {
  const auto start = Clock::now();
  int wins = 0;
  double gap_sum = 0.0;
  std::ostringstream gaps;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SynthDataset d = desk_dataset(seed, false);
    const PreparedData data = prepare_data(d.series, 2);
    const double gap = synth_r2(d, data, Variant::kFull, seed) - synth_r2(d, data, Variant::kMlp, seed);
    wins += gap > 0.0 ? 1 : 0;
    gap_sum += gap;
    gaps << (seed > 1 ? " " : "") << fmt("%+.3f", gap);
  }
  const double secs = seconds_since(start);
  const double mean_gap = gap_sum / 5.0;
  return {wins >= 4 && mean_gap >= 0.03 && secs < 600.0,
          fmt("N=200, full beats mlp in %d/5 seeds, gaps [%s], mean gap %.3f, %.0f s", wins,
              gaps.str().c_str(), mean_gap, secs)};
}

// ---- 5 ----
Outcome architecture_ordering() {
  const Variant variants[] = {Variant::kFull, Variant::kNoTemporal, Variant::kNoResidual,
                              Variant::kVanilla};
  double mean[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SynthDataset d = desk_dataset(seed, true);
    const PreparedData data = prepare_data(d.series, 2);
    for (int k = 0; k < 4; ++k) mean[k] += synth_r2(d, data, variants[k], seed) / 5.0;
  }
  bool pass = true;
  std::ostringstream os;
  os << "N=200, drift on, mean R2";
  for (int k = 0; k < 4; ++k) {
    os << ' ' << variant_name(variants[k]) << fmt(" %.3f", mean[k]);
    if (k > 0 && mean[0] < mean[k]) pass = false;
  }
  return {pass, os.str()};
}

// ---- 6 ----
Outcome severity_boundaries() {
  const std::pair<double, Severity> cases[] = {
      {39.999, Severity::kVeryPoor}, {40.0, Severity::kPoor},  {54.999, Severity::kPoor},
      {55.0, Severity::kFair},       {69.999, Severity::kFair}, {70.0, Severity::kGood},
      {84.999, Severity::kGood},     {85.0, Severity::kExcellent}};
  int ok = 0;
  for (const auto& [pci, want] : cases) ok += classify(pci).severity == want ? 1 : 0;
  return {ok == 8, fmt("%d/8 boundary values mapped", ok)};
}

// ---- 7 ----
Outcome safety_identities() {
  Rng rng(707);
  const int n = 1000;
  std::vector<double> pred(n), actual(n);
  for (int i = 0; i < n; ++i) {
    pred[i] = uniform(rng, 0.0, 100.0);
    actual[i] = uniform(rng, 0.0, 100.0);
  }
  std::vector<std::string> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = "P" + std::to_string(i);
  const SafetyReport r = safety_report(build_profile(pred, std::span<const double>(actual), ids));
  std::array<long, kNumSeverities> counts{};
  for (double a : actual) counts[static_cast<int>(classify(a).severity) - 1]++;
  bool rows_ok = true;
  for (int c = 0; c < kNumSeverities; ++c) {
    long row = 0;
    for (long v : r.confusion[c]) row += v;
    rows_ok = rows_ok && row == counts[c];
  }
  const bool pass = r.total == n && r.exact_count <= r.adjacent_count &&
                    r.exact_match <= r.adjacent_match &&
                    r.adjacent_count + r.critical_count == r.total &&
                    r.adjacent_match + r.critical_misclassification == 1.0 && rows_ok;
  return {pass, fmt("exact %.3f, adjacent %.3f, critical %.3f, row sums %s", r.exact_match,
                    r.adjacent_match, r.critical_misclassification, rows_ok ? "match" : "differ")};
}

// ---- 8 ----
Outcome metric_oracle() {
  Rng rng(808);
  double worst = 0.0, law = 0.0;
  const std::vector<double> grid = default_rec_grid();
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 60);
    std::vector<double> p(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = uniform(rng, 30.0, 100.0);
      p[i] = a[i] + normal(rng, 0.0, 1.0 + 5.0 * uniform01(rng));
    }
    double se = 0, ae = 0, ma = 0, mp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      se += (p[i] - a[i]) * (p[i] - a[i]);
      ae += std::abs(p[i] - a[i]);
      ma += a[i];
      mp += p[i];
    }
    ma /= n;
    mp /= n;
    double tot = 0, vp = 0, va = 0, cov = 0, crm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tot += (a[i] - ma) * (a[i] - ma);
      vp += (p[i] - mp) * (p[i] - mp);
      va += (a[i] - ma) * (a[i] - ma);
      cov += (p[i] - mp) * (a[i] - ma);
      crm += ((p[i] - mp) - (a[i] - ma)) * ((p[i] - mp) - (a[i] - ma));
    }
    const RegressionReport r = regression_report(p, a);
    worst = std::max({worst, std::abs(r.mse - se / n), std::abs(r.rmse - std::sqrt(se / n)),
                      std::abs(r.mae - ae / n), std::abs(r.r2 - (1.0 - se / tot))});
    const RecCurve rc = rec_curve(p, a, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double hit = 0;
      for (std::size_t i = 0; i < n; ++i) hit += std::abs(p[i] - a[i]) <= grid[k] ? 1 : 0;
      worst = std::max(worst, std::abs(rc.coverage[k] - hit / n));
    }
    const TaylorStats t = taylor_stats(p, a);
    const double sp = std::sqrt(vp / n), sa = std::sqrt(va / n);
    worst = std::max({worst, std::abs(t.pred_std - sp), std::abs(t.ref_std - sa),
                      std::abs(t.correlation - (cov / n) / (sp * sa)),
                      std::abs(t.centered_rmse - std::sqrt(crm / n))});
    law = std::max(law, std::abs(t.centered_rmse * t.centered_rmse -
                                 (t.pred_std * t.pred_std + t.ref_std * t.ref_std -
                                  2.0 * t.pred_std * t.ref_std * t.correlation)));
  }
  return {worst <= 1e-9 && law <= 1e-9,
          fmt("100 vectors, max deviation %.2e, law of cosines residual %.2e", worst, law)};
}

// y = 3 x3 + noise on the newest slice of six independent features.
struct Planted {
  RoadGraph graph;
  std::vector<TemporalSample> train;
  std::vector<TemporalSample> val;
  TemporalSample test;
};

Planted planted_task() {
  const int n = 200, f = 6;
  Rng rng(909);
  Planted p;
  p.graph = random_graph(rng, n, n / 2);
  auto sample = [&] {
    TemporalSample s = random_sample(rng, n, f, 2);
    for (int i = 0; i < n; ++i) s.target(i) = 3.0 * s.inputs[1](i, 3) + normal(rng, 0.0, 0.1);
    return s;
  };
  for (int k = 0; k < 6; ++k) p.train.push_back(sample());
  p.val.push_back(sample());
  p.test = sample();
  return p;
}

struct PlantedModel {
  Model model;
  double r2 = 0.0;
};

PlantedModel fit_planted(const Planted& p, Variant v) {
  ModelConfig mc;
  mc.variant = v;
  mc.num_features = 6;
  mc.heads = 2;
  mc.head_dim = 8;
  mc.gru_hidden = 16;
  mc.head_hidden = 32;
  TrainConfig tc;
  tc.max_epochs = 400;
  tc.learning_rate = 0.003;
  tc.weight_decay = 0.0;
  tc.seed = 1;
  PlantedModel out;
  out.model = train(mc, p.train, p.val, p.graph, tc).model;
  const Vector pred = out.model.predict(p.test, p.graph);
  const double sse = (pred - p.test.target).squaredNorm();
  const double sst = (p.test.target.array() - p.test.target.mean()).square().sum();
  out.r2 = 1.0 - sse / sst;
  return out;
}

const Planted& planted() {
  static const Planted p = planted_task();
  return p;
}

// ---- 9 ----
Outcome permutation_oracle() {
  const Planted& p = planted();
  bool pass = true;
  std::ostringstream os;
  for (Variant v : {Variant::kFull, Variant::kMlp}) {
    const PlantedModel pm = fit_planted(p, v);
    const FeatureImportance fi = permutation_importance(pm.model, p.test, p.graph, p.test.target, 3, 10);
    double other = 0.0;
    for (std::size_t k = 0; k < fi.normalized.size(); ++k) {
      if (k != 3) other = std::max(other, fi.normalized[k]);
    }
    pass = pass && pm.r2 > 0.9 && fi.normalized[3] > 0.8 && other < 0.05;
    os << (v == Variant::kFull ? "" : "; ") << variant_name(v)
       << fmt(" R2 %.3f, feature 3 %.3f, max other %.3f", pm.r2, fi.normalized[3], other);
  }
  return {pass, os.str()};
}

// ---- 10 ----
Outcome explainer_planted() {
  const Planted& p = planted();
  const PlantedModel pm = fit_planted(p, Variant::kMlp);
  int hits = 0;
  for (int node = 0; node < 10; ++node) {
    const ExplanationMasks e = explain_node(pm.model, p.test, p.graph, node, ExplainConfig{});
    const auto rank = local_importance(e, default_feature_names(6)).ranking();
    hits += (rank[0] == 3 || rank[1] == 3) ? 1 : 0;
  }
  return {pm.r2 > 0.9 && hits >= 8,
          fmt("mlp R2 %.3f, feature 3 in top-2 for %d/10 nodes", pm.r2, hits)};
}

// ---- 11 ----
Outcome determinism() {
  SynthConfig sc;
  sc.num_segments = 40;
  sc.target_arcs = 90;
  sc.seed = 11;
  const SynthDataset d = generate(sc);
  const PreparedData data = prepare_data(d.series, 2);
  ModelConfig mc = small_model(Variant::kFull, static_cast<int>(kNumFeatures), 2);
  mc.spatial_dropout = 0.2;
  mc.head_dropout = 0.1;
  TrainConfig tc;
  tc.max_epochs = 30;
  tc.seed = 5;
  const TrainResult a = train(mc, data.windows.train, data.windows.val, d.graph, tc);
  const TrainResult b = train(mc, data.windows.train, data.windows.val, d.graph, tc);
  const bool report_ok = a.report.to_csv() == b.report.to_csv();

  const Checkpoint ck{a.model, data.standardizer, tc.seed};
  const Checkpoint back = parse_checkpoint(checkpoint_text(ck));
  const bool ck_ok = same_parameters(ck.model.params(), back.model.params()) &&
                     back.standardizer == ck.standardizer && back.seed == ck.seed &&
                     checkpoint_text(back) == checkpoint_text(ck);

  double worst = 0.0;
  for (std::size_t t = 0; t < d.series.num_years(); ++t) {
    const Tensor& x = d.series.features[t];
    const Tensor rt = data.standardizer.inverse_features(data.standardizer.transform_features(x));
    worst = std::max(worst, (rt - x).cwiseAbs().maxCoeff());
    const Vector& y = d.series.targets[t];
    const Vector ry = data.standardizer.inverse_target(data.standardizer.transform_target(y));
    worst = std::max(worst, (ry - y).cwiseAbs().maxCoeff());
  }
  return {report_ok && ck_ok && worst <= 1e-9,
          fmt("report %s, checkpoint %s, standardizer round trip %.2e",
              report_ok ? "identical" : "differs", ck_ok ? "bit-identical" : "differs", worst)};
}

// ---- 12 ----
Outcome training_contracts() {
  TrainConfig cfg;
  cfg.early_stopping = false;
  TrainingMonitor plateau(cfg);
  // Epoch 1 sets the best; epochs 2..9 are the eight non-improving ones.
  int halved_at = 0;
  for (int epoch = 1; epoch <= 20 && halved_at == 0; ++epoch) {
    if (plateau.observe(1.0).next_learning_rate == cfg.learning_rate * 0.5) halved_at = epoch;
  }
  const int lr_bad_epochs = halved_at - 1;

  TrainingMonitor stopper(TrainConfig{});
  int stop_at = 0;
  for (int epoch = 1; epoch <= 100 && stop_at == 0; ++epoch) {
    if (stopper.observe(1.0).stop) stop_at = epoch;
  }
  const int stop_bad_epochs = stop_at - 1;
  return {lr_bad_epochs == 8 && stop_bad_epochs == 25,
          fmt("learning rate halved after %d non-improving epochs, stop after %d", lr_bad_epochs,
              stop_bad_epochs)};
}

// ---- 13 ----
Outcome synth_fidelity() {
  const SynthDataset d = generate(SynthConfig{});
  double sum = 0.0, sq = 0.0, n = 0.0;
  for (const Vector& y : d.series.targets) {
    sum += y.sum();
    sq += y.squaredNorm();
    n += static_cast<double>(y.size());
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  const bool pass = d.graph.num_nodes() == 750 && 2 * d.graph.num_edges() == 1498 && n == 3000 &&
                    std::abs(mean - 80.99) <= 2.0 && std::abs(sd - 9.13) <= 2.0;
  return {pass, fmt("%zu nodes, %zu arcs, %.0f observations, PCI mean %.2f std %.2f",
                    d.graph.num_nodes(), 2 * d.graph.num_edges(), n, mean, sd)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"attention normalization", attention_normalization},
      {"permutation equivariance", permutation_equivariance},
      {"spatial contagion ablation", contagion_ablation},
      {"architecture ordering", architecture_ordering},
      {"severity boundaries", severity_boundaries},
      {"safety metric identities", safety_identities},
      {"metric oracle equivalence", metric_oracle},
      {"permutation importance oracle", permutation_oracle},
      {"explainer planted signal", explainer_planted},
      {"determinism and round trips", determinism},
      {"training loop contracts", training_contracts},
      {"synthetic data fidelity", synth_fidelity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
