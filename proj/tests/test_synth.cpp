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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pavegraph/csv.hpp"
#include "pavegraph/error.hpp"
#include "pavegraph/synth.hpp"
#include "test_support.hpp"

using namespace pavegraph;
using namespace pavegraph::testing;

TEST_CASE("default dataset shape and PCI statistics") {
  const SynthConfig cfg;
  const SynthDataset d = generate(cfg);
  CHECK(d.graph.num_nodes() == 750);
  CHECK(2 * d.graph.num_edges() == 1498);
  CHECK(d.series.years == std::vector<int>{2021, 2022, 2023, 2024});
  double sum = 0.0, sq = 0.0, n = 0.0;
  for (const Vector& y : d.series.targets) {
    sum += y.sum();
    sq += y.squaredNorm();
    n += static_cast<double>(y.size());
  }
  CHECK(n == 3000);
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean - 80.99) <= 2.0);
  CHECK(std::abs(sd - 9.13) <= 2.0);
  CHECK(d.graph.node_ids().front() == "S0001");
}

TEST_CASE("generation is deterministic per seed") {
  SynthConfig cfg;
  cfg.num_segments = 80;
  cfg.target_arcs = 200;
  const SynthDataset a = generate(cfg);
  const SynthDataset b = generate(cfg);
  CHECK(a.graph == b.graph);
  for (std::size_t t = 0; t < a.series.num_years(); ++t) {
    CHECK(a.series.features[t] == b.series.features[t]);
    CHECK(a.series.targets[t] == b.series.targets[t]);
  }
  cfg.seed = 43;
  CHECK(generate(cfg).series.targets[0] != a.series.targets[0]);
}

TEST_CASE("values respect the marginal bounds") {
  SynthConfig cfg;
  cfg.drift = true;
  const SynthDataset d = generate(cfg);
  const auto& m = cfg.marginals;
  for (std::size_t t = 0; t < d.series.num_years(); ++t) {
    const Tensor& x = d.series.features[t];
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      INFO(kFeatureColumns[f]);
      CHECK(x.col(f).minCoeff() >= m[f].min);
      CHECK(x.col(f).maxCoeff() <= m[f].max);
    }
    CHECK(d.series.targets[t].minCoeff() >= m[kPciMarginal].min);
    CHECK(d.series.targets[t].maxCoeff() <= m[kPciMarginal].max);
  }
}

TEST_CASE("static attributes stay fixed and age increments") {
  SynthConfig cfg;
  cfg.num_segments = 50;
  cfg.target_arcs = 120;
  const SnapshotSeries s = generate(cfg).series;
  for (std::size_t t = 1; t < s.num_years(); ++t) {
    for (std::size_t f : {0, 1, 2, 3, 6, 7, 8}) CHECK(s.features[t].col(f) == s.features[0].col(f));
    CHECK(s.features[t].col(4) == (s.features[0].col(4).array() + static_cast<double>(t)).matrix());
  }
}

TEST_CASE("without contagion nodes evolve independently") {
  SynthConfig cfg;
  cfg.num_segments = 40;
  cfg.target_arcs = 100;
  cfg.gamma = 0.0;
  const RoadGraph g = generate_graph(cfg);
  SynthInitialState st = sample_initial_state(cfg);
  const SnapshotSeries a = evolve(st, g, cfg);
  st.attributes(7, 5) *= 3.0;  // traffic of node 7
  st.attributes(7, 7) = cfg.marginals[7].min;
  st.initial_pci(7) = 60.0;
  const SnapshotSeries b = evolve(st, g, cfg);
  for (std::size_t t = 0; t < a.num_years(); ++t) {
    for (int i = 0; i < 40; ++i) {
      if (i == 7) continue;
      CHECK(a.targets[t](i) == b.targets[t](i));
      CHECK(a.features[t].row(i) == b.features[t].row(i));
    }
  }
  CHECK(a.targets[3](7) != b.targets[3](7));
}

TEST_CASE("contagion probe separates adjacent pairs only with contagion") {
  SynthConfig cfg;
  cfg.gamma = 0.0;
  const SynthDataset off = generate(cfg);
  const ContagionProbe p0 = contagion_strength_probe(off.series, off.graph, 1);
  CHECK(p0.random_pairs == 1000);
  CHECK(p0.adjacent_pairs == 749);
  CHECK(std::abs(p0.gap()) < 0.05);
  cfg.gamma = 0.5;
  const SynthDataset on = generate(cfg);
  CHECK(contagion_strength_probe(on.series, on.graph, 1).gap() > 0.1);
}

TEST_CASE("two coupled nodes converge") {
  SynthConfig cfg;
  cfg.num_segments = 2;
  cfg.target_arcs = 2;
  cfg.num_years = 6;
  cfg.gamma = 2.0;
  cfg.noise_std = 0.0;
  cfg.observation_noise = 0.0;
  cfg.burn_in_years = 0;
  // Widen the age range so six years still fit.
  cfg.marginals[4].max = 20;
  const RoadGraph g = generate_graph(cfg);
  SynthInitialState st = sample_initial_state(cfg);
  st.attributes.row(1) = st.attributes.row(0);
  st.initial_pci << 95.0, 75.0;
  const SnapshotSeries s = evolve(st, g, cfg);
  double prev_gap = 1e9, prev_decline_gap = 1e9;
  for (std::size_t t = 0; t < s.num_years(); ++t) {
    const double gap = std::abs(s.targets[t](0) - s.targets[t](1));
    CHECK((gap < prev_gap || gap == 0.0));
    prev_gap = gap;
    if (t > 0) {
      const Vector decline = s.targets[t - 1] - s.targets[t];
      const double dg = std::abs(decline(0) - decline(1));
      CHECK((dg < prev_decline_gap || dg == 0.0));
      prev_decline_gap = dg;
    }
  }
}

TEST_CASE("config errors") {
  SynthConfig cfg;
  cfg.num_segments = 10;
  cfg.target_arcs = 200;  // more than the lattice offers
  CHECK_THROWS_AS(generate_graph(cfg), ConfigError);
  cfg.target_arcs = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.gamma = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sparser targets drop tree edges") {
  SynthConfig cfg;
  cfg.num_segments = 30;
  cfg.target_arcs = 40;
  CHECK(generate_graph(cfg).num_edges() == 20);
}

TEST_CASE("dataset files round trip through the loaders") {
  SynthConfig cfg;
  cfg.num_segments = 25;
  cfg.target_arcs = 60;
  const SynthDataset d = generate(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "pavegraph_synth_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const SynthFiles files = write_dataset(d, cfg, dir.string());
  const CsvTable obs = read_csv(files.observations);
  CHECK(obs.header.front() == "segment_id");
  CHECK(obs.header.back() == "pci");
  CHECK(obs.rows.size() == 100);
  const CsvTable edges = read_csv(files.edges);
  CHECK(edges.rows.size() == 60);
  const RoadGraph g = load_graph(segment_ids_of(obs), edges);
  CHECK(g == d.graph);
  const SnapshotSeries s = load_snapshots(obs, g);
  for (std::size_t t = 0; t < s.num_years(); ++t) {
    CHECK(s.features[t] == d.series.features[t]);
    CHECK(s.targets[t] == d.series.targets[t]);
  }
  std::ifstream prov(files.provenance);
  std::stringstream text;
  text << prov.rdbuf();
  CHECK(text.str().find("synth.seed = 42") != std::string::npos);
  std::filesystem::remove_all(dir);
}
