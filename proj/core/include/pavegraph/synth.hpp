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

// Synthetic longitudinal road-network generator. Node attributes follow the
// marginals of a 750-segment inspection survey; yearly PCI declines are driven
// by traffic, structural capacity, age and flood exposure, plus a contagion
// term that drags a segment toward the condition of its neighbors.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pavegraph/graph.hpp"
#include "pavegraph/random.hpp"

namespace pavegraph {

struct FeatureMarginal {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

// Marginals of the 11 features (kFeatureColumns order) followed by PCI.
inline constexpr std::size_t kPciMarginal = kNumFeatures;
std::array<FeatureMarginal, kNumFeatures + 1> default_marginals();

struct SynthConfig {
  int num_segments = 750;
  int first_year = 2021;
  int num_years = 4;
  int target_arcs = 1498;  // directed adjacency records (twice the undirected edges)
  double gamma = 0.5;      // contagion coefficient
  double noise_std = 0.7;  // PCI process noise per year
  // Measurement noise of crack area; IRI noise is scaled from it.
  double observation_noise = 3.0;
  // Hidden per-segment deterioration rate that wanders from year to year.
  bool drift = false;
  double drift_std = 0.8;
  double drift_persistence = 0.8;
  int burn_in_years = 2;
  std::uint64_t seed = 42;
  std::array<FeatureMarginal, kNumFeatures + 1> marginals = default_marginals();

  void validate() const;
};

// Annual PCI decline coefficients.
struct DeteriorationModel {
  double base_rate = 1.0;
  double traffic = 1.2;        // x (AADT / mean AADT) (truck factor / mean truck factor)
  double thickness = 0.8;      // per standardized EPT (reduces decline)
  double modulus = 0.6;        // per standardized base modulus (reduces decline)
  double flood = 0.5;          // per flood-risk level
  double material = 0.4;       // extra decline for material code 0
  double min_rate = 0.2;
  double age_growth = 0.08;    // relative acceleration per year of age
  double neighbor_deficit = 0.5;  // scaled by gamma
  double aadt_growth = 0.02;
  double crack_slope = 0.3;
  double crack_offset = 5.0;
  double iri_intercept = 1.0;
  double iri_slope = 0.075;
  double iri_noise_ratio = 0.1875;
};

// Static attributes and starting condition drawn before the dynamics run.
struct SynthInitialState {
  Tensor attributes;   // N x 11; condition columns are placeholders
  Vector initial_pci;  // PCI before burn-in
  Vector latent_rate;  // hidden drift state (zeros without drift)
};

struct SynthDataset {
  RoadGraph graph;
  SnapshotSeries series;
};

// Jittered lattice; a random spanning tree over nearest-neighbor links, then
// the shortest remaining links are added (or tree edges dropped) to reach
// the requested arc count. Segment ids are "S0001", "S0002", ...
RoadGraph generate_graph(const SynthConfig& config);

SynthInitialState sample_initial_state(const SynthConfig& config);

// Runs burn-in plus the observed years. Noise draws do not depend on node
// values, so editing one node's state leaves other nodes' draws unchanged.
SnapshotSeries evolve(const SynthInitialState& state, const RoadGraph& graph,
                      const SynthConfig& config, const DeteriorationModel& model = {});

SynthDataset generate(const SynthConfig& config, const DeteriorationModel& model = {});

struct ContagionProbe {
  double adjacent_correlation = 0.0;
  double random_correlation = 0.0;
  std::size_t adjacent_pairs = 0;
  std::size_t random_pairs = 0;
  double gap() const { return adjacent_correlation - random_correlation; }
};

// Pooled Pearson correlation of year-over-year PCI changes (de-meaned per
// year) across adjacent pairs versus random non-adjacent pairs.
ContagionProbe contagion_strength_probe(const SnapshotSeries& series, const RoadGraph& graph,
                                        std::uint64_t seed, std::size_t random_pairs = 1000);

// Writes observations, edges and a provenance file into `directory`.
struct SynthFiles {
  std::string observations;
  std::string edges;
  std::string provenance;
};
SynthFiles write_dataset(const SynthDataset& data, const SynthConfig& config,
                         const std::string& directory);

std::string observations_csv(const SnapshotSeries& series, const RoadGraph& graph);
std::string edges_csv(const RoadGraph& graph);

}  // namespace pavegraph
