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

#include "pavegraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "pavegraph/config.hpp"
#include "pavegraph/csv.hpp"
#include "pavegraph/error.hpp"

namespace pavegraph {

std::array<FeatureMarginal, kNumFeatures + 1> default_marginals() {
  return {{
      {0.0, 1.0, 0.74, 0.44},           // material
      {0.0, 1.0, 0.87, 0.34},           // agg_type
      {0.0, 2.0, 0.93, 0.86},           // flood_risk
      {0.0, 1.0, 0.26, 0.44},           // proximity_quarry
      {2.0, 11.0, 6.56, 2.28},          // age_yrs
      {5004.0, 19977.0, 9481.24, 4039.14},  // traffic_aadt
      {1.0, 11.99, 5.77, 3.09},         // truck_factor
      {120.60, 320.00, 253.80, 58.69},  // ept_mm
      {150.80, 499.60, 349.56, 103.09},  // base_modulus
      {0.0, 21.92, 4.32, 3.95},         // crack_area_pct
      {1.0, 5.66, 2.65, 0.69},          // iri
      {36.65, 97.05, 80.99, 9.13},      // pci
  }};
}

namespace {

enum Column : int {
  kMaterial = 0,
  kAggType,
  kFloodRisk,
  kQuarry,
  kAge,
  kAadt,
  kTruck,
  kEpt,
  kModulus,
  kCrack,
  kIri,
};

std::string segment_name(int index, int count) {
  const int width = std::max(4, static_cast<int>(std::to_string(count).size()));
  std::string digits = std::to_string(index + 1);
  return "S" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

double clamp_to(const FeatureMarginal& m, double v) { return std::clamp(v, m.min, m.max); }

}  // namespace

void SynthConfig::validate() const {
  if (num_segments < 2) throw ConfigError("synth: need at least two segments");
  if (num_years < 1) throw ConfigError("synth: need at least one year");
  if (target_arcs < 0 || target_arcs % 2 != 0) {
    throw ConfigError("synth: arc count must be a non-negative even number (both directions)");
  }
  if (gamma < 0.0) throw ConfigError("synth: contagion coefficient must be non-negative");
  if (noise_std < 0.0 || observation_noise < 0.0 || drift_std < 0.0) {
    throw ConfigError("synth: noise levels must be non-negative");
  }
  if (burn_in_years < 0) throw ConfigError("synth: burn-in must be non-negative");
  const auto& age = marginals[kAge];
  if (age.max - age.min < num_years - 1) {
    throw ConfigError("synth: age range cannot accommodate the number of years");
  }
}

RoadGraph generate_graph(const SynthConfig& config) {
  config.validate();
  const int n = config.num_segments;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  Rng rng(derive_seed(config.seed, 0));
  std::vector<std::pair<double, double>> pos(n);
  for (int k = 0; k < n; ++k) {
    pos[k] = {k / cols + uniform(rng, -0.3, 0.3), k % cols + uniform(rng, -0.3, 0.3)};
  }
  std::vector<std::tuple<double, int, int>> links;
  for (int k = 0; k < n; ++k) {
    for (int other : {k + 1, k + cols}) {
      if (other >= n || (other == k + 1 && other % cols == 0)) continue;
      const double dx = pos[k].first - pos[other].first;
      const double dy = pos[k].second - pos[other].second;
      links.emplace_back(std::hypot(dx, dy), k, other);
    }
  }
  const auto wanted = static_cast<std::size_t>(config.target_arcs / 2);
  if (wanted > links.size()) {
    throw ConfigError("synth: " + std::to_string(config.target_arcs) + " arcs unreachable for " +
                      std::to_string(n) + " segments (at most " + std::to_string(2 * links.size()) +
                      ")");
  }
  std::sort(links.begin(), links.end());
  DisjointSets sets(n);
  std::vector<std::tuple<double, int, int>> tree;
  std::vector<std::tuple<double, int, int>> rest;
  for (const auto& link : links) {
    (sets.unite(std::get<1>(link), std::get<2>(link)) ? tree : rest).push_back(link);
  }
  std::vector<std::tuple<double, int, int>> chosen;
  if (wanted <= tree.size()) {
    chosen.assign(tree.begin(), tree.begin() + static_cast<std::ptrdiff_t>(wanted));
  } else {
    chosen = tree;
    chosen.insert(chosen.end(), rest.begin(),
                  rest.begin() + static_cast<std::ptrdiff_t>(wanted - tree.size()));
  }
  std::vector<std::string> ids(n);
  for (int k = 0; k < n; ++k) ids[k] = segment_name(k, n);
  std::vector<SegmentPair> pairs;
  for (const auto& [len, a, b] : chosen) pairs.emplace_back(ids[a], ids[b]);
  return RoadGraph::build(ids, pairs);
}

SynthInitialState sample_initial_state(const SynthConfig& config) {
  config.validate();
  const int n = config.num_segments;
  const auto& m = config.marginals;
  Rng rng(derive_seed(config.seed, 1));

  // Flood risk codes 0/1/2 with probabilities matching the mean and std.
  const double fm = m[kFloodRisk].mean;
  const double second = m[kFloodRisk].std * m[kFloodRisk].std + fm * fm;
  const double p2 = std::clamp((second - fm) / 2.0, 0.0, 1.0);
  const double p1 = std::clamp(fm - 2.0 * p2, 0.0, 1.0 - p2);

  const int age_hi = static_cast<int>(m[kAge].max) - (config.num_years - 1);
  const int age_lo = static_cast<int>(m[kAge].min);

  SynthInitialState s;
  s.attributes = Tensor::Zero(n, kNumFeatures);
  s.initial_pci = Vector(n);
  s.latent_rate = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    auto row = s.attributes.row(i);
    row(kMaterial) = bernoulli(rng, m[kMaterial].mean) ? 1.0 : 0.0;
    row(kAggType) = bernoulli(rng, m[kAggType].mean) ? 1.0 : 0.0;
    const double u = uniform01(rng);
    row(kFloodRisk) = u < p2 ? 2.0 : (u < p2 + p1 ? 1.0 : 0.0);
    row(kQuarry) = bernoulli(rng, m[kQuarry].mean) ? 1.0 : 0.0;
    row(kAge) = age_lo + static_cast<double>(uniform_index(rng, age_hi - age_lo + 1));
    // Heavy right tail: exponential excess over the minimum.
    const double excess = m[kAadt].mean - m[kAadt].min;
    row(kAadt) = std::round(clamp_to(m[kAadt], m[kAadt].min - excess * std::log(1.0 - uniform01(rng))));
    row(kTruck) = clamp_to(m[kTruck], normal(rng, m[kTruck].mean, m[kTruck].std));
    row(kEpt) = clamp_to(m[kEpt], normal(rng, m[kEpt].mean, m[kEpt].std));
    row(kModulus) = clamp_to(m[kModulus], normal(rng, m[kModulus].mean, m[kModulus].std));
    s.initial_pci(i) = m[kPciMarginal].max - std::abs(normal(rng, 0.0, 2.5));
    if (config.drift) s.latent_rate(i) = normal(rng, 0.0, config.drift_std);
  }
  return s;
}

SnapshotSeries evolve(const SynthInitialState& state, const RoadGraph& graph,
                      const SynthConfig& config, const DeteriorationModel& model) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(graph.num_nodes());
  if (state.attributes.rows() != n || state.initial_pci.size() != n ||
      state.latent_rate.size() != n) {
    throw ShapeError("synth: initial state does not match the graph");
  }
  const auto& m = config.marginals;
  const auto& pci_range = m[kPciMarginal];
  Rng process(derive_seed(config.seed, 2));
  Rng observe(derive_seed(config.seed, 3));

  Tensor attr = state.attributes;
  Vector pci = state.initial_pci.cwiseMax(pci_range.min).cwiseMin(pci_range.max);
  Vector latent = state.latent_rate;

  Vector rate(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = attr.row(i);
    const double load = (row(kAadt) / m[kAadt].mean) * (row(kTruck) / m[kTruck].mean);
    const double r = model.base_rate + model.traffic * load -
                     model.thickness * (row(kEpt) - m[kEpt].mean) / m[kEpt].std -
                     model.modulus * (row(kModulus) - m[kModulus].mean) / m[kModulus].std +
                     model.flood * row(kFloodRisk) + model.material * (1.0 - row(kMaterial));
    rate(i) = std::max(r, model.min_rate);
  }

  SnapshotSeries series;
  const int steps = config.burn_in_years + config.num_years;
  for (int step = 0; step < steps; ++step) {
    const int observed = step - config.burn_in_years;
    const Vector deficit = (100.0 - pci.array()).matrix();
    if (observed >= 0) {
      Tensor x = attr;
      for (Eigen::Index i = 0; i < n; ++i) {
        x(i, kAge) = attr(i, kAge) + observed;
        x(i, kAadt) = std::round(
            clamp_to(m[kAadt], attr(i, kAadt) * std::pow(1.0 + model.aadt_growth, observed)));
        const double crack = model.crack_slope * (deficit(i) - model.crack_offset) +
                             normal(observe, 0.0, config.observation_noise);
        x(i, kCrack) = clamp_to(m[kCrack], crack);
        const double iri = model.iri_intercept + model.iri_slope * deficit(i) +
                           normal(observe, 0.0, config.observation_noise * model.iri_noise_ratio);
        x(i, kIri) = clamp_to(m[kIri], iri);
      }
      series.years.push_back(config.first_year + observed);
      series.features.push_back(std::move(x));
      series.targets.push_back(pci);
    }
    if (step + 1 == steps) break;

    const double mean_deficit = deficit.mean();
    Vector next(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double age = std::max(0.0, attr(i, kAge) + observed);
      double decline = rate(i) * (1.0 + model.age_growth * age) + latent(i);
      const auto& nb = graph.neighbors(static_cast<int>(i));
      if (!nb.empty() && config.gamma > 0.0) {
        double s = 0.0;
        for (int j : nb) s += deficit(j);
        decline += config.gamma * model.neighbor_deficit * (s / static_cast<double>(nb.size()) - mean_deficit);
      }
      decline += normal(process, 0.0, config.noise_std);
      next(i) = std::clamp(pci(i) - decline, pci_range.min, pci_range.max);
    }
    pci = next;
    if (config.drift) {
      for (Eigen::Index i = 0; i < n; ++i) {
        latent(i) = config.drift_persistence * latent(i) +
                    normal(process, 0.0, config.drift_std * 0.5);
      }
    }
  }
  series.validate();
  return series;
}

SynthDataset generate(const SynthConfig& config, const DeteriorationModel& model) {
  SynthDataset d;
  d.graph = generate_graph(config);
  d.series = evolve(sample_initial_state(config), d.graph, config, model);
  return d;
}

namespace {

double pooled_correlation(const Tensor& changes, const std::vector<std::pair<int, int>>& pairs) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0, count = 0.0;
  for (const auto& [a, b] : pairs) {
    for (Eigen::Index t = 0; t < changes.cols(); ++t) {
      const double x = changes(a, t);
      const double y = changes(b, t);
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
      count += 1.0;
    }
  }
  const double cov = sxy / count - (sx / count) * (sy / count);
  const double vx = sxx / count - (sx / count) * (sx / count);
  const double vy = syy / count - (sy / count) * (sy / count);
  if (!(vx > 0.0) || !(vy > 0.0)) return 0.0;
  return cov / std::sqrt(vx * vy);
}

}  // namespace

ContagionProbe contagion_strength_probe(const SnapshotSeries& series, const RoadGraph& graph,
                                        std::uint64_t seed, std::size_t random_pairs) {
  if (series.num_years() < 2) throw DataError("contagion probe needs at least two years");
  if (graph.num_edges() == 0) throw DataError("contagion probe needs at least one edge");
  const auto n = static_cast<Eigen::Index>(series.num_nodes());
  if (n != static_cast<Eigen::Index>(graph.num_nodes())) {
    throw ShapeError("contagion probe: series and graph node counts differ");
  }
  const auto years = static_cast<Eigen::Index>(series.num_years());
  Tensor changes(n, years - 1);
  for (Eigen::Index t = 0; t + 1 < years; ++t) {
    const Vector d = series.targets[t + 1] - series.targets[t];
    changes.col(t) = (d.array() - d.mean()).matrix();
  }
  Rng rng(seed);
  std::vector<std::pair<int, int>> random;
  const std::size_t max_pairs = static_cast<std::size_t>(n) * (n - 1) / 2 - graph.num_edges();
  const std::size_t wanted = std::min(random_pairs, max_pairs);
  while (random.size() < wanted) {
    const auto a = static_cast<int>(uniform_index(rng, n));
    const auto b = static_cast<int>(uniform_index(rng, n));
    if (a == b || graph.adjacent(a, b)) continue;
    random.emplace_back(a, b);
  }
  ContagionProbe p;
  p.adjacent_pairs = graph.num_edges();
  p.random_pairs = random.size();
  p.adjacent_correlation = pooled_correlation(changes, graph.edges());
  p.random_correlation = pooled_correlation(changes, random);
  return p;
}

std::string observations_csv(const SnapshotSeries& series, const RoadGraph& graph) {
  std::ostringstream os;
  os << kSegmentColumn << ',' << kYearColumn;
  for (auto c : kFeatureColumns) os << ',' << c;
  os << ',' << kPciColumn << '\n';
  for (std::size_t t = 0; t < series.num_years(); ++t) {
    for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
      os << graph.node_ids()[i] << ',' << series.years[t];
      for (Eigen::Index f = 0; f < series.features[t].cols(); ++f) {
        os << ',' << format_double(series.features[t](i, f));
      }
      os << ',' << format_double(series.targets[t](i)) << '\n';
    }
  }
  return os.str();
}

std::string edges_csv(const RoadGraph& graph) {
  std::ostringstream os;
  os << kEdgeSrcColumn << ',' << kEdgeDstColumn << '\n';
  for (const auto& [i, j] : graph.edges()) {
    os << graph.node_ids()[i] << ',' << graph.node_ids()[j] << '\n';
    os << graph.node_ids()[j] << ',' << graph.node_ids()[i] << '\n';
  }
  return os.str();
}

SynthFiles write_dataset(const SynthDataset& data, const SynthConfig& config,
                         const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  SynthFiles files{(fs::path(directory) / "observations.csv").string(),
                   (fs::path(directory) / "edges.csv").string(),
                   (fs::path(directory) / "provenance.cfg").string()};
  auto write = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
  };
  write(files.observations, observations_csv(data.series, data.graph));
  write(files.edges, edges_csv(data.graph));
  write(files.provenance, to_config_text(config));
  return files;
}

}  // namespace pavegraph
