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

// Road-network graph, yearly feature snapshots, temporal windows and
// standardization.

#include <Eigen/Core>

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pavegraph/autodiff.hpp"
#include "pavegraph/csv.hpp"

namespace pavegraph {

using ad::Tensor;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kNumFeatures = 11;

// Column names of the observation file, in model feature order.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureColumns = {
    "material",     "agg_type", "flood_risk",   "proximity_quarry", "age_yrs",        "traffic_aadt",
    "truck_factor", "ept_mm",   "base_modulus", "crack_area_pct",   "iri"};

inline constexpr std::string_view kSegmentColumn = "segment_id";
inline constexpr std::string_view kYearColumn = "year";
inline constexpr std::string_view kPciColumn = "pci";
inline constexpr std::string_view kEdgeSrcColumn = "src_segment_id";
inline constexpr std::string_view kEdgeDstColumn = "dst_segment_id";

// Index of a feature column name; nullopt for unknown names.
std::optional<std::size_t> feature_index(std::string_view name);

using SegmentPair = std::pair<std::string, std::string>;

// Static undirected graph of pavement segments. Node indices follow the
// sorted order of segment identifiers.
class RoadGraph {
 public:
  RoadGraph() = default;

  // Accepts directed or undirected pair lists; (a,b) and (b,a) collapse into
  // one undirected edge. Throws DataError on duplicate ids, dangling
  // endpoints and self-loops.
  static RoadGraph build(std::vector<std::string> segment_ids, std::span<const SegmentPair> pairs);

  std::size_t num_nodes() const { return ids_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<std::string>& node_ids() const { return ids_; }
  std::optional<int> index_of(std::string_view segment_id) const;

  // Undirected edges as (i, j) with i < j, sorted.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  // Sorted neighbor indices of node i.
  const std::vector<int>& neighbors(int i) const { return adjacency_[i]; }
  bool adjacent(int i, int j) const;

  friend bool operator==(const RoadGraph&, const RoadGraph&) = default;

 private:
  std::vector<std::string> ids_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;
};

// Node table is the list of segment ids; edge table has src/dst columns.
RoadGraph load_graph(std::vector<std::string> segment_ids, const CsvTable& edge_table);

// Per-year feature matrices (N x 11) and PCI targets in canonical node order.
struct SnapshotSeries {
  std::vector<int> years;
  std::vector<Tensor> features;
  std::vector<Vector> targets;

  std::size_t num_years() const { return years.size(); }
  std::size_t num_nodes() const { return targets.empty() ? 0 : targets.front().size(); }
  std::size_t num_features() const { return features.empty() ? 0 : features.front().cols(); }
  // Position of a year; throws DataError when absent.
  std::size_t year_index(int year) const;

  // Throws DataError when dimensions, year order or PCI bounds are violated.
  void validate() const;
};

// Distinct segment ids of an observation table, sorted.
std::vector<std::string> segment_ids_of(const CsvTable& observations);

SnapshotSeries load_snapshots(const CsvTable& observations, const RoadGraph& graph);

// Model input unit: t0 consecutive yearly slices (oldest first) and the PCI
// of the following year.
struct TemporalSample {
  std::vector<Tensor> inputs;
  Vector target;
  std::vector<int> input_years;
  int target_year = 0;

  std::size_t window() const { return inputs.size(); }
  std::size_t num_nodes() const { return target.size(); }
  std::size_t num_features() const { return inputs.empty() ? 0 : inputs.front().cols(); }
};

std::vector<TemporalSample> build_windows(const SnapshotSeries& series, int t0);

class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Vector feature_means, Vector feature_stds, double target_mean, double target_std);

  const Vector& feature_means() const { return feature_means_; }
  const Vector& feature_stds() const { return feature_stds_; }
  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  std::size_t num_features() const { return feature_means_.size(); }

  Tensor transform_features(const Tensor& x) const;
  Tensor inverse_features(const Tensor& z) const;
  Vector transform_target(const Vector& y) const;
  Vector inverse_target(const Vector& z) const;
  TemporalSample apply(const TemporalSample& sample) const;

  // Exact equality of every stored statistic.
  friend bool operator==(const Standardizer& a, const Standardizer& b);

 private:
  void check_features(const Tensor& x) const;

  Vector feature_means_;
  Vector feature_stds_;
  double target_mean_ = 0.0;
  double target_std_ = 1.0;
};

// Population statistics over the rows of the given years. Zero-variance
// columns get std 1.
Standardizer fit_standardizer(const SnapshotSeries& series, const std::set<int>& train_years);

struct SplitSpec {
  std::set<int> train_years;
  std::set<int> val_years;
  std::set<int> test_years;

  // Throws ConfigError unless the sets are non-empty, disjoint and ordered
  // train < val < test.
  void validate() const;
};

// Last year is test, the one before is validation, the rest is training.
SplitSpec chronological_split(const std::vector<int>& years);

struct WindowSplit {
  std::vector<TemporalSample> train;
  std::vector<TemporalSample> val;
  std::vector<TemporalSample> test;
};

// Assigns windows by target year. When no window targets a training year
// (short series with long windows) the validation windows also serve as
// training windows.
WindowSplit split_windows(std::span<const TemporalSample> samples, const SplitSpec& split);

}  // namespace pavegraph
