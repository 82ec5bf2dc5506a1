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

#include "pavegraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "pavegraph/error.hpp"

namespace pavegraph {

std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureColumns.size(); ++i) {
    if (kFeatureColumns[i] == name) return i;
  }
  return std::nullopt;
}

RoadGraph RoadGraph::build(std::vector<std::string> segment_ids,
                           std::span<const SegmentPair> pairs) {
  RoadGraph g;
  std::sort(segment_ids.begin(), segment_ids.end());
  const auto dup = std::adjacent_find(segment_ids.begin(), segment_ids.end());
  if (dup != segment_ids.end()) throw DataError("duplicate segment id '" + *dup + "'");
  g.ids_ = std::move(segment_ids);

  std::set<std::pair<int, int>> unique;
  for (const auto& [a, b] : pairs) {
    const auto ia = g.index_of(a);
    const auto ib = g.index_of(b);
    if (!ia) throw DataError("edge endpoint '" + a + "' is not a known segment");
    if (!ib) throw DataError("edge endpoint '" + b + "' is not a known segment");
    if (*ia == *ib) throw DataError("self-loop on segment '" + a + "'");
    unique.emplace(std::min(*ia, *ib), std::max(*ia, *ib));
  }
  g.edges_.assign(unique.begin(), unique.end());
  g.adjacency_.assign(g.ids_.size(), {});
  for (const auto& [i, j] : g.edges_) {
    g.adjacency_[i].push_back(j);
    g.adjacency_[j].push_back(i);
  }
  for (auto& nb : g.adjacency_) std::sort(nb.begin(), nb.end());
  return g;
}

std::optional<int> RoadGraph::index_of(std::string_view segment_id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), segment_id);
  if (it == ids_.end() || *it != segment_id) return std::nullopt;
  return static_cast<int>(it - ids_.begin());
}

bool RoadGraph::adjacent(int i, int j) const {
  const auto& nb = adjacency_[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

RoadGraph load_graph(std::vector<std::string> segment_ids, const CsvTable& edge_table) {
  const std::size_t src = edge_table.column(kEdgeSrcColumn);
  const std::size_t dst = edge_table.column(kEdgeDstColumn);
  std::vector<SegmentPair> pairs;
  pairs.reserve(edge_table.rows.size());
  for (const auto& row : edge_table.rows) pairs.emplace_back(row[src], row[dst]);
  return RoadGraph::build(std::move(segment_ids), pairs);
}

std::size_t SnapshotSeries::year_index(int year) const {
  const auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) throw DataError("year " + std::to_string(year) + " not in series");
  return static_cast<std::size_t>(it - years.begin());
}

void SnapshotSeries::validate() const {
  if (years.empty()) throw DataError("snapshot series has no years");
  if (features.size() != years.size() || targets.size() != years.size()) {
    throw DataError("snapshot series: year/feature/target counts differ");
  }
  for (std::size_t t = 1; t < years.size(); ++t) {
    if (years[t] != years[t - 1] + 1) {
      throw DataError("snapshot years must be consecutive and increasing");
    }
  }
  const auto n = static_cast<Eigen::Index>(num_nodes());
  const auto f = static_cast<Eigen::Index>(num_features());
  for (std::size_t t = 0; t < years.size(); ++t) {
    if (features[t].rows() != n || features[t].cols() != f || targets[t].size() != n) {
      throw DataError("snapshot for year " + std::to_string(years[t]) + " has inconsistent shape");
    }
    if ((targets[t].array() < 0.0).any() || (targets[t].array() > 100.0).any()) {
      throw DataError("PCI outside [0, 100] in year " + std::to_string(years[t]));
    }
  }
}

std::vector<std::string> segment_ids_of(const CsvTable& observations) {
  const std::size_t col = observations.column(kSegmentColumn);
  std::set<std::string> ids;
  for (const auto& row : observations.rows) ids.insert(row[col]);
  return {ids.begin(), ids.end()};
}

SnapshotSeries load_snapshots(const CsvTable& observations, const RoadGraph& graph) {
  const std::size_t seg_col = observations.column(kSegmentColumn);
  const std::size_t year_col = observations.column(kYearColumn);
  const std::size_t pci_col = observations.column(kPciColumn);
  std::array<std::size_t, kNumFeatures> feat_cols{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) feat_cols[f] = observations.column(kFeatureColumns[f]);

  struct Row {
    int node;
    std::size_t record;
  };
  std::map<int, std::vector<Row>> by_year;
  for (std::size_t r = 0; r < observations.rows.size(); ++r) {
    const auto& row = observations.rows[r];
    const auto node = graph.index_of(row[seg_col]);
    if (!node) throw DataError("unknown segment id '" + row[seg_col] + "'");
    const int year = static_cast<int>(parse_int(row[year_col], "year of " + row[seg_col]));
    by_year[year].push_back({*node, r});
  }
  if (by_year.empty()) throw DataError("observation table is empty");

  const auto n = static_cast<Eigen::Index>(graph.num_nodes());
  SnapshotSeries series;
  std::ostringstream missing;
  std::size_t missing_count = 0;
  for (const auto& [year, rows] : by_year) {
    Tensor x = Tensor::Zero(n, kNumFeatures);
    Vector y = Vector::Zero(n);
    std::vector<bool> seen(n, false);
    for (const Row& entry : rows) {
      const auto& row = observations.rows[entry.record];
      const std::string where = row[seg_col] + "/" + std::to_string(year);
      if (seen[entry.node]) throw DataError("duplicate observation for " + where);
      seen[entry.node] = true;
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        x(entry.node, f) = parse_double(row[feat_cols[f]], std::string(kFeatureColumns[f]) + " of " + where);
      }
      const double pci = parse_double(row[pci_col], "pci of " + where);
      if (!(pci >= 0.0 && pci <= 100.0)) {
        throw DataError("PCI " + row[pci_col] + " outside [0, 100] for " + where);
      }
      y(entry.node) = pci;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!seen[i]) {
        if (missing_count < 20) missing << ' ' << graph.node_ids()[i] << '/' << year;
        ++missing_count;
      }
    }
    series.years.push_back(year);
    series.features.push_back(std::move(x));
    series.targets.push_back(std::move(y));
  }
  if (missing_count > 0) {
    throw DataError("missing " + std::to_string(missing_count) +
                    " (segment, year) observations:" + missing.str());
  }
  series.validate();
  return series;
}

std::vector<TemporalSample> build_windows(const SnapshotSeries& series, int t0) {
  if (t0 < 1) throw ConfigError("window length must be at least 1");
  const auto years = static_cast<int>(series.num_years());
  if (years < t0 + 1) {
    throw ConfigError("window length " + std::to_string(t0) + " needs at least " +
                      std::to_string(t0 + 1) + " years, series has " + std::to_string(years));
  }
  std::vector<TemporalSample> out;
  for (int k = 0; k + t0 < years; ++k) {
    TemporalSample s;
    for (int t = k; t < k + t0; ++t) {
      s.inputs.push_back(series.features[t]);
      s.input_years.push_back(series.years[t]);
    }
    s.target = series.targets[k + t0];
    s.target_year = series.years[k + t0];
    out.push_back(std::move(s));
  }
  return out;
}

Standardizer::Standardizer(Vector feature_means, Vector feature_stds, double target_mean,
                           double target_std)
    : feature_means_(std::move(feature_means)),
      feature_stds_(std::move(feature_stds)),
      target_mean_(target_mean),
      target_std_(target_std) {
  if (feature_means_.size() != feature_stds_.size()) {
    throw ShapeError("standardizer: mean/std length mismatch");
  }
  if ((feature_stds_.array() <= 0.0).any() || !(target_std_ > 0.0)) {
    throw ConfigError("standardizer: standard deviations must be positive");
  }
}

bool operator==(const Standardizer& a, const Standardizer& b) {
  return a.feature_means_.size() == b.feature_means_.size() &&
         a.feature_means_ == b.feature_means_ && a.feature_stds_ == b.feature_stds_ &&
         a.target_mean_ == b.target_mean_ && a.target_std_ == b.target_std_;
}

void Standardizer::check_features(const Tensor& x) const {
  if (x.cols() != feature_means_.size()) {
    throw ShapeError("standardizer fitted on " + std::to_string(feature_means_.size()) +
                     " features, got " + ad::shape_string(x));
  }
}

Tensor Standardizer::transform_features(const Tensor& x) const {
  check_features(x);
  return (x.rowwise() - feature_means_.transpose()).array().rowwise() /
         feature_stds_.transpose().array();
}

Tensor Standardizer::inverse_features(const Tensor& z) const {
  check_features(z);
  Tensor out = z.array().rowwise() * feature_stds_.transpose().array();
  return out.rowwise() + feature_means_.transpose();
}

Vector Standardizer::transform_target(const Vector& y) const {
  return (y.array() - target_mean_) / target_std_;
}

Vector Standardizer::inverse_target(const Vector& z) const {
  return z.array() * target_std_ + target_mean_;
}

TemporalSample Standardizer::apply(const TemporalSample& sample) const {
  TemporalSample out;
  out.input_years = sample.input_years;
  out.target_year = sample.target_year;
  for (const Tensor& x : sample.inputs) out.inputs.push_back(transform_features(x));
  out.target = transform_target(sample.target);
  return out;
}

Standardizer fit_standardizer(const SnapshotSeries& series, const std::set<int>& train_years) {
  if (train_years.empty()) throw ConfigError("standardizer needs at least one training year");
  const auto f = static_cast<Eigen::Index>(series.num_features());
  Vector sum = Vector::Zero(f);
  double target_sum = 0.0;
  double rows = 0.0;
  std::vector<std::size_t> slots;
  for (int year : train_years) slots.push_back(series.year_index(year));
  if (series.num_nodes() == 0) throw DataError("standardizer: series has no nodes");
  for (std::size_t t : slots) {
    sum += series.features[t].colwise().sum().transpose();
    target_sum += series.targets[t].sum();
    rows += static_cast<double>(series.targets[t].size());
  }
  const Vector mean = sum / rows;
  const double target_mean = target_sum / rows;
  Vector sq = Vector::Zero(f);
  double target_sq = 0.0;
  for (std::size_t t : slots) {
    sq += (series.features[t].rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    target_sq += (series.targets[t].array() - target_mean).square().sum();
  }
  Vector std = (sq / rows).array().sqrt();
  // Constant columns (including round-off noise around a constant) keep scale 1.
  for (Eigen::Index c = 0; c < f; ++c) {
    if (!(std(c) > 1e-12 * std::max(1.0, std::abs(mean(c))))) std(c) = 1.0;
  }
  double target_std = std::sqrt(target_sq / rows);
  if (!(target_std > 1e-12 * std::max(1.0, std::abs(target_mean)))) target_std = 1.0;
  return Standardizer(mean, std, target_mean, target_std);
}

void SplitSpec::validate() const {
  if (train_years.empty() || val_years.empty() || test_years.empty()) {
    throw ConfigError("split: train, validation and test year sets must be non-empty");
  }
  if (*train_years.rbegin() >= *val_years.begin() || *val_years.rbegin() >= *test_years.begin()) {
    throw ConfigError("split: years must be ordered train < validation < test and disjoint");
  }
}

SplitSpec chronological_split(const std::vector<int>& years) {
  if (years.size() < 3) throw ConfigError("chronological split needs at least three years");
  SplitSpec s;
  s.test_years = {years.back()};
  s.val_years = {years[years.size() - 2]};
  s.train_years.insert(years.begin(), years.end() - 2);
  s.validate();
  return s;
}

WindowSplit split_windows(std::span<const TemporalSample> samples, const SplitSpec& split) {
  split.validate();
  WindowSplit out;
  for (const auto& s : samples) {
    if (split.train_years.contains(s.target_year)) out.train.push_back(s);
    if (split.val_years.contains(s.target_year)) out.val.push_back(s);
    if (split.test_years.contains(s.target_year)) out.test.push_back(s);
  }
  if (out.train.empty()) out.train = out.val;
  return out;
}

}  // namespace pavegraph
