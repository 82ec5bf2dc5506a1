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

// Glue shared by the command line and the experiment harness: split,
// standardize, train, predict in PCI units.

#include <cstdint>
#include <vector>

#include "pavegraph/graph.hpp"
#include "pavegraph/metrics.hpp"
#include "pavegraph/model.hpp"
#include "pavegraph/training.hpp"

namespace pavegraph {

struct PreparedData {
  SplitSpec split;
  Standardizer standardizer;
  WindowSplit windows;  // standardized
};

// Chronological split by year, standardizer fit on the training years.
PreparedData prepare_data(const SnapshotSeries& series, int t0);

// Zeroes the listed feature columns in every standardized window.
void drop_features(PreparedData& data, const std::vector<std::size_t>& columns);

struct Evaluation {
  std::vector<double> predicted;  // PCI units
  std::vector<double> actual;
  RegressionReport report;
};

Evaluation evaluate(const Model& model, const TemporalSample& standardized,
                    const Standardizer& standardizer, const RoadGraph& graph);

struct ExperimentResult {
  TrainResult trained;
  Evaluation test;
};

// Trains on the prepared split and scores the last test window.
ExperimentResult run_experiment(const PreparedData& data, const RoadGraph& graph,
                                const ModelConfig& model_config, const TrainConfig& train_config);

}  // namespace pavegraph
