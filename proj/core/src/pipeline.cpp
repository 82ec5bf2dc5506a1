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

#include "pavegraph/pipeline.hpp"

#include "pavegraph/error.hpp"

namespace pavegraph {

PreparedData prepare_data(const SnapshotSeries& series, int t0) {
  series.validate();
  PreparedData out;
  out.split = chronological_split(series.years);
  out.standardizer = fit_standardizer(series, out.split.train_years);
  std::vector<TemporalSample> windows = build_windows(series, t0);
  for (TemporalSample& w : windows) w = out.standardizer.apply(w);
  out.windows = split_windows(windows, out.split);
  return out;
}

void drop_features(PreparedData& data, const std::vector<std::size_t>& columns) {
  for (auto* group : {&data.windows.train, &data.windows.val, &data.windows.test}) {
    for (TemporalSample& s : *group) {
      for (Tensor& x : s.inputs) {
        for (std::size_t c : columns) {
          if (c >= static_cast<std::size_t>(x.cols())) throw ConfigError("feature drop: bad column");
          x.col(static_cast<Eigen::Index>(c)).setZero();
        }
      }
    }
  }
}

Evaluation evaluate(const Model& model, const TemporalSample& standardized,
                    const Standardizer& standardizer, const RoadGraph& graph) {
  const Vector pred = standardizer.inverse_target(model.predict(standardized, graph));
  const Vector actual = standardizer.inverse_target(standardized.target);
  Evaluation out;
  out.predicted.assign(pred.begin(), pred.end());
  out.actual.assign(actual.begin(), actual.end());
  out.report = regression_report(out.predicted, out.actual);
  return out;
}

ExperimentResult run_experiment(const PreparedData& data, const RoadGraph& graph,
                                const ModelConfig& model_config, const TrainConfig& train_config) {
  if (data.windows.test.empty()) throw ConfigError("experiment: no test window");
  ExperimentResult out;
  out.trained = train(model_config, data.windows.train, data.windows.val, graph, train_config);
  out.test = evaluate(out.trained.model, data.windows.test.back(), data.standardizer, graph);
  return out;
}

}  // namespace pavegraph
