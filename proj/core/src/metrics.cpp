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

#include "pavegraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pavegraph/error.hpp"

namespace pavegraph {
namespace {

void check_pair(std::span<const double> pred, std::span<const double> actual, const char* op) {
  if (pred.size() != actual.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(actual.size()) + " actual values");
  }
  if (pred.empty()) throw ShapeError(std::string(op) + ": empty input");
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

RegressionReport regression_report(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, "regression_report");
  const double n = static_cast<double>(pred.size());
  const double mu = mean_of(actual);
  double se = 0.0;
  double ae = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - actual[i];
    se += e * e;
    ae += std::abs(e);
    ss_tot += (actual[i] - mu) * (actual[i] - mu);
  }
  if (!(ss_tot > 0.0)) throw DataError("regression_report: actual values are constant, R^2 undefined");
  RegressionReport r;
  r.mse = se / n;
  r.rmse = std::sqrt(r.mse);
  r.mae = ae / n;
  r.r2 = 1.0 - se / ss_tot;
  return r;
}

std::vector<double> default_rec_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 40; ++k) grid.push_back(0.25 * k);
  return grid;
}

RecCurve rec_curve(std::span<const double> pred, std::span<const double> actual,
                   std::span<const double> grid) {
  check_pair(pred, actual, "rec_curve");
  if (grid.empty()) throw ShapeError("rec_curve: empty tolerance grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < 0.0 || (k > 0 && grid[k] < grid[k - 1])) {
      throw ConfigError("rec_curve: tolerance grid must be non-negative and ascending");
    }
  }
  std::vector<double> err(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) err[i] = std::abs(pred[i] - actual[i]);
  std::sort(err.begin(), err.end());
  RecCurve c;
  c.tolerance.assign(grid.begin(), grid.end());
  const double n = static_cast<double>(err.size());
  for (double eps : grid) {
    const auto within = std::upper_bound(err.begin(), err.end(), eps) - err.begin();
    c.coverage.push_back(static_cast<double>(within) / n);
  }
  return c;
}

TaylorStats taylor_stats(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, "taylor_stats");
  if (pred.size() < 2) throw ShapeError("taylor_stats: need at least two points");
  const double n = static_cast<double>(pred.size());
  const double mp = mean_of(pred);
  const double ma = mean_of(actual);
  double vp = 0.0;
  double va = 0.0;
  double cov = 0.0;
  double crms = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp;
    const double da = actual[i] - ma;
    vp += dp * dp;
    va += da * da;
    cov += dp * da;
    crms += (dp - da) * (dp - da);
  }
  if (!(vp > 0.0) || !(va > 0.0)) throw DataError("taylor_stats: constant series");
  TaylorStats t;
  t.pred_std = std::sqrt(vp / n);
  t.ref_std = std::sqrt(va / n);
  t.correlation = (cov / n) / (t.pred_std * t.ref_std);
  t.centered_rmse = std::sqrt(crms / n);
  return t;
}

}  // namespace pavegraph
