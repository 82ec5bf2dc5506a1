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

// Regression metrics, REC curves and Taylor-diagram statistics. Variances use
// the population (1/n) convention throughout.

#include <span>
#include <vector>

namespace pavegraph {

struct RegressionReport {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

// Throws ShapeError on length mismatch or empty input and DataError when the
// actual series is constant (R^2 undefined).
RegressionReport regression_report(std::span<const double> pred, std::span<const double> actual);

struct RecCurve {
  std::vector<double> tolerance;
  std::vector<double> coverage;  // fraction of |pred - actual| <= tolerance
};

// Default grid: 0 to 10 in steps of 0.25.
std::vector<double> default_rec_grid();
RecCurve rec_curve(std::span<const double> pred, std::span<const double> actual,
                   std::span<const double> grid);

struct TaylorStats {
  double pred_std = 0.0;
  double ref_std = 0.0;
  double correlation = 0.0;
  double centered_rmse = 0.0;
};

// Needs n >= 2 and non-constant series.
TaylorStats taylor_stats(std::span<const double> pred, std::span<const double> actual);

}  // namespace pavegraph
