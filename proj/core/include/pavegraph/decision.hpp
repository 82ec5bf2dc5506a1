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

// Translation of PCI forecasts into ASTM D6433 severity classes, maintenance
// priorities and classification-safety statistics.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pavegraph {

enum class Severity { kExcellent = 1, kGood = 2, kFair = 3, kPoor = 4, kVeryPoor = 5 };

inline constexpr int kNumSeverities = 5;

struct SeverityClass {
  Severity severity = Severity::kExcellent;
  int rank() const { return static_cast<int>(severity); }
  std::string_view label() const;
  std::string_view action() const;
  friend bool operator==(const SeverityClass&, const SeverityClass&) = default;
};

std::string_view severity_label(Severity s);
std::string_view severity_action(Severity s);
std::optional<Severity> parse_severity(std::string_view label);

// Lower bounds of the half-open bands: Excellent [85, 100], Good [70, 85),
// Fair [55, 70), Poor [40, 55), VeryPoor below 40.
inline constexpr std::array<double, 4> kSeverityThresholds = {85.0, 70.0, 55.0, 40.0};

// Values outside [0, 100] are clamped with a logged warning; NaN throws.
SeverityClass classify(double pci);

struct ProfileRecord {
  std::string segment_id;
  double predicted_pci = 0.0;
  SeverityClass predicted_class;
  std::optional<double> actual_pci;
  std::optional<SeverityClass> actual_class;
  int priority_rank = 0;  // 1 = most critical
};

// Records keep input order; priority_rank orders by ascending predicted PCI,
// ties broken by segment id.
struct MaintenanceProfile {
  std::vector<ProfileRecord> records;
  bool has_actuals() const;
  // Records sorted by priority rank.
  std::vector<ProfileRecord> by_priority() const;
};

MaintenanceProfile build_profile(std::span<const double> predicted_pci,
                                 std::optional<std::span<const double>> actual_pci,
                                 std::span<const std::string> segment_ids);

struct SafetyReport {
  // confusion[actual rank - 1][predicted rank - 1]
  std::array<std::array<long, kNumSeverities>, kNumSeverities> confusion{};
  long total = 0;
  long exact_count = 0;
  long adjacent_count = 0;
  long critical_count = 0;
  double exact_match = 0.0;
  double adjacent_match = 0.0;            // |rank difference| <= 1
  double critical_misclassification = 0.0;  // |rank difference| > 1
};

// Throws DataError when the profile carries no actual values.
SafetyReport safety_report(const MaintenanceProfile& profile);

// First k segment ids in priority order.
std::vector<std::string> top_k_critical(const MaintenanceProfile& profile, std::size_t k);

}  // namespace pavegraph
