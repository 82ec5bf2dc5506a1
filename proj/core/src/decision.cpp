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

#include "pavegraph/decision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "pavegraph/csv.hpp"
#include "pavegraph/error.hpp"
#include "pavegraph/logging.hpp"

namespace pavegraph {

std::string_view severity_label(Severity s) {
  switch (s) {
    case Severity::kExcellent:
      return "Excellent";
    case Severity::kGood:
      return "Good";
    case Severity::kFair:
      return "Fair";
    case Severity::kPoor:
      return "Poor";
    case Severity::kVeryPoor:
      return "VeryPoor";
  }
  return "?";
}

std::string_view severity_action(Severity s) {
  switch (s) {
    case Severity::kExcellent:
      return "Routine monitoring";
    case Severity::kGood:
      return "Preventive";
    case Severity::kFair:
      return "Corrective";
    case Severity::kPoor:
      return "Major overlay";
    case Severity::kVeryPoor:
      return "Full reconstruction";
  }
  return "?";
}

std::optional<Severity> parse_severity(std::string_view label) {
  for (int r = 1; r <= kNumSeverities; ++r) {
    const auto s = static_cast<Severity>(r);
    if (severity_label(s) == label) return s;
  }
  return std::nullopt;
}

std::string_view SeverityClass::label() const { return severity_label(severity); }
std::string_view SeverityClass::action() const { return severity_action(severity); }

SeverityClass classify(double pci) {
  if (std::isnan(pci)) throw DataError("classify: PCI is NaN");
  if (pci < 0.0 || pci > 100.0) {
    log::warn("PCI " + format_double(pci) + " outside [0, 100], clamped");
    pci = std::clamp(pci, 0.0, 100.0);
  }
  for (std::size_t k = 0; k < kSeverityThresholds.size(); ++k) {
    if (pci >= kSeverityThresholds[k]) return {static_cast<Severity>(k + 1)};
  }
  return {Severity::kVeryPoor};
}

bool MaintenanceProfile::has_actuals() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(), [](const auto& r) { return r.actual_pci.has_value(); });
}

std::vector<ProfileRecord> MaintenanceProfile::by_priority() const {
  std::vector<ProfileRecord> out = records;
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.priority_rank < b.priority_rank; });
  return out;
}

MaintenanceProfile build_profile(std::span<const double> predicted_pci,
                                 std::optional<std::span<const double>> actual_pci,
                                 std::span<const std::string> segment_ids) {
  if (predicted_pci.size() != segment_ids.size() ||
      (actual_pci && actual_pci->size() != predicted_pci.size())) {
    throw ShapeError("build_profile: predicted, actual and id lengths differ");
  }
  MaintenanceProfile profile;
  profile.records.resize(predicted_pci.size());
  for (std::size_t i = 0; i < predicted_pci.size(); ++i) {
    ProfileRecord& r = profile.records[i];
    r.segment_id = segment_ids[i];
    r.predicted_pci = predicted_pci[i];
    r.predicted_class = classify(predicted_pci[i]);
    if (actual_pci) {
      r.actual_pci = (*actual_pci)[i];
      r.actual_class = classify((*actual_pci)[i]);
    }
  }
  std::vector<std::size_t> order(profile.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = profile.records[a];
    const auto& rb = profile.records[b];
    if (ra.predicted_pci != rb.predicted_pci) return ra.predicted_pci < rb.predicted_pci;
    return ra.segment_id < rb.segment_id;
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    profile.records[order[k]].priority_rank = static_cast<int>(k) + 1;
  }
  return profile;
}

SafetyReport safety_report(const MaintenanceProfile& profile) {
  if (!profile.has_actuals()) throw DataError("safety_report: profile has no actual PCI values");
  SafetyReport s;
  long exact = 0;
  long adjacent = 0;
  for (const auto& r : profile.records) {
    const int a = r.actual_class->rank();
    const int p = r.predicted_class.rank();
    ++s.confusion[a - 1][p - 1];
    const int diff = std::abs(a - p);
    if (diff == 0) ++exact;
    if (diff <= 1) ++adjacent;
  }
  s.total = static_cast<long>(profile.records.size());
  s.exact_count = exact;
  s.adjacent_count = adjacent;
  s.critical_count = s.total - adjacent;
  const double n = static_cast<double>(s.total);
  s.exact_match = static_cast<double>(exact) / n;
  s.adjacent_match = static_cast<double>(adjacent) / n;
  s.critical_misclassification = 1.0 - s.adjacent_match;
  return s;
}

std::vector<std::string> top_k_critical(const MaintenanceProfile& profile, std::size_t k) {
  if (k > profile.records.size()) {
    throw ConfigError("top_k_critical: k = " + std::to_string(k) + " exceeds " +
                      std::to_string(profile.records.size()) + " segments");
  }
  std::vector<std::string> out(k);
  for (const auto& r : profile.records) {
    if (static_cast<std::size_t>(r.priority_rank) <= k) out[r.priority_rank - 1] = r.segment_id;
  }
  return out;
}

}  // namespace pavegraph
