// Copyright 2026 The cohortguard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cohortguard/scoring.hpp"

namespace cohortguard {

// Decision rule everywhere in this module: a pair is accepted as
// same-speaker iff score > threshold. A score equal to the threshold is
// rejected.

struct SweepPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

/// One point per distinct score, plus a sentinel just below the minimum and
/// one just above the maximum, ordered by increasing threshold. Rates are
/// exact count ratios. Throws UndefinedMetricError without both classes and
/// ValidationError on non-finite scores.
std::vector<SweepPoint> sweep(const ScoredPairSet& scored);

struct EERResult {
  double eer = 0.0;
  double threshold = 0.0;
  double tpr_at = 0.0;
  double tnr_at = 0.0;
  bool interpolated = false;
};

/// Equal error rate where FPR - FNR changes sign along the sweep, linearly
/// interpolated between adjacent points when no point balances exactly.
/// When a sweep point balances exactly, the balance holds up to the next
/// distinct score and the threshold is the midpoint of that interval; for
/// separable classes (EER = 0) that is the midpoint between the highest
/// negative and the lowest positive score.
EERResult eer(const ScoredPairSet& scored);

struct DETPoint {
  double fpr = 0.0;
  double fnr = 0.0;
};

struct DETCurve {
  std::vector<DETPoint> points;  // increasing threshold: fpr falls, fnr rises
};

/// Sweep staircase downsampled to at most max_points (>= 4). The endpoints
/// and the two points bracketing the EER crossing are always kept.
DETCurve det_curve(const ScoredPairSet& scored, std::size_t max_points);

std::string format_det_csv(const DETCurve& curve, const std::string& scope);

struct OperatingRates {
  double tpr = 0.0;
  double tnr = 0.0;
};

OperatingRates rates_at_threshold(const ScoredPairSet& scored,
                                  double threshold);

/// "0.946 | 0.948"
std::string format_tpr_tnr(const OperatingRates& rates);

struct ThresholdPolicy {
  enum class Kind { eer_point, target_fpr, target_fnr };
  Kind kind = Kind::eer_point;
  double target = 0.0;  // in (0, 1) for the target kinds

  static ThresholdPolicy eer_point() { return {}; }
  static ThresholdPolicy fpr(double x) { return {Kind::target_fpr, x}; }
  static ThresholdPolicy fnr(double x) { return {Kind::target_fnr, x}; }

  std::string label() const;
};

/// Parses "eer", "target-fpr:0.01" or "target-fnr:0.05".
ThresholdPolicy parse_threshold_policy(const std::string& text);

struct Calibration {
  double threshold = 0.0;
  OperatingRates achieved;
};

/// eer_point: the EER threshold. target_fpr(x): the smallest sweep threshold
/// with FPR <= x (maximal TPR under the budget). target_fnr(x): the largest
/// sweep threshold with FNR <= x (maximal TNR under the budget).
Calibration calibrate(const ScoredPairSet& scored, const ThresholdPolicy& policy);
double calibrate_threshold(const ScoredPairSet& scored,
                           const ThresholdPolicy& policy);

/// One line of the metrics report. `defined` is false when the scope lacks
/// a class; the numeric fields are then meaningless.
struct MetricsRow {
  std::string scope;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  bool defined = false;
  double eer_pct = 0.0;
  double threshold = 0.0;
  OperatingRates rates;
  bool interpolated = false;
};

MetricsRow summarize(const ScoredPairSet& scored, const std::string& scope,
                     const ThresholdPolicy& policy = {});

/// scope,n_pos,n_neg,eer_pct,threshold,tpr,tnr,interpolated
std::string format_metrics_csv(const std::vector<MetricsRow>& rows);

}  // namespace cohortguard
