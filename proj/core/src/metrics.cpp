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

#include "cohortguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "cohortguard/error.hpp"

namespace cohortguard {
namespace {

// A candidate threshold with the number of positives and negatives at or
// below it. Everything else is derived from these exact counts.
struct Cut {
  double threshold;
  std::size_t pos_le;
  std::size_t neg_le;
};

struct Counts {
  std::vector<double> pos;  // ascending
  std::vector<double> neg;  // ascending
};

Counts sorted_counts(const ScoredPairSet& scored) {
  Counts c;
  for (const auto& sp : scored.pairs) {
    if (!std::isfinite(sp.score)) {
      throw ValidationError("non-finite score in scored pair set");
    }
    (sp.pair.label == PairLabel::same_speaker ? c.pos : c.neg)
        .push_back(sp.score);
  }
  if (c.pos.empty() || c.neg.empty()) {
    throw UndefinedMetricError(
        "EER undefined: need at least one same-speaker and one "
        "different-speaker pair (have " +
        std::to_string(c.pos.size()) + " and " + std::to_string(c.neg.size()) +
        ")");
  }
  std::sort(c.pos.begin(), c.pos.end());
  std::sort(c.neg.begin(), c.neg.end());
  return c;
}

std::vector<Cut> cuts_of(const Counts& c) {
  const double lo = std::min(c.pos.front(), c.neg.front());
  const double hi = std::max(c.pos.back(), c.neg.back());
  std::vector<Cut> cuts;
  cuts.reserve(c.pos.size() + c.neg.size() + 2);
  cuts.push_back(
      {std::nextafter(lo, -std::numeric_limits<double>::infinity()), 0, 0});
  std::size_t ip = 0;
  std::size_t in = 0;
  while (ip < c.pos.size() || in < c.neg.size()) {
    double v;
    if (in == c.neg.size() || (ip < c.pos.size() && c.pos[ip] <= c.neg[in])) {
      v = c.pos[ip];
    } else {
      v = c.neg[in];
    }
    while (ip < c.pos.size() && c.pos[ip] == v) ++ip;
    while (in < c.neg.size() && c.neg[in] == v) ++in;
    cuts.push_back({v, ip, in});
  }
  cuts.push_back({std::nextafter(hi, std::numeric_limits<double>::infinity()),
                  c.pos.size(), c.neg.size()});
  return cuts;
}

SweepPoint point_of(const Cut& cut, std::size_t n_pos, std::size_t n_neg) {
  SweepPoint p;
  p.threshold = cut.threshold;
  p.tpr = static_cast<double>(n_pos - cut.pos_le) / static_cast<double>(n_pos);
  p.tnr = static_cast<double>(cut.neg_le) / static_cast<double>(n_neg);
  p.fpr = static_cast<double>(n_neg - cut.neg_le) / static_cast<double>(n_neg);
  p.fnr = static_cast<double>(cut.pos_le) / static_cast<double>(n_pos);
  return p;
}

__extension__ typedef __int128 i128;

// (FPR - FNR) scaled by n_pos * n_neg, exact in integers.
i128 balance(const Cut& cut, std::size_t n_pos, std::size_t n_neg) {
  return static_cast<i128>(n_neg - cut.neg_le) * n_pos -
         static_cast<i128>(cut.pos_le) * n_neg;
}

// Index of the first cut where FPR <= FNR. Always >= 1: the low sentinel
// has FPR = 1 and FNR = 0.
std::size_t crossing_index(const std::vector<Cut>& cuts, std::size_t n_pos,
                           std::size_t n_neg) {
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    if (balance(cuts[k], n_pos, n_neg) <= 0) return k;
  }
  return cuts.size() - 1;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::vector<SweepPoint> sweep(const ScoredPairSet& scored) {
  const auto counts = sorted_counts(scored);
  const auto cuts = cuts_of(counts);
  std::vector<SweepPoint> out;
  out.reserve(cuts.size());
  for (const auto& cut : cuts) {
    out.push_back(point_of(cut, counts.pos.size(), counts.neg.size()));
  }
  return out;
}

EERResult eer(const ScoredPairSet& scored) {
  const auto counts = sorted_counts(scored);
  const std::size_t np = counts.pos.size();
  const std::size_t nn = counts.neg.size();
  const auto cuts = cuts_of(counts);
  const std::size_t k = crossing_index(cuts, np, nn);

  EERResult r;
  const auto at = point_of(cuts[k], np, nn);
  const i128 d_at = balance(cuts[k], np, nn);
  if (d_at == 0) {
    // Rates are constant on [t_k, t_k+1), so the balance holds on the whole
    // interval; report its midpoint. For separable classes this is the
    // midpoint between the top negative and the bottom positive.
    r.eer = at.fpr;
    r.threshold = 0.5 * (cuts[k].threshold + cuts[k + 1].threshold);
    r.tpr_at = at.tpr;
    r.tnr_at = at.tnr;
  } else {
    const auto prev = point_of(cuts[k - 1], np, nn);
    const double d_prev = static_cast<double>(balance(cuts[k - 1], np, nn));
    const double alpha = d_prev / (d_prev - static_cast<double>(d_at));
    const double fpr = prev.fpr + alpha * (at.fpr - prev.fpr);
    const double fnr = prev.fnr + alpha * (at.fnr - prev.fnr);
    r.eer = fpr;
    r.threshold = prev.threshold + alpha * (at.threshold - prev.threshold);
    r.tpr_at = 1.0 - fnr;
    r.tnr_at = 1.0 - fpr;
    r.interpolated = true;
  }
  return r;
}

DETCurve det_curve(const ScoredPairSet& scored, std::size_t max_points) {
  if (max_points < 4) {
    throw ValidationError("det_curve: max_points must be at least 4");
  }
  const auto counts = sorted_counts(scored);
  const std::size_t np = counts.pos.size();
  const std::size_t nn = counts.neg.size();
  const auto cuts = cuts_of(counts);
  const std::size_t n = cuts.size();

  std::set<std::size_t> keep;
  if (n <= max_points) {
    for (std::size_t i = 0; i < n; ++i) keep.insert(i);
  } else {
    const std::size_t k = crossing_index(cuts, np, nn);
    keep = {0, n - 1, k - 1, k};
    const std::size_t budget = max_points - keep.size();
    for (std::size_t t = 1; t <= budget; ++t) {
      const double pos = static_cast<double>(t) * static_cast<double>(n - 1) /
                         static_cast<double>(budget + 1);
      keep.insert(static_cast<std::size_t>(std::llround(pos)));
      if (keep.size() >= max_points) break;
    }
  }
  DETCurve curve;
  curve.points.reserve(keep.size());
  for (auto i : keep) {
    const auto p = point_of(cuts[i], np, nn);
    curve.points.push_back({p.fpr, p.fnr});
  }
  return curve;
}

std::string format_det_csv(const DETCurve& curve, const std::string& scope) {
  std::string out;
  for (const auto& p : curve.points) {
    out += scope;
    out += fmt(",%.9g", p.fpr);
    out += fmt(",%.9g\n", p.fnr);
  }
  return out;
}

OperatingRates rates_at_threshold(const ScoredPairSet& scored,
                                  double threshold) {
  std::size_t np = 0, nn = 0, accepted = 0, rejected = 0;
  for (const auto& sp : scored.pairs) {
    if (sp.pair.label == PairLabel::same_speaker) {
      ++np;
      if (sp.score > threshold) ++accepted;
    } else {
      ++nn;
      if (!(sp.score > threshold)) ++rejected;
    }
  }
  if (np == 0 || nn == 0) {
    throw UndefinedMetricError("rates undefined: a class has no pairs");
  }
  return {static_cast<double>(accepted) / static_cast<double>(np),
          static_cast<double>(rejected) / static_cast<double>(nn)};
}

std::string format_tpr_tnr(const OperatingRates& rates) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f | %.3f", rates.tpr, rates.tnr);
  return buf;
}

std::string ThresholdPolicy::label() const {
  switch (kind) {
    case Kind::eer_point:
      return "eer";
    case Kind::target_fpr:
      return "target-fpr:" + fmt("%g", target);
    case Kind::target_fnr:
      return "target-fnr:" + fmt("%g", target);
  }
  return "eer";
}

ThresholdPolicy parse_threshold_policy(const std::string& text) {
  if (text == "eer" || text == "eer-point") return ThresholdPolicy::eer_point();
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  if (colon == std::string::npos ||
      (head != "target-fpr" && head != "target-fnr")) {
    throw ValidationError("unknown threshold policy '" + text +
                          "' (expected eer, target-fpr:X or target-fnr:X)");
  }
  double x;
  try {
    std::size_t used = 0;
    const std::string tail = text.substr(colon + 1);
    x = std::stod(tail, &used);
    if (used != tail.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ValidationError("bad policy target in '" + text + "'");
  }
  if (!(x > 0.0 && x < 1.0)) {
    throw ValidationError("policy target must lie in (0, 1): '" + text + "'");
  }
  return head == "target-fpr" ? ThresholdPolicy::fpr(x)
                              : ThresholdPolicy::fnr(x);
}

Calibration calibrate(const ScoredPairSet& scored,
                      const ThresholdPolicy& policy) {
  Calibration out;
  switch (policy.kind) {
    case ThresholdPolicy::Kind::eer_point:
      out.threshold = eer(scored).threshold;
      break;
    case ThresholdPolicy::Kind::target_fpr:
    case ThresholdPolicy::Kind::target_fnr: {
      if (!(policy.target > 0.0 && policy.target < 1.0)) {
        throw ValidationError("calibration target must lie in (0, 1)");
      }
      const auto points = sweep(scored);
      if (policy.kind == ThresholdPolicy::Kind::target_fpr) {
        // FPR falls along the sweep; the last sentinel always has FPR = 0.
        auto it = std::find_if(points.begin(), points.end(), [&](const auto& p) {
          return p.fpr <= policy.target;
        });
        out.threshold = it->threshold;
      } else {
        // FNR rises along the sweep; the first sentinel always has FNR = 0.
        auto it = std::find_if(points.rbegin(), points.rend(), [&](const auto& p) {
          return p.fnr <= policy.target;
        });
        out.threshold = it->threshold;
      }
      break;
    }
  }
  out.achieved = rates_at_threshold(scored, out.threshold);
  return out;
}

double calibrate_threshold(const ScoredPairSet& scored,
                           const ThresholdPolicy& policy) {
  return calibrate(scored, policy).threshold;
}

MetricsRow summarize(const ScoredPairSet& scored, const std::string& scope,
                     const ThresholdPolicy& policy) {
  MetricsRow row;
  row.scope = scope;
  row.n_pos = scored.positives();
  row.n_neg = scored.pairs.size() - row.n_pos;
  if (row.n_pos == 0 || row.n_neg == 0) return row;
  const auto e = eer(scored);
  const auto cal = calibrate(scored, policy);
  row.defined = true;
  row.eer_pct = 100.0 * e.eer;
  row.threshold = cal.threshold;
  row.rates = cal.achieved;
  row.interpolated = e.interpolated;
  return row;
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "scope,n_pos,n_neg,eer_pct,threshold,tpr,tnr,interpolated\n";
  for (const auto& r : rows) {
    out += r.scope + ',' + std::to_string(r.n_pos) + ',' +
           std::to_string(r.n_neg) + ',';
    if (r.defined) {
      out += fmt("%.2f", r.eer_pct) + ',' + fmt("%.9g", r.threshold) + ',' +
             fmt("%.3f", r.rates.tpr) + ',' + fmt("%.3f", r.rates.tnr) + ',' +
             (r.interpolated ? "true" : "false");
    } else {
      out += "undefined,undefined,undefined,undefined,undefined";
    }
    out += '\n';
  }
  return out;
}

}  // namespace cohortguard
