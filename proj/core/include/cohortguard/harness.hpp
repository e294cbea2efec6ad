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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cohortguard/dataset.hpp"
#include "cohortguard/metrics.hpp"

namespace cohortguard {

enum class StratumKey { language, task, model_tag };

std::string_view to_string(StratumKey key);
/// Parses a comma-separated key list such as "language,task".
std::vector<StratumKey> parse_strata_keys(const std::string& text);

struct Stratum {
  std::vector<std::string> labels;  // one value per key, in key order
  CohortDataset dataset;
};

/// Disjoint cover of the records by key tuple, ordered by labels. Empty
/// strata never appear. Throws ValidationError when keys is empty.
std::vector<Stratum> stratify(const CohortDataset& dataset,
                              const std::vector<StratumKey>& keys);

/// Recorded in reports so a subsample can be reproduced elsewhere.
inline constexpr const char* kBalanceAlgorithm =
    "mt19937_64/fisher-yates over sorted speaker ids";

/// Keeps every recording of `target_speakers` speakers drawn uniformly
/// without replacement. Depends only on the sorted speaker ids and the seed.
CohortDataset balanced_subsample(const CohortDataset& dataset,
                                 std::size_t target_speakers,
                                 std::uint64_t seed);

struct BalanceConfig {
  std::size_t target_speakers = 29;
  std::uint64_t seed = 0;
};

struct BenchmarkConfig {
  std::vector<StratumKey> strata_keys{StratumKey::language};
  std::optional<BalanceConfig> balance;
  ThresholdPolicy threshold_policy;
  unsigned threads = 1;
};

struct BenchmarkRow {
  std::string dataset_id;
  std::vector<std::string> labels;
  std::size_t n_speakers = 0;
  std::size_t n_samples = 0;
  double avg_samples_per_speaker = 0.0;
  double stdev_samples_per_speaker = 0.0;
  std::uint64_t n_pos = 0;
  std::uint64_t n_neg = 0;
  bool defined = false;
  std::string note;  // why the row is undefined
  double eer_pct = 0.0;
  double threshold = 0.0;
  OperatingRates rates;
  bool interpolated = false;
};

struct LanguageProximity {
  std::string a;
  std::string b;
  double value = 0.0;
};

struct BenchmarkReport {
  std::vector<StratumKey> keys;
  std::vector<BenchmarkRow> rows;  // ordered by (dataset, labels)
  std::vector<LanguageProximity> proximity_annotations;
  std::string threshold_policy;
  std::string balance;  // empty when not balanced
};

/// Per stratum: generate pairs within each language, score, then EER,
/// calibrated threshold and the rates at it. Pair counts are checked against
/// the closed forms. Strata that cannot produce an EER become rows with
/// defined == false.
BenchmarkReport run_benchmark(const std::vector<CohortDataset>& datasets,
                              const BenchmarkConfig& config);

/// dataset,<keys...>,n_speakers,n_samples,avg_samples_per_speaker,n_pos,
/// n_neg,eer_pct,threshold,tpr,tnr
std::string format_report_csv(const BenchmarkReport& report);
/// Aligned plain-text table with a "TPR | TNR" column.
std::string format_report_text(const BenchmarkReport& report);
/// One EER% column per language, one row per model tag (or dataset).
std::string format_report_pivot(const BenchmarkReport& report);

/// Left-aligned columns separated by two spaces; widths count code points.
std::string format_table(const std::vector<std::vector<std::string>>& cells);

/// Static eLinguistics proximity among en, de, da, es, ar (lower is
/// closer). Symmetric with a zero diagonal; throws ValidationError for
/// codes outside the table.
double language_proximity(const std::string& l1, const std::string& l2);
const std::vector<std::string>& proximity_languages();

}  // namespace cohortguard
