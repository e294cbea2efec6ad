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
#include <span>
#include <string>
#include <vector>

#include "cohortguard/embedding_matrix.hpp"
#include "cohortguard/pairing.hpp"

namespace cohortguard {

/// Cosine similarity dot(a, b) / sqrt(|a|^2 |b|^2), clamped to [-1, 1]. Throws ValidationError on a dim
/// mismatch or a zero-norm operand.
double cosine(std::span<const float> a, std::span<const float> b);

/// Cosine of two matrix rows using the cached squared norms. Bitwise equal
/// to cosine(matrix.row(i), matrix.row(j)).
double row_cosine(const EmbeddingMatrix& matrix, std::size_t i, std::size_t j);

struct ScoredPair {
  TrialPair pair;
  double score = 0.0;
};

struct ScoringOptions {
  std::size_t block = 4096;  // pairs per work unit
  unsigned threads = 1;      // 0 = hardware concurrency
};

struct ScoredPairSet {
  std::vector<ScoredPair> pairs;
  PairScope scope;
  std::string provenance;  // scorer and block size used

  std::size_t positives() const;
  std::size_t negatives() const;
};

/// Scores pairs in input order. Output is bitwise identical for any thread
/// count and block size.
ScoredPairSet score_pairs(std::span<const TrialPair> pairs,
                          const EmbeddingMatrix& matrix,
                          const ScoringOptions& options = {});
ScoredPairSet score_pairs(const PairRange& pairs, const EmbeddingMatrix& matrix,
                          const ScoringOptions& options = {});

/// Builds a set directly from labelled scores (no pair geometry). Positives
/// come first; row indices are synthetic and only keep pairs distinct.
ScoredPairSet make_scored_set(std::span<const double> positive_scores,
                              std::span<const double> negative_scores);

/// Packed strict upper triangle of an n x n symmetric score table.
class ScoreTable {
 public:
  explicit ScoreTable(std::size_t n = 0);

  std::size_t size() const noexcept { return n_; }
  /// Requires i < j < size().
  double at(std::size_t i, std::size_t j) const { return values_[index(i, j)]; }
  double& at(std::size_t i, std::size_t j) { return values_[index(i, j)]; }
  /// Either order; i != j.
  double get(std::size_t i, std::size_t j) const {
    return i < j ? at(i, j) : at(j, i);
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    // Rows 0..i-1 hold (n-1) + (n-2) + ... + (n-i) entries.
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }
  std::size_t n_;
  std::vector<double> values_;
};

/// All-pairs cosine over the selected rows (all rows when `rows` is empty),
/// traversed in block x block tiles. Entry (a, b) of the table refers to
/// rows[a], rows[b]. Values are independent of block and thread count.
ScoreTable score_matrix(const EmbeddingMatrix& matrix, std::size_t block,
                        std::span<const std::uint64_t> rows = {},
                        unsigned threads = 1);

/// Scored-pair dump: sample_id_a,sample_id_b,label,score (9 significant
/// digits). Row indices are mapped back to sample ids through `dataset`.
std::string format_scored_pairs_csv(const ScoredPairSet& scored,
                                    const CohortDataset& dataset,
                                    bool header = true);

/// Parses a scored-pair dump back into labels and scores; pair rows are
/// synthetic. Throws FormatError on malformed lines.
ScoredPairSet parse_scored_pairs_csv(std::string_view text);

}  // namespace cohortguard
