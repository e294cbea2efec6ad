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

#include "cohortguard/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "cohortguard/error.hpp"
#include "cohortguard/parallel.hpp"

namespace cohortguard {
namespace {

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

std::string provenance_for(std::size_t block) {
  return "cosine/f64-accumulate/clamped/block=" + std::to_string(block);
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine: dim mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  const double na = squared_norm(a);
  const double nb = squared_norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw ValidationError("cosine: zero-norm operand");
  }
  return clamp_unit(dot(a, b) / std::sqrt(na * nb));
}

double row_cosine(const EmbeddingMatrix& matrix, std::size_t i,
                  std::size_t j) {
  return clamp_unit(dot(matrix.row(i), matrix.row(j)) /
                    std::sqrt(matrix.squared_norm(i) * matrix.squared_norm(j)));
}

std::size_t ScoredPairSet::positives() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const ScoredPair& p) {
        return p.pair.label == PairLabel::same_speaker;
      }));
}

std::size_t ScoredPairSet::negatives() const {
  return pairs.size() - positives();
}

ScoredPairSet score_pairs(std::span<const TrialPair> pairs,
                          const EmbeddingMatrix& matrix,
                          const ScoringOptions& options) {
  const std::size_t block = std::max<std::size_t>(1, options.block);
  for (const auto& p : pairs) {
    if (p.row_a >= matrix.rows() || p.row_b >= matrix.rows()) {
      throw ValidationError("pair (" + std::to_string(p.row_a) + "," +
                            std::to_string(p.row_b) +
                            ") references a row outside the matrix");
    }
  }
  ScoredPairSet out;
  out.provenance = provenance_for(block);
  out.pairs.resize(pairs.size());
  const std::size_t n_blocks = (pairs.size() + block - 1) / block;
  parallel_for(n_blocks, options.threads, [&](std::size_t b) {
    const std::size_t lo = b * block;
    const std::size_t hi = std::min(pairs.size(), lo + block);
    for (std::size_t k = lo; k < hi; ++k) {
      out.pairs[k] = {pairs[k], row_cosine(matrix, pairs[k].row_a,
                                           pairs[k].row_b)};
    }
  });
  return out;
}

ScoredPairSet score_pairs(const PairRange& pairs, const EmbeddingMatrix& matrix,
                          const ScoringOptions& options) {
  std::vector<TrialPair> materialized;
  materialized.reserve(pairs.size());
  for (const auto p : pairs) materialized.push_back(p);
  auto out = score_pairs(materialized, matrix, options);
  out.scope = pairs.scope();
  return out;
}

ScoredPairSet make_scored_set(std::span<const double> positive_scores,
                              std::span<const double> negative_scores) {
  ScoredPairSet out;
  out.provenance = "external";
  std::uint64_t row = 0;
  for (double s : positive_scores) {
    out.pairs.push_back({{row, row + 1, PairLabel::same_speaker}, s});
    row += 2;
  }
  for (double s : negative_scores) {
    out.pairs.push_back({{row, row + 1, PairLabel::different_speaker}, s});
    row += 2;
  }
  return out;
}

ScoreTable::ScoreTable(std::size_t n)
    : n_(n), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

ScoreTable score_matrix(const EmbeddingMatrix& matrix, std::size_t block,
                        std::span<const std::uint64_t> rows,
                        unsigned threads) {
  if (block == 0) {
    throw ValidationError("score_matrix: block must be >= 1");
  }
  std::vector<std::uint64_t> all;
  if (rows.empty()) {
    all.resize(matrix.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rows = all;
  }
  for (auto r : rows) {
    if (r >= matrix.rows()) {
      throw ValidationError("score_matrix: row " + std::to_string(r) +
                            " outside the matrix");
    }
  }
  const std::size_t n = rows.size();
  ScoreTable table(n);
  const std::size_t tiles = (n + block - 1) / block;
  // One task per tile row; tiles (I, J) with J >= I cover the upper triangle.
  parallel_for(tiles, threads, [&](std::size_t ti) {
    const std::size_t i_lo = ti * block;
    const std::size_t i_hi = std::min(n, i_lo + block);
    for (std::size_t tj = ti; tj < tiles; ++tj) {
      const std::size_t j_lo = tj * block;
      const std::size_t j_hi = std::min(n, j_lo + block);
      for (std::size_t i = i_lo; i < i_hi; ++i) {
        for (std::size_t j = std::max(j_lo, i + 1); j < j_hi; ++j) {
          table.at(i, j) = row_cosine(matrix, rows[i], rows[j]);
        }
      }
    }
  });
  return table;
}

std::string format_scored_pairs_csv(const ScoredPairSet& scored,
                                    const CohortDataset& dataset,
                                    bool header) {
  std::unordered_map<std::uint64_t, const std::string*> id_of_row;
  for (const auto& r : dataset.records()) {
    id_of_row.emplace(r.embedding_row, &r.sample_id);
  }
  auto id = [&](std::uint64_t row) -> const std::string& {
    auto it = id_of_row.find(row);
    if (it == id_of_row.end()) {
      throw ValidationError("row " + std::to_string(row) +
                            " has no sample in dataset '" + dataset.id() + "'");
    }
    return *it->second;
  };
  std::string out;
  if (header) out += "sample_id_a,sample_id_b,label,score\n";
  char buf[40];
  for (const auto& sp : scored.pairs) {
    out += id(sp.pair.row_a);
    out += ',';
    out += id(sp.pair.row_b);
    out += ',';
    out += to_string(sp.pair.label);
    std::snprintf(buf, sizeof buf, ",%.9g\n", sp.score);
    out += buf;
  }
  return out;
}

ScoredPairSet parse_scored_pairs_csv(std::string_view text) {
  std::vector<double> pos;
  std::vector<double> neg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.rfind("sample_id_a,", 0) == 0) continue;

    std::vector<std::string> fields;
    std::size_t p = 0;
    for (;;) {
      auto q = line.find(',', p);
      fields.push_back(line.substr(p, q == std::string::npos ? q : q - p));
      if (q == std::string::npos) break;
      p = q + 1;
    }
    if (fields.size() != 4) {
      throw FormatError("scored pairs line " + std::to_string(line_no) +
                        ": expected 4 fields, got " +
                        std::to_string(fields.size()));
    }
    double score;
    try {
      std::size_t used = 0;
      score = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError("scored pairs line " + std::to_string(line_no) +
                        ": bad score '" + fields[3] + "'");
    }
    if (fields[2] == "same_speaker") {
      pos.push_back(score);
    } else if (fields[2] == "different_speaker") {
      neg.push_back(score);
    } else {
      throw FormatError("scored pairs line " + std::to_string(line_no) +
                        ": bad label '" + fields[2] + "'");
    }
  }
  return make_scored_set(pos, neg);
}

}  // namespace cohortguard
