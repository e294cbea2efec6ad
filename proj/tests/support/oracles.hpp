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

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cohortguard/dataset.hpp"
#include "cohortguard/scoring.hpp"

namespace cgtest {

// Scores split by label; the input format of every metric oracle here.
struct LabeledScores {
  std::vector<double> pos;
  std::vector<double> neg;
};

LabeledScores split(const cohortguard::ScoredPairSet& scored);

// Random scored set with 1..max_pairs pairs of each label. About a third of
// the sets draw from a coarse grid so ties across labels are common.
cohortguard::ScoredPairSet random_scored_set(std::mt19937_64& rng,
                                             std::size_t max_pairs);

// FPR and FNR at threshold t by direct recount (accept iff score > t).
double brute_fpr(const LabeledScores& s, double t);
double brute_fnr(const LabeledScores& s, double t);

// Intersection of the DET polyline with fpr == fnr. Vertices are the rates
// at -inf and at every distinct score, in increasing threshold order.
double oracle_eer(const LabeledScores& s);

struct PairCounts {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

// Nested loops over every record pair sharing a language.
PairCounts brute_pair_counts(const std::vector<cohortguard::SampleRecord>& rs);

// m speakers with 1..max_n samples each, random unit-ish rows.
cohortguard::CohortDataset random_cohort(std::mt19937_64& rng,
                                         std::size_t m, std::size_t max_n,
                                         std::size_t dim,
                                         const std::vector<std::string>& langs);

// Cosine in long double, no blocking, no caching.
double naive_cosine(std::span<const float> a, std::span<const float> b);

class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& bytes);

}  // namespace cgtest
