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
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "cohortguard/dataset.hpp"

namespace cohortguard {

enum class PairLabel : std::uint8_t { different_speaker = 0, same_speaker = 1 };

std::string_view to_string(PairLabel label);

/// One (dataset, language) stratum, optionally narrowed to a single task.
struct PairScope {
  std::string dataset_id;  // empty: whichever dataset the scope is applied to
  std::string language;
  std::optional<Task> task;

  std::string label() const;  // "dataset/language[/task]"
};

/// Unordered trial pair in canonical order, row_a < row_b.
struct TrialPair {
  std::uint64_t row_a = 0;
  std::uint64_t row_b = 0;
  PairLabel label = PairLabel::different_speaker;

  friend bool operator==(const TrialPair&, const TrialPair&) = default;
};

struct PairPlan {
  std::uint64_t positive_count = 0;  // sum_i C(n_i, 2)
  std::uint64_t negative_count = 0;  // 1/2 sum_i n_i (N - n_i)
  PairScope scope;

  std::uint64_t total() const { return positive_count + negative_count; }
};

/// C(n, 2); throws ValidationError on 64-bit overflow.
std::uint64_t choose2(std::uint64_t n);

/// Closed-form trial counts from per-speaker sample counts. Overflow-checked.
PairPlan plan_pairs(const CohortStats& stats, PairScope scope = {});

/// Records of `dataset` falling inside `scope`, in dataset order.
std::vector<SampleRecord> scope_records(const CohortDataset& dataset,
                                        const PairScope& scope);

/// Distinct languages of a dataset, sorted.
std::vector<std::string> languages_of(const CohortDataset& dataset);

/// Lazily enumerates every unordered in-scope pair exactly once, in
/// lexicographic (row_a, row_b) order. Nothing O(N^2) is materialized.
class PairRange {
 public:
  struct Member {
    std::uint64_t row;
    std::uint32_t speaker;  // dense index into speakers()
    std::size_t record;     // index into the dataset's records()
  };

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = TrialPair;
    using difference_type = std::ptrdiff_t;
    using pointer = const TrialPair*;
    using reference = TrialPair;

    iterator() = default;
    TrialPair operator*() const;
    iterator& operator++();
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    friend bool operator==(const iterator& a, const iterator& b) {
      return a.i_ == b.i_ && a.j_ == b.j_;
    }

   private:
    friend class PairRange;
    iterator(const std::vector<Member>* m, std::size_t i, std::size_t j)
        : members_(m), i_(i), j_(j) {}
    const std::vector<Member>* members_ = nullptr;
    std::size_t i_ = 0;
    std::size_t j_ = 0;
  };

  iterator begin() const;
  iterator end() const;

  /// C(N, 2) for the scope's N.
  std::uint64_t size() const;
  const std::vector<Member>& members() const noexcept { return members_; }
  const std::vector<std::string>& speakers() const noexcept { return speakers_; }
  const PairScope& scope() const noexcept { return scope_; }
  const CohortDataset& dataset() const noexcept { return *dataset_; }

 private:
  friend PairRange generate_pairs(const CohortDataset&, const PairScope&);
  PairRange() = default;
  const CohortDataset* dataset_ = nullptr;
  PairScope scope_;
  std::vector<Member> members_;
  std::vector<std::string> speakers_;
};

/// Throws ValidationError when the scope selects no records. The returned
/// range refers to `dataset`, which must outlive it.
PairRange generate_pairs(const CohortDataset& dataset, const PairScope& scope);

/// CSV dump: sample_id_a,sample_id_b,label
std::string format_pairs_csv(const PairRange& pairs, bool header = true);

}  // namespace cohortguard
