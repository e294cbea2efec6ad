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

#include "cohortguard/pairing.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "cohortguard/error.hpp"

namespace cohortguard {
namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw ValidationError("pair count overflow: " + std::to_string(a) + " * " +
                          std::to_string(b) + " exceeds 2^64-1");
  }
  return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_add_overflow(a, b, &out)) {
    throw ValidationError("pair count overflow: sum exceeds 2^64-1");
  }
  return out;
}

bool in_scope(const SampleRecord& r, const PairScope& scope) {
  return r.language == scope.language &&
         (!scope.task || r.task == *scope.task);
}

}  // namespace

std::string_view to_string(PairLabel label) {
  return label == PairLabel::same_speaker ? "same_speaker"
                                          : "different_speaker";
}

std::string PairScope::label() const {
  std::string out = dataset_id.empty() ? "*" : dataset_id;
  out += '/';
  out += language;
  if (task) {
    out += '/';
    out += to_string(*task);
  }
  return out;
}

std::uint64_t choose2(std::uint64_t n) {
  if (n < 2) return 0;
  // Halve the even factor first so the product overflows only when the
  // result itself does.
  return n % 2 == 0 ? checked_mul(n / 2, n - 1) : checked_mul(n, (n - 1) / 2);
}

PairPlan plan_pairs(const CohortStats& stats, PairScope scope) {
  PairPlan plan;
  plan.scope = std::move(scope);
  const std::uint64_t total = stats.samples;
  std::uint64_t cross = 0;  // sum_i n_i (N - n_i), always even
  for (const auto& [_, n] : stats.per_speaker) {
    if (n > total) {
      throw ValidationError("cohort stats inconsistent: n_i exceeds N");
    }
    plan.positive_count = checked_add(plan.positive_count, choose2(n));
    cross = checked_add(cross, checked_mul(n, total - n));
  }
  plan.negative_count = cross / 2;
  return plan;
}

std::vector<SampleRecord> scope_records(const CohortDataset& dataset,
                                        const PairScope& scope) {
  std::vector<SampleRecord> out;
  for (const auto& r : dataset.records()) {
    if (in_scope(r, scope)) out.push_back(r);
  }
  return out;
}

std::vector<std::string> languages_of(const CohortDataset& dataset) {
  std::set<std::string> langs;
  for (const auto& r : dataset.records()) langs.insert(r.language);
  return {langs.begin(), langs.end()};
}

TrialPair PairRange::iterator::operator*() const {
  const auto& a = (*members_)[i_];
  const auto& b = (*members_)[j_];
  return {a.row, b.row,
          a.speaker == b.speaker ? PairLabel::same_speaker
                                 : PairLabel::different_speaker};
}

PairRange::iterator& PairRange::iterator::operator++() {
  if (++j_ >= members_->size()) {
    ++i_;
    j_ = i_ + 1;
    if (j_ >= members_->size()) {
      i_ = j_ = members_->size();
    }
  }
  return *this;
}

PairRange::iterator PairRange::begin() const {
  if (members_.size() < 2) return end();
  return iterator(&members_, 0, 1);
}

PairRange::iterator PairRange::end() const {
  return iterator(&members_, members_.size(), members_.size());
}

std::uint64_t PairRange::size() const { return choose2(members_.size()); }

PairRange generate_pairs(const CohortDataset& dataset, const PairScope& scope) {
  if (!scope.dataset_id.empty() && scope.dataset_id != dataset.id()) {
    throw ValidationError("scope " + scope.label() +
                          " does not belong to dataset '" + dataset.id() + "'");
  }
  PairRange range;
  range.dataset_ = &dataset;
  range.scope_ = scope;
  range.scope_.dataset_id = dataset.id();

  std::map<std::string, std::uint32_t> speaker_index;
  const auto& records = dataset.records();
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (!in_scope(r, scope)) continue;
    auto [it, inserted] = speaker_index.emplace(
        r.speaker_id, static_cast<std::uint32_t>(range.speakers_.size()));
    if (inserted) range.speakers_.push_back(r.speaker_id);
    range.members_.push_back({r.embedding_row, it->second, k});
  }
  if (range.members_.empty()) {
    throw ValidationError("empty pairing scope " + range.scope_.label());
  }
  std::sort(range.members_.begin(), range.members_.end(),
            [](const PairRange::Member& a, const PairRange::Member& b) { return a.row < b.row; });
  return range;
}

std::string format_pairs_csv(const PairRange& pairs, bool header) {
  std::string out;
  if (header) out += "sample_id_a,sample_id_b,label\n";
  const auto& members = pairs.members();
  const auto& records = pairs.dataset().records();
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      const bool same = members[i].speaker == members[j].speaker;
      out += records[members[i].record].sample_id;
      out += ',';
      out += records[members[j].record].sample_id;
      out += ',';
      out += to_string(same ? PairLabel::same_speaker
                            : PairLabel::different_speaker);
      out += '\n';
    }
  }
  return out;
}

}  // namespace cohortguard
