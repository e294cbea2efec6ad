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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cohortguard/dataset.hpp"
#include "cohortguard/embedding_matrix.hpp"

namespace cohortguard {

/// Speaker-level link rule: two speakers are linked iff the median of their
/// cross-sample cosine scores exceeds the threshold AND at least min_frac of
/// those scores exceed it.
struct LinkPolicy {
  double threshold = 0.5;
  double min_frac = 0.5;
  // Per-language thresholds (e.g. calibrated per language) override
  // `threshold` inside that language's scope.
  std::map<std::string, double> language_thresholds;

  double threshold_for(const std::string& language) const;
  std::string label() const;
};

struct SpeakerLinkScore {
  std::string speaker_a;  // speaker_a < speaker_b
  std::string speaker_b;
  std::string language;   // scope; "*" in cross-language mode
  double median_score = 0.0;
  double frac_above = 0.0;
  std::size_t pair_count = 0;   // n_a * n_b
  std::size_t above_count = 0;  // cross-sample pairs scoring above threshold
  bool linked = false;
};

struct DedupOptions {
  // Experimental: compare speakers across languages as one scope.
  bool cross_language = false;
  unsigned threads = 1;
  std::size_t block = 64;
};

struct LinkSet {
  std::vector<SpeakerLinkScore> links;  // every speaker pair in every scope
  std::vector<std::string> speakers;    // sorted, all speakers considered
  LinkPolicy policy;
  bool cross_language = false;
};

/// Scores every unordered speaker pair within each language scope. A scope
/// with a single speaker contributes no pairs. Throws ValidationError when
/// min_frac is outside (0, 1] or a threshold is not finite.
LinkSet link_speakers(const CohortDataset& dataset, const LinkPolicy& policy,
                      const DedupOptions& options = {});

struct DuplicateCluster {
  std::vector<std::string> speakers;  // sorted, size >= 2
  // Parallel to `speakers`: median of the member's link medians to the other
  // members, and the count of above-threshold cross-sample pairs with them.
  std::vector<double> median_score_to_cluster;
  std::vector<std::size_t> evidence_pairs;
};

struct DuplicateReport {
  std::vector<DuplicateCluster> clusters;  // ordered by first member
  LinkPolicy policy;
  bool cross_language = false;
  std::size_t unclustered = 0;
};

/// Connected components of the linked-speaker graph; singletons are counted
/// in `unclustered` instead of forming clusters.
DuplicateReport find_duplicate_clusters(const LinkSet& links);

/// cluster_id,speaker_id,median_score_to_cluster,evidence_pairs rows, then a
/// '#' summary line with the policy and counts.
std::string format_duplicate_report_csv(const DuplicateReport& report);

struct EnrollmentMatch {
  std::string speaker_id;
  SpeakerLinkScore score;  // speaker_a = "candidate"
  bool matched = false;
};

/// Scores candidate embeddings against every enrolled speaker in scope
/// (all languages when `language` is empty), ranked by median score
/// descending with ties broken by speaker id.
std::vector<EnrollmentMatch> verify_enrollment(
    const EmbeddingMatrix& candidate, const CohortDataset& dataset,
    const LinkPolicy& policy, const std::string& language = {});

/// Median of a non-empty sample (mean of the middle two for even sizes).
double median_of(std::vector<double> values);

}  // namespace cohortguard
