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

#include "cohortguard/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "cohortguard/error.hpp"
#include "cohortguard/parallel.hpp"
#include "cohortguard/scoring.hpp"

namespace cohortguard {
namespace {

constexpr const char* kAnyLanguage = "*";

void check_policy(const LinkPolicy& policy) {
  if (!(policy.min_frac > 0.0 && policy.min_frac <= 1.0)) {
    throw ValidationError("min_frac must lie in (0, 1]");
  }
  if (!std::isfinite(policy.threshold)) {
    throw ValidationError("link threshold must be finite");
  }
  for (const auto& [lang, t] : policy.language_thresholds) {
    if (!std::isfinite(t)) {
      throw ValidationError("link threshold for '" + lang + "' must be finite");
    }
  }
}

struct Aggregate {
  double median = 0.0;
  std::size_t above = 0;
};

Aggregate aggregate(std::vector<double> scores, double threshold) {
  Aggregate a;
  a.above = static_cast<std::size_t>(std::count_if(
      scores.begin(), scores.end(), [&](double s) { return s > threshold; }));
  a.median = median_of(std::move(scores));
  return a;
}

bool decide(const Aggregate& a, std::size_t n, const LinkPolicy& policy,
            double threshold) {
  const double frac = static_cast<double>(a.above) / static_cast<double>(n);
  return frac >= policy.min_frac && a.median > threshold;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Groups of record indices by speaker, speakers sorted by id.
struct SpeakerGroups {
  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> members;  // positions into `rows`
  std::vector<std::uint64_t> rows;
};

SpeakerGroups group_scope(const CohortDataset& dataset,
                          const std::string& language) {
  std::map<std::string, std::vector<std::uint64_t>> by_speaker;
  for (const auto& r : dataset.records()) {
    if (language == kAnyLanguage || r.language == language) {
      by_speaker[r.speaker_id].push_back(r.embedding_row);
    }
  }
  SpeakerGroups g;
  for (auto& [id, rows] : by_speaker) {
    std::sort(rows.begin(), rows.end());
    g.ids.push_back(id);
    auto& m = g.members.emplace_back();
    for (auto row : rows) {
      m.push_back(g.rows.size());
      g.rows.push_back(row);
    }
  }
  return g;
}

}  // namespace

double median_of(std::vector<double> values) {
  if (values.empty()) {
    throw ValidationError("median of an empty sample");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double LinkPolicy::threshold_for(const std::string& language) const {
  auto it = language_thresholds.find(language);
  return it == language_thresholds.end() ? threshold : it->second;
}

std::string LinkPolicy::label() const {
  std::string out = "threshold=";
  if (language_thresholds.empty()) {
    out += fmt("%.9g", threshold);
  } else {
    bool first = true;
    for (const auto& [lang, t] : language_thresholds) {
      if (!first) out += ';';
      out += lang + ':' + fmt("%.9g", t);
      first = false;
    }
  }
  out += " min_frac=" + fmt("%g", min_frac);
  out += " aggregate=median+vote";
  return out;
}

LinkSet link_speakers(const CohortDataset& dataset, const LinkPolicy& policy,
                      const DedupOptions& options) {
  check_policy(policy);
  LinkSet out;
  out.policy = policy;
  out.cross_language = options.cross_language;

  std::vector<std::string> scopes;
  if (options.cross_language) {
    scopes.push_back(kAnyLanguage);
  } else {
    std::set<std::string> langs;
    for (const auto& r : dataset.records()) langs.insert(r.language);
    scopes.assign(langs.begin(), langs.end());
  }

  std::set<std::string> all_speakers;
  for (const auto& language : scopes) {
    const auto g = group_scope(dataset, language);
    all_speakers.insert(g.ids.begin(), g.ids.end());
    const std::size_t m = g.ids.size();
    if (m < 2) continue;

    const auto table =
        score_matrix(dataset.matrix(), options.block, g.rows, options.threads);
    const double threshold = policy.threshold_for(language);

    // Speaker pairs (a, b), a < b, in row-major order.
    std::vector<SpeakerLinkScore> links(m * (m - 1) / 2);
    std::vector<std::size_t> offset(m, 0);
    for (std::size_t a = 1; a < m; ++a) offset[a] = offset[a - 1] + (m - a);

    parallel_for(m - 1, options.threads, [&](std::size_t a) {
      std::vector<double> scores;
      for (std::size_t b = a + 1; b < m; ++b) {
        scores.clear();
        for (auto i : g.members[a]) {
          for (auto j : g.members[b]) scores.push_back(table.get(i, j));
        }
        auto& link = links[offset[a] + (b - a - 1)];
        link.speaker_a = g.ids[a];
        link.speaker_b = g.ids[b];
        link.language = language;
        link.pair_count = scores.size();
        const auto agg = aggregate(scores, threshold);
        link.median_score = agg.median;
        link.above_count = agg.above;
        link.frac_above = static_cast<double>(agg.above) /
                          static_cast<double>(link.pair_count);
        link.linked = decide(agg, link.pair_count, policy, threshold);
      }
    });
    out.links.insert(out.links.end(), std::make_move_iterator(links.begin()),
                     std::make_move_iterator(links.end()));
  }
  out.speakers.assign(all_speakers.begin(), all_speakers.end());
  return out;
}

DuplicateReport find_duplicate_clusters(const LinkSet& links) {
  DuplicateReport report;
  report.policy = links.policy;
  report.cross_language = links.cross_language;

  std::map<std::string, std::size_t> index;
  for (const auto& s : links.speakers) index.emplace(s, index.size());
  for (const auto& l : links.links) {
    index.emplace(l.speaker_a, index.size());
    index.emplace(l.speaker_b, index.size());
  }
  std::vector<std::string> names(index.size());
  for (const auto& [name, i] : index) names[i] = name;

  std::vector<std::size_t> parent(names.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& l : links.links) {
    if (!l.linked) continue;
    const auto a = find(index.at(l.speaker_a));
    const auto b = find(index.at(l.speaker_b));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }

  std::map<std::size_t, std::vector<std::string>> components;
  for (std::size_t i = 0; i < names.size(); ++i) {
    components[find(i)].push_back(names[i]);
  }

  // Link lookup for per-member cluster evidence.
  std::map<std::pair<std::string, std::string>, const SpeakerLinkScore*> by_pair;
  for (const auto& l : links.links) {
    by_pair[{l.speaker_a, l.speaker_b}] = &l;
  }

  for (auto& [_, members] : components) {
    if (members.size() < 2) {
      ++report.unclustered;
      continue;
    }
    std::sort(members.begin(), members.end());
    DuplicateCluster cluster;
    cluster.speakers = members;
    for (const auto& s : members) {
      std::vector<double> medians;
      std::size_t evidence = 0;
      for (const auto& t : members) {
        if (s == t) continue;
        auto it = by_pair.find(s < t ? std::pair{s, t} : std::pair{t, s});
        if (it == by_pair.end()) continue;
        medians.push_back(it->second->median_score);
        evidence += it->second->above_count;
      }
      cluster.median_score_to_cluster.push_back(
          medians.empty() ? 0.0 : median_of(medians));
      cluster.evidence_pairs.push_back(evidence);
    }
    report.clusters.push_back(std::move(cluster));
  }
  std::sort(report.clusters.begin(), report.clusters.end(),
            [](const DuplicateCluster& a, const DuplicateCluster& b) {
              return a.speakers.front() < b.speakers.front();
            });
  return report;
}

std::string format_duplicate_report_csv(const DuplicateReport& report) {
  std::string out = "cluster_id,speaker_id,median_score_to_cluster,evidence_pairs\n";
  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    const auto& cl = report.clusters[c];
    for (std::size_t k = 0; k < cl.speakers.size(); ++k) {
      out += std::to_string(c + 1) + ',' + cl.speakers[k] + ',' +
             fmt("%.9g", cl.median_score_to_cluster[k]) + ',' +
             std::to_string(cl.evidence_pairs[k]) + '\n';
    }
  }
  out += "# " + report.policy.label() + " mode=" +
         (report.cross_language ? "cross-language(experimental)"
                                : "within-language") +
         " clusters=" + std::to_string(report.clusters.size()) +
         " unclustered=" + std::to_string(report.unclustered) + '\n';
  return out;
}

std::vector<EnrollmentMatch> verify_enrollment(
    const EmbeddingMatrix& candidate, const CohortDataset& dataset,
    const LinkPolicy& policy, const std::string& language) {
  check_policy(policy);
  if (candidate.rows() == 0) {
    throw ValidationError("verify_enrollment: empty candidate");
  }
  const auto& matrix = dataset.matrix();
  if (candidate.dim() != matrix.dim()) {
    throw ValidationError("verify_enrollment: candidate dim " +
                          std::to_string(candidate.dim()) +
                          " does not match enrolled dim " +
                          std::to_string(matrix.dim()));
  }
  const auto g = group_scope(dataset, language.empty() ? kAnyLanguage : language);
  if (g.ids.empty()) {
    throw ValidationError("verify_enrollment: no enrolled speakers in scope");
  }
  const double threshold =
      language.empty() ? policy.threshold : policy.threshold_for(language);

  std::vector<EnrollmentMatch> out;
  out.reserve(g.ids.size());
  std::vector<double> scores;
  for (std::size_t s = 0; s < g.ids.size(); ++s) {
    scores.clear();
    for (std::size_t c = 0; c < candidate.rows(); ++c) {
      for (auto pos : g.members[s]) {
        const auto row = g.rows[pos];
        scores.push_back(std::clamp(
            dot(candidate.row(c), matrix.row(row)) /
                std::sqrt(candidate.squared_norm(c) * matrix.squared_norm(row)),
            -1.0, 1.0));
      }
    }
    EnrollmentMatch m;
    m.speaker_id = g.ids[s];
    m.score.speaker_a = "candidate";
    m.score.speaker_b = g.ids[s];
    m.score.language = language.empty() ? kAnyLanguage : language;
    m.score.pair_count = scores.size();
    const auto agg = aggregate(scores, threshold);
    m.score.median_score = agg.median;
    m.score.above_count = agg.above;
    m.score.frac_above =
        static_cast<double>(agg.above) / static_cast<double>(scores.size());
    m.matched = decide(agg, scores.size(), policy, threshold);
    m.score.linked = m.matched;
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(),
            [](const EnrollmentMatch& a, const EnrollmentMatch& b) {
              if (a.score.median_score != b.score.median_score) {
                return a.score.median_score > b.score.median_score;
              }
              return a.speaker_id < b.speaker_id;
            });
  return out;
}

}  // namespace cohortguard
