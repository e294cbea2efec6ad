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

#include "cohortguard/harness.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "cohortguard/error.hpp"
#include "cohortguard/pairing.hpp"
#include "cohortguard/parallel.hpp"
#include "cohortguard/scoring.hpp"
#include "cohortguard/synthcohort.hpp"

namespace cohortguard {
namespace {

const std::string& label_of(const SampleRecord& r, StratumKey key) {
  static const std::string none;
  static std::array<std::string, 6> task_names = [] {
    std::array<std::string, 6> names;
    for (int t = 0; t < 6; ++t) {
      names[t] = std::string(to_string(static_cast<Task>(t)));
    }
    return names;
  }();
  switch (key) {
    case StratumKey::language:
      return r.language;
    case StratumKey::task:
      return task_names[static_cast<int>(r.task)];
    case StratumKey::model_tag:
      return r.model_tag;
  }
  return none;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string shown(const std::string& label) { return label.empty() ? "-" : label; }

struct ProximityEntry {
  const char* a;
  const char* b;
  double value;
};

constexpr std::array<ProximityEntry, 10> kProximity{{
    {"en", "de", 31.3},
    {"en", "da", 24.6},
    {"en", "es", 59.3},
    {"en", "ar", 85.5},
    {"de", "da", 28.3},
    {"de", "es", 56.8},
    {"de", "ar", 76.3},
    {"da", "es", 51.4},
    {"da", "ar", 84.9},
    {"es", "ar", 76.6},
}};

// Evaluates one stratum; the stratum may hold several languages, in which
// case pairs are generated inside each language and pooled.
BenchmarkRow evaluate_stratum(const std::string& dataset_id,
                              const Stratum& stratum,
                              const BenchmarkConfig& config) {
  BenchmarkRow row;
  row.dataset_id = dataset_id;
  row.labels = stratum.labels;

  CohortDataset data = stratum.dataset;
  if (config.balance) {
    const auto speakers = cohort_stats(data).speakers;
    if (speakers < config.balance->target_speakers) {
      const auto stats = cohort_stats(data);
      row.n_speakers = stats.speakers;
      row.n_samples = stats.samples;
      row.avg_samples_per_speaker = stats.avg_samples_per_speaker;
      row.stdev_samples_per_speaker = stats.stdev_samples_per_speaker;
      row.note = "fewer speakers than balance target";
      return row;
    }
    data = balanced_subsample(data, config.balance->target_speakers,
                              config.balance->seed);
  }

  const auto stats = cohort_stats(data);
  row.n_speakers = stats.speakers;
  row.n_samples = stats.samples;
  row.avg_samples_per_speaker = stats.avg_samples_per_speaker;
  row.stdev_samples_per_speaker = stats.stdev_samples_per_speaker;

  ScoredPairSet pooled;
  std::uint64_t planned_pos = 0;
  std::uint64_t planned_neg = 0;
  for (const auto& language : languages_of(data)) {
    const PairScope scope{data.id(), language, std::nullopt};
    const auto range = generate_pairs(data, scope);
    const auto plan = plan_pairs(cohort_stats(scope_records(data, scope)), scope);
    planned_pos += plan.positive_count;
    planned_neg += plan.negative_count;
    auto scored = score_pairs(range, data.matrix());
    pooled.pairs.insert(pooled.pairs.end(), scored.pairs.begin(),
                        scored.pairs.end());
    pooled.provenance = scored.provenance;
  }
  row.n_pos = pooled.positives();
  row.n_neg = pooled.pairs.size() - row.n_pos;
  if (row.n_pos != planned_pos || row.n_neg != planned_neg) {
    throw std::logic_error("pair counts disagree with the closed-form plan in " +
                           dataset_id);
  }

  if (row.n_speakers < 2) {
    row.note = "fewer than 2 speakers";
    return row;
  }
  if (row.n_pos == 0) {
    row.note = "no same-speaker pairs";
    return row;
  }
  if (row.n_neg == 0) {
    row.note = "no different-speaker pairs";
    return row;
  }
  const auto e = eer(pooled);
  const auto cal = calibrate(pooled, config.threshold_policy);
  row.defined = true;
  row.eer_pct = 100.0 * e.eer;
  row.threshold = cal.threshold;
  row.rates = cal.achieved;
  row.interpolated = e.interpolated;
  return row;
}

std::string pad(const std::string& s, std::size_t width) {
  // Width is counted in code points so "±" aligns.
  std::size_t cps = 0;
  for (unsigned char c : s) cps += (c & 0xC0) != 0x80;
  return cps >= width ? s : s + std::string(width - cps, ' ');
}

}  // namespace

std::string_view to_string(StratumKey key) {
  switch (key) {
    case StratumKey::language:
      return "language";
    case StratumKey::task:
      return "task";
    case StratumKey::model_tag:
      return "model_tag";
  }
  return "unknown";
}

std::vector<StratumKey> parse_strata_keys(const std::string& text) {
  std::vector<StratumKey> keys;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    StratumKey key;
    if (item == "language") {
      key = StratumKey::language;
    } else if (item == "task") {
      key = StratumKey::task;
    } else if (item == "model_tag" || item == "model") {
      key = StratumKey::model_tag;
    } else {
      throw ValidationError("unknown grouping key '" + item +
                            "' (expected language, task or model_tag)");
    }
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) {
      throw ValidationError("grouping key '" + item + "' given twice");
    }
    keys.push_back(key);
  }
  if (keys.empty()) throw ValidationError("empty grouping key list");
  return keys;
}

std::vector<Stratum> stratify(const CohortDataset& dataset,
                              const std::vector<StratumKey>& keys) {
  if (keys.empty()) throw ValidationError("stratify: no keys given");
  std::map<std::vector<std::string>, std::vector<SampleRecord>> groups;
  for (const auto& r : dataset.records()) {
    std::vector<std::string> labels;
    labels.reserve(keys.size());
    for (auto k : keys) labels.push_back(label_of(r, k));
    groups[labels].push_back(r);
  }
  std::vector<Stratum> out;
  out.reserve(groups.size());
  for (auto& [labels, records] : groups) {
    out.push_back({labels, dataset.with_records(std::move(records))});
  }
  return out;
}

CohortDataset balanced_subsample(const CohortDataset& dataset,
                                 std::size_t target_speakers,
                                 std::uint64_t seed) {
  std::set<std::string> unique;
  for (const auto& r : dataset.records()) unique.insert(r.speaker_id);
  std::vector<std::string> speakers(unique.begin(), unique.end());
  if (target_speakers == 0) {
    throw ValidationError("balanced_subsample: target must be positive");
  }
  if (speakers.size() < target_speakers) {
    throw ValidationError("balanced_subsample: dataset '" + dataset.id() +
                          "' has " + std::to_string(speakers.size()) +
                          " speakers, fewer than the target " +
                          std::to_string(target_speakers));
  }
  DeterministicRng rng(seed);
  for (std::size_t k = 0; k < target_speakers; ++k) {
    const auto j = k + rng.below(speakers.size() - k);
    std::swap(speakers[k], speakers[j]);
  }
  const std::set<std::string> chosen(speakers.begin(),
                                     speakers.begin() + target_speakers);
  std::vector<SampleRecord> kept;
  for (const auto& r : dataset.records()) {
    if (chosen.contains(r.speaker_id)) kept.push_back(r);
  }
  return dataset.with_records(std::move(kept));
}

BenchmarkReport run_benchmark(const std::vector<CohortDataset>& datasets,
                              const BenchmarkConfig& config) {
  if (config.strata_keys.empty()) {
    throw ValidationError("benchmark: no strata keys");
  }
  if (config.balance && config.balance->target_speakers < 2) {
    throw ValidationError("benchmark: balance target must be >= 2 speakers");
  }
  BenchmarkReport report;
  report.keys = config.strata_keys;
  report.threshold_policy = config.threshold_policy.label();
  if (config.balance) {
    report.balance = std::to_string(config.balance->target_speakers) +
                     " speakers, seed " + std::to_string(config.balance->seed) +
                     ", " + kBalanceAlgorithm;
  }

  struct Job {
    const CohortDataset* dataset;
    Stratum stratum;
  };
  std::vector<Job> jobs;
  for (const auto& ds : datasets) {
    for (auto& s : stratify(ds, config.strata_keys)) {
      jobs.push_back({&ds, std::move(s)});
    }
  }
  report.rows.resize(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t j) {
    report.rows[j] =
        evaluate_stratum(jobs[j].dataset->id(), jobs[j].stratum, config);
  });
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const BenchmarkRow& a, const BenchmarkRow& b) {
                     return std::tie(a.dataset_id, a.labels) <
                            std::tie(b.dataset_id, b.labels);
                   });

  std::set<std::string> languages;
  for (const auto& ds : datasets) {
    for (const auto& l : languages_of(ds)) languages.insert(l);
  }
  const auto& known = proximity_languages();
  for (std::size_t i = 0; i < known.size(); ++i) {
    for (std::size_t j = i + 1; j < known.size(); ++j) {
      if (languages.contains(known[i]) && languages.contains(known[j])) {
        report.proximity_annotations.push_back(
            {known[i], known[j], language_proximity(known[i], known[j])});
      }
    }
  }
  return report;
}

std::string format_report_csv(const BenchmarkReport& report) {
  std::string out = "dataset";
  for (auto k : report.keys) {
    out += ',';
    out += to_string(k);
  }
  out +=
      ",n_speakers,n_samples,avg_samples_per_speaker,n_pos,n_neg,eer_pct,"
      "threshold,tpr,tnr\n";
  for (const auto& r : report.rows) {
    out += r.dataset_id;
    for (const auto& l : r.labels) out += ',' + l;
    out += ',' + std::to_string(r.n_speakers) + ',' +
           std::to_string(r.n_samples) + ',' +
           fmt("%.2f", r.avg_samples_per_speaker) + ',' +
           std::to_string(r.n_pos) + ',' + std::to_string(r.n_neg) + ',';
    if (r.defined) {
      out += fmt("%.2f", r.eer_pct) + ',' + fmt("%.9g", r.threshold) + ',' +
             fmt("%.3f", r.rates.tpr) + ',' + fmt("%.3f", r.rates.tnr);
    } else {
      out += "undefined,undefined,undefined,undefined";
    }
    out += '\n';
  }
  return out;
}

std::string format_report_text(const BenchmarkReport& report) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Dataset"};
  for (auto k : report.keys) header.emplace_back(to_string(k));
  for (const char* h : {"EER(%)", "TPR | TNR", "Threshold", "#Spkrs", "#Smpls",
                        "Avg #Smpls per Spkr", "#Pos", "#Neg"}) {
    header.emplace_back(h);
  }
  cells.push_back(header);
  for (const auto& r : report.rows) {
    std::vector<std::string> line{r.dataset_id};
    for (const auto& l : r.labels) line.push_back(shown(l));
    if (r.defined) {
      line.push_back(fmt("%.2f", r.eer_pct));
      line.push_back(format_tpr_tnr(r.rates));
      line.push_back(fmt("%.4f", r.threshold));
    } else {
      line.push_back("undefined");
      line.push_back("-");
      line.push_back("-");
    }
    line.push_back(std::to_string(r.n_speakers));
    line.push_back(std::to_string(r.n_samples));
    line.push_back(format_mean_stdev(r.avg_samples_per_speaker,
                                     r.stdev_samples_per_speaker, 2));
    line.push_back(std::to_string(r.n_pos));
    line.push_back(std::to_string(r.n_neg));
    cells.push_back(std::move(line));
  }
  std::string out = format_table(cells);
  out += "threshold policy: " + report.threshold_policy + '\n';
  if (!report.balance.empty()) out += "balanced: " + report.balance + '\n';
  for (const auto& r : report.rows) {
    if (!r.defined) {
      out += "undefined: " + r.dataset_id;
      for (const auto& l : r.labels) out += '/' + shown(l);
      out += " (" + r.note + ")\n";
    }
  }
  if (!report.proximity_annotations.empty()) {
    out += "language proximity (eLinguistics, lower is closer):";
    for (const auto& p : report.proximity_annotations) {
      out += ' ' + p.a + '-' + p.b + '=' + fmt("%.1f", p.value);
    }
    out += '\n';
  }
  return out;
}

std::string format_report_pivot(const BenchmarkReport& report) {
  const auto lang_it = std::find(report.keys.begin(), report.keys.end(),
                                 StratumKey::language);
  if (lang_it == report.keys.end()) {
    throw ValidationError("pivot layout needs 'language' among the keys");
  }
  const auto lang_idx =
      static_cast<std::size_t>(lang_it - report.keys.begin());
  const auto tag_it = std::find(report.keys.begin(), report.keys.end(),
                                StratumKey::model_tag);

  // Row label: model tag when grouped by it, otherwise dataset id; any other
  // keys are folded into the row label too.
  std::vector<std::string> langs;
  std::vector<std::string> row_names;
  std::map<std::pair<std::string, std::string>, std::string> cell;
  for (const auto& r : report.rows) {
    std::string name = tag_it != report.keys.end()
                           ? shown(r.labels[tag_it - report.keys.begin()])
                           : r.dataset_id;
    for (std::size_t k = 0; k < r.labels.size(); ++k) {
      if (k == lang_idx) continue;
      if (tag_it != report.keys.end() &&
          k == static_cast<std::size_t>(tag_it - report.keys.begin())) {
        continue;
      }
      name += '/' + shown(r.labels[k]);
    }
    const auto& lang = r.labels[lang_idx];
    if (std::find(langs.begin(), langs.end(), lang) == langs.end()) {
      langs.push_back(lang);
    }
    if (std::find(row_names.begin(), row_names.end(), name) == row_names.end()) {
      row_names.push_back(name);
    }
    cell[{name, lang}] = r.defined ? fmt("%.2f", r.eer_pct) : "undefined";
  }
  std::sort(langs.begin(), langs.end());
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"EER(%)"};
  header.insert(header.end(), langs.begin(), langs.end());
  cells.push_back(header);
  for (const auto& name : row_names) {
    std::vector<std::string> line{name};
    for (const auto& l : langs) {
      auto it = cell.find({name, l});
      line.push_back(it == cell.end() ? "-" : it->second);
    }
    cells.push_back(std::move(line));
  }
  return format_table(cells);
}

std::string format_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::size_t cps = 0;
      for (unsigned char ch : row[c]) cps += (ch & 0xC0) != 0x80;
      width[c] = std::max(width[c], cps);
    }
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += c + 1 == row.size() ? row[c] : pad(row[c], width[c]) + "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

const std::vector<std::string>& proximity_languages() {
  static const std::vector<std::string> langs{"en", "de", "da", "es", "ar"};
  return langs;
}

double language_proximity(const std::string& l1, const std::string& l2) {
  const auto& known = proximity_languages();
  for (const auto* code : {&l1, &l2}) {
    if (std::find(known.begin(), known.end(), *code) == known.end()) {
      throw ValidationError("no proximity data for language '" + *code + "'");
    }
  }
  if (l1 == l2) return 0.0;
  for (const auto& e : kProximity) {
    if ((l1 == e.a && l2 == e.b) || (l1 == e.b && l2 == e.a)) return e.value;
  }
  throw std::logic_error("proximity table incomplete");
}

}  // namespace cohortguard
