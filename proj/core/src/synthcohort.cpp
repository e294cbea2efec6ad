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

#include "cohortguard/synthcohort.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "cohortguard/error.hpp"

namespace cohortguard {
namespace {

std::size_t pick_weighted(DeterministicRng& rng,
                          const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

void normalize(std::vector<double>& v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  const double n = std::sqrt(ss);
  for (double& x : v) x /= n;
}

std::vector<double> random_unit(DeterministicRng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double ss = 0.0;
  do {
    ss = 0.0;
    for (double& x : v) {
      x = rng.normal();
      ss += x * x;
    }
  } while (!(ss > 0.0));
  normalize(v);
  return v;
}

// Removes components along the previous centroids. Assumes they are
// orthonormal; draws again if the remainder vanishes numerically.
std::vector<double> orthogonal_unit(DeterministicRng& rng, std::size_t dim,
                                    const std::vector<std::vector<double>>& prev) {
  for (;;) {
    auto v = random_unit(rng, dim);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& p : prev) {
        double d = 0.0;
        for (std::size_t k = 0; k < dim; ++k) d += v[k] * p[k];
        for (std::size_t k = 0; k < dim; ++k) v[k] -= d * p[k];
      }
    }
    double ss = 0.0;
    for (double x : v) ss += x * x;
    if (ss > 1e-12) {
      normalize(v);
      return v;
    }
  }
}

double round_centi(double x) { return std::round(x * 100.0) / 100.0; }

std::string speaker_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%03zu", i);
  return buf;
}

}  // namespace

double DeterministicRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t DeterministicRng::below(std::uint64_t bound) {
  if (bound == 0) throw ValidationError("DeterministicRng::below(0)");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double DeterministicRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void validate(const SynthSpec& spec) {
  if (spec.dim < 2) throw ValidationError("synth spec: dim must be >= 2");
  if (spec.n_speakers < 1) {
    throw ValidationError("synth spec: n_speakers must be positive");
  }
  if (!(spec.samples_mean > 0.0) || !std::isfinite(spec.samples_mean)) {
    throw ValidationError("synth spec: samples_per_speaker.mean must be positive");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw ValidationError("synth spec: noise_sigma must be non-negative");
  }
  if (spec.languages.empty() || spec.tasks.empty()) {
    throw ValidationError("synth spec: languages and tasks must be non-empty");
  }
  for (const auto& [code, w] : spec.languages) {
    if (!is_language_code(code)) {
      throw ValidationError("synth spec: bad language code '" + code + "'");
    }
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ValidationError("synth spec: weight for '" + code +
                            "' must be positive");
    }
  }
  for (const auto& [task, w] : spec.tasks) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ValidationError("synth spec: weight for task '" +
                            std::string(to_string(task)) + "' must be positive");
    }
  }
  if (spec.duplicate_injections >= spec.n_speakers ||
      2 * spec.duplicate_injections > spec.n_speakers) {
    throw ValidationError(
        "synth spec: duplicate_injections must leave at least one distinct "
        "identity per alias (2 * duplicates <= n_speakers)");
  }
  const std::size_t identities = spec.n_speakers - spec.duplicate_injections;
  if (spec.orthogonal_centroids && identities > spec.dim) {
    throw ValidationError(
        "synth spec: orthogonal_centroids needs identities <= dim");
  }
}

SynthSpec parse_synth_spec(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("synth spec: expected an object");
  static const std::set<std::string> known{
      "dataset_id", "n_speakers",  "samples_per_speaker",
      "dim",        "noise_sigma", "languages",
      "tasks",      "duplicate_injections", "seed",
      "orthogonal_centroids",      "model_tag"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) {
      throw ValidationError("synth spec: unknown key '" + key + "'");
    }
  }
  SynthSpec spec;
  try {
    spec.dataset_id = doc.value("dataset_id", spec.dataset_id);
    spec.n_speakers = doc.at("n_speakers").get<std::size_t>();
    if (doc.contains("samples_per_speaker")) {
      const auto& sps = doc.at("samples_per_speaker");
      spec.samples_mean = sps.at("mean").get<double>();
      spec.samples_jitter = sps.value("jitter", std::size_t{0});
    }
    spec.dim = doc.value("dim", spec.dim);
    spec.noise_sigma = doc.value("noise_sigma", spec.noise_sigma);
    if (doc.contains("languages")) {
      spec.languages.clear();
      for (const auto& l : doc.at("languages")) {
        spec.languages.emplace_back(l.at("code").get<std::string>(),
                                    l.value("weight", 1.0));
      }
    }
    if (doc.contains("tasks")) {
      spec.tasks.clear();
      for (const auto& t : doc.at("tasks")) {
        const auto name = t.at("task").get<std::string>();
        const auto task = parse_task(name);
        if (!task) throw ValidationError("synth spec: unknown task '" + name + "'");
        spec.tasks.emplace_back(*task, t.value("weight", 1.0));
      }
    }
    spec.duplicate_injections =
        doc.value("duplicate_injections", spec.duplicate_injections);
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.orthogonal_centroids =
        doc.value("orthogonal_centroids", spec.orthogonal_centroids);
    spec.model_tag = doc.value("model_tag", spec.model_tag);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open synth spec " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_synth_spec(text);
}

std::string format_synth_spec(const SynthSpec& spec) {
  nlohmann::ordered_json doc;
  doc["dataset_id"] = spec.dataset_id;
  doc["n_speakers"] = spec.n_speakers;
  doc["samples_per_speaker"] = {{"mean", spec.samples_mean},
                                {"jitter", spec.samples_jitter}};
  doc["dim"] = spec.dim;
  doc["noise_sigma"] = spec.noise_sigma;
  doc["languages"] = nlohmann::ordered_json::array();
  for (const auto& [code, w] : spec.languages) {
    doc["languages"].push_back({{"code", code}, {"weight", w}});
  }
  doc["tasks"] = nlohmann::ordered_json::array();
  for (const auto& [task, w] : spec.tasks) {
    doc["tasks"].push_back({{"task", std::string(to_string(task))}, {"weight", w}});
  }
  doc["duplicate_injections"] = spec.duplicate_injections;
  doc["seed"] = spec.seed;
  doc["orthogonal_centroids"] = spec.orthogonal_centroids;
  doc["model_tag"] = spec.model_tag;
  return doc.dump(2) + "\n";
}

SynthCohort generate_cohort(const SynthSpec& spec) {
  validate(spec);
  DeterministicRng rng(spec.seed);
  const std::size_t identities = spec.n_speakers - spec.duplicate_injections;

  std::vector<double> lang_w, task_w;
  for (const auto& [_, w] : spec.languages) lang_w.push_back(w);
  for (const auto& [_, w] : spec.tasks) task_w.push_back(w);

  // Identity centroids and languages.
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> language_of;
  for (std::size_t i = 0; i < identities; ++i) {
    centroids.push_back(spec.orthogonal_centroids
                            ? orthogonal_unit(rng, spec.dim, centroids)
                            : random_unit(rng, spec.dim));
    language_of.push_back(pick_weighted(rng, lang_w));
  }

  // Aliases borrow distinct identities (partial Fisher-Yates).
  std::vector<std::size_t> pool(identities);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> identity_of(identities);
  std::iota(identity_of.begin(), identity_of.end(), 0);
  for (std::size_t k = 0; k < spec.duplicate_injections; ++k) {
    const auto j = k + rng.below(identities - k);
    std::swap(pool[k], pool[j]);
    identity_of.push_back(pool[k]);
  }

  // Speaker ids are assigned through a shuffle so aliases are not
  // recognizable by position.
  std::vector<std::size_t> name_of(spec.n_speakers);
  std::iota(name_of.begin(), name_of.end(), 0);
  for (std::size_t k = spec.n_speakers; k > 1; --k) {
    std::swap(name_of[k - 1], name_of[rng.below(k)]);
  }
  std::vector<std::size_t> by_name(spec.n_speakers);
  for (std::size_t s = 0; s < spec.n_speakers; ++s) by_name[name_of[s]] = s;

  SynthCohort out{CohortDataset(spec.dataset_id, {},
                                std::make_shared<EmbeddingMatrix>()),
                  {}};
  for (std::size_t s = identities; s < spec.n_speakers; ++s) {
    out.ground_truth[speaker_name(name_of[s])] =
        speaker_name(name_of[identity_of[s]]);
  }

  std::vector<SampleRecord> records;
  std::vector<float> data;
  const auto base = static_cast<long long>(std::llround(spec.samples_mean));
  const auto jitter = static_cast<long long>(spec.samples_jitter);
  for (std::size_t name = 0; name < spec.n_speakers; ++name) {
    const std::size_t s = by_name[name];
    const auto& centroid = centroids[identity_of[s]];
    const auto& language = spec.languages[language_of[identity_of[s]]].first;
    const long long drawn =
        base + static_cast<long long>(rng.below(2 * jitter + 1)) - jitter;
    const auto count = static_cast<std::size_t>(std::max(1LL, drawn));
    for (std::size_t k = 0; k < count; ++k) {
      SampleRecord r;
      r.speaker_id = speaker_name(name);
      char id[48];
      std::snprintf(id, sizeof id, "%s_s%02zu", r.speaker_id.c_str(), k);
      r.sample_id = id;
      r.language = language;
      r.task = spec.tasks[pick_weighted(rng, task_w)].first;
      r.session_index = k;
      r.audio_duration_sec = round_centi(30.0 + 90.0 * rng.uniform());
      r.speech_duration_sec =
          round_centi(r.audio_duration_sec * (0.4 + 0.5 * rng.uniform()));
      r.embedding_row = records.size();
      r.model_tag = spec.model_tag;

      std::vector<double> v = centroid;
      if (spec.noise_sigma > 0.0) {
        for (double& x : v) x += spec.noise_sigma * rng.normal();
        normalize(v);
      }
      for (double x : v) data.push_back(static_cast<float>(x));
      records.push_back(std::move(r));
    }
  }
  const std::size_t rows = records.size();
  auto matrix = std::make_shared<const EmbeddingMatrix>(rows, spec.dim,
                                                        std::move(data));
  out.dataset = bind_dataset(std::move(records), std::move(matrix),
                             spec.dataset_id,
                             BindOptions{.unreferenced_rows_are_errors = true, .on_warning = {}});
  return out;
}

FixturePaths FixturePaths::in(const std::filesystem::path& dir) {
  return {dir / "manifest.jsonl", dir / "embeddings.svem",
          dir / "ground_truth.csv", dir / "fixture.json"};
}

std::string format_ground_truth_csv(
    const std::map<std::string, std::string>& ground_truth) {
  std::string out = "alias_speaker_id,true_speaker_id\n";
  for (const auto& [alias, truth] : ground_truth) {
    out += alias + ',' + truth + '\n';
  }
  return out;
}

void write_fixture(const SynthCohort& cohort, const SynthSpec& spec,
                   const FixturePaths& paths) {
  write_manifest(cohort.dataset.records(), paths.manifest);
  write_embeddings(cohort.dataset.matrix(), paths.embeddings);

  auto write_text = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot create " + p.string());
    out << text;
    if (!out) throw FormatError("write error on " + p.string());
  };
  write_text(paths.ground_truth, format_ground_truth_csv(cohort.ground_truth));

  nlohmann::ordered_json meta;
  meta["generator"] = kSynthGenerator;
  meta["spec"] = nlohmann::ordered_json::parse(format_synth_spec(spec));
  meta["rows"] = cohort.dataset.matrix().rows();
  meta["speakers"] = spec.n_speakers;
  write_text(paths.metadata, meta.dump(2) + "\n");
}

}  // namespace cohortguard
