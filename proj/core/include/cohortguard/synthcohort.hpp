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
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cohortguard/dataset.hpp"

namespace cohortguard {

/// Name of the generator stamped into fixture metadata. The stream is
/// std::mt19937_64 (fully specified by the standard) with a 53-bit uniform
/// and Box-Muller normals, so fixtures reproduce on any conforming platform.
inline constexpr const char* kSynthGenerator = "mt19937_64/u53/box-muller";

/// Portable deterministic random source built on std::mt19937_64.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct SynthSpec {
  std::string dataset_id = "synth";
  std::size_t n_speakers = 10;  // including injected aliases
  double samples_mean = 7.0;
  std::size_t samples_jitter = 0;
  std::size_t dim = 192;
  double noise_sigma = 0.05;  // per-coordinate standard deviation
  std::vector<std::pair<std::string, double>> languages{{"en", 1.0}};
  std::vector<std::pair<Task, double>> tasks{{Task::picture_description, 1.0}};
  std::size_t duplicate_injections = 0;
  std::uint64_t seed = 0;
  // Test hook: Gram-Schmidt the identity centroids (needs identities <= dim).
  bool orthogonal_centroids = false;
  std::string model_tag;
};

/// Throws ValidationError for dim < 2, non-positive weights, bad language
/// codes, or too many duplicate injections.
void validate(const SynthSpec& spec);

/// Reads a JSON spec document; unknown keys are rejected.
SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string format_synth_spec(const SynthSpec& spec);

struct SynthCohort {
  CohortDataset dataset;
  // alias speaker_id -> speaker_id whose centroid it shares
  std::map<std::string, std::string> ground_truth;
};

/// Unit-sphere centroid per identity; each sample is centroid plus isotropic
/// Gaussian noise, renormalized. Aliases reuse a distinct identity's centroid
/// and language. Deterministic in the spec.
SynthCohort generate_cohort(const SynthSpec& spec);

struct FixturePaths {
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::filesystem::path ground_truth;
  std::filesystem::path metadata;

  static FixturePaths in(const std::filesystem::path& dir);
};

/// Writes manifest.jsonl, embeddings.svem, ground_truth.csv
/// (alias_speaker_id,true_speaker_id) and fixture.json (spec + generator).
void write_fixture(const SynthCohort& cohort, const SynthSpec& spec,
                   const FixturePaths& paths);

std::string format_ground_truth_csv(
    const std::map<std::string, std::string>& ground_truth);

}  // namespace cohortguard
