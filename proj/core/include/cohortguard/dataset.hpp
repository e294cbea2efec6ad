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
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cohortguard/embedding_matrix.hpp"

namespace cohortguard {

enum class Task {
  picture_description,
  phonemic_fluency,
  semantic_fluency,
  paragraph_reading,
  paragraph_recall,
  journaling,
};

std::string_view to_string(Task task);
/// Returns nullopt for anything outside the six task names.
std::optional<Task> parse_task(std::string_view name);

/// Per-recording metadata; embedding_row points into the bound matrix.
struct SampleRecord {
  std::string sample_id;
  std::string speaker_id;
  std::string language;  // lowercase two-letter code
  Task task = Task::picture_description;
  std::uint64_t session_index = 0;
  double audio_duration_sec = 0.0;
  double speech_duration_sec = 0.0;
  std::uint64_t embedding_row = 0;
  // Free-form extractor provenance; empty when the manifest omits it.
  std::string model_tag;
  std::string model_version;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// True for exactly two ASCII lowercase letters.
bool is_language_code(std::string_view code);

/// Reads a JSON Lines manifest. Blank lines are skipped. Errors cite the
/// 1-based line number and, where known, the sample_id.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);
std::vector<SampleRecord> parse_manifest(std::string_view text);

/// One record per line with a fixed key order; byte-stable for equal input.
std::string format_manifest(const std::vector<SampleRecord>& records);
void write_manifest(const std::vector<SampleRecord>& records,
                    const std::filesystem::path& path);

/// Metadata records bound to a shared embedding matrix.
///
/// Sub-datasets produced by stratification or subsampling share the parent's
/// matrix, so a dataset may leave rows unreferenced but never references a
/// row twice.
class CohortDataset {
 public:
  CohortDataset(std::string dataset_id, std::vector<SampleRecord> records,
                std::shared_ptr<const EmbeddingMatrix> matrix);

  const std::string& id() const noexcept { return id_; }
  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  const EmbeddingMatrix& matrix() const noexcept { return *matrix_; }
  const std::shared_ptr<const EmbeddingMatrix>& shared_matrix() const noexcept {
    return matrix_;
  }
  std::size_t size() const noexcept { return records_.size(); }

  /// Same matrix, different record subset (order preserved as given).
  CohortDataset with_records(std::vector<SampleRecord> records) const;

 private:
  std::string id_;
  std::vector<SampleRecord> records_;
  std::shared_ptr<const EmbeddingMatrix> matrix_;
};

struct BindOptions {
  // Unreferenced matrix rows become a ValidationError instead of a warning.
  bool unreferenced_rows_are_errors = false;
  std::function<void(const std::string&)> on_warning;
};

/// Validates records against the matrix and each other: durations,
/// sample_id uniqueness, row range, and single reference per row.
CohortDataset bind_dataset(std::vector<SampleRecord> records,
                           std::shared_ptr<const EmbeddingMatrix> matrix,
                           std::string dataset_id,
                           const BindOptions& options = {});

/// Record-level checks shared by the loader and bind_dataset.
void validate_record(const SampleRecord& record);

struct CohortStats {
  std::size_t speakers = 0;                          // m
  std::map<std::string, std::size_t> per_speaker;    // n_i
  std::size_t samples = 0;                           // N
  double avg_samples_per_speaker = 0.0;
  double stdev_samples_per_speaker = 0.0;            // population
  double avg_audio_duration_sec = 0.0;
  double avg_speech_duration_sec = 0.0;
};

CohortStats cohort_stats(const CohortDataset& dataset);
CohortStats cohort_stats(const std::vector<SampleRecord>& records);

/// "10.7±7.0" style mean±stdev with the given number of decimals.
std::string format_mean_stdev(double mean, double stdev, int decimals = 1);

}  // namespace cohortguard
