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

#include "cohortguard/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "cohortguard/error.hpp"

namespace cohortguard {
namespace {

constexpr std::array<std::pair<Task, std::string_view>, 6> kTaskNames{{
    {Task::picture_description, "picture_description"},
    {Task::phonemic_fluency, "phonemic_fluency"},
    {Task::semantic_fluency, "semantic_fluency"},
    {Task::paragraph_reading, "paragraph_reading"},
    {Task::paragraph_recall, "paragraph_recall"},
    {Task::journaling, "journaling"},
}};

const std::set<std::string, std::less<>> kRequiredKeys{
    "sample_id",          "speaker_id",          "language",
    "task",               "session_index",       "audio_duration_sec",
    "speech_duration_sec", "embedding_row"};
const std::set<std::string, std::less<>> kOptionalKeys{"model_tag",
                                                       "model_version"};

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw ValidationError("manifest line " + std::to_string(line) + ": " + what);
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           std::size_t line) {
  const auto& v = obj.at(key);
  if (!v.is_string()) {
    fail_line(line, std::string("'") + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::uint64_t require_index(const nlohmann::json& obj, const char* key,
                            std::size_t line) {
  const auto& v = obj.at(key);
  if (v.is_number_unsigned()) {
    return v.get<std::uint64_t>();
  }
  if (v.is_number_integer()) {
    fail_line(line, std::string("'") + key + "' must be non-negative");
  }
  fail_line(line, std::string("'") + key + "' must be an integer");
}

double require_number(const nlohmann::json& obj, const char* key,
                      std::size_t line) {
  const auto& v = obj.at(key);
  if (!v.is_number()) {
    fail_line(line, std::string("'") + key + "' must be a number");
  }
  return v.get<double>();
}

SampleRecord parse_record(std::string_view text, std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail_line(line, std::string("malformed record: ") + e.what());
  }
  if (!obj.is_object()) {
    fail_line(line, "malformed record: expected a JSON object");
  }
  for (const auto& [key, _] : obj.items()) {
    if (!kRequiredKeys.contains(key) && !kOptionalKeys.contains(key)) {
      fail_line(line, "unknown key '" + key + "'");
    }
  }
  for (const auto& key : kRequiredKeys) {
    if (!obj.contains(key)) {
      fail_line(line, "missing key '" + key + "'");
    }
  }

  SampleRecord r;
  r.sample_id = require_string(obj, "sample_id", line);
  r.speaker_id = require_string(obj, "speaker_id", line);
  r.language = require_string(obj, "language", line);
  const auto task_name = require_string(obj, "task", line);
  const auto task = parse_task(task_name);
  if (!task) {
    fail_line(line, "sample '" + r.sample_id + "': unknown task '" +
                        task_name + "'");
  }
  r.task = *task;
  r.session_index = require_index(obj, "session_index", line);
  r.audio_duration_sec = require_number(obj, "audio_duration_sec", line);
  r.speech_duration_sec = require_number(obj, "speech_duration_sec", line);
  r.embedding_row = require_index(obj, "embedding_row", line);
  if (obj.contains("model_tag")) {
    r.model_tag = require_string(obj, "model_tag", line);
  }
  if (obj.contains("model_version")) {
    r.model_version = require_string(obj, "model_version", line);
  }
  try {
    validate_record(r);
  } catch (const ValidationError& e) {
    fail_line(line, e.what());
  }
  return r;
}

}  // namespace

std::string_view to_string(Task task) {
  for (const auto& [t, name] : kTaskNames) {
    if (t == task) return name;
  }
  return "unknown";
}

std::optional<Task> parse_task(std::string_view name) {
  for (const auto& [t, n] : kTaskNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

bool is_language_code(std::string_view code) {
  return code.size() == 2 &&
         std::all_of(code.begin(), code.end(),
                     [](char c) { return c >= 'a' && c <= 'z'; });
}

void validate_record(const SampleRecord& r) {
  const std::string who = "sample '" + r.sample_id + "': ";
  if (r.sample_id.empty()) {
    throw ValidationError("empty sample_id");
  }
  if (r.speaker_id.empty()) {
    throw ValidationError(who + "empty speaker_id");
  }
  if (!is_language_code(r.language)) {
    throw ValidationError(who + "language '" + r.language +
                          "' is not a lowercase two-letter code");
  }
  if (!std::isfinite(r.audio_duration_sec) || r.audio_duration_sec < 0.0) {
    throw ValidationError(who + "negative or non-finite audio_duration_sec");
  }
  if (!std::isfinite(r.speech_duration_sec) || r.speech_duration_sec < 0.0) {
    throw ValidationError(who + "negative or non-finite speech_duration_sec");
  }
  if (r.speech_duration_sec > r.audio_duration_sec) {
    throw ValidationError(who + "speech_duration_sec exceeds audio_duration_sec");
  }
}

std::vector<SampleRecord> parse_manifest(std::string_view text) {
  std::vector<SampleRecord> records;
  std::unordered_map<std::string, std::size_t> first_line;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    auto record = parse_record(line, line_no);
    auto [it, inserted] = first_line.emplace(record.sample_id, line_no);
    if (!inserted) {
      fail_line(line_no, "duplicate sample_id '" + record.sample_id +
                             "' (first seen on line " +
                             std::to_string(it->second) + ")");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open manifest " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return parse_manifest(text);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const std::vector<SampleRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["sample_id"] = r.sample_id;
    obj["speaker_id"] = r.speaker_id;
    obj["language"] = r.language;
    obj["task"] = std::string(to_string(r.task));
    obj["session_index"] = r.session_index;
    obj["audio_duration_sec"] = r.audio_duration_sec;
    obj["speech_duration_sec"] = r.speech_duration_sec;
    obj["embedding_row"] = r.embedding_row;
    if (!r.model_tag.empty()) obj["model_tag"] = r.model_tag;
    if (!r.model_version.empty()) obj["model_version"] = r.model_version;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const std::vector<SampleRecord>& records,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot create manifest " + path.string());
  }
  out << format_manifest(records);
  if (!out) {
    throw FormatError("write error on " + path.string());
  }
}

CohortDataset::CohortDataset(std::string dataset_id,
                             std::vector<SampleRecord> records,
                             std::shared_ptr<const EmbeddingMatrix> matrix)
    : id_(std::move(dataset_id)),
      records_(std::move(records)),
      matrix_(std::move(matrix)) {
  if (!matrix_) {
    throw ValidationError("dataset '" + id_ + "': no embedding matrix");
  }
}

CohortDataset CohortDataset::with_records(
    std::vector<SampleRecord> records) const {
  return CohortDataset(id_, std::move(records), matrix_);
}

CohortDataset bind_dataset(std::vector<SampleRecord> records,
                           std::shared_ptr<const EmbeddingMatrix> matrix,
                           std::string dataset_id,
                           const BindOptions& options) {
  if (!matrix) {
    throw ValidationError("dataset '" + dataset_id + "': no embedding matrix");
  }
  if (records.empty()) {
    throw ValidationError("dataset '" + dataset_id + "' has no records");
  }
  const std::size_t rows = matrix->rows();
  std::unordered_set<std::string> ids;
  std::vector<const SampleRecord*> owner(rows, nullptr);
  for (const auto& r : records) {
    validate_record(r);
    if (!ids.insert(r.sample_id).second) {
      throw ValidationError("duplicate sample_id '" + r.sample_id + "'");
    }
    if (r.embedding_row >= rows) {
      throw ValidationError("sample '" + r.sample_id + "': embedding_row " +
                            std::to_string(r.embedding_row) +
                            " out of range for a " + std::to_string(rows) +
                            "-row matrix");
    }
    auto& slot = owner[r.embedding_row];
    if (slot != nullptr) {
      throw ValidationError("sample '" + r.sample_id + "': embedding_row " +
                            std::to_string(r.embedding_row) +
                            " already referenced by sample '" +
                            slot->sample_id + "'");
    }
    slot = &r;
  }
  const auto orphans = static_cast<std::size_t>(
      std::count(owner.begin(), owner.end(), nullptr));
  if (orphans > 0) {
    const auto first = static_cast<std::size_t>(
        std::find(owner.begin(), owner.end(), nullptr) - owner.begin());
    std::string msg = std::to_string(orphans) +
                      " matrix row(s) not referenced by any record (first: row " +
                      std::to_string(first) + ")";
    if (options.unreferenced_rows_are_errors) {
      throw ValidationError(msg);
    }
    if (options.on_warning) options.on_warning(msg);
  }
  return CohortDataset(std::move(dataset_id), std::move(records),
                       std::move(matrix));
}

CohortStats cohort_stats(const std::vector<SampleRecord>& records) {
  CohortStats s;
  for (const auto& r : records) {
    ++s.per_speaker[r.speaker_id];
  }
  s.samples = records.size();
  s.speakers = s.per_speaker.size();
  if (s.samples == 0) return s;

  s.avg_samples_per_speaker =
      static_cast<double>(s.samples) / static_cast<double>(s.speakers);
  double ss = 0.0;
  // Map iteration order keeps the sum independent of record order.
  for (const auto& [_, n] : s.per_speaker) {
    const double d = static_cast<double>(n) - s.avg_samples_per_speaker;
    ss += d * d;
  }
  s.stdev_samples_per_speaker = std::sqrt(ss / static_cast<double>(s.speakers));

  // Durations are summed in a canonical order for permutation invariance.
  std::vector<std::pair<double, double>> durations;
  durations.reserve(records.size());
  for (const auto& r : records) {
    durations.emplace_back(r.audio_duration_sec, r.speech_duration_sec);
  }
  std::sort(durations.begin(), durations.end());
  double audio = 0.0;
  double speech = 0.0;
  for (const auto& [a, sp] : durations) {
    audio += a;
    speech += sp;
  }
  s.avg_audio_duration_sec = audio / static_cast<double>(s.samples);
  s.avg_speech_duration_sec = speech / static_cast<double>(s.samples);
  return s;
}

CohortStats cohort_stats(const CohortDataset& dataset) {
  return cohort_stats(dataset.records());
}

std::string format_mean_stdev(double mean, double stdev, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f±%.*f", decimals, mean, decimals,
                stdev);
  return buf;
}

}  // namespace cohortguard
