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

#include "cohortguard/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "cohortguard/dataset.hpp"
#include "cohortguard/dedup.hpp"
#include "cohortguard/embedding_matrix.hpp"
#include "cohortguard/error.hpp"
#include "cohortguard/harness.hpp"
#include "cohortguard/metrics.hpp"
#include "cohortguard/pairing.hpp"
#include "cohortguard/scoring.hpp"
#include "cohortguard/synthcohort.hpp"

namespace cohortguard {
namespace {

namespace fs = std::filesystem;

struct Inputs {
  std::vector<std::string> manifests;
  std::vector<std::string> embeddings;
  std::vector<std::string> dataset_ids;
  bool strict_rows = false;
};

void add_inputs(CLI::App* cmd, Inputs& in, bool required = true) {
  auto* m = cmd->add_option("--manifest", in.manifests,
                            "JSON Lines manifest (repeatable)");
  auto* e = cmd->add_option("--embeddings", in.embeddings,
                            "SVEM embedding matrix, one per --manifest");
  if (required) {
    m->required();
    e->required();
  }
  cmd->add_option("--dataset-id", in.dataset_ids,
                  "dataset id per --manifest (default: manifest directory name)");
  cmd->add_flag("--strict-rows", in.strict_rows,
                "treat matrix rows no record references as errors");
}

std::string default_dataset_id(const fs::path& manifest) {
  const auto dir = manifest.parent_path().filename().string();
  if (!dir.empty() && dir != "." && dir != "..") return dir;
  return manifest.stem().string();
}

std::vector<CohortDataset> load_inputs(const Inputs& in, std::ostream& err) {
  if (in.manifests.size() != in.embeddings.size()) {
    throw ValidationError("got " + std::to_string(in.manifests.size()) +
                          " --manifest but " +
                          std::to_string(in.embeddings.size()) +
                          " --embeddings");
  }
  if (!in.dataset_ids.empty() && in.dataset_ids.size() != in.manifests.size()) {
    throw ValidationError("--dataset-id must be given once per --manifest");
  }
  std::vector<CohortDataset> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < in.manifests.size(); ++i) {
    const fs::path manifest = in.manifests[i];
    const std::string id = in.dataset_ids.empty() ? default_dataset_id(manifest)
                                                  : in.dataset_ids[i];
    if (!seen.insert(id).second) {
      throw ValidationError("dataset id '" + id +
                            "' used twice; pass --dataset-id");
    }
    auto records = load_manifest(manifest);
    auto matrix =
        std::make_shared<const EmbeddingMatrix>(load_embeddings(in.embeddings[i]));
    BindOptions opts;
    opts.unreferenced_rows_are_errors = in.strict_rows;
    opts.on_warning = [&err, &id](const std::string& msg) {
      err << "warning: " << id << ": " << msg << '\n';
    };
    out.push_back(bind_dataset(std::move(records), std::move(matrix), id, opts));
  }
  return out;
}

const CohortDataset& single(const std::vector<CohortDataset>& datasets,
                            const char* command) {
  if (datasets.size() != 1) {
    throw ValidationError(std::string(command) +
                          " takes exactly one --manifest/--embeddings pair");
  }
  return datasets.front();
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    out.flush();
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw FormatError("cannot open " + path + " for writing");
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw FormatError("write error on " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::optional<Task> task_flag(const std::string& name) {
  if (name.empty()) return std::nullopt;
  auto t = parse_task(name);
  if (!t) throw ValidationError("unknown task '" + name + "'");
  return t;
}

// Within-language scopes of a dataset, or the single requested language.
std::vector<PairScope> scopes_of(const CohortDataset& ds,
                                 const std::string& language,
                                 const std::optional<Task>& task) {
  std::vector<PairScope> out;
  if (!language.empty()) {
    out.push_back({ds.id(), language, task});
    return out;
  }
  for (const auto& l : languages_of(ds)) {
    PairScope scope{ds.id(), l, task};
    if (!scope_records(ds, scope).empty()) out.push_back(scope);
  }
  return out;
}

// --- commands -------------------------------------------------------------

struct ValidateArgs {
  Inputs in;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
  for (const auto& ds : load_inputs(a.in, err)) {
    const auto stats = cohort_stats(ds);
    std::string langs;
    for (const auto& l : languages_of(ds)) langs += (langs.empty() ? "" : ",") + l;
    out << "ok " << ds.id() << ": m=" << stats.speakers
        << " speakers, N=" << stats.samples << " samples, dim="
        << ds.matrix().dim() << ", rows=" << ds.matrix().rows()
        << ", languages=" << langs << '\n';
  }
  return kExitOk;
}

struct StatsArgs {
  Inputs in;
  std::string group_by = "language";
  std::string format = "csv";
  std::string out;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
  const auto keys = parse_strata_keys(a.group_by);
  const bool text = a.format == "text";
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{text ? "Dataset" : "dataset"};
  for (auto k : keys) header.emplace_back(to_string(k));
  if (text) {
    for (const char* h : {"#Spkrs", "#Smpls", "Avg #Smpls per Spkr",
                          "Avg Audio (s)", "Avg Speech (s)"}) {
      header.emplace_back(h);
    }
  } else {
    for (const char* h :
         {"n_speakers", "n_samples", "avg_samples_per_speaker",
          "stdev_samples_per_speaker", "avg_audio_sec", "avg_speech_sec"}) {
      header.emplace_back(h);
    }
  }
  cells.push_back(header);
  for (const auto& ds : load_inputs(a.in, err)) {
    for (const auto& s : stratify(ds, keys)) {
      const auto st = cohort_stats(s.dataset);
      std::vector<std::string> row{ds.id()};
      for (const auto& l : s.labels) row.push_back(l.empty() ? "-" : l);
      row.push_back(std::to_string(st.speakers));
      row.push_back(std::to_string(st.samples));
      if (text) {
        row.push_back(format_mean_stdev(st.avg_samples_per_speaker,
                                        st.stdev_samples_per_speaker));
        row.push_back(fmt("%.1f", st.avg_audio_duration_sec));
        row.push_back(fmt("%.1f", st.avg_speech_duration_sec));
      } else {
        row.push_back(fmt("%.2f", st.avg_samples_per_speaker));
        row.push_back(fmt("%.2f", st.stdev_samples_per_speaker));
        row.push_back(fmt("%.2f", st.avg_audio_duration_sec));
        row.push_back(fmt("%.2f", st.avg_speech_duration_sec));
      }
      cells.push_back(std::move(row));
    }
  }
  std::string report;
  if (text) {
    report = format_table(cells);
  } else {
    for (const auto& row : cells) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        report += (c ? "," : "") + row[c];
      }
      report += '\n';
    }
  }
  emit(report, a.out, out);
  return kExitOk;
}

struct PairsArgs {
  Inputs in;
  std::string language;
  std::string task;
  std::string out;
};

int cmd_pairs(const PairsArgs& a, std::ostream& out, std::ostream& err) {
  const auto task = task_flag(a.task);
  std::string csv;
  bool header = true;
  for (const auto& ds : load_inputs(a.in, err)) {
    for (const auto& scope : scopes_of(ds, a.language, task)) {
      csv += format_pairs_csv(generate_pairs(ds, scope), header);
      header = false;
    }
  }
  if (header) throw ValidationError("no records match the requested scope");
  emit(csv, a.out, out);
  return kExitOk;
}

struct EvalArgs {
  Inputs in;
  std::string group_by = "language";
  std::string policy = "eer";
  std::optional<std::size_t> balance_speakers;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string format = "csv";
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  BenchmarkConfig config;
  config.strata_keys = parse_strata_keys(a.group_by);
  config.threshold_policy = parse_threshold_policy(a.policy);
  config.threads = a.threads;
  if (a.balance_speakers) {
    if (!a.seed) throw ValidationError("--balance-speakers requires --seed");
    config.balance = BalanceConfig{*a.balance_speakers, *a.seed};
  }
  const auto report = run_benchmark(load_inputs(a.in, err), config);
  std::string text;
  if (a.format == "text") {
    text = format_report_text(report);
  } else if (a.format == "pivot") {
    text = format_report_pivot(report);
  } else {
    text = format_report_csv(report);
  }
  emit(text, a.out, out);
  bool any_defined = false;
  for (const auto& r : report.rows) {
    if (r.defined) {
      any_defined = true;
    } else {
      err << "warning: " << r.dataset_id;
      for (const auto& l : r.labels) err << '/' << (l.empty() ? "-" : l);
      err << ": EER undefined (" << r.note << ")\n";
    }
  }
  if (!any_defined) {
    err << "error: every stratum is undefined\n";
    return kExitUndefinedMetric;
  }
  return kExitOk;
}

struct DetArgs {
  Inputs in;
  std::string language;
  std::string task;
  std::size_t max_points = 100;
  unsigned threads = 0;
  std::string out;
};

int cmd_det(const DetArgs& a, std::ostream& out, std::ostream& err) {
  const auto task = task_flag(a.task);
  std::string csv = "scope,fpr,fnr\n";
  std::size_t written = 0;
  for (const auto& ds : load_inputs(a.in, err)) {
    for (const auto& scope : scopes_of(ds, a.language, task)) {
      const auto scored =
          score_pairs(generate_pairs(ds, scope), ds.matrix(), {.threads = a.threads});
      if (scored.positives() == 0 || scored.negatives() == 0) {
        err << "warning: " << scope.label()
            << ": DET undefined (needs same- and different-speaker pairs)\n";
        continue;
      }
      csv += format_det_csv(det_curve(scored, a.max_points), scope.label());
      ++written;
    }
  }
  emit(csv, a.out, out);
  if (written == 0) {
    err << "error: no scope has a defined DET curve\n";
    return kExitUndefinedMetric;
  }
  return kExitOk;
}

struct CalibrateArgs {
  Inputs in;
  std::string scores;
  std::string policy = "eer";
  std::string scores_out;
  unsigned threads = 0;
  std::string out;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out,
                  std::ostream& err) {
  const auto policy = parse_threshold_policy(a.policy);
  std::vector<MetricsRow> rows;
  if (!a.scores.empty()) {
    if (!a.in.manifests.empty()) {
      throw ValidationError("--scores and --manifest are mutually exclusive");
    }
    rows.push_back(
        summarize(parse_scored_pairs_csv(read_text(a.scores)), a.scores, policy));
  } else {
    if (a.in.manifests.empty()) {
      throw ValidationError("calibrate needs --scores or --manifest/--embeddings");
    }
    std::string scored_csv;
    for (const auto& ds : load_inputs(a.in, err)) {
      for (const auto& scope : scopes_of(ds, "", std::nullopt)) {
        const auto scored = score_pairs(generate_pairs(ds, scope), ds.matrix(),
                                        {.threads = a.threads});
        if (!a.scores_out.empty()) {
          scored_csv += format_scored_pairs_csv(scored, ds, scored_csv.empty());
        }
        rows.push_back(summarize(scored, scope.label(), policy));
      }
    }
    if (!a.scores_out.empty()) emit(scored_csv, a.scores_out, out);
  }
  emit(format_metrics_csv(rows), a.out, out);
  const bool any = std::any_of(rows.begin(), rows.end(),
                               [](const MetricsRow& r) { return r.defined; });
  if (!any) {
    err << "error: no scope has both same- and different-speaker pairs\n";
    return kExitUndefinedMetric;
  }
  return kExitOk;
}

struct DedupArgs {
  Inputs in;
  std::optional<double> threshold;
  std::string calibrate_from = "pairs";
  std::string policy = "eer";
  double min_frac = 0.5;
  bool cross_language = false;
  unsigned threads = 0;
  std::string out;
};

int cmd_dedup(const DedupArgs& a, std::ostream& out, std::ostream& err) {
  const auto datasets = load_inputs(a.in, err);
  const auto& ds = single(datasets, "dedup");
  LinkPolicy link;
  link.min_frac = a.min_frac;
  if (a.threshold) {
    link.threshold = *a.threshold;
  } else if (a.calibrate_from == "pairs") {
    // Per-language thresholds from the dataset's own within-language pairs;
    // the pooled threshold covers cross-language mode and uncalibrated
    // languages.
    const auto policy = parse_threshold_policy(a.policy);
    ScoredPairSet pooled;
    for (const auto& scope : scopes_of(ds, "", std::nullopt)) {
      auto scored = score_pairs(generate_pairs(ds, scope), ds.matrix(),
                                {.threads = a.threads});
      if (scored.positives() > 0 && scored.negatives() > 0) {
        const double t = calibrate_threshold(scored, policy);
        link.language_thresholds[scope.language] = t;
        err << "info: " << scope.label() << ": threshold " << fmt("%.9g", t)
            << " (" << policy.label() << ")\n";
      } else {
        err << "warning: " << scope.label()
            << ": cannot calibrate, using the pooled threshold\n";
      }
      pooled.pairs.insert(pooled.pairs.end(), scored.pairs.begin(),
                          scored.pairs.end());
    }
    if (pooled.positives() == 0 || pooled.negatives() == 0) {
      throw UndefinedMetricError(
          "cannot calibrate a threshold: need same- and different-speaker "
          "pairs; pass --threshold");
    }
    link.threshold = calibrate_threshold(pooled, policy);
    if (a.cross_language) link.language_thresholds.clear();
  } else {
    const auto scored = parse_scored_pairs_csv(read_text(a.calibrate_from));
    link.threshold = calibrate_threshold(scored, parse_threshold_policy(a.policy));
  }
  if (a.cross_language) {
    err << "warning: cross-language dedup is experimental\n";
  }
  DedupOptions opts;
  opts.cross_language = a.cross_language;
  opts.threads = a.threads;
  const auto report = find_duplicate_clusters(link_speakers(ds, link, opts));
  emit(format_duplicate_report_csv(report), a.out, out);
  return kExitOk;
}

struct BalanceArgs {
  Inputs in;
  std::size_t target_speakers = 0;
  std::uint64_t seed = 0;
  std::string group_by;
  std::string out;
};

int cmd_balance(const BalanceArgs& a, std::ostream& out, std::ostream& err) {
  const auto datasets = load_inputs(a.in, err);
  const auto& ds = single(datasets, "balance");
  std::set<std::string> kept;
  auto keep = [&](const CohortDataset& part) {
    const auto subset = balanced_subsample(part, a.target_speakers, a.seed);
    for (const auto& r : subset.records()) kept.insert(r.sample_id);
  };
  if (a.group_by.empty()) {
    keep(ds);
  } else {
    for (const auto& s : stratify(ds, parse_strata_keys(a.group_by))) {
      keep(s.dataset);
    }
  }
  std::vector<SampleRecord> records;
  for (const auto& r : ds.records()) {
    if (kept.contains(r.sample_id)) records.push_back(r);
  }
  err << "info: kept " << records.size() << " of " << ds.size()
      << " samples (" << kBalanceAlgorithm << ", seed " << a.seed << ")\n";
  emit(format_manifest(records), a.out, out);
  return kExitOk;
}

struct SynthArgs {
  std::string spec;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  auto spec = load_synth_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  const auto cohort = generate_cohort(spec);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw FormatError("cannot create " + a.out_dir + ": " + ec.message());
  write_fixture(cohort, spec, FixturePaths::in(a.out_dir));
  const auto stats = cohort_stats(cohort.dataset);
  out << "wrote " << a.out_dir << ": m=" << stats.speakers
      << " speakers, N=" << stats.samples << " samples, dim=" << spec.dim
      << ", aliases=" << cohort.ground_truth.size() << '\n';
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
      return kExitValidation;
    case ErrorKind::undefined_metric:
      return kExitUndefinedMetric;
    case ErrorKind::io_format:
      return kExitFormat;
  }
  return kExitValidation;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Speaker-verification cohort evaluation toolkit", "cohortguard"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand help for all subcommands");

  ValidateArgs validate;
  auto* c_validate =
      app.add_subcommand("validate", "Load and bind a manifest and matrix");
  add_inputs(c_validate, validate.in);

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Cohort statistics per stratum");
  add_inputs(c_stats, stats.in);
  c_stats->add_option("--group-by", stats.group_by,
                      "comma-separated keys: language, task, model_tag");
  c_stats->add_option("--format", stats.format)
      ->check(CLI::IsMember({"csv", "text"}));
  c_stats->add_option("--out", stats.out, "output file (default stdout)");

  PairsArgs pairs;
  auto* c_pairs = app.add_subcommand("pairs", "List within-language trial pairs");
  add_inputs(c_pairs, pairs.in);
  c_pairs->add_option("--language", pairs.language, "only this language");
  c_pairs->add_option("--task", pairs.task, "only this task");
  c_pairs->add_option("--out", pairs.out, "output file (default stdout)");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Stratified EER benchmark report");
  add_inputs(c_eval, eval.in);
  c_eval->add_option("--group-by", eval.group_by,
                     "comma-separated keys: language, task, model_tag");
  c_eval->add_option("--threshold-policy", eval.policy,
                     "eer, target-fpr:X or target-fnr:X");
  c_eval->add_option("--balance-speakers", eval.balance_speakers,
                     "subsample each stratum to this many speakers")
      ->check(CLI::PositiveNumber);
  c_eval->add_option("--seed", eval.seed, "seed for --balance-speakers");
  c_eval->add_option("--threads", eval.threads, "worker cap (0: all cores)");
  c_eval->add_option("--format", eval.format)
      ->check(CLI::IsMember({"csv", "text", "pivot"}));
  c_eval->add_option("--out", eval.out, "output file (default stdout)");

  DetArgs det;
  auto* c_det = app.add_subcommand("det", "DET curve per language scope");
  add_inputs(c_det, det.in);
  c_det->add_option("--language", det.language, "only this language");
  c_det->add_option("--task", det.task, "only this task");
  c_det->add_option("--max-points", det.max_points, "points per curve (>= 4)");
  c_det->add_option("--threads", det.threads, "worker cap (0: all cores)");
  c_det->add_option("--out", det.out, "output file (default stdout)");

  CalibrateArgs calibrate;
  auto* c_cal = app.add_subcommand("calibrate", "Thresholds and rates per scope");
  add_inputs(c_cal, calibrate.in, false);
  c_cal->add_option("--scores", calibrate.scores,
                    "scored pairs CSV instead of a manifest");
  c_cal->add_option("--threshold-policy", calibrate.policy,
                    "eer, target-fpr:X or target-fnr:X");
  c_cal->add_option("--scores-out", calibrate.scores_out,
                    "also write the scored pairs CSV here");
  c_cal->add_option("--threads", calibrate.threads, "worker cap (0: all cores)");
  c_cal->add_option("--out", calibrate.out, "output file (default stdout)");

  DedupArgs dedup;
  auto* c_dedup = app.add_subcommand("dedup", "Find duplicate participants");
  add_inputs(c_dedup, dedup.in);
  auto* o_thr = c_dedup->add_option("--threshold", dedup.threshold,
                                    "fixed link threshold");
  auto* o_cal = c_dedup->add_option(
      "--calibrate-from", dedup.calibrate_from,
      "'pairs' (this dataset, per language) or a scored pairs CSV");
  o_thr->excludes(o_cal);
  c_dedup->add_option("--threshold-policy", dedup.policy,
                      "calibration policy: eer, target-fpr:X or target-fnr:X");
  c_dedup->add_option("--min-frac", dedup.min_frac,
                      "fraction of cross pairs that must exceed the threshold");
  c_dedup->add_flag("--cross-language", dedup.cross_language,
                    "also link speakers across languages (experimental)");
  c_dedup->add_option("--threads", dedup.threads, "worker cap (0: all cores)");
  c_dedup->add_option("--out", dedup.out, "output file (default stdout)");

  BalanceArgs balance;
  auto* c_bal = app.add_subcommand("balance", "Seeded speaker subsample");
  add_inputs(c_bal, balance.in);
  c_bal->add_option("--target-speakers", balance.target_speakers)
      ->required()
      ->check(CLI::PositiveNumber);
  c_bal->add_option("--seed", balance.seed)->required();
  c_bal->add_option("--group-by", balance.group_by,
                    "balance each stratum separately");
  c_bal->add_option("--out", balance.out, "manifest output (default stdout)");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic fixture");
  c_synth->add_option("--spec", synth.spec, "JSON spec file")->required();
  c_synth->add_option("--out-dir", synth.out_dir)->required();
  c_synth->add_option("--seed", synth.seed, "overrides the spec's seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (c_validate->parsed()) return cmd_validate(validate, out, err);
    if (c_stats->parsed()) return cmd_stats(stats, out, err);
    if (c_pairs->parsed()) return cmd_pairs(pairs, out, err);
    if (c_eval->parsed()) return cmd_eval(eval, out, err);
    if (c_det->parsed()) return cmd_det(det, out, err);
    if (c_cal->parsed()) return cmd_calibrate(calibrate, out, err);
    if (c_dedup->parsed()) return cmd_dedup(dedup, out, err);
    if (c_bal->parsed()) return cmd_balance(balance, out, err);
    if (c_synth->parsed()) return cmd_synth(synth, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace cohortguard
