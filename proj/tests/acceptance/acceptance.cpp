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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cohortguard/cli.hpp"
#include "cohortguard/dedup.hpp"
#include "cohortguard/error.hpp"
#include "cohortguard/harness.hpp"
#include "cohortguard/metrics.hpp"
#include "cohortguard/pairing.hpp"
#include "cohortguard/scoring.hpp"
#include "cohortguard/synthcohort.hpp"
#include "oracles.hpp"

using namespace cohortguard;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure; later checks only append when still passing.
struct Check {
  Outcome o;
  void expect(bool cond, const std::string& what) {
    if (!cond && o.pass) {
      o.pass = false;
      o.detail = what;
    }
  }
};

int failures = 0;

void report(const std::string& name, double limit_s,
            const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("over time limit");
  }
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.2fs", secs);
  std::printf("%s  %-28s %8s  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), timing,
              o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

ScoredPairSet within_language_scores(const CohortDataset& ds) {
  ScoredPairSet all;
  for (const auto& l : languages_of(ds)) {
    auto s = score_pairs(generate_pairs(ds, {ds.id(), l, {}}), ds.matrix());
    all.pairs.insert(all.pairs.end(), s.pairs.begin(), s.pairs.end());
  }
  return all;
}

// --- criteria ------------------------------------------------------------

Outcome pair_counts() {
  Check c;
  std::mt19937_64 rng(20260101);
  std::uint64_t pairs_seen = 0;
  for (int shape = 0; shape < 100; ++shape) {
    const std::size_t m = 1 + rng() % 50;
    const auto ds = cgtest::random_cohort(rng, m, 20, 2, {"en"});
    std::map<std::string, std::uint64_t> n;
    for (const auto& r : ds.records()) ++n[r.speaker_id];
    std::uint64_t big_n = ds.size();
    std::uint64_t pos_formula = 0;
    std::uint64_t twice_neg_formula = 0;
    for (const auto& [_, ni] : n) {
      pos_formula += ni * (ni - 1) / 2;
      twice_neg_formula += ni * (big_n - ni);
    }
    const std::uint64_t neg_formula = twice_neg_formula / 2;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    for (const auto p : generate_pairs(ds, {ds.id(), "en", {}})) {
      (p.label == PairLabel::same_speaker ? pos : neg) += 1;
    }
    pairs_seen += pos + neg;
    const auto plan = plan_pairs(cohort_stats(ds));
    const std::string at = "shape " + std::to_string(shape);
    c.expect(twice_neg_formula % 2 == 0, at + ": odd negative sum");
    c.expect(pos == pos_formula, at + ": positives differ from closed form");
    c.expect(neg == neg_formula, at + ": negatives differ from closed form");
    c.expect(pos + neg == big_n * (big_n - 1) / 2, at + ": total is not C(N,2)");
    c.expect(plan.positive_count == pos && plan.negative_count == neg,
             at + ": plan_pairs disagrees with enumeration");
  }
  if (c.o.pass) c.o.detail = "100 shapes, " + std::to_string(pairs_seen) + " pairs";
  return c.o;
}

Outcome eer_oracle() {
  Check c;
  std::mt19937_64 rng(777);
  double worst = 0;
  std::size_t interpolated = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto set = cgtest::random_scored_set(rng, 500);
    const auto r = eer(set);
    const double want = cgtest::oracle_eer(cgtest::split(set));
    worst = std::max(worst, std::abs(r.eer - want));
    interpolated += r.interpolated;
    c.expect(std::abs(r.eer - want) <= 1e-9, "set " + std::to_string(k) +
                                                 ": eer " + fmt("%.12g", r.eer) +
                                                 " vs oracle " + fmt("%.12g", want));
  }
  if (c.o.pass) {
    c.o.detail = "1000 sets, max |diff| " + fmt("%.3g", worst) + ", " +
                 std::to_string(interpolated) + " interpolated";
  }
  return c.o;
}

Outcome invariance() {
  Check c;
  std::mt19937_64 rng(4242);
  const int cases = 200;

  // Positive scaling of one embedding row.
  double worst_score = 0;
  double worst_eer = 0;
  for (int k = 0; k < cases; ++k) {
    const auto ds = cgtest::random_cohort(rng, 4 + rng() % 10, 6, 32, {"en", "de"});
    const auto before = within_language_scores(ds);
    std::vector<float> data(ds.matrix().data().begin(), ds.matrix().data().end());
    const std::size_t row = rng() % ds.matrix().rows();
    const double scale =
        std::exp(std::uniform_real_distribution<double>(-7.0, 7.0)(rng));
    for (std::size_t d = 0; d < ds.matrix().dim(); ++d) {
      data[row * ds.matrix().dim() + d] *= static_cast<float>(scale);
    }
    auto scaled = std::make_shared<const EmbeddingMatrix>(ds.matrix().rows(),
                                                          ds.matrix().dim(), data);
    const auto ds2 = bind_dataset(ds.records(), scaled, ds.id());
    const auto after = within_language_scores(ds2);
    for (std::size_t p = 0; p < before.pairs.size(); ++p) {
      worst_score =
          std::max(worst_score, std::abs(before.pairs[p].score - after.pairs[p].score));
    }
    if (before.positives() > 0 && before.negatives() > 0) {
      worst_eer = std::max(worst_eer, std::abs(eer(before).eer - eer(after).eer));
    }
  }
  c.expect(worst_score <= 1e-6, "row scaling moved a score by " + fmt("%.3g", worst_score));
  c.expect(worst_eer <= 1e-9, "row scaling moved EER by " + fmt("%.3g", worst_eer));

  // Strictly increasing score transforms.
  const std::vector<std::pair<const char*, std::function<double(double)>>> transforms{
      {"affine", [](double x) { return 3.5 * x - 2.0; }},
      {"exp", [](double x) { return std::exp(x); }},
      {"cube", [](double x) { return x * x * x + x; }},
      {"atan", [](double x) { return std::atan(2.0 * x); }},
      {"logistic", [](double x) { return 1.0 / (1.0 + std::exp(-x)); }},
  };
  // In floating point a transform can merge scores one ulp apart, so it only
  // counts as strictly increasing when it keeps every distinct score distinct.
  double worst_mono = 0;
  int skipped = 0;
  for (int k = 0; k < cases;) {
    const auto set = cgtest::random_scored_set(rng, 300);
    const auto& [name, f] = transforms[k % transforms.size()];
    auto mapped = set;
    for (auto& p : mapped.pairs) p.score = f(p.score);
    std::map<double, double> image;
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
      image[set.pairs[i].score] = mapped.pairs[i].score;
    }
    bool strict = true;
    for (auto it = image.begin(); strict && std::next(it) != image.end(); ++it) {
      strict = it->second < std::next(it)->second;
    }
    if (!strict) {
      ++skipped;
      continue;
    }
    ++k;
    const double d = std::abs(eer(set).eer - eer(mapped).eer);
    worst_mono = std::max(worst_mono, d);
    c.expect(d <= 1e-9, std::string("transform ") + name + " moved EER by " + fmt("%.3g", d));
  }

  // Permutations: pair order for every metric; record order for the pipeline.
  for (int k = 0; k < cases; ++k) {
    auto set = cgtest::random_scored_set(rng, 200);
    const auto e1 = eer(set);
    const auto s1 = sweep(set);
    const auto d1 = format_det_csv(det_curve(set, 16), "x");
    const auto m1 = format_metrics_csv({summarize(set, "x"),
                                        summarize(set, "y", ThresholdPolicy::fpr(0.1)),
                                        summarize(set, "z", ThresholdPolicy::fnr(0.1))});
    const double t = set.pairs[rng() % set.pairs.size()].score;
    const auto r1 = rates_at_threshold(set, t);
    std::shuffle(set.pairs.begin(), set.pairs.end(), rng);
    const auto e2 = eer(set);
    const auto s2 = sweep(set);
    bool same_sweep = s1.size() == s2.size();
    for (std::size_t i = 0; same_sweep && i < s1.size(); ++i) {
      same_sweep = s1[i].threshold == s2[i].threshold && s1[i].tpr == s2[i].tpr &&
                   s1[i].tnr == s2[i].tnr;
    }
    const auto r2 = rates_at_threshold(set, t);
    c.expect(e1.eer == e2.eer && e1.threshold == e2.threshold &&
                 e1.tpr_at == e2.tpr_at && e1.interpolated == e2.interpolated,
             "pair shuffle changed eer()");
    c.expect(same_sweep, "pair shuffle changed sweep()");
    c.expect(d1 == format_det_csv(det_curve(set, 16), "x"), "pair shuffle changed DET");
    c.expect(m1 == format_metrics_csv({summarize(set, "x"),
                                       summarize(set, "y", ThresholdPolicy::fpr(0.1)),
                                       summarize(set, "z", ThresholdPolicy::fnr(0.1))}),
             "pair shuffle changed calibration");
    c.expect(r1.tpr == r2.tpr && r1.tnr == r2.tnr, "pair shuffle changed rates");
  }
  for (int k = 0; k < cases; ++k) {
    const auto ds = cgtest::random_cohort(rng, 3 + rng() % 8, 5, 8, {"en", "de", "ar"});
    auto records = ds.records();
    std::shuffle(records.begin(), records.end(), rng);
    const auto shuffled = bind_dataset(records, ds.shared_matrix(), ds.id());
    BenchmarkConfig cfg;
    const auto a = format_report_csv(run_benchmark({ds}, cfg));
    const auto b = format_report_csv(run_benchmark({shuffled}, cfg));
    c.expect(a == b, "record shuffle changed the benchmark report");
    const auto sa = cohort_stats(ds);
    const auto sb = cohort_stats(shuffled);
    c.expect(sa.per_speaker == sb.per_speaker &&
                 sa.avg_audio_duration_sec == sb.avg_audio_duration_sec,
             "record shuffle changed cohort stats");
  }
  if (c.o.pass) {
    c.o.detail = std::to_string(cases) + " cases each; scale max " +
                 fmt("%.2g", worst_score) + ", monotone max " + fmt("%.2g", worst_mono) +
                 " (" + std::to_string(skipped) + " non-injective draws redrawn)";
  }
  return c.o;
}

SynthSpec separability_spec(double sigma) {
  SynthSpec s;
  s.dataset_id = "sep";
  s.n_speakers = 29;
  s.dim = 192;
  s.samples_mean = 7;
  s.samples_jitter = 2;
  s.noise_sigma = sigma;
  s.seed = 29192;
  return s;
}

Outcome separability() {
  Check c;
  std::string detail;
  double prev = -1;
  std::map<double, double> eer_pct;
  for (double sigma : {0.0, 0.05, 0.2, 0.8}) {
    const auto cohort = generate_cohort(separability_spec(sigma));
    const auto report = run_benchmark({cohort.dataset}, {});
    c.expect(report.rows.size() == 1 && report.rows[0].defined,
             "sigma " + fmt("%g", sigma) + ": no defined row");
    const double e = report.rows[0].eer_pct;
    eer_pct[sigma] = e;
    c.expect(e >= prev, "EER decreased at sigma " + fmt("%g", sigma));
    prev = e;
    detail += (detail.empty() ? "" : ", ") + std::string("sigma ") + fmt("%g", sigma) +
              ": " + fmt("%.2f", e) + "%";
  }
  c.expect(eer_pct[0.05] <= 1.0, "sigma 0.05 EER above 1%");
  c.expect(eer_pct[0.8] >= 20.0, "sigma 0.8 EER below 20%");
  if (c.o.pass) c.o.detail = detail;
  else c.o.detail += " (" + detail + ")";
  return c.o;
}

Outcome dedup_recovery() {
  Check c;
  SynthSpec s;
  s.dataset_id = "dup";
  s.n_speakers = 30;
  s.samples_mean = 7;
  s.samples_jitter = 2;
  s.noise_sigma = 0.1;
  s.duplicate_injections = 3;
  s.seed = 30303;
  const auto cohort = generate_cohort(s);
  LinkPolicy policy;
  policy.threshold = calibrate_threshold(within_language_scores(cohort.dataset),
                                         ThresholdPolicy::eer_point());
  const auto r = find_duplicate_clusters(link_speakers(cohort.dataset, policy));

  std::set<std::set<std::string>> planted;
  for (const auto& [alias, truth] : cohort.ground_truth) planted.insert({alias, truth});
  std::set<std::set<std::string>> found;
  for (const auto& cl : r.clusters) found.insert({cl.speakers.begin(), cl.speakers.end()});
  std::size_t recovered = 0;
  std::size_t spurious = 0;
  for (const auto& f : found) (planted.contains(f) ? recovered : spurious) += 1;
  c.expect(planted.size() == 3, "fixture did not plant 3 duplicates");
  c.expect(recovered == 3, "recovered " + std::to_string(recovered) + " of 3");
  c.expect(spurious == 0, std::to_string(spurious) + " spurious clusters");
  if (c.o.pass) {
    c.o.detail = "3/3 recovered, 0 spurious, threshold " + fmt("%.4f", policy.threshold);
  }
  return c.o;
}

Outcome proximity() {
  Check c;
  const std::vector<std::string> langs{"en", "de", "da", "es", "ar"};
  // Upper triangle as printed in the source table, row-major.
  const double table[5][5] = {{0.0, 31.3, 24.6, 59.3, 85.5},
                              {0, 0.0, 28.3, 56.8, 76.3},
                              {0, 0, 0.0, 51.4, 84.9},
                              {0, 0, 0, 0.0, 76.6},
                              {0, 0, 0, 0, 0.0}};
  int checked = 0;
  for (int i = 0; i < 5; ++i) {
    c.expect(language_proximity(langs[i], langs[i]) == 0.0, langs[i] + " diagonal");
    for (int j = i + 1; j < 5; ++j) {
      const double v = language_proximity(langs[i], langs[j]);
      c.expect(v == table[i][j], langs[i] + "-" + langs[j] + " = " + fmt("%g", v));
      c.expect(language_proximity(langs[j], langs[i]) == v,
               langs[j] + "-" + langs[i] + " not symmetric");
      ++checked;
    }
  }
  bool threw = false;
  try {
    language_proximity("en", "fr");
  } catch (const ValidationError&) {
    threw = true;
  }
  c.expect(threw, "unknown code accepted");
  if (c.o.pass) c.o.detail = std::to_string(checked) + " pairs, symmetric, zero diagonal";
  return c.o;
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

Outcome cli_determinism() {
  Check c;
  cgtest::TempDir dir("accept_cli");
  cgtest::write_file(dir / "spec.json",
                     R"({"n_speakers": 36, "samples_per_speaker": {"mean": 6, "jitter": 2},
                         "dim": 64, "noise_sigma": 0.15, "duplicate_injections": 2,
                         "languages": [{"code": "en", "weight": 2}, {"code": "es", "weight": 1}],
                         "tasks": [{"task": "picture_description", "weight": 1},
                                   {"task": "paragraph_reading", "weight": 1}],
                         "seed": 5150})");
  const auto fx = (dir / "fx").string();
  const std::vector<std::string> in{"--manifest", fx + "/manifest.jsonl", "--embeddings",
                                    fx + "/embeddings.svem"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.begin() + 1, in.begin(), in.end());
    return args;
  };
  const auto out = (dir / "out").string();
  const auto scores = (dir / "scores.csv").string();

  struct Cmd {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::string> files;  // written by the command
  };
  const std::vector<Cmd> cmds{
      {"synth",
       {"synth", "--spec", (dir / "spec.json").string(), "--out-dir", fx},
       {fx + "/manifest.jsonl", fx + "/embeddings.svem", fx + "/ground_truth.csv",
        fx + "/fixture.json"}},
      {"validate", with({"validate"}), {}},
      {"stats", with({"stats", "--group-by", "language,task", "--format", "text"}), {}},
      {"pairs", with({"pairs", "--out", out}), {out}},
      {"eval", with({"eval", "--group-by", "language,task", "--threads", "4", "--out", out}),
       {out}},
      {"eval-balanced",
       with({"eval", "--balance-speakers", "10", "--seed", "7", "--format", "text"}),
       {}},
      {"det", with({"det", "--max-points", "25", "--out", out}), {out}},
      {"calibrate",
       with({"calibrate", "--threshold-policy", "target-fpr:0.05", "--scores-out", scores}),
       {scores}},
      {"dedup", with({"dedup", "--threads", "3", "--out", out}), {out}},
      {"dedup-from-scores", with({"dedup", "--calibrate-from", scores}), {}},
      {"balance", with({"balance", "--target-speakers", "12", "--seed", "7"}), {}},
  };
  std::size_t compared = 0;
  for (const auto& cmd : cmds) {
    std::vector<std::string> snapshots[2];
    for (int rep = 0; rep < 2; ++rep) {
      const auto r = run(cmd.args);
      c.expect(r.code == 0, cmd.name + " exited " + std::to_string(r.code) + ": " + r.err);
      snapshots[rep].push_back(r.out);
      snapshots[rep].push_back(r.err);
      for (const auto& f : cmd.files) snapshots[rep].push_back(cgtest::read_file(f));
    }
    c.expect(snapshots[0] == snapshots[1], cmd.name + " output differs between runs");
    compared += snapshots[0].size();
  }
  // Worker count must not change outputs either.
  const auto t1 = run(with({"eval", "--threads", "1"}));
  const auto t8 = run(with({"eval", "--threads", "8"}));
  c.expect(t1.out == t8.out, "eval output depends on --threads");
  if (c.o.pass) {
    c.o.detail = std::to_string(cmds.size()) + " invocations x2, " +
                 std::to_string(compared) + " streams/files byte-identical";
  }
  return c.o;
}

Outcome format_round_trip() {
  Check c;
  cgtest::TempDir dir("accept_fmt");
  SynthSpec s;
  s.n_speakers = 20;
  s.samples_jitter = 3;
  s.duplicate_injections = 2;
  s.languages = {{"de", 1}, {"da", 1}, {"ar", 1}};
  s.tasks = {{Task::semantic_fluency, 1}, {Task::paragraph_recall, 1}};
  s.seed = 808;
  const auto cohort = generate_cohort(s);
  const auto paths = FixturePaths::in(dir.path());
  write_fixture(cohort, s, paths);
  auto matrix = std::make_shared<const EmbeddingMatrix>(load_embeddings(paths.embeddings));
  const auto back = bind_dataset(load_manifest(paths.manifest), matrix, s.dataset_id);
  c.expect(back.records() == cohort.dataset.records(), "records differ after reload");
  c.expect(back.matrix() == cohort.dataset.matrix(), "matrix not bitwise equal");
  c.expect(encode_svem(back.matrix()) == encode_svem(cohort.dataset.matrix()),
           "re-encoded bytes differ");

  const auto bytes = cgtest::read_file(paths.embeddings);
  const std::string manifest = paths.manifest.string();
  auto validate = [&](const std::string& svem) {
    return run({"validate", "--manifest", manifest, "--embeddings", svem});
  };
  auto corrupt = [&](const std::string& name, std::string content) {
    const auto p = (dir / name).string();
    cgtest::write_file(p, content);
    return validate(p);
  };
  const auto ok = validate(paths.embeddings.string());
  c.expect(ok.code == 0, "validate on the fixture exited " + std::to_string(ok.code));

  auto magic = bytes;
  magic[0] = 'X';
  const auto r_magic = corrupt("magic.svem", magic);
  c.expect(r_magic.code == 3 && r_magic.err.find("bad magic") != std::string::npos,
           "bad magic: exit " + std::to_string(r_magic.code) + " " + r_magic.err);

  auto version = bytes;
  version[4] = 2;
  const auto r_version = corrupt("version.svem", version);
  c.expect(r_version.code == 3 && r_version.err.find("version") != std::string::npos,
           "bad version: exit " + std::to_string(r_version.code));

  auto reserved = bytes;
  reserved[21] = 1;
  const auto r_reserved = corrupt("reserved.svem", reserved);
  c.expect(r_reserved.code == 3, "nonzero reserved: exit " + std::to_string(r_reserved.code));

  const std::size_t payload = bytes.size() - 24;
  const auto r_trunc = corrupt("trunc.svem", bytes.substr(0, bytes.size() - 10));
  const std::string want = "expected " + std::to_string(payload) + " bytes, got " +
                           std::to_string(payload - 10);
  c.expect(r_trunc.code == 3 && r_trunc.err.find(want) != std::string::npos,
           "truncation: exit " + std::to_string(r_trunc.code) + " " + r_trunc.err);

  const auto r_header = corrupt("short.svem", bytes.substr(0, 13));
  c.expect(r_header.code == 3, "short header: exit " + std::to_string(r_header.code));

  const auto r_missing = validate((dir / "absent.svem").string());
  c.expect(r_missing.code == 3, "missing file: exit " + std::to_string(r_missing.code));

  auto records = cohort.dataset.records();
  records[5].embedding_row = 1u << 20;
  write_manifest(records, dir / "orphan.jsonl");
  const auto r_orphan = run({"validate", "--manifest", (dir / "orphan.jsonl").string(),
                             "--embeddings", paths.embeddings.string()});
  c.expect(r_orphan.code == 1 && r_orphan.err.find(records[5].sample_id) != std::string::npos,
           "bad embedding_row: exit " + std::to_string(r_orphan.code));

  if (c.o.pass) {
    c.o.detail = "bitwise reload; magic/version/reserved/short/truncated -> 3, "
                 "bad row -> 1";
  }
  return c.o;
}

}  // namespace

int main() {
  report("pair-count identities", 5, pair_counts);
  report("eer oracle equivalence", 30, eer_oracle);
  report("invariance suite", 0, invariance);
  report("synthetic separability", 60, separability);
  report("dedup recovery", 30, dedup_recovery);
  report("proximity table", 0, proximity);
  report("cli determinism", 0, cli_determinism);
  report("format round-trip", 0, format_round_trip);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
