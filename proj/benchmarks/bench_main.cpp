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

// Throughput of the scoring, pairing and metric kernels on synthetic cohorts.

#include <benchmark/benchmark.h>

#include <map>
#include <random>
#include <vector>

#include "cohortguard/metrics.hpp"
#include "cohortguard/pairing.hpp"
#include "cohortguard/scoring.hpp"
#include "cohortguard/synthcohort.hpp"

using namespace cohortguard;

namespace {

const SynthCohort& cohort(std::size_t speakers) {
  static std::map<std::size_t, SynthCohort> cache;
  auto it = cache.find(speakers);
  if (it == cache.end()) {
    SynthSpec s;
    s.n_speakers = speakers;
    s.samples_mean = 8;
    s.samples_jitter = 3;
    s.noise_sigma = 0.2;
    s.seed = 17;
    it = cache.emplace(speakers, generate_cohort(s)).first;
  }
  return it->second;
}

void BM_ScoreMatrix(benchmark::State& state) {
  const auto& m = cohort(120).dataset.matrix();
  const auto block = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_matrix(m, block));
  }
  state.SetItemsProcessed(state.iterations() * m.rows() * (m.rows() - 1) / 2);
}
BENCHMARK(BM_ScoreMatrix)->Arg(16)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_ScorePairs(benchmark::State& state) {
  const auto& ds = cohort(200).dataset;
  const auto pairs = generate_pairs(ds, {ds.id(), "en", {}});
  ScoringOptions opt;
  opt.threads = static_cast<unsigned>(state.range(0));
  std::size_t n = 0;
  for (auto _ : state) {
    const auto s = score_pairs(pairs, ds.matrix(), opt);
    n = s.pairs.size();
    benchmark::DoNotOptimize(s.pairs.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_ScorePairs)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_GeneratePairs(benchmark::State& state) {
  const auto& ds = cohort(static_cast<std::size_t>(state.range(0))).dataset;
  std::size_t n = 0;
  for (auto _ : state) {
    n = 0;
    for (const auto p : generate_pairs(ds, {ds.id(), "en", {}})) {
      benchmark::DoNotOptimize(p);
      ++n;
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_GeneratePairs)->Arg(50)->Arg(200)->Arg(500);

void BM_Eer(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> pos(n / 10);
  std::vector<double> neg(n - n / 10);
  for (auto& v : pos) v = g(rng) + 2.0;
  for (auto& v : neg) v = g(rng);
  const auto set = make_scored_set(pos, neg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eer(set));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Eer)->Arg(1000)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
