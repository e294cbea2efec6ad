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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cohortguard/error.hpp"
#include "cohortguard/metrics.hpp"
#include "cohortguard/pairing.hpp"
#include "cohortguard/scoring.hpp"
#include "cohortguard/synthcohort.hpp"
#include "oracles.hpp"

using namespace cohortguard;

TEST(Rng, DeterministicAndInRange) {
  DeterministicRng a(5);
  DeterministicRng b(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    ASSERT_EQ(u, b.uniform());
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(a.below(7), 7u);
    b.below(7);
  }
  EXPECT_THROW(a.below(0), ValidationError);
}

TEST(Rng, NormalMoments) {
  DeterministicRng r(8);
  double s = 0;
  double ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    ss += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(Synth, ZeroNoiseSamplesAreIdentical) {
  SynthSpec spec;
  spec.n_speakers = 4;
  spec.noise_sigma = 0.0;
  spec.dim = 16;
  const auto c = generate_cohort(spec);
  const auto& ds = c.dataset;
  for (const auto p : generate_pairs(ds, {ds.id(), "en", {}})) {
    if (p.label == PairLabel::same_speaker) {
      EXPECT_EQ(row_cosine(ds.matrix(), p.row_a, p.row_b), 1.0);
    }
  }
}

TEST(Synth, OrthogonalCentroidsGiveZeroCrossScore) {
  SynthSpec spec;
  spec.n_speakers = 2;
  spec.noise_sigma = 0.0;
  spec.dim = 8;
  spec.orthogonal_centroids = true;
  const auto c = generate_cohort(spec);
  const auto& ds = c.dataset;
  for (const auto p : generate_pairs(ds, {ds.id(), "en", {}})) {
    if (p.label == PairLabel::different_speaker) {
      EXPECT_NEAR(row_cosine(ds.matrix(), p.row_a, p.row_b), 0.0, 1e-7);
    }
  }
}

TEST(Synth, DuplicatesShareCentroidAndLanguage) {
  SynthSpec spec;
  spec.n_speakers = 12;
  spec.noise_sigma = 0.0;
  spec.duplicate_injections = 3;
  spec.languages = {{"en", 1}, {"de", 1}, {"ar", 2}};
  const auto c = generate_cohort(spec);
  ASSERT_EQ(c.ground_truth.size(), 3u);
  const auto& ds = c.dataset;
  auto first_row = [&](const std::string& spk) {
    for (const auto& r : ds.records()) {
      if (r.speaker_id == spk) return r;
    }
    throw std::runtime_error("missing " + spk);
  };
  for (const auto& [alias, truth] : c.ground_truth) {
    const auto a = first_row(alias);
    const auto t = first_row(truth);
    EXPECT_EQ(a.language, t.language);
    EXPECT_EQ(row_cosine(ds.matrix(), a.embedding_row, t.embedding_row), 1.0);
  }
  EXPECT_EQ(cohort_stats(ds).speakers, 12u);
}

TEST(Synth, SpecValidation) {
  SynthSpec s;
  s.dim = 1;
  EXPECT_THROW(validate(s), ValidationError);
  s = {};
  s.languages = {{"en", 0.0}};
  EXPECT_THROW(validate(s), ValidationError);
  s = {};
  s.duplicate_injections = s.n_speakers;
  EXPECT_THROW(validate(s), ValidationError);
  s = {};
  s.languages = {{"english", 1.0}};
  EXPECT_THROW(validate(s), ValidationError);
  EXPECT_THROW(parse_synth_spec("{\"n_speakers\":3,\"seed\":1,\"bogus\":1}"),
               ValidationError);
  EXPECT_THROW(parse_synth_spec("{\"n_speakers\":3}"), ValidationError);
}

TEST(Synth, SpecJsonRoundTrip) {
  SynthSpec s;
  s.n_speakers = 9;
  s.samples_mean = 4.5;
  s.samples_jitter = 2;
  s.noise_sigma = 0.25;
  s.languages = {{"de", 2.0}, {"es", 1.0}};
  s.tasks = {{Task::journaling, 1.0}, {Task::phonemic_fluency, 3.0}};
  s.duplicate_injections = 2;
  s.seed = 123456789012345ull;
  s.model_tag = "titanet";
  const auto back = parse_synth_spec(format_synth_spec(s));
  EXPECT_EQ(format_synth_spec(back), format_synth_spec(s));
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.languages, s.languages);
}

TEST(Synth, FixtureRoundTripAndDeterminism) {
  SynthSpec spec;
  spec.n_speakers = 10;
  spec.samples_jitter = 3;
  spec.duplicate_injections = 2;
  spec.languages = {{"en", 1}, {"da", 1}};
  spec.seed = 99;
  const auto c = generate_cohort(spec);
  cgtest::TempDir d1("fx1");
  cgtest::TempDir d2("fx2");
  write_fixture(c, spec, FixturePaths::in(d1.path()));
  write_fixture(generate_cohort(spec), spec, FixturePaths::in(d2.path()));
  for (const char* f : {"manifest.jsonl", "embeddings.svem", "ground_truth.csv",
                        "fixture.json"}) {
    EXPECT_EQ(cgtest::read_file(d1 / f), cgtest::read_file(d2 / f)) << f;
  }
  const auto paths = FixturePaths::in(d1.path());
  auto matrix = std::make_shared<const EmbeddingMatrix>(load_embeddings(paths.embeddings));
  const auto back = bind_dataset(load_manifest(paths.manifest), matrix, spec.dataset_id);
  EXPECT_EQ(back.records(), c.dataset.records());
  EXPECT_TRUE(back.matrix() == c.dataset.matrix());
  EXPECT_NE(cgtest::read_file(paths.metadata).find(kSynthGenerator), std::string::npos);
  EXPECT_EQ(cgtest::read_file(paths.ground_truth).rfind("alias_speaker_id,true_speaker_id\n", 0),
            0u);
}

TEST(Synth, DifferentSeedsDiffer) {
  SynthSpec a;
  SynthSpec b;
  b.seed = 1;
  EXPECT_FALSE(generate_cohort(a).dataset.matrix() == generate_cohort(b).dataset.matrix());
}

TEST(Synth, NoiseControlsSeparability) {
  SynthSpec s;
  s.n_speakers = 20;
  s.seed = 4;
  double prev = -1;
  for (double sigma : {0.0, 0.05, 0.2, 0.8}) {
    s.noise_sigma = sigma;
    const auto c = generate_cohort(s);
    const auto scored = score_pairs(generate_pairs(c.dataset, {"synth", "en", {}}),
                                    c.dataset.matrix());
    const double e = eer(scored).eer;
    EXPECT_GE(e, prev) << sigma;
    prev = e;
  }
  EXPECT_GT(prev, 0.2);
}
