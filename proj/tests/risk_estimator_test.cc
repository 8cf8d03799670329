// Copyright 2026 The crisk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crisk/risk_estimator.h"

#include <gtest/gtest.h>

#include <cmath>

#include "crisk/error.h"
#include "test_util.h"

namespace crisk {
namespace {

using testing::CollisionToy;

SourceConfig toy_source(int scenes) {
  SourceConfig c;
  c.scenes = scenes;
  c.num_vehicles = 2;
  c.ego_index = 1;
  c.rollouts = 2;
  c.sim = CollisionToy::sim();
  return c;
}

TEST(EstimateBernoulli, MatchesRate) {
  const auto est = estimate_bernoulli(
      20000, 5, [](Rng& rng) { return uniform01(rng) < 0.07; });
  EXPECT_EQ(est.n, 20000);
  EXPECT_EQ(est.p, est.collisions / 20000.0);
  EXPECT_DOUBLE_EQ(est.stderr_, std::sqrt(est.p * (1 - est.p) / 20000));
  const double se = std::sqrt(0.07 * 0.93 / 20000);
  EXPECT_NEAR(est.p, 0.07, 4 * se);
}

TEST(EstimateBernoulli, Reproducible) {
  const auto trial = [](Rng& rng) { return uniform01(rng) < 0.3; };
  EXPECT_EQ(estimate_bernoulli(500, 9, trial).collisions,
            estimate_bernoulli(500, 9, trial).collisions);
  EXPECT_THROW(estimate_bernoulli(0, 9, trial), RangeError);
}

TEST(EstimateRisk, CertainAndImpossibleScenes) {
  const SceneBayesNet sure = CollisionToy{1.0, 1.0, 0.5}.bn();
  const SceneBayesNet never = CollisionToy{0.0, 1.0, 0.5}.bn();
  Rng rng(3);
  const Scene a = sample_scene(sure, 2, RoadSpec{}, rng);
  const Scene b = sample_scene(never, 2, RoadSpec{}, rng);
  const auto ra = estimate_risk(a, 1, 20, CollisionToy::sim(), 1);
  const auto rb = estimate_risk(b, 1, 20, CollisionToy::sim(), 1);
  EXPECT_EQ(ra.p, 1.0);
  EXPECT_EQ(ra.stderr_, 0.0);
  EXPECT_EQ(rb.p, 0.0);
  ASSERT_EQ(ra.collision_steps.size(), 20u);
  for (int s : ra.collision_steps) EXPECT_GE(s, 0);
  for (int s : rb.collision_steps) EXPECT_EQ(s, -1);
}

TEST(BuildDataset, NoProposalHasUnitWeights) {
  const SceneBayesNet bn = CollisionToy{}.bn();
  const auto data = build_dataset(bn, nullptr, toy_source(50), 7);
  ASSERT_EQ(data.size(), 50u);
  const FeatureSchema schema;
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(data[i].w, 1.0);
    EXPECT_EQ(data[i].scene_id, static_cast<std::int64_t>(i));
    EXPECT_EQ(data[i].domain, Domain::kSource);
    EXPECT_EQ(data[i].x.size(), schema.size());
    EXPECT_EQ(data[i].collision_steps.size(), 2u);
    // Labels are exact multiples of 1 / rollouts.
    EXPECT_EQ(data[i].y * 2, std::round(data[i].y * 2));
  }
}

TEST(BuildDataset, EmptyAndInvalid) {
  const SceneBayesNet bn = CollisionToy{}.bn();
  EXPECT_TRUE(build_dataset(bn, nullptr, toy_source(0), 7).empty());
  SourceConfig bad = toy_source(1);
  bad.ego_index = 2;
  EXPECT_THROW(build_dataset(bn, nullptr, bad, 7), RangeError);
  const SceneBayesNet other = testing::single_bin_bn();
  EXPECT_THROW(build_dataset(bn, &other, toy_source(1), 7), RangeError);
}

TEST(BuildDataset, ReproducibleAcrossThreadCounts) {
  const SceneBayesNet bn = CollisionToy{}.bn();
  SourceConfig c = toy_source(40);
  const auto a = build_dataset(bn, nullptr, c, 11);
  c.threads = 3;
  const auto b = build_dataset(bn, nullptr, c, 11);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
  }
}

TEST(BuildDataset, CrudeAndWeightedEstimatesAreUnbiased) {
  const CollisionToy toy;
  const SceneBayesNet rho1 = toy.bn();
  const SceneBayesNet q = CollisionToy{0.5, 0.5, 0.5}.bn();
  const auto crude = build_dataset(rho1, nullptr, toy_source(20000), 1);
  const auto is = build_dataset(rho1, &q, toy_source(5000), 2);
  const double exact = toy.exact();
  EXPECT_NEAR(unconditional_collision_prob(crude), exact,
              3 * unconditional_collision_stderr(crude));
  const double se_is = unconditional_collision_stderr(is);
  EXPECT_NEAR(unconditional_collision_prob(is), exact, 3 * se_is);
  EXPECT_LT(se_is, unconditional_collision_stderr(crude));
}

TEST(UnconditionalProb, HandValues) {
  std::vector<WeightedSample> s(3);
  s[0].y = 0.0;
  s[1].y = 0.5;
  s[1].w = 2.0;
  s[2].y = 1.0;
  s[2].w = 2.0;
  // w*y = {0, 1, 2}: mean 1, sample variance 1.
  EXPECT_DOUBLE_EQ(unconditional_collision_prob(s), 1.0);
  EXPECT_DOUBLE_EQ(unconditional_collision_stderr(s), std::sqrt(1.0 / 3.0));
  EXPECT_THROW(unconditional_collision_prob({}), DataError);
}

TEST(Domain, Names) {
  EXPECT_EQ(domain_from_name(domain_name(Domain::kSource)), Domain::kSource);
  EXPECT_EQ(domain_from_name(domain_name(Domain::kTarget)), Domain::kTarget);
  EXPECT_THROW(domain_from_name("ocean"), DataError);
}

TEST(BuildTargetDataset, SceneMajorLayout) {
  TargetConfig c;
  c.scenes = 2;
  c.first_scene_id = 5;
  c.vehicles_per_scene = 8;
  c.burn_in_steps = 20;
  c.rollouts = 3;
  c.sim.horizon = 30;
  c.sim.collision_start = 10;
  const auto data = build_target_dataset(c, 4);
  ASSERT_EQ(data.size(), 16u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(data[i].scene_id, static_cast<std::int64_t>(5 + i / 8));
    EXPECT_EQ(data[i].ego_id, static_cast<int>(i % 8));
    EXPECT_EQ(data[i].domain, Domain::kTarget);
    EXPECT_EQ(data[i].w, 1.0);
    EXPECT_EQ(data[i].y * 3, std::round(data[i].y * 3));
    EXPECT_EQ(data[i].collision_steps.size(), 3u);
  }
  // A scene id depends only on its own seed stream.
  c.scenes = 1;
  c.first_scene_id = 6;
  const auto tail = build_target_dataset(c, 4);
  for (std::size_t v = 0; v < 8; ++v) {
    EXPECT_EQ(tail[v].x, data[8 + v].x);
    EXPECT_EQ(tail[v].y, data[8 + v].y);
  }
}

}  // namespace
}  // namespace crisk
