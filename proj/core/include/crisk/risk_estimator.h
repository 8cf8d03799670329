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

// Monte Carlo risk estimation and weighted scene-risk datasets.

#ifndef CRISK_RISK_ESTIMATOR_H_
#define CRISK_RISK_ESTIMATOR_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "crisk/features.h"
#include "crisk/rng.h"
#include "crisk/scene.h"
#include "crisk/scene_model.h"
#include "crisk/traffic_sim.h"

namespace crisk {

struct RiskEstimate {
  double p = 0.0;
  int n = 0;
  int collisions = 0;
  double stderr_ = 0.0;
  // First ego collision step of each rollout, -1 when none.
  std::vector<int> collision_steps;
};

// p = k / n over n Bernoulli trials; trial i gets its own RNG seeded with
// derive_seed(seed, kRollout, i).
RiskEstimate estimate_bernoulli(int n, std::uint64_t seed,
                                const std::function<bool(Rng&)>& trial);

// n independent rollouts; p is the fraction with Y_h = 1. Rollout i uses
// derive_seed(seed, kRollout, i). SimulationErrors are rethrown with the
// rollout index prepended.
RiskEstimate estimate_risk(const Scene& scene, std::size_t ego, int n,
                           const SimConfig& config, std::uint64_t seed);

enum class Domain { kSource, kTarget };
std::string_view domain_name(Domain d);
Domain domain_from_name(std::string_view name);

struct WeightedSample {
  std::vector<double> x;
  double y = 0.0;
  double w = 1.0;
  Domain domain = Domain::kSource;
  std::int64_t scene_id = 0;
  int ego_id = 0;
  std::vector<int> collision_steps;  // per rollout, -1 when none
};

struct SourceConfig {
  int scenes = 2000;
  int num_vehicles = 20;
  int ego_index = 19;  // rear-most
  int rollouts = 100;
  SimConfig sim;
  RoadSpec road;
  int neighbors = kDefaultNeighbors;
  double ttc_cap = kDefaultTtcCap;
  int threads = 1;

  void validate() const;
};

// Source dataset: scene s is sampled with derive_seed(seed, kSceneSample, s),
// the ego drawn from Q when given (w = rho1/Q) and w = 1 otherwise, then
// labeled with estimate_risk(seed' = derive_seed(seed, kRollout, s)).
std::vector<WeightedSample> build_dataset(const SceneBayesNet& rho1,
                                          const SceneBayesNet* proposal,
                                          const SourceConfig& config,
                                          std::uint64_t seed);

// Target labels: window-collision rate, or the rate of a time-to-collision
// below `ttc_threshold` inside the window.
enum class TargetLabel { kCollision, kLowTtc };
std::string_view target_label_name(TargetLabel l);
TargetLabel target_label_from_name(std::string_view name);

struct TargetConfig {
  int scenes = 60;
  int first_scene_id = 0;
  int vehicles_per_scene = 70;
  int burn_in_steps = 600;
  int rollouts = 100;
  SimConfig sim;
  RoadSpec road{1400.0, true, 1, 3.7};
  TargetLabel label = TargetLabel::kCollision;
  double ttc_threshold = 3.0;  // s
  int neighbors = kDefaultNeighbors;
  double ttc_cap = kDefaultTtcCap;
  int threads = 1;

  void validate() const;
};

// Heuristic circular-track domain: every vehicle of every burned-in scene is
// one sample with w = 1. All vehicles share each rollout (rollout_all).
std::vector<WeightedSample> build_target_dataset(const TargetConfig& config,
                                                 std::uint64_t seed);

// (1/m) sum w_i y_i. Throws DataError when empty.
double unconditional_collision_prob(std::span<const WeightedSample> samples);
// Standard error of the mean of w_i y_i.
double unconditional_collision_stderr(std::span<const WeightedSample> samples);

}  // namespace crisk

#endif  // CRISK_RISK_ESTIMATOR_H_
