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

// Single-vehicle importance sampling over the scene model and cross-entropy
// learning of the proposal.

#ifndef CRISK_IMPORTANCE_SAMPLER_H_
#define CRISK_IMPORTANCE_SAMPLER_H_

#include <cstdint>
#include <ostream>
#include <vector>

#include "crisk/rng.h"
#include "crisk/scene.h"
#include "crisk/scene_model.h"
#include "crisk/traffic_sim.h"

namespace crisk {

struct ProposalDraw {
  Scene scene;
  double w = 1.0;
  BinAssignment ego_bins{};
  VehicleRecord ego_values;
};

// Vehicles other than `ego` follow rho1's chain; the ego's variables are
// drawn from `proposal` given the realized velocity of vehicle ego - 1, and
// w = P_rho1(ego bins | fore bin) / P_Q(ego bins | fore bin). Throws
// SupportError when a proposal row used by the draw has a zero where rho1 is
// positive, and RangeError when the structures differ.
ProposalDraw sample_with_proposal(const SceneBayesNet& rho1,
                                  const SceneBayesNet& proposal,
                                  std::size_t ego, int num_vehicles,
                                  const RoadSpec& road, Rng& rng);

struct CemConfig {
  int population = 1000;
  int rollouts = 4;
  double elite_fraction = 0.01;
  double alpha = 0.7;
  int max_iterations = 20;
  double stop_probability = 1.1;  // stop once the Q rate exceeds this
  double pseudo_count = 0.1;
  int ego_index = 19;
  int num_vehicles = 20;
  SimConfig sim;  // window [collision_start, horizon]
  RoadSpec road;
  int threads = 1;

  // Throws RangeError on an invalid configuration.
  void validate() const;
  int elite_count() const;
};

struct CemRecord {
  int iteration = 0;
  double collision_prob = 0.0;  // mean window-collision rate under Q
  double elite_threshold = 0.0;
  bool degenerate = false;  // no candidate scored above zero
  double mean_attentive = 0.0;
  double mean_aggressiveness = 0.0;
  double mean_relative_velocity = 0.0;
};

struct CemHistory {
  std::vector<CemRecord> records;
};

// One iteration: sample the population from Q, score each candidate by its
// window-collision fraction over `rollouts` rollouts, keep the top
// elite_count (ties by index) excluding zero scores, refit the ego CPTs on the elites with
// Laplace smoothing, and blend Q' = alpha fit + (1 - alpha) Q row-wise.
// Rows without elite observations keep Q's row.
struct CemStep {
  SceneBayesNet proposal;
  CemRecord record;
};
CemStep cem_iteration(const SceneBayesNet& proposal, const SceneBayesNet& rho1,
                      const CemConfig& config, std::uint64_t seed,
                      int iteration = 0);

struct CemResult {
  SceneBayesNet proposal;
  CemHistory history;
};
CemResult run_cem(const SceneBayesNet& rho1, const CemConfig& config,
                  std::uint64_t seed);

void write_cem_history_csv(const CemHistory& history, std::ostream& out);

}  // namespace crisk

#endif  // CRISK_IMPORTANCE_SAMPLER_H_
