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

// Fixed-step traffic simulation: errorable drivers act, a kinematic bicycle
// model propagates, collisions are detected, and ego collisions terminate.

#ifndef CRISK_TRAFFIC_SIM_H_
#define CRISK_TRAFFIC_SIM_H_

#include <cstddef>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "crisk/rng.h"
#include "crisk/scene.h"

namespace crisk {

struct SimConfig {
  double dt = 0.1;           // s
  int horizon = 200;         // H, steps
  int collision_start = 100;  // h, steps
  bool noise = true;
  bool errors = true;
  double max_decel = 9.0;  // m/s^2, braking limit applied to every action

  // Throws RangeError unless dt > 0, 0 <= h <= H, and max_decel > 0.
  void validate() const;
  ErrorableOptions driver_options() const;
};

struct RolloutResult {
  bool collision = false;  // Y_h
  std::optional<int> collision_step;
  std::optional<int> partner_id;
  bool terminated_early = false;
  int steps = 0;
};

// Kinematic state advanced by bicycle_step.
struct KinematicState {
  double position = 0.0;
  double lane_offset = 0.0;
  double heading = 0.0;
  double velocity = 0.0;
  double turn_rate = 0.0;  // output: yaw rate applied during the step
};

// Forward Euler on the kinematic bicycle equations
//   x' = v cos(psi), y' = v sin(psi), psi' = a_lat / v, v' = a_lon,
// with the yaw rate zeroed below 0.1 m/s, v clamped at 0, psi wrapped to
// (-pi, pi].
KinematicState bicycle_step(const KinematicState& s, double longitudinal_accel,
                            double lateral_accel, double dt);

double wrap_angle(double a);

// Index pairs (i < j) of colliding vehicles among those not yet collided.
// Same-lane pairs collide when the bumper gap is <= 1e-9; pairs in different
// lanes collide when their oriented rectangles overlap.
std::vector<std::pair<std::size_t, std::size_t>> detect_collisions(
    const Scene& scene);

// One (step, vehicle) row of a trajectory trace.
struct TraceRecord {
  int step = 0;
  int vehicle = 0;
  double position = 0.0;
  double lane_offset = 0.0;
  double heading = 0.0;
  double velocity = 0.0;
  double accel = 0.0;
  double lateral_accel = 0.0;
  int lane = 0;
  bool collided = false;
  bool has_leader = false;
  double leader_gap = 0.0;
  double leader_velocity = 0.0;
};

struct Trace {
  int horizon = 0;
  bool terminated = false;  // stopped by an ego collision
  int last_step = 0;
  std::vector<TraceRecord> records;
};

void write_trace_jsonl(const Trace& trace, std::ostream& out);

// Simulates up to H steps from `scene`, terminating at the first collision
// involving the ego. Non-ego vehicles that collide leave the simulation:
// they are frozen and no longer seen as leaders. Throws SimulationError on a
// non-finite state.
RolloutResult rollout(const Scene& scene, std::size_t ego,
                      const SimConfig& config, Rng& rng,
                      Trace* trace = nullptr);

// Runs the full horizon with every vehicle treated as an ego and returns each
// vehicle's first collision step. With the same RNG state, entry i equals
// rollout(scene, i, ...).collision_step: collided vehicles leave the
// simulation in both.
//
// When `probe` is set, it also records each vehicle's first step at or after
// `start` with time-to-collision below the threshold. A collision at or
// after `start` counts as zero TTC; an earlier one ends the vehicle's run.
struct LowTtcProbe {
  double threshold = 3.0;  // s
  int start = 0;
  std::vector<std::optional<int>> first;
};
std::vector<std::optional<int>> rollout_all(const Scene& scene,
                                            const SimConfig& config, Rng& rng,
                                            LowTtcProbe* probe = nullptr);

// Random circular-track initialization followed by `steps` simulated steps
// with noise and driver errors. Collisions are resolved instead of being
// terminal: the rear vehicle takes the fore vehicle's velocity and drops
// back to a gap of s0 + 1 m.
struct BurnInOptions {
  double min_length = 4.0;
  double max_length = 5.5;
  double min_width = 1.7;
  double max_width = 2.1;
  double min_speed = 10.0;
  double max_speed = 30.0;
  double dt = 0.1;
  double max_decel = 9.0;  // m/s^2
};
Scene burn_in_scene(const RoadSpec& road, int num_vehicles, int steps,
                    Rng& rng, const BurnInOptions& options = {});

}  // namespace crisk

#endif  // CRISK_TRAFFIC_SIM_H_
