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

// Driver behavior: a collision-inclusive IDM longitudinal law wrapped in an
// errorable driver (observation delay plus a two-state attentiveness chain),
// MOBIL lane-change decisions, and aggressiveness-correlated parameter
// sampling.

#ifndef CRISK_DRIVER_MODELS_H_
#define CRISK_DRIVER_MODELS_H_

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "crisk/rng.h"

namespace crisk {

struct DriverParams {
  // IDM.
  double max_accel = 4.0;          // m/s^2
  double desired_velocity = 30.0;  // m/s
  double min_distance = 2.0;       // m
  double time_headway = 0.6;       // s
  double comfort_decel = 3.5;      // m/s^2
  // MOBIL.
  double politeness = 0.3;
  double safe_decel = 2.0;       // m/s^2
  double accel_threshold = 0.355;  // m/s^2
  // Errorable driver.
  double reaction_time = 0.2;  // s
  double p_inattentive_given_attentive = 0.05;
  double p_attentive_given_inattentive = 0.3;

  double aggressiveness = 0.5;  // [0, 1]
  bool attentive = true;        // initial attentiveness
};

// Bounds of one aggressiveness-interpolated parameter. `most` is the value
// at agg = 1, `least` at agg = 0.
struct ParamBounds {
  std::string_view name;
  double most;
  double least;
  double DriverParams::*field;

  double lo() const { return most < least ? most : least; }
  double hi() const { return most < least ? least : most; }
  double mean_at(double agg) const { return least + agg * (most - least); }
};

inline constexpr double kParamStdFraction = 0.03;
inline constexpr double kReactionTime = 0.2;
inline constexpr double kInattentiveGivenAttentive = 0.05;
inline constexpr double kAttentiveGivenInattentive = 0.3;

// IDM and MOBIL parameter bounds, ordered as they are drawn.
inline constexpr std::array<ParamBounds, 8> kParamBounds{{
    {"max_accel", 6.0, 2.0, &DriverParams::max_accel},
    {"desired_velocity", 35.0, 25.0, &DriverParams::desired_velocity},
    {"min_distance", 0.0, 4.0, &DriverParams::min_distance},
    {"time_headway", 0.2, 1.0, &DriverParams::time_headway},
    {"comfort_decel", 5.0, 2.0, &DriverParams::comfort_decel},
    {"politeness", 0.1, 0.5, &DriverParams::politeness},
    {"safe_decel", 2.0, 2.0, &DriverParams::safe_decel},
    {"accel_threshold", 0.01, 0.7, &DriverParams::accel_threshold},
}};

// Draws IDM/MOBIL parameters from Gaussians centered on the interpolation
// between the least- and most-aggressive bounds, with std equal to 3% of the
// range, truncated (by rejection) to the bounds. Errorable parameters are
// fixed. Throws RangeError if agg is outside [0, 1].
DriverParams sample_driver_params(double aggressiveness, Rng& rng);

// Truncated Gaussian on [lo, hi] by rejection; degenerate when std == 0 or
// lo == hi.
double sample_truncated_normal(double mean, double stddev, double lo,
                               double hi, Rng& rng);

// Intelligent Driver Model acceleration:
//   a = a_max [1 - (v/v0)^4 - (s*/gap)^2],
//   s* = s0 + v T + v dv / (2 sqrt(a_max b)),
// with dv = v_rear - v_fore (positive when closing). No clamping of the
// result. gap must be positive; a collided vehicle must bypass the IDM.
double idm_accel(const DriverParams& params, double velocity, double gap,
                 double closing_speed);

// IDM on an empty road.
double idm_free_accel(const DriverParams& params, double velocity);

// Desired gap s* (may be negative when opening fast).
double idm_desired_gap(const DriverParams& params, double velocity,
                       double closing_speed);

enum class LaneDecision { kStay, kLeft, kRight };

struct MobilNeighbor {
  const DriverParams* params = nullptr;  // nullptr: no vehicle
  double gap = 0.0;                      // bumper-to-bumper to the ego, m
  double velocity = 0.0;
  double length = 0.0;

  bool present() const { return params != nullptr; }
};

struct MobilLane {
  MobilNeighbor leader;
  MobilNeighbor follower;
};

struct MobilSituation {
  double velocity = 0.0;
  double length = 0.0;
  MobilLane current;
  std::optional<MobilLane> left;
  std::optional<MobilLane> right;
};

// MOBIL with the symmetric incentive criterion. A lane is admissible when
// the new follower's resulting acceleration is >= -b_safe, and attractive
// when da_ego + p (da_new_follower + da_old_follower) > threshold. The best
// admissible, attractive lane wins; left wins exact ties.
LaneDecision mobil_decide(const DriverParams& ego, const MobilSituation& s);

// MOBIL incentive for moving into `target`, or nullopt if unsafe.
std::optional<double> mobil_incentive(const DriverParams& ego,
                                      const MobilSituation& s,
                                      const MobilLane& target);

struct NeighborObs {
  int index = -1;  // vehicle index in the scene, -1 when absent
  double gap = 0.0;
  double velocity = 0.0;
  double length = 0.0;

  bool present() const { return index >= 0; }
};

struct LaneObs {
  NeighborObs leader;
  NeighborObs follower;
};

// What a driver perceives at one step. Lane neighbors for adjacent lanes are
// only populated on multi-lane roads.
struct Observation {
  double velocity = 0.0;
  double length = 0.0;
  double lateral_position = 0.0;  // m from the right road edge
  double lateral_velocity = 0.0;  // m/s
  int lane = 0;
  int lane_count = 1;
  double lane_width = 3.7;
  LaneObs current;
  std::optional<LaneObs> left;
  std::optional<LaneObs> right;
};

struct Action {
  double longitudinal = 0.0;  // m/s^2
  double lateral = 0.0;       // m/s^2

  friend bool operator==(const Action&, const Action&) = default;
};

struct ErrorableOptions {
  double dt = 0.1;
  bool noise = true;
  bool errors = true;
  double longitudinal_noise_std = 0.5;
  double lateral_noise_std = 0.1;
};

// Per-driver mutable state of the errorable model.
struct DriverState {
  std::vector<Observation> delay_buffer;  // ring buffer of past observations
  std::size_t head = 0;
  bool attentive = true;
  Action last_action;
  int target_lane = 0;

  std::size_t delay_steps() const { return delay_buffer.size(); }
};

// Number of buffered observations for a reaction time, ceil(t_r / dt) with a
// guard against 0.2 / 0.1 = 2.0000000000000004.
int reaction_delay_steps(double reaction_time, double dt);

// Warm-up: the delay buffer is filled with the first observation.
DriverState make_driver_state(const DriverParams& params,
                              const Observation& first, const Action& initial,
                              const ErrorableOptions& options);

// The noise-free policy on a given observation: IDM longitudinally, MOBIL
// plus a lane-tracking lateral law. `params_of` resolves neighbor indices.
// May update `target_lane` when MOBIL commits to a change.
Action driver_policy(const DriverParams& params, const Observation& obs,
                     int& target_lane,
                     const std::vector<DriverParams>& params_of);

// One step of the errorable driver. The attentiveness chain advances first;
// an inattentive driver repeats its last executed action verbatim, an
// attentive one acts on the observation delayed by reaction_delay_steps and
// adds Gaussian action noise. The delay buffer advances either way.
Action errorable_step(DriverState& state, const DriverParams& params,
                      const Observation& obs,
                      const std::vector<DriverParams>& params_of, Rng& rng,
                      const ErrorableOptions& options);

// Lateral acceleration tracking a lane center: PD on the lateral error,
// saturated at kMaxLateralAccel.
inline constexpr double kMaxLateralAccel = 2.0;
double lane_tracking_accel(double lateral_error, double lateral_velocity);

}  // namespace crisk

#endif  // CRISK_DRIVER_MODELS_H_
