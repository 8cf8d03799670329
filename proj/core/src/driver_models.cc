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

#include "crisk/driver_models.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crisk/error.h"

namespace crisk {

double sample_truncated_normal(double mean, double stddev, double lo,
                               double hi, Rng& rng) {
  if (!(stddev > 0.0) || !(hi > lo)) return std::clamp(mean, lo, hi);
  std::normal_distribution<double> normal(mean, stddev);
  for (;;) {
    const double x = normal(rng);
    if (x >= lo && x <= hi) return x;
  }
}

DriverParams sample_driver_params(double aggressiveness, Rng& rng) {
  if (!(aggressiveness >= 0.0 && aggressiveness <= 1.0)) {
    throw RangeError("aggressiveness " + std::to_string(aggressiveness) +
                     " outside [0, 1]");
  }
  DriverParams p;
  for (const ParamBounds& b : kParamBounds) {
    const double stddev = kParamStdFraction * std::abs(b.most - b.least);
    p.*b.field = sample_truncated_normal(b.mean_at(aggressiveness), stddev,
                                         b.lo(), b.hi(), rng);
  }
  p.reaction_time = kReactionTime;
  p.p_inattentive_given_attentive = kInattentiveGivenAttentive;
  p.p_attentive_given_inattentive = kAttentiveGivenInattentive;
  p.aggressiveness = aggressiveness;
  return p;
}

double idm_desired_gap(const DriverParams& p, double velocity,
                       double closing_speed) {
  return p.min_distance + velocity * p.time_headway +
         velocity * closing_speed /
             (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
}

double idm_free_accel(const DriverParams& p, double velocity) {
  const double r = velocity / p.desired_velocity;
  const double r2 = r * r;
  return p.max_accel * (1.0 - r2 * r2);
}

double idm_accel(const DriverParams& p, double velocity, double gap,
                 double closing_speed) {
  if (!(gap > 0.0)) {
    throw std::invalid_argument("idm_accel requires a positive gap, got " +
                                std::to_string(gap));
  }
  const double r = idm_desired_gap(p, velocity, closing_speed) / gap;
  return idm_free_accel(p, velocity) - p.max_accel * r * r;
}

namespace {

// Acceleration of a vehicle with `params` following a leader at `gap`.
double follow_accel(const DriverParams& params, double velocity,
                    const MobilNeighbor& leader, double gap) {
  if (!leader.present()) return idm_free_accel(params, velocity);
  return idm_accel(params, velocity, std::max(gap, 1e-3),
                   velocity - leader.velocity);
}

}  // namespace

std::optional<double> mobil_incentive(const DriverParams& ego,
                                      const MobilSituation& s,
                                      const MobilLane& target) {
  if (target.leader.present() && target.leader.gap <= 0.0) return std::nullopt;
  if (target.follower.present() && target.follower.gap <= 0.0) {
    return std::nullopt;
  }
  const MobilNeighbor self{&ego, 0.0, s.velocity, s.length};

  // New follower: behind the target leader now, behind the ego afterwards.
  double new_follower_gain = 0.0;
  if (target.follower.present()) {
    const MobilNeighbor& n = target.follower;
    const double before =
        follow_accel(*n.params, n.velocity, target.leader,
                     n.gap + s.length + target.leader.gap);
    const double after = follow_accel(*n.params, n.velocity, self, n.gap);
    if (after < -n.params->safe_decel) return std::nullopt;
    new_follower_gain = after - before;
  }

  const double ego_before =
      follow_accel(ego, s.velocity, s.current.leader, s.current.leader.gap);
  const double ego_after =
      follow_accel(ego, s.velocity, target.leader, target.leader.gap);

  // Old follower: behind the ego now, behind the current leader afterwards.
  double old_follower_gain = 0.0;
  if (s.current.follower.present()) {
    const MobilNeighbor& o = s.current.follower;
    const double before = follow_accel(*o.params, o.velocity, self, o.gap);
    const double after =
        follow_accel(*o.params, o.velocity, s.current.leader,
                     o.gap + s.length + s.current.leader.gap);
    old_follower_gain = after - before;
  }

  return ego_after - ego_before +
         ego.politeness * (new_follower_gain + old_follower_gain);
}

LaneDecision mobil_decide(const DriverParams& ego, const MobilSituation& s) {
  LaneDecision best = LaneDecision::kStay;
  double best_incentive = ego.accel_threshold;
  if (s.left) {
    const auto inc = mobil_incentive(ego, s, *s.left);
    if (inc && *inc > best_incentive) {
      best = LaneDecision::kLeft;
      best_incentive = *inc;
    }
  }
  if (s.right) {
    const auto inc = mobil_incentive(ego, s, *s.right);
    if (inc && *inc > best_incentive) best = LaneDecision::kRight;
  }
  return best;
}

int reaction_delay_steps(double reaction_time, double dt) {
  if (reaction_time <= 0.0) return 0;
  return static_cast<int>(std::ceil(reaction_time / dt - 1e-9));
}

DriverState make_driver_state(const DriverParams& params,
                              const Observation& first, const Action& initial,
                              const ErrorableOptions& options) {
  DriverState state;
  const int depth =
      options.errors ? reaction_delay_steps(params.reaction_time, options.dt)
                     : 0;
  state.delay_buffer.assign(static_cast<std::size_t>(depth), first);
  state.attentive = options.errors ? params.attentive : true;
  state.last_action = initial;
  state.target_lane = first.lane;
  return state;
}

double lane_tracking_accel(double lateral_error, double lateral_velocity) {
  constexpr double kP = 0.6;
  constexpr double kD = 1.6;
  return std::clamp(-kP * lateral_error - kD * lateral_velocity,
                    -kMaxLateralAccel, kMaxLateralAccel);
}

namespace {

MobilNeighbor to_mobil(const NeighborObs& n,
                       const std::vector<DriverParams>& params_of) {
  if (!n.present()) return {};
  return {&params_of[static_cast<std::size_t>(n.index)], n.gap, n.velocity,
          n.length};
}

MobilLane to_mobil(const LaneObs& lane,
                   const std::vector<DriverParams>& params_of) {
  return {to_mobil(lane.leader, params_of), to_mobil(lane.follower, params_of)};
}

}  // namespace

Action driver_policy(const DriverParams& params, const Observation& obs,
                     int& target_lane,
                     const std::vector<DriverParams>& params_of) {
  Action action;
  const NeighborObs& leader = obs.current.leader;
  if (leader.present()) {
    action.longitudinal =
        idm_accel(params, obs.velocity, std::max(leader.gap, 1e-3),
                  obs.velocity - leader.velocity);
  } else {
    action.longitudinal = idm_free_accel(params, obs.velocity);
  }

  if (obs.lane_count > 1 && target_lane == obs.lane) {
    MobilSituation s;
    s.velocity = obs.velocity;
    s.length = obs.length;
    s.current = to_mobil(obs.current, params_of);
    if (obs.left) s.left = to_mobil(*obs.left, params_of);
    if (obs.right) s.right = to_mobil(*obs.right, params_of);
    switch (mobil_decide(params, s)) {
      case LaneDecision::kLeft:
        target_lane = obs.lane + 1;
        break;
      case LaneDecision::kRight:
        target_lane = obs.lane - 1;
        break;
      case LaneDecision::kStay:
        break;
    }
  }
  const double center = (target_lane + 0.5) * obs.lane_width;
  action.lateral = lane_tracking_accel(obs.lateral_position - center,
                                       obs.lateral_velocity);
  return action;
}

Action errorable_step(DriverState& state, const DriverParams& params,
                      const Observation& obs,
                      const std::vector<DriverParams>& params_of, Rng& rng,
                      const ErrorableOptions& options) {
  if (options.errors) {
    const double u = uniform01(rng);
    if (state.attentive) {
      if (u < params.p_inattentive_given_attentive) state.attentive = false;
    } else {
      if (u < params.p_attentive_given_inattentive) state.attentive = true;
    }
  } else {
    state.attentive = true;
  }

  const Observation* delayed = &obs;
  Observation oldest;
  if (!state.delay_buffer.empty()) {
    oldest = state.delay_buffer[state.head];
    state.delay_buffer[state.head] = obs;
    state.head = (state.head + 1) % state.delay_buffer.size();
    delayed = &oldest;
  }

  if (!state.attentive) return state.last_action;

  Action action = driver_policy(params, *delayed, state.target_lane, params_of);
  if (options.noise) {
    action.longitudinal +=
        options.longitudinal_noise_std * standard_normal(rng);
    action.lateral += options.lateral_noise_std * standard_normal(rng);
  }
  state.last_action = action;
  return action;
}

}  // namespace crisk
