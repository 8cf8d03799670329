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

#ifndef CRISK_SCENE_H_
#define CRISK_SCENE_H_

#include <cstddef>
#include <optional>
#include <vector>

#include "crisk/driver_models.h"

namespace crisk {

struct RoadSpec {
  double length = 10000.0;  // m
  bool circular = false;
  int lane_count = 1;
  double lane_width = 3.7;  // m

  // Validates length > 0 and lane_count >= 1; throws RangeError.
  void validate() const;
};

// Road-frame vehicle state. `position` is the longitudinal coordinate of the
// front bumper; the rear bumper sits at position - length.
struct Vehicle {
  int id = 0;
  double position = 0.0;     // m
  double lane_offset = 0.0;  // m from the lane center, left positive
  double heading = 0.0;      // rad relative to the road direction
  double velocity = 0.0;     // m/s
  double length = 4.5;       // m
  double width = 1.9;        // m
  int lane = 0;
  DriverParams params;
  bool collided = false;
  // Last executed action; sampled scenes start at rest (zero).
  double accel = 0.0;          // m/s^2
  double lateral_accel = 0.0;  // m/s^2
  double turn_rate = 0.0;      // rad/s

  double rear() const { return position - length; }
};

// Fore-vehicle context of the first sampled vehicle, which has no fore
// neighbor on a linear road.
struct LeadContext {
  double fore_distance = 0.0;
  double relative_velocity = 0.0;
};

struct Scene {
  RoadSpec road;
  // Sampled scenes list vehicles front to back: vehicles[i - 1] is the fore
  // neighbor of vehicles[i].
  std::vector<Vehicle> vehicles;
  std::optional<LeadContext> lead_context;

  std::size_t size() const { return vehicles.size(); }
};

// Signed longitudinal displacement from `from` to `to` (front bumper to
// front bumper). On circular roads the result lies in [0, length).
double forward_distance(const RoadSpec& road, double from, double to);

// Bumper-to-bumper gap from `rear`'s front bumper to `fore`'s rear bumper,
// treating `fore` as ahead (wrap-around on circular roads).
double bumper_gap(const RoadSpec& road, const Vehicle& rear,
                  const Vehicle& fore);

// Index of the nearest vehicle ahead / behind `index` in the same lane, or
// nullopt. Ignores vehicles with `collided` set.
std::optional<std::size_t> find_leader(const Scene& scene, std::size_t index);
std::optional<std::size_t> find_follower(const Scene& scene,
                                         std::size_t index);

// Throws RangeError naming the field if any physical quantity is non-finite.
void check_finite(const Scene& scene);

}  // namespace crisk

#endif  // CRISK_SCENE_H_
