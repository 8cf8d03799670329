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

#include "crisk/scene.h"

#include <cmath>
#include <limits>
#include <string>

#include "crisk/error.h"

namespace crisk {

void RoadSpec::validate() const {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw RangeError("road length must be positive and finite");
  }
  if (lane_count < 1) throw RangeError("road lane_count must be >= 1");
  if (!(lane_width > 0.0)) throw RangeError("road lane_width must be > 0");
}

double forward_distance(const RoadSpec& road, double from, double to) {
  double d = to - from;
  if (road.circular) {
    d = std::fmod(d, road.length);
    if (d < 0.0) d += road.length;
  }
  return d;
}

double bumper_gap(const RoadSpec& road, const Vehicle& rear,
                  const Vehicle& fore) {
  return forward_distance(road, rear.position, fore.position) - fore.length;
}

namespace {

std::optional<std::size_t> nearest(const Scene& scene, std::size_t index,
                                   bool ahead) {
  const Vehicle& self = scene.vehicles[index];
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scene.vehicles.size(); ++j) {
    const Vehicle& other = scene.vehicles[j];
    if (j == index || other.collided || other.lane != self.lane) continue;
    const double d =
        ahead ? forward_distance(scene.road, self.position, other.position)
              : forward_distance(scene.road, other.position, self.position);
    if (d > 0.0 && d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

std::optional<std::size_t> find_leader(const Scene& scene, std::size_t index) {
  return nearest(scene, index, true);
}

std::optional<std::size_t> find_follower(const Scene& scene,
                                         std::size_t index) {
  return nearest(scene, index, false);
}

void check_finite(const Scene& scene) {
  for (const Vehicle& v : scene.vehicles) {
    const auto bad = [&](const char* field) {
      throw RangeError("vehicle " + std::to_string(v.id) + " has non-finite " +
                       field);
    };
    if (!std::isfinite(v.position)) bad("position");
    if (!std::isfinite(v.lane_offset)) bad("lane_offset");
    if (!std::isfinite(v.heading)) bad("heading");
    if (!std::isfinite(v.velocity)) bad("velocity");
    if (!std::isfinite(v.length)) bad("length");
    if (!std::isfinite(v.width)) bad("width");
  }
}

}  // namespace crisk
