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

#include "crisk/traffic_sim.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <set>

#include "crisk/error.h"
#include "json.hpp"

namespace crisk {

namespace {

constexpr double kContactTolerance = 1e-9;
constexpr double kMinYawSpeed = 0.1;

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw RangeError("dt must be > 0");
  if (horizon < 0) throw RangeError("horizon must be >= 0");
  if (collision_start < 0 || collision_start > horizon) {
    throw RangeError("collision start must satisfy 0 <= h <= H");
  }
  if (!(max_decel > 0.0)) throw RangeError("max_decel must be > 0");
}

ErrorableOptions SimConfig::driver_options() const {
  ErrorableOptions o;
  o.dt = dt;
  o.noise = noise;
  o.errors = errors;
  return o;
}

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

KinematicState bicycle_step(const KinematicState& s, double longitudinal_accel,
                            double lateral_accel, double dt) {
  KinematicState n = s;
  n.turn_rate = s.velocity >= kMinYawSpeed ? lateral_accel / s.velocity : 0.0;
  n.position = s.position + s.velocity * std::cos(s.heading) * dt;
  n.lane_offset = s.lane_offset + s.velocity * std::sin(s.heading) * dt;
  n.heading = wrap_angle(s.heading + n.turn_rate * dt);
  n.velocity = std::max(0.0, s.velocity + longitudinal_accel * dt);
  return n;
}

// ---------------------------------------------------------------------------
// Collision geometry

namespace {

struct Box {
  double cx, cy, hx, hy, c, s;
};

Box box_of(const Scene& scene, const Vehicle& v, double x_shift) {
  const double c = std::cos(v.heading);
  const double s = std::sin(v.heading);
  const double lat = (v.lane + 0.5) * scene.road.lane_width + v.lane_offset;
  return {v.position + x_shift - 0.5 * v.length * c,
          lat - 0.5 * v.length * s,
          0.5 * v.length,
          0.5 * v.width,
          c,
          s};
}

bool separated_on(const Box& a, const Box& b, double ax, double ay) {
  const auto radius = [&](const Box& q) {
    return q.hx * std::abs(q.c * ax + q.s * ay) +
           q.hy * std::abs(-q.s * ax + q.c * ay);
  };
  const double d = std::abs((b.cx - a.cx) * ax + (b.cy - a.cy) * ay);
  return d > radius(a) + radius(b);
}

bool boxes_overlap(const Box& a, const Box& b) {
  const std::array<std::array<double, 2>, 4> axes{
      {{a.c, a.s}, {-a.s, a.c}, {b.c, b.s}, {-b.s, b.c}}};
  for (const auto& ax : axes) {
    if (separated_on(a, b, ax[0], ax[1])) return false;
  }
  return true;
}

bool cross_lane_overlap(const Scene& scene, const Vehicle& a,
                        const Vehicle& b) {
  const Box ba = box_of(scene, a, 0.0);
  if (boxes_overlap(ba, box_of(scene, b, 0.0))) return true;
  if (!scene.road.circular) return false;
  const double len = scene.road.length;
  return boxes_overlap(ba, box_of(scene, b, len)) ||
         boxes_overlap(ba, box_of(scene, b, -len));
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> detect_collisions(
    const Scene& scene) {
  const RoadSpec& road = scene.road;
  std::set<std::pair<std::size_t, std::size_t>> hits;
  const auto add = [&](std::size_t a, std::size_t b) {
    hits.insert({std::min(a, b), std::max(a, b)});
  };

  double max_length = 0.0;
  std::vector<std::vector<std::size_t>> lanes(
      static_cast<std::size_t>(road.lane_count));
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vehicle& v = scene.vehicles[i];
    if (v.collided) continue;
    max_length = std::max(max_length, v.length);
    const int lane = std::clamp(v.lane, 0, road.lane_count - 1);
    lanes[static_cast<std::size_t>(lane)].push_back(i);
  }

  for (auto& lane : lanes) {
    std::stable_sort(lane.begin(), lane.end(), [&](std::size_t a,
                                                   std::size_t b) {
      return scene.vehicles[a].position < scene.vehicles[b].position;
    });
    const std::size_t n = lane.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vehicle& rear = scene.vehicles[lane[k]];
      const std::size_t span = road.circular ? n - 1 : n - 1 - k;
      for (std::size_t m = 1; m <= span; ++m) {
        const std::size_t j = lane[(k + m) % n];
        const Vehicle& fore = scene.vehicles[j];
        const double d =
            forward_distance(road, rear.position, fore.position);
        if (d > max_length + kContactTolerance) break;
        if (d - fore.length <= kContactTolerance) add(lane[k], j);
      }
    }
  }

  if (road.lane_count > 1) {
    for (std::size_t i = 0; i < scene.size(); ++i) {
      const Vehicle& a = scene.vehicles[i];
      if (a.collided) continue;
      for (std::size_t j = i + 1; j < scene.size(); ++j) {
        const Vehicle& b = scene.vehicles[j];
        if (b.collided || b.lane == a.lane) continue;
        if (cross_lane_overlap(scene, a, b)) add(i, j);
      }
    }
  }
  return {hits.begin(), hits.end()};
}

void write_trace_jsonl(const Trace& trace, std::ostream& out) {
  nlohmann::json header{{"type", "header"},
                        {"horizon", trace.horizon},
                        {"terminated", trace.terminated},
                        {"last_step", trace.last_step}};
  out << header.dump() << '\n';
  for (const TraceRecord& r : trace.records) {
    nlohmann::json j{{"step", r.step},
                     {"vehicle", r.vehicle},
                     {"position", r.position},
                     {"lane_offset", r.lane_offset},
                     {"heading", r.heading},
                     {"velocity", r.velocity},
                     {"accel", r.accel},
                     {"lateral_accel", r.lateral_accel},
                     {"lane", r.lane},
                     {"collided", r.collided}};
    if (r.has_leader) {
      j["leader_gap"] = r.leader_gap;
      j["leader_velocity"] = r.leader_velocity;
    }
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Simulator

namespace {

class Simulator {
 public:
  Simulator(Scene scene, const ErrorableOptions& options, double max_decel)
      : scene_(std::move(scene)), options_(options), max_decel_(max_decel) {
    scene_.road.validate();
    params_.reserve(scene_.size());
    for (const Vehicle& v : scene_.vehicles) params_.push_back(v.params);
    sort_lanes();
    drivers_.reserve(scene_.size());
    for (std::size_t i = 0; i < scene_.size(); ++i) {
      const Vehicle& v = scene_.vehicles[i];
      drivers_.push_back(make_driver_state(v.params, observe(i),
                                           {v.accel, v.lateral_accel},
                                           options_));
    }
  }

  Scene& scene() { return scene_; }
  const Scene& scene() const { return scene_; }
  std::vector<DriverState>& drivers() { return drivers_; }

  // Actions, propagation, lane bookkeeping. Collision handling is left to
  // the caller.
  void step(Rng& rng, int step_index) {
    const std::size_t n = scene_.size();
    actions_.assign(n, Action{});
    for (std::size_t i = 0; i < n; ++i) {
      if (scene_.vehicles[i].collided) continue;
      actions_[i] = errorable_step(drivers_[i], params_[i], observe(i),
                                   params_, rng, options_);
      if (actions_[i].longitudinal < -max_decel_) {
        actions_[i].longitudinal = -max_decel_;
        drivers_[i].last_action = actions_[i];
      }
    }
    const RoadSpec& road = scene_.road;
    for (std::size_t i = 0; i < n; ++i) {
      Vehicle& v = scene_.vehicles[i];
      if (v.collided) continue;
      const Action& a = actions_[i];
      KinematicState k{v.position, v.lane_offset, v.heading, v.velocity, 0.0};
      k = bicycle_step(k, a.longitudinal, a.lateral, options_.dt);
      v.position = k.position;
      v.heading = k.heading;
      v.velocity = k.velocity;
      v.turn_rate = k.turn_rate;
      v.accel = a.longitudinal;
      v.lateral_accel = a.lateral;
      if (!std::isfinite(v.position) || !std::isfinite(v.velocity) ||
          !std::isfinite(k.lane_offset) || !std::isfinite(v.heading)) {
        throw SimulationError(
            "non-finite state of vehicle " + std::to_string(v.id), step_index);
      }
      if (road.circular) {
        v.position = std::fmod(v.position, road.length);
        if (v.position < 0.0) v.position += road.length;
      }
      const double lat = (v.lane + 0.5) * road.lane_width + k.lane_offset;
      const int lane = std::clamp(
          static_cast<int>(std::floor(lat / road.lane_width)), 0,
          road.lane_count - 1);
      v.lane = lane;
      v.lane_offset = lat - (lane + 0.5) * road.lane_width;
    }
    sort_lanes();
  }

  void sort_lanes() {
    const RoadSpec& road = scene_.road;
    lanes_.assign(static_cast<std::size_t>(road.lane_count), {});
    for (std::size_t i = 0; i < scene_.size(); ++i) {
      const Vehicle& v = scene_.vehicles[i];
      if (v.collided) continue;
      lanes_[static_cast<std::size_t>(std::clamp(v.lane, 0,
                                                 road.lane_count - 1))]
          .push_back(i);
    }
    for (auto& lane : lanes_) {
      std::stable_sort(lane.begin(), lane.end(),
                       [&](std::size_t a, std::size_t b) {
                         return scene_.vehicles[a].position <
                                scene_.vehicles[b].position;
                       });
    }
  }

  NeighborObs leader(std::size_t i) const {
    return neighbor(scene_.vehicles[i].lane, i, true);
  }

  // Nearest active vehicle ahead (or behind) of `self` in `lane`.
  NeighborObs neighbor(int lane, std::size_t self, bool ahead) const {
    NeighborObs obs;
    if (lane < 0 || lane >= scene_.road.lane_count) return obs;
    const auto& list = lanes_[static_cast<std::size_t>(lane)];
    const auto n = static_cast<std::ptrdiff_t>(list.size());
    if (n == 0) return obs;
    const Vehicle& me = scene_.vehicles[self];
    const RoadSpec& road = scene_.road;
    const auto by_position = [&](double x, std::size_t j) {
      return x < scene_.vehicles[j].position;
    };
    const auto before = [&](std::size_t j, double x) {
      return scene_.vehicles[j].position < x;
    };
    // Walk away from the ego's sorted slot; the first vehicle at a positive
    // distance is the nearest one.
    std::ptrdiff_t k =
        ahead ? std::upper_bound(list.begin(), list.end(), me.position,
                                 by_position) -
                    list.begin()
              : std::lower_bound(list.begin(), list.end(), me.position,
                                 before) -
                    list.begin() - 1;
    for (std::ptrdiff_t m = 0; m < n; ++m, k += ahead ? 1 : -1) {
      if (!road.circular && (k < 0 || k >= n)) break;
      const std::size_t j = list[static_cast<std::size_t>(((k % n) + n) % n)];
      if (j == self) continue;
      const Vehicle& o = scene_.vehicles[j];
      const double d = ahead ? forward_distance(road, me.position, o.position)
                             : forward_distance(road, o.position, me.position);
      if (d > 0.0) {
        obs.index = static_cast<int>(j);
        obs.gap = ahead ? d - o.length : d - me.length;
        obs.velocity = o.velocity;
        obs.length = o.length;
        break;
      }
    }
    return obs;
  }

  Observation observe(std::size_t i) const {
    const Vehicle& v = scene_.vehicles[i];
    const RoadSpec& road = scene_.road;
    Observation o;
    o.velocity = v.velocity;
    o.length = v.length;
    o.lateral_position = (v.lane + 0.5) * road.lane_width + v.lane_offset;
    o.lateral_velocity = v.velocity * std::sin(v.heading);
    o.lane = v.lane;
    o.lane_count = road.lane_count;
    o.lane_width = road.lane_width;
    o.current = {neighbor(v.lane, i, true), neighbor(v.lane, i, false)};
    if (v.lane + 1 < road.lane_count) {
      o.left = LaneObs{neighbor(v.lane + 1, i, true),
                       neighbor(v.lane + 1, i, false)};
    }
    if (v.lane > 0) {
      o.right = LaneObs{neighbor(v.lane - 1, i, true),
                        neighbor(v.lane - 1, i, false)};
    }
    return o;
  }

  void record(Trace& trace, int step) const {
    for (std::size_t i = 0; i < scene_.size(); ++i) {
      const Vehicle& v = scene_.vehicles[i];
      TraceRecord r;
      r.step = step;
      r.vehicle = v.id;
      r.position = v.position;
      r.lane_offset = v.lane_offset;
      r.heading = v.heading;
      r.velocity = v.velocity;
      r.accel = v.accel;
      r.lateral_accel = v.lateral_accel;
      r.lane = v.lane;
      r.collided = v.collided;
      if (!v.collided) {
        const NeighborObs lead = neighbor(v.lane, i, true);
        if (lead.present()) {
          r.has_leader = true;
          r.leader_gap = lead.gap;
          r.leader_velocity = lead.velocity;
        }
      }
      trace.records.push_back(r);
    }
  }

 private:
  Scene scene_;
  ErrorableOptions options_;
  double max_decel_;
  std::vector<DriverParams> params_;
  std::vector<DriverState> drivers_;
  std::vector<Action> actions_;
  std::vector<std::vector<std::size_t>> lanes_;
};

}  // namespace

RolloutResult rollout(const Scene& scene, std::size_t ego,
                      const SimConfig& config, Rng& rng, Trace* trace) {
  config.validate();
  if (ego >= scene.size()) throw RangeError("ego index out of range");
  RolloutResult result;
  if (trace) {
    trace->horizon = config.horizon;
    trace->terminated = false;
    trace->last_step = 0;
    trace->records.clear();
  }
  if (config.horizon == 0) return result;

  Simulator sim(scene, config.driver_options(), config.max_decel);
  const auto handle_collisions = [&](int t) {
    bool ego_hit = false;
    for (const auto& [a, b] : detect_collisions(sim.scene())) {
      if (!ego_hit && (a == ego || b == ego)) {
        ego_hit = true;
        result.collision_step = t;
        result.partner_id = sim.scene().vehicles[a == ego ? b : a].id;
      }
      sim.scene().vehicles[a].collided = true;
      sim.scene().vehicles[b].collided = true;
    }
    return ego_hit;
  };

  bool done = false;
  if (scene.vehicles[ego].collided) {
    result.collision_step = 0;
    done = true;
  } else if (handle_collisions(0)) {
    done = true;
  }
  sim.sort_lanes();
  if (trace) sim.record(*trace, 0);
  int t = 0;
  while (!done && t < config.horizon) {
    ++t;
    sim.step(rng, t);
    done = handle_collisions(t);
    sim.sort_lanes();
    if (trace) sim.record(*trace, t);
  }
  result.steps = t;
  if (result.collision_step) {
    result.collision = *result.collision_step >= config.collision_start;
    result.terminated_early = *result.collision_step < config.horizon;
  }
  if (trace) {
    trace->terminated = result.collision_step.has_value();
    trace->last_step = t;
  }
  return result;
}

std::vector<std::optional<int>> rollout_all(const Scene& scene,
                                            const SimConfig& config, Rng& rng,
                                            LowTtcProbe* probe) {
  config.validate();
  std::vector<std::optional<int>> first(scene.size());
  if (probe) probe->first.assign(scene.size(), std::nullopt);
  if (config.horizon == 0) return first;
  Simulator sim(scene, config.driver_options(), config.max_decel);
  const auto mark = [&](int t) {
    const auto hits = detect_collisions(sim.scene());
    for (const auto& [a, b] : hits) {
      for (std::size_t k : {a, b}) {
        if (!first[k]) first[k] = t;
        sim.scene().vehicles[k].collided = true;
      }
    }
  };
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (scene.vehicles[i].collided) first[i] = 0;
  }
  const auto look = [&](int t) {
    if (!probe || t < probe->start) return;
    const Scene& s = sim.scene();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (probe->first[i]) continue;
      if (s.vehicles[i].collided) {
        if (first[i] == t) probe->first[i] = t;
        continue;
      }
      const NeighborObs lead = sim.leader(i);
      if (lead.index < 0) continue;
      const double closing = s.vehicles[i].velocity - lead.velocity;
      if (lead.gap <= 0.0 ||
          (closing > 0.0 && lead.gap < probe->threshold * closing)) {
        probe->first[i] = t;
      }
    }
  };
  mark(0);
  sim.sort_lanes();
  look(0);
  std::size_t active = 0;
  for (const Vehicle& v : sim.scene().vehicles) active += v.collided ? 0 : 1;
  for (int t = 1; t <= config.horizon && active > 0; ++t) {
    sim.step(rng, t);
    mark(t);
    sim.sort_lanes();
    look(t);
    active = 0;
    for (const Vehicle& v : sim.scene().vehicles) active += v.collided ? 0 : 1;
  }
  return first;
}

// ---------------------------------------------------------------------------
// Burn-in

Scene burn_in_scene(const RoadSpec& road, int num_vehicles, int steps,
                    Rng& rng, const BurnInOptions& options) {
  road.validate();
  if (num_vehicles < 1) throw RangeError("num_vehicles must be >= 1");
  if (steps < 0) throw RangeError("burn-in steps must be >= 0");
  const double spacing = road.length / num_vehicles;
  if (spacing < options.max_length + 1.0) {
    throw PlacementError(std::to_string(num_vehicles) +
                         " vehicles do not fit on a " +
                         std::to_string(road.length) + " m road");
  }
  const double jitter = 0.5 * (spacing - options.max_length - 1.0);

  Scene scene;
  scene.road = road;
  scene.vehicles.resize(static_cast<std::size_t>(num_vehicles));
  for (int i = 0; i < num_vehicles; ++i) {
    Vehicle& v = scene.vehicles[static_cast<std::size_t>(i)];
    v.id = i;
    // Index 0 is the front-most vehicle.
    double x = (num_vehicles - i) * spacing + uniform(rng, -jitter, jitter);
    if (road.circular) {
      x = std::fmod(x, road.length);
      if (x < 0.0) x += road.length;
    }
    v.position = x;
    v.length = uniform(rng, options.min_length, options.max_length);
    v.width = uniform(rng, options.min_width, options.max_width);
    v.velocity = uniform(rng, options.min_speed, options.max_speed);
    v.params = sample_driver_params(uniform01(rng), rng);
  }
  if (steps == 0) return scene;

  ErrorableOptions driver;
  driver.dt = options.dt;
  Simulator sim(scene, driver, options.max_decel);
  for (int t = 1; t <= steps; ++t) {
    sim.step(rng, t);
    for (const auto& [a, b] : detect_collisions(sim.scene())) {
      Scene& s = sim.scene();
      const double ab = bumper_gap(s.road, s.vehicles[a], s.vehicles[b]);
      const double ba = bumper_gap(s.road, s.vehicles[b], s.vehicles[a]);
      const std::size_t rear = ab <= ba ? a : b;
      const std::size_t fore = ab <= ba ? b : a;
      Vehicle& r = s.vehicles[rear];
      const Vehicle& f = s.vehicles[fore];
      r.velocity = f.velocity;
      r.position = f.rear() - (r.params.min_distance + 1.0);
      if (s.road.circular) {
        r.position = std::fmod(r.position, s.road.length);
        if (r.position < 0.0) r.position += s.road.length;
      }
      r.accel = 0.0;
      sim.drivers()[rear].last_action = Action{};
    }
    sim.sort_lanes();
  }
  Scene out = sim.scene();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.vehicles[i].params.attentive = sim.drivers()[i].attentive;
    out.vehicles[i].collided = false;
  }
  return out;
}

}  // namespace crisk
