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

#include "crisk/features.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crisk/error.h"

namespace crisk {

namespace {

void add_physical(std::vector<FeatureInfo>& f, const std::string& p) {
  f.push_back({p + "lane_offset", "m", false});
  f.push_back({p + "heading", "rad", false});
  f.push_back({p + "velocity", "m/s", false});
  f.push_back({p + "length", "m", false});
  f.push_back({p + "width", "m", false});
  f.push_back({p + "accel", "m/s^2", false});
  f.push_back({p + "turn_rate", "rad/s", false});
  f.push_back({p + "ttc", "s", false});
}

void add_behavioral(std::vector<FeatureInfo>& f, const std::string& p) {
  f.push_back({p + "max_accel", "m/s^2", true});
  f.push_back({p + "desired_velocity", "m/s", true});
  f.push_back({p + "min_distance", "m", true});
  f.push_back({p + "time_headway", "s", true});
  f.push_back({p + "comfort_decel", "m/s^2", true});
  f.push_back({p + "politeness", "1", true});
  f.push_back({p + "safe_decel", "m/s^2", true});
  f.push_back({p + "accel_threshold", "m/s^2", true});
  f.push_back({p + "reaction_time", "s", true});
  f.push_back({p + "aggressiveness", "1", true});
  f.push_back({p + "attentive", "0/1", true});
}

double vehicle_ttc(const Scene& scene, std::size_t i, double cap) {
  const auto lead = find_leader(scene, i);
  if (!lead) return cap;
  const Vehicle& v = scene.vehicles[i];
  const Vehicle& f = scene.vehicles[*lead];
  return time_to_collision(bumper_gap(scene.road, v, f),
                           v.velocity - f.velocity, cap);
}

void push_vehicle(std::vector<double>& x, const Scene& scene, std::size_t i,
                  double cap) {
  const Vehicle& v = scene.vehicles[i];
  x.push_back(v.lane_offset);
  x.push_back(v.heading);
  x.push_back(v.velocity);
  x.push_back(v.length);
  x.push_back(v.width);
  x.push_back(v.accel);
  x.push_back(v.turn_rate);
  x.push_back(vehicle_ttc(scene, i, cap));
}

void push_behavioral(std::vector<double>& x, const DriverParams& p) {
  x.push_back(p.max_accel);
  x.push_back(p.desired_velocity);
  x.push_back(p.min_distance);
  x.push_back(p.time_headway);
  x.push_back(p.comfort_decel);
  x.push_back(p.politeness);
  x.push_back(p.safe_decel);
  x.push_back(p.accel_threshold);
  x.push_back(p.reaction_time);
  x.push_back(p.aggressiveness);
  x.push_back(p.attentive ? 1.0 : 0.0);
}

}  // namespace

FeatureSchema::FeatureSchema(int neighbors) : neighbors_(neighbors) {
  if (neighbors < 0) throw RangeError("neighbor count must be >= 0");
  add_physical(features_, "ego_");
  features_.push_back({"ego_colliding", "0/1", false});
  features_.push_back({"ego_out_of_lane", "0/1", false});
  features_.push_back({"ego_negative_velocity", "0/1", false});
  add_behavioral(features_, "ego_");
  const int fore = (neighbors + 1) / 2;
  for (int k = 0; k < neighbors; ++k) {
    const std::string p = k < fore ? "fore" + std::to_string(k + 1) + "_"
                                   : "rear" + std::to_string(k - fore + 1) + "_";
    add_physical(features_, p);
    add_behavioral(features_, p);
    features_.push_back({p + "distance", "m", false});
    features_.push_back({p + "valid", "0/1", false});
  }
}

std::optional<std::size_t> FeatureSchema::index_of(
    const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::uint64_t FeatureSchema::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const FeatureInfo& f : features_) {
    mix(f.name);
    mix(f.unit);
  }
  return h;
}

double time_to_collision(double gap, double closing_speed, double cap) {
  if (gap <= 0.0) return 0.0;
  if (closing_speed <= 0.0) return cap;
  return std::min(gap / closing_speed, cap);
}

std::vector<double> extract_features(const Scene& scene, std::size_t ego,
                                     int neighbors, double ttc_cap) {
  if (ego >= scene.size()) throw RangeError("ego index out of range");
  const FeatureSchema schema(neighbors);
  std::vector<double> x;
  x.reserve(schema.size());

  const Vehicle& e = scene.vehicles[ego];
  push_vehicle(x, scene, ego, ttc_cap);
  const auto lead = find_leader(scene, ego);
  const bool colliding =
      e.collided ||
      (lead && bumper_gap(scene.road, e, scene.vehicles[*lead]) <= 0.0);
  const double half_free = 0.5 * (scene.road.lane_width - e.width);
  x.push_back(colliding ? 1.0 : 0.0);
  x.push_back(std::abs(e.lane_offset) > half_free ? 1.0 : 0.0);
  x.push_back(e.velocity < 0.0 ? 1.0 : 0.0);
  push_behavioral(x, e.params);

  const int fore = (neighbors + 1) / 2;
  const int rear = neighbors / 2;
  std::vector<std::size_t> used{ego};
  const auto walk = [&](int count, bool ahead) {
    std::size_t cur = ego;
    bool alive = true;
    for (int k = 0; k < count; ++k) {
      std::optional<std::size_t> next;
      if (alive) {
        next = ahead ? find_leader(scene, cur) : find_follower(scene, cur);
        if (next && std::find(used.begin(), used.end(), *next) != used.end()) {
          next.reset();
        }
      }
      if (!next) {
        x.insert(x.end(), FeatureSchema::kNeighborBlock, 0.0);
        alive = false;
        continue;
      }
      used.push_back(*next);
      push_vehicle(x, scene, *next, ttc_cap);
      push_behavioral(x, scene.vehicles[*next].params);
      const Vehicle& n = scene.vehicles[*next];
      x.push_back(ahead ? bumper_gap(scene.road, e, n)
                        : bumper_gap(scene.road, n, e));
      x.push_back(1.0);
      cur = *next;
    }
  };
  walk(fore, true);
  walk(rear, false);
  return x;
}

int label_low_ttc(const Trace& trace, int ego_id, double threshold, int h,
                  int horizon, double ttc_cap) {
  if (trace.last_step < horizon && !trace.terminated) {
    throw DataError("trace ends at step " + std::to_string(trace.last_step) +
                    " before the horizon " + std::to_string(horizon));
  }
  for (const TraceRecord& r : trace.records) {
    if (r.vehicle != ego_id || r.step < h || r.step > horizon) continue;
    double ttc = ttc_cap;
    if (r.collided) {
      ttc = 0.0;
    } else if (r.has_leader) {
      ttc = time_to_collision(r.leader_gap, r.velocity - r.leader_velocity,
                              ttc_cap);
    }
    if (ttc < threshold) return 1;
  }
  return 0;
}

double abs_pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // Relative floor: constant columns can carry round-off variance.
  const double scale_x = std::max(1.0, mx * mx) * n;
  const double scale_y = std::max(1.0, my * my) * n;
  if (sxx <= 1e-24 * scale_x || syy <= 1e-24 * scale_y) return 0.0;
  return std::min(1.0, std::abs(sxy) / std::sqrt(sxx * syy));
}

std::vector<CorrelationPoint> behavioral_correlation_curve(
    const std::vector<std::vector<double>>& rows,
    const std::vector<std::vector<double>>& labels,
    const std::vector<double>& horizons, const FeatureSchema& schema) {
  if (horizons.size() < 2) throw UsageError("need at least 2 horizons");
  if (labels.size() != horizons.size()) {
    throw DataError("one label column per horizon required");
  }
  const std::size_t d = schema.size();
  std::vector<std::vector<double>> columns(d,
                                           std::vector<double>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw DataError("feature row length mismatch");
    for (std::size_t k = 0; k < d; ++k) columns[k][i] = rows[i][k];
  }
  std::vector<CorrelationPoint> out;
  for (std::size_t hz = 0; hz < horizons.size(); ++hz) {
    if (labels[hz].size() != rows.size()) {
      throw DataError("label column length mismatch");
    }
    CorrelationPoint p;
    p.horizon = horizons[hz];
    const auto [lo, hi] =
        std::minmax_element(labels[hz].begin(), labels[hz].end());
    if (rows.empty() || *lo == *hi) {
      out.push_back(p);
      continue;
    }
    for (std::size_t k = 0; k < d; ++k) {
      const double r = abs_pearson(columns[k], labels[hz]);
      if (r > p.max_all) {
        p.max_all = r;
        p.best_overall = k;
      }
      if (schema[k].behavioral && r > p.max_behavioral) {
        p.max_behavioral = r;
        p.best_behavioral = k;
      }
    }
    if (p.max_all > 0.0) p.ratio = p.max_behavioral / p.max_all;
    out.push_back(p);
  }
  return out;
}

}  // namespace crisk
