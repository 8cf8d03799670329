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

#ifndef CRISK_FEATURES_H_
#define CRISK_FEATURES_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crisk/scene.h"
#include "crisk/traffic_sim.h"

namespace crisk {

inline constexpr double kDefaultTtcCap = 30.0;  // s
inline constexpr int kDefaultNeighbors = 2;

struct FeatureInfo {
  std::string name;
  std::string unit;
  bool behavioral = false;
};

// Name/index/unit table for a neighbor count K. The ego block comes first,
// then ceil(K/2) fore neighbors nearest first, then floor(K/2) rear
// neighbors nearest first.
class FeatureSchema {
 public:
  explicit FeatureSchema(int neighbors = kDefaultNeighbors);

  int neighbors() const { return neighbors_; }
  std::size_t size() const { return features_.size(); }
  const std::vector<FeatureInfo>& features() const { return features_; }
  const FeatureInfo& operator[](std::size_t i) const { return features_[i]; }
  std::optional<std::size_t> index_of(const std::string& name) const;
  // Stable 64-bit FNV-1a hash of the names and units.
  std::uint64_t hash() const;

  static constexpr std::size_t kEgoBlock = 22;
  static constexpr std::size_t kNeighborBlock = 21;

 private:
  int neighbors_;
  std::vector<FeatureInfo> features_;
};

// gap / closing_speed when closing, otherwise `cap`; never above `cap`.
// Returns 0 for gap <= 0 (already in contact).
double time_to_collision(double gap, double closing_speed, double cap);

// Ego-centric feature vector laid out by FeatureSchema(neighbors).
// Behavioral entries are the eight IDM/MOBIL parameters, reaction time,
// aggressiveness, and attentiveness (0/1). Missing neighbors are zero-filled
// with validity 0.
std::vector<double> extract_features(const Scene& scene, std::size_t ego,
                                     int neighbors = kDefaultNeighbors,
                                     double ttc_cap = kDefaultTtcCap);

// 1 iff the ego's TTC drops below `threshold` at any step in [h, H] of the
// trace. A collided ego counts as TTC 0. Throws DataError if the trace ends
// before H without an ego collision.
int label_low_ttc(const Trace& trace, int ego_id, double threshold, int h,
                  int horizon, double ttc_cap = kDefaultTtcCap);

// |Pearson r| with zero-variance inputs mapped to 0.
double abs_pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationPoint {
  double horizon = 0.0;            // s
  std::optional<double> ratio;     // missing when labels are constant
  double max_behavioral = 0.0;
  double max_all = 0.0;
  std::size_t best_behavioral = 0;  // feature index
  std::size_t best_overall = 0;
};

// For each horizon: max |r| over behavioral features divided by max |r| over
// all features, against that horizon's labels. `rows[i]` is one feature
// vector, `labels[k][i]` the label of row i at horizon k.
std::vector<CorrelationPoint> behavioral_correlation_curve(
    const std::vector<std::vector<double>>& rows,
    const std::vector<std::vector<double>>& labels,
    const std::vector<double>& horizons, const FeatureSchema& schema);

}  // namespace crisk

#endif  // CRISK_FEATURES_H_
