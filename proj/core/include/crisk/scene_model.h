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

// Discrete Bayesian-network model of single-lane scenes. Each vehicle is a
// copy of the same per-vehicle network; the fore-velocity node is observed
// from the previously sampled vehicle, which chains vehicles together:
//
//   P(S) = P(S1) * prod_{i >= 2} P(S_i | S_{i-1}).
//
// The first vehicle is sampled with the fore velocity marginalized over a
// prior. Continuous values are drawn uniformly inside the sampled bin.

#ifndef CRISK_SCENE_MODEL_H_
#define CRISK_SCENE_MODEL_H_

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crisk/rng.h"
#include "crisk/scene.h"

namespace crisk {

enum class SceneVar : int {
  kForeDistance = 0,
  kForeVelocity = 1,
  kRelativeVelocity = 2,
  kLength = 3,
  kWidth = 4,
  kAttentive = 5,
  kAggressiveness = 6,
};

inline constexpr std::size_t kNumSceneVars = 7;
inline constexpr std::array<SceneVar, kNumSceneVars> kAllSceneVars{
    SceneVar::kForeDistance, SceneVar::kForeVelocity,
    SceneVar::kRelativeVelocity, SceneVar::kLength,
    SceneVar::kWidth,        SceneVar::kAttentive,
    SceneVar::kAggressiveness};

inline constexpr std::size_t idx(SceneVar v) {
  return static_cast<std::size_t>(v);
}

std::string_view scene_var_name(SceneVar v);
std::optional<SceneVar> scene_var_from_name(std::string_view name);

// One vehicle's scene-model tuple. Relative velocity is rear minus fore.
struct VehicleRecord {
  double fore_distance = 0.0;      // m, bumper to bumper
  double fore_velocity = 0.0;      // m/s
  double relative_velocity = 0.0;  // m/s
  double length = 0.0;             // m
  double width = 0.0;              // m
  int attentive = 1;               // 0 or 1
  double aggressiveness = 0.0;     // [0, 1]

  double get(SceneVar v) const;
  void set(SceneVar v, double value);
};

using BinAssignment = std::array<int, kNumSceneVars>;

// Bins of one variable: ordered edges for continuous variables, or a count of
// integer categories 0..n-1.
class VariableBins {
 public:
  static VariableBins continuous(std::vector<double> edges);
  static VariableBins categorical(int categories);

  bool is_categorical() const { return categorical_; }
  int num_bins() const;
  const std::vector<double>& edges() const { return edges_; }
  int categories() const { return categories_; }
  double lo() const;
  double hi() const;

  // Bin containing x, or nullopt when x is outside the outermost edges (a
  // 1e-9 relative tolerance absorbs round-off at the outer edges).
  std::optional<int> find_bin(double x) const;
  // Like find_bin but values outside the range map to the end bins.
  int clamped_bin(double x) const;
  // Uniform draw inside the bin; categorical bins return the category.
  double sample_value(int bin, Rng& rng) const;
  double bin_lo(int bin) const;
  double bin_hi(int bin) const;

  // Throws RangeError with `name` when the edges are malformed.
  void validate(std::string_view name) const;

  friend bool operator==(const VariableBins&, const VariableBins&) = default;

 private:
  bool categorical_ = false;
  std::vector<double> edges_;
  int categories_ = 0;
};

struct DiscretizationSpec {
  std::array<VariableBins, kNumSceneVars> vars;

  const VariableBins& operator[](SceneVar v) const { return vars[idx(v)]; }
  VariableBins& operator[](SceneVar v) { return vars[idx(v)]; }
  void validate() const;
  // Bin of a value; RangeError naming the variable when out of range.
  int bin_of(SceneVar v, double x) const;

  // Default discretization: `bins` bins at empirical quantiles for the
  // continuous record quantities, equal-width bins on [0, 1] for
  // aggressiveness (`aggressiveness_bins`, 0 meaning `bins`), and two
  // categories for attentiveness. Coinciding quantiles are merged.
  static DiscretizationSpec from_quantiles(std::span<const VehicleRecord> data,
                                           int bins = 8,
                                           int aggressiveness_bins = 0);

  friend bool operator==(const DiscretizationSpec&,
                         const DiscretizationSpec&) = default;
};

using ParentMap = std::array<std::vector<SceneVar>, kNumSceneVars>;

// v_f -> dv -> s_f, l -> w; attentiveness and aggressiveness are roots.
ParentMap default_parent_map();

// Conditional probability table: one probability row per joint parent bin
// assignment (first parent most significant).
class Cpt {
 public:
  Cpt() = default;
  Cpt(std::vector<SceneVar> parents, std::vector<int> parent_bins,
      int num_bins, std::vector<double> table);

  const std::vector<SceneVar>& parents() const { return parents_; }
  const std::vector<int>& parent_bins() const { return parent_bins_; }
  int num_bins() const { return num_bins_; }
  std::size_t num_rows() const { return table_.size() / num_bins_; }
  std::size_t row_index(const BinAssignment& bins) const;
  std::span<const double> row(std::size_t r) const {
    return {table_.data() + r * num_bins_, static_cast<std::size_t>(num_bins_)};
  }
  double prob(std::size_t r, int bin) const {
    return table_[r * num_bins_ + static_cast<std::size_t>(bin)];
  }
  const std::vector<double>& table() const { return table_; }

  friend bool operator==(const Cpt&, const Cpt&) = default;

 private:
  std::vector<SceneVar> parents_;
  std::vector<int> parent_bins_;
  int num_bins_ = 1;
  std::vector<double> table_;
};

// Immutable after construction; safe to share across threads.
class SceneBayesNet {
 public:
  // `tables[v]` holds the row-major CPT for every variable except the
  // observed fore velocity (its entry is ignored). An empty prior means
  // uniform over fore-velocity bins. Validates structure, acyclicity, and
  // row normalization (1e-9); throws RangeError.
  SceneBayesNet(DiscretizationSpec bins, ParentMap parents,
                std::array<std::vector<double>, kNumSceneVars> tables,
                std::vector<double> fore_velocity_prior = {});

  const DiscretizationSpec& bins() const { return bins_; }
  const ParentMap& parents() const { return parents_; }
  const Cpt& cpt(SceneVar v) const { return cpts_[idx(v)]; }
  const std::vector<double>& fore_velocity_prior() const { return prior_; }
  // Sampled variables in topological order (fore velocity excluded).
  const std::vector<SceneVar>& sample_order() const { return order_; }

  // Same variables, bins, parents, and prior; tables may differ.
  bool same_structure(const SceneBayesNet& other) const;

  // Copy with replaced CPT tables for the listed variables.
  SceneBayesNet with_tables(
      std::array<std::vector<double>, kNumSceneVars> tables) const;
  std::array<std::vector<double>, kNumSceneVars> tables() const;

  friend bool operator==(const SceneBayesNet&, const SceneBayesNet&) = default;

 private:
  DiscretizationSpec bins_;
  ParentMap parents_;
  std::array<Cpt, kNumSceneVars> cpts_;
  std::vector<double> prior_;
  std::vector<SceneVar> order_;
};

// Maximum-likelihood CPTs with additive smoothing:
//   row = (count + smoothing) / (row_total + smoothing * n_bins),
// uniform for rows without observations. Throws RangeError naming the
// variable for out-of-range values and DataError for an empty dataset.
SceneBayesNet fit_scene_bn(std::span<const VehicleRecord> records,
                           const DiscretizationSpec& spec, double smoothing,
                           const ParentMap& parents = default_parent_map());

// Bin assignment of a record (fore velocity included).
BinAssignment record_bins(const DiscretizationSpec& spec,
                          const VehicleRecord& record);

// Per-variable vehicle-1 distributions: CPTs with the fore velocity summed
// out over the prior. Variables without a fore-velocity parent keep their
// table.
std::array<Cpt, kNumSceneVars> marginal_first_vehicle(const SceneBayesNet& bn);

// Probability of one vehicle's bins given its fore-velocity bin (ignored
// when `first` is set: the fore velocity is then marginalized exactly).
double vehicle_probability(const SceneBayesNet& bn, const BinAssignment& bins,
                           bool first);

// Draws one vehicle's bins and continuous values. For the first vehicle the
// fore-velocity bin is drawn from the prior; otherwise `fore_velocity` is
// the realized velocity of the previous vehicle.
struct VehicleDraw {
  BinAssignment bins{};
  VehicleRecord values;
};
VehicleDraw sample_vehicle(const SceneBayesNet& bn,
                           std::optional<double> fore_velocity, Rng& rng);

// Samples an L-vehicle scene (front to back); placement puts the rear-most
// rear bumper at 0 and realizes the sampled fore distances. Throws
// PlacementError when the vehicles do not fit on the road.
Scene sample_scene(const SceneBayesNet& bn, int num_vehicles,
                   const RoadSpec& road, Rng& rng);

// Scene assembly from per-vehicle draws, also used by the proposal sampler.
Scene place_vehicles(std::span<const VehicleDraw> draws,
                     std::vector<DriverParams> params, const RoadSpec& road);

// Bin assignments recovered from a scene's physical state (vehicles front to
// back). Throws RangeError for values outside the discretization.
std::vector<BinAssignment> scene_bins(const SceneBayesNet& bn,
                                      const Scene& scene);

// Natural log of the bin-level chain likelihood. The uniform-within-bin
// density is excluded; it cancels in every likelihood ratio.
double scene_log_likelihood(const SceneBayesNet& bn, const Scene& scene);

// Structured-text serialization (JSON). Doubles are written in shortest
// round-trip form so save/load is bit-exact.
std::string serialize_bn(const SceneBayesNet& bn);
SceneBayesNet deserialize_bn(std::string_view text);
void save_bn(const SceneBayesNet& bn, const std::filesystem::path& path);
SceneBayesNet load_bn(const std::filesystem::path& path);

}  // namespace crisk

#endif  // CRISK_SCENE_MODEL_H_
