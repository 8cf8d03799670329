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

#include "crisk/scene_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "crisk/error.h"
#include "json.hpp"

namespace crisk {

namespace {

constexpr std::array<std::string_view, kNumSceneVars> kVarNames{
    "fore_distance", "fore_velocity", "relative_velocity", "length",
    "width",         "attentive",     "aggressiveness"};

std::string name_of(SceneVar v) { return std::string(kVarNames[idx(v)]); }

}  // namespace

std::string_view scene_var_name(SceneVar v) { return kVarNames[idx(v)]; }

std::optional<SceneVar> scene_var_from_name(std::string_view name) {
  for (SceneVar v : kAllSceneVars) {
    if (kVarNames[idx(v)] == name) return v;
  }
  return std::nullopt;
}

double VehicleRecord::get(SceneVar v) const {
  switch (v) {
    case SceneVar::kForeDistance:
      return fore_distance;
    case SceneVar::kForeVelocity:
      return fore_velocity;
    case SceneVar::kRelativeVelocity:
      return relative_velocity;
    case SceneVar::kLength:
      return length;
    case SceneVar::kWidth:
      return width;
    case SceneVar::kAttentive:
      return attentive;
    case SceneVar::kAggressiveness:
      return aggressiveness;
  }
  return 0.0;
}

void VehicleRecord::set(SceneVar v, double value) {
  switch (v) {
    case SceneVar::kForeDistance:
      fore_distance = value;
      break;
    case SceneVar::kForeVelocity:
      fore_velocity = value;
      break;
    case SceneVar::kRelativeVelocity:
      relative_velocity = value;
      break;
    case SceneVar::kLength:
      length = value;
      break;
    case SceneVar::kWidth:
      width = value;
      break;
    case SceneVar::kAttentive:
      attentive = static_cast<int>(value);
      break;
    case SceneVar::kAggressiveness:
      aggressiveness = value;
      break;
  }
}

// ---------------------------------------------------------------------------
// VariableBins

VariableBins VariableBins::continuous(std::vector<double> edges) {
  VariableBins b;
  b.edges_ = std::move(edges);
  return b;
}

VariableBins VariableBins::categorical(int categories) {
  VariableBins b;
  b.categorical_ = true;
  b.categories_ = categories;
  return b;
}

int VariableBins::num_bins() const {
  return categorical_ ? categories_ : static_cast<int>(edges_.size()) - 1;
}

double VariableBins::lo() const {
  return categorical_ ? 0.0 : edges_.front();
}

double VariableBins::hi() const {
  return categorical_ ? categories_ - 1.0 : edges_.back();
}

double VariableBins::bin_lo(int bin) const {
  return categorical_ ? bin : edges_[static_cast<std::size_t>(bin)];
}

double VariableBins::bin_hi(int bin) const {
  return categorical_ ? bin : edges_[static_cast<std::size_t>(bin) + 1];
}

std::optional<int> VariableBins::find_bin(double x) const {
  if (!std::isfinite(x)) return std::nullopt;
  if (categorical_) {
    const double r = std::round(x);
    if (std::abs(r - x) > 1e-9 || r < 0 || r >= categories_) {
      return std::nullopt;
    }
    return static_cast<int>(r);
  }
  const double tol = 1e-9 * std::max(1.0, hi() - lo());
  if (x < lo() - tol || x > hi() + tol) return std::nullopt;
  return clamped_bin(x);
}

int VariableBins::clamped_bin(double x) const {
  if (categorical_) {
    return std::clamp(static_cast<int>(std::lround(x)), 0, categories_ - 1);
  }
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  const int k = static_cast<int>(it - edges_.begin()) - 1;
  return std::clamp(k, 0, num_bins() - 1);
}

double VariableBins::sample_value(int bin, Rng& rng) const {
  if (categorical_) return bin;
  return uniform(rng, bin_lo(bin), bin_hi(bin));
}

void VariableBins::validate(std::string_view name) const {
  const std::string n(name);
  if (categorical_) {
    if (categories_ < 1) throw RangeError(n + ": needs >= 1 category");
    return;
  }
  if (edges_.size() < 2) throw RangeError(n + ": needs >= 2 bin edges");
  for (double e : edges_) {
    if (!std::isfinite(e)) throw RangeError(n + ": non-finite bin edge");
  }
  // A single zero-width bin is a point mass; otherwise edges must increase.
  if (edges_.size() == 2 && edges_[0] == edges_[1]) return;
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    if (!(edges_[i] > edges_[i - 1])) {
      throw RangeError(n + ": bin edges must be strictly increasing");
    }
  }
}

// ---------------------------------------------------------------------------
// DiscretizationSpec

void DiscretizationSpec::validate() const {
  for (SceneVar v : kAllSceneVars) vars[idx(v)].validate(scene_var_name(v));
}

int DiscretizationSpec::bin_of(SceneVar v, double x) const {
  const auto bin = vars[idx(v)].find_bin(x);
  if (!bin) {
    std::ostringstream os;
    os << "value " << x << " of " << scene_var_name(v)
       << " outside discretization range [" << vars[idx(v)].lo() << ", "
       << vars[idx(v)].hi() << "]";
    throw RangeError(os.str());
  }
  return *bin;
}

namespace {

std::vector<double> quantile_edges(std::vector<double> values, int bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> edges;
  const double n = static_cast<double>(values.size());
  for (int k = 0; k <= bins; ++k) {
    const double pos = (n - 1.0) * k / bins;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    double e = values[lo] + frac * (values[hi] - values[lo]);
    if (k == 0) e = values.front();
    if (k == bins) e = values.back();
    if (edges.empty() || e > edges.back()) {
      edges.push_back(e);
    } else if (k == bins) {
      edges.back() = e;
    }
  }
  if (edges.size() == 1) edges.push_back(edges.front());
  return edges;
}

}  // namespace

DiscretizationSpec DiscretizationSpec::from_quantiles(
    std::span<const VehicleRecord> data, int bins, int aggressiveness_bins) {
  if (data.empty()) throw DataError("cannot discretize an empty dataset");
  if (bins < 1) throw RangeError("bins must be >= 1");
  if (aggressiveness_bins == 0) aggressiveness_bins = bins;
  if (aggressiveness_bins < 1) {
    throw RangeError("aggressiveness bins must be >= 1");
  }
  DiscretizationSpec spec;
  for (SceneVar v : {SceneVar::kForeDistance, SceneVar::kForeVelocity,
                     SceneVar::kRelativeVelocity, SceneVar::kLength,
                     SceneVar::kWidth}) {
    std::vector<double> values;
    values.reserve(data.size());
    for (const VehicleRecord& r : data) values.push_back(r.get(v));
    spec[v] = VariableBins::continuous(quantile_edges(std::move(values), bins));
  }
  std::vector<double> agg_edges;
  for (int k = 0; k <= aggressiveness_bins; ++k) {
    agg_edges.push_back(double(k) / aggressiveness_bins);
  }
  spec[SceneVar::kAggressiveness] = VariableBins::continuous(agg_edges);
  spec[SceneVar::kAttentive] = VariableBins::categorical(2);
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Structure

ParentMap default_parent_map() {
  ParentMap p;
  p[idx(SceneVar::kRelativeVelocity)] = {SceneVar::kForeVelocity};
  p[idx(SceneVar::kForeDistance)] = {SceneVar::kRelativeVelocity};
  p[idx(SceneVar::kWidth)] = {SceneVar::kLength};
  return p;
}

Cpt::Cpt(std::vector<SceneVar> parents, std::vector<int> parent_bins,
         int num_bins, std::vector<double> table)
    : parents_(std::move(parents)),
      parent_bins_(std::move(parent_bins)),
      num_bins_(num_bins),
      table_(std::move(table)) {}

std::size_t Cpt::row_index(const BinAssignment& bins) const {
  std::size_t r = 0;
  for (std::size_t k = 0; k < parents_.size(); ++k) {
    r = r * static_cast<std::size_t>(parent_bins_[k]) +
        static_cast<std::size_t>(bins[idx(parents_[k])]);
  }
  return r;
}

namespace {

std::size_t rows_for(const DiscretizationSpec& bins,
                     const std::vector<SceneVar>& parents) {
  std::size_t rows = 1;
  for (SceneVar p : parents) rows *= bins[p].num_bins();
  return rows;
}

std::vector<SceneVar> topological_order(const ParentMap& parents) {
  std::vector<SceneVar> order;
  std::array<int, kNumSceneVars> state{};  // 0 new, 1 visiting, 2 done
  std::function<void(SceneVar)> visit = [&](SceneVar v) {
    if (state[idx(v)] == 2) return;
    if (state[idx(v)] == 1) {
      throw RangeError("parent map has a cycle through " + name_of(v));
    }
    state[idx(v)] = 1;
    for (SceneVar p : parents[idx(v)]) visit(p);
    state[idx(v)] = 2;
    if (v != SceneVar::kForeVelocity) order.push_back(v);
  };
  for (SceneVar v : kAllSceneVars) visit(v);
  return order;
}

}  // namespace

SceneBayesNet::SceneBayesNet(
    DiscretizationSpec bins, ParentMap parents,
    std::array<std::vector<double>, kNumSceneVars> tables,
    std::vector<double> fore_velocity_prior)
    : bins_(std::move(bins)),
      parents_(std::move(parents)),
      prior_(std::move(fore_velocity_prior)) {
  bins_.validate();
  if (!parents_[idx(SceneVar::kForeVelocity)].empty()) {
    throw RangeError("fore_velocity is observed and cannot have parents");
  }
  for (SceneVar v : kAllSceneVars) {
    auto& ps = parents_[idx(v)];
    for (SceneVar p : ps) {
      if (p == v) throw RangeError(name_of(v) + " lists itself as a parent");
    }
    if (std::set<SceneVar>(ps.begin(), ps.end()).size() != ps.size()) {
      throw RangeError(name_of(v) + " has duplicate parents");
    }
  }
  order_ = topological_order(parents_);

  const int n_vf = bins_[SceneVar::kForeVelocity].num_bins();
  if (prior_.empty()) prior_.assign(static_cast<std::size_t>(n_vf), 1.0 / n_vf);
  if (prior_.size() != static_cast<std::size_t>(n_vf)) {
    throw RangeError("fore_velocity prior size does not match its bins");
  }
  const auto check_row = [](std::span<const double> row,
                            const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw RangeError(what + " has a negative or non-finite probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw RangeError(what + " does not sum to 1");
    }
  };
  check_row(prior_, "fore_velocity prior");

  for (SceneVar v : order_) {
    const auto& ps = parents_[idx(v)];
    std::vector<int> pb;
    for (SceneVar p : ps) pb.push_back(bins_[p].num_bins());
    const int nb = bins_[v].num_bins();
    const std::size_t rows = rows_for(bins_, ps);
    auto& t = tables[idx(v)];
    if (t.size() != rows * static_cast<std::size_t>(nb)) {
      throw RangeError("CPT of " + name_of(v) + " has " +
                       std::to_string(t.size()) + " entries, expected " +
                       std::to_string(rows * nb));
    }
    cpts_[idx(v)] = Cpt(ps, std::move(pb), nb, std::move(t));
    for (std::size_t r = 0; r < rows; ++r) {
      check_row(cpts_[idx(v)].row(r),
                "CPT row " + std::to_string(r) + " of " + name_of(v));
    }
  }
}

bool SceneBayesNet::same_structure(const SceneBayesNet& other) const {
  return bins_ == other.bins_ && parents_ == other.parents_ &&
         prior_ == other.prior_;
}

std::array<std::vector<double>, kNumSceneVars> SceneBayesNet::tables() const {
  std::array<std::vector<double>, kNumSceneVars> t;
  for (SceneVar v : order_) t[idx(v)] = cpts_[idx(v)].table();
  return t;
}

SceneBayesNet SceneBayesNet::with_tables(
    std::array<std::vector<double>, kNumSceneVars> tables) const {
  return SceneBayesNet(bins_, parents_, std::move(tables), prior_);
}

// ---------------------------------------------------------------------------
// Fitting

BinAssignment record_bins(const DiscretizationSpec& spec,
                          const VehicleRecord& record) {
  BinAssignment b{};
  for (SceneVar v : kAllSceneVars) b[idx(v)] = spec.bin_of(v, record.get(v));
  return b;
}

SceneBayesNet fit_scene_bn(std::span<const VehicleRecord> records,
                           const DiscretizationSpec& spec, double smoothing,
                           const ParentMap& parents) {
  if (records.empty()) throw DataError("cannot fit a scene model to 0 records");
  if (!(smoothing >= 0.0)) throw RangeError("smoothing must be >= 0");
  spec.validate();

  std::vector<BinAssignment> data;
  data.reserve(records.size());
  for (const VehicleRecord& r : records) data.push_back(record_bins(spec, r));

  std::array<std::vector<double>, kNumSceneVars> tables;
  for (SceneVar v : kAllSceneVars) {
    if (v == SceneVar::kForeVelocity) continue;
    const auto& ps = parents[idx(v)];
    std::vector<int> pb;
    for (SceneVar p : ps) pb.push_back(spec[p].num_bins());
    const int nb = spec[v].num_bins();
    const std::size_t rows = rows_for(spec, ps);
    const Cpt shape(ps, pb, nb, {});
    std::vector<double> counts(rows * nb, 0.0);
    for (const BinAssignment& b : data) {
      counts[shape.row_index(b) * nb + b[idx(v)]] += 1.0;
    }
    auto& t = tables[idx(v)];
    t.resize(counts.size());
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (int k = 0; k < nb; ++k) total += counts[r * nb + k];
      const double denom = total + smoothing * nb;
      for (int k = 0; k < nb; ++k) {
        t[r * nb + k] =
            denom > 0.0 ? (counts[r * nb + k] + smoothing) / denom : 1.0 / nb;
      }
    }
  }
  return SceneBayesNet(spec, parents, std::move(tables));
}

// ---------------------------------------------------------------------------
// Marginals and probabilities

std::array<Cpt, kNumSceneVars> marginal_first_vehicle(
    const SceneBayesNet& bn) {
  std::array<Cpt, kNumSceneVars> out;
  const auto& prior = bn.fore_velocity_prior();
  for (SceneVar v : bn.sample_order()) {
    const Cpt& c = bn.cpt(v);
    const auto& ps = c.parents();
    const auto it = std::find(ps.begin(), ps.end(), SceneVar::kForeVelocity);
    if (it == ps.end()) {
      out[idx(v)] = c;
      continue;
    }
    std::vector<SceneVar> rest;
    std::vector<int> rest_bins;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (ps[k] == SceneVar::kForeVelocity) continue;
      rest.push_back(ps[k]);
      rest_bins.push_back(c.parent_bins()[k]);
    }
    const Cpt shape(rest, rest_bins, c.num_bins(), {});
    const std::size_t rows = std::accumulate(
        rest_bins.begin(), rest_bins.end(), std::size_t{1},
        [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    std::vector<double> t(rows * c.num_bins(), 0.0);
    // Enumerate every joint parent assignment of the original table.
    BinAssignment b{};
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
      if (k == ps.size()) {
        const double w = prior[b[idx(SceneVar::kForeVelocity)]];
        const std::size_t src = c.row_index(b);
        const std::size_t dst = shape.row_index(b);
        for (int j = 0; j < c.num_bins(); ++j) {
          t[dst * c.num_bins() + j] += w * c.prob(src, j);
        }
        return;
      }
      for (int x = 0; x < c.parent_bins()[k]; ++x) {
        b[idx(ps[k])] = x;
        rec(k + 1);
      }
    };
    rec(0);
    out[idx(v)] = Cpt(rest, rest_bins, c.num_bins(), std::move(t));
  }
  return out;
}

namespace {

double conditional_product(const SceneBayesNet& bn, const BinAssignment& b) {
  double p = 1.0;
  for (SceneVar v : bn.sample_order()) {
    const Cpt& c = bn.cpt(v);
    p *= c.prob(c.row_index(b), b[idx(v)]);
  }
  return p;
}

}  // namespace

double vehicle_probability(const SceneBayesNet& bn, const BinAssignment& bins,
                           bool first) {
  if (!first) return conditional_product(bn, bins);
  BinAssignment b = bins;
  double p = 0.0;
  const auto& prior = bn.fore_velocity_prior();
  for (std::size_t k = 0; k < prior.size(); ++k) {
    b[idx(SceneVar::kForeVelocity)] = static_cast<int>(k);
    p += prior[k] * conditional_product(bn, b);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

int sample_index(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] > 0.0) last_positive = static_cast<int>(k);
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return last_positive;
}

}  // namespace

VehicleDraw sample_vehicle(const SceneBayesNet& bn,
                           std::optional<double> fore_velocity, Rng& rng) {
  VehicleDraw d;
  const VariableBins& vf = bn.bins()[SceneVar::kForeVelocity];
  if (fore_velocity) {
    d.bins[idx(SceneVar::kForeVelocity)] = vf.clamped_bin(*fore_velocity);
    d.values.fore_velocity = *fore_velocity;
  } else {
    const int b = sample_index(bn.fore_velocity_prior(), rng);
    d.bins[idx(SceneVar::kForeVelocity)] = b;
    d.values.fore_velocity = vf.sample_value(b, rng);
  }
  for (SceneVar v : bn.sample_order()) {
    const Cpt& c = bn.cpt(v);
    const int b = sample_index(c.row(c.row_index(d.bins)), rng);
    d.bins[idx(v)] = b;
    d.values.set(v, bn.bins()[v].sample_value(b, rng));
  }
  return d;
}

Scene place_vehicles(std::span<const VehicleDraw> draws,
                     std::vector<DriverParams> params, const RoadSpec& road) {
  road.validate();
  const std::size_t n = draws.size();
  Scene scene;
  scene.road = road;
  scene.vehicles.resize(n);
  // Front bumpers, rear-most vehicle's rear bumper at 0.
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    const VehicleRecord& r = draws[k].values;
    if (k + 1 == n) {
      x[k] = r.length;
    } else {
      const double gap = draws[k + 1].values.fore_distance;
      if (gap < 0.0) throw PlacementError("negative fore distance sampled");
      x[k] = x[k + 1] + gap + r.length;
    }
  }
  if (n > 0 && x.front() > road.length) {
    std::ostringstream os;
    os << "vehicles span " << x.front() << " m on a " << road.length
       << " m road";
    throw PlacementError(os.str());
  }
  for (std::size_t k = 0; k < n; ++k) {
    const VehicleRecord& r = draws[k].values;
    Vehicle& v = scene.vehicles[k];
    v.id = static_cast<int>(k);
    v.position = road.circular ? std::fmod(x[k], road.length) : x[k];
    v.length = r.length;
    v.width = r.width;
    v.velocity = std::max(0.0, r.fore_velocity + r.relative_velocity);
    v.params = params[k];
    v.params.attentive = r.attentive != 0;
    v.params.aggressiveness = r.aggressiveness;
  }
  if (n > 0) {
    scene.lead_context = LeadContext{draws[0].values.fore_distance,
                                     draws[0].values.relative_velocity};
  }
  return scene;
}

Scene sample_scene(const SceneBayesNet& bn, int num_vehicles,
                   const RoadSpec& road, Rng& rng) {
  if (num_vehicles < 1) throw RangeError("num_vehicles must be >= 1");
  std::vector<VehicleDraw> draws;
  std::vector<DriverParams> params;
  std::optional<double> fore;
  for (int i = 0; i < num_vehicles; ++i) {
    draws.push_back(sample_vehicle(bn, fore, rng));
    VehicleRecord& r = draws.back().values;
    params.push_back(sample_driver_params(r.aggressiveness, rng));
    fore = std::max(0.0, r.fore_velocity + r.relative_velocity);
  }
  return place_vehicles(draws, std::move(params), road);
}

// ---------------------------------------------------------------------------
// Likelihood

std::vector<BinAssignment> scene_bins(const SceneBayesNet& bn,
                                      const Scene& scene) {
  const DiscretizationSpec& spec = bn.bins();
  std::vector<BinAssignment> out;
  out.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vehicle& v = scene.vehicles[i];
    VehicleRecord r;
    r.length = v.length;
    r.width = v.width;
    r.attentive = v.params.attentive ? 1 : 0;
    r.aggressiveness = v.params.aggressiveness;
    BinAssignment b{};
    if (i == 0) {
      if (!scene.lead_context) {
        throw DataError("scene has no fore context for its first vehicle");
      }
      r.fore_distance = scene.lead_context->fore_distance;
      r.relative_velocity = scene.lead_context->relative_velocity;
      b[idx(SceneVar::kForeVelocity)] = 0;  // marginalized
    } else {
      const Vehicle& fore = scene.vehicles[i - 1];
      r.fore_distance = bumper_gap(scene.road, v, fore);
      r.relative_velocity = v.velocity - fore.velocity;
      b[idx(SceneVar::kForeVelocity)] =
          spec[SceneVar::kForeVelocity].clamped_bin(fore.velocity);
    }
    for (SceneVar var : bn.sample_order()) {
      b[idx(var)] = spec.bin_of(var, r.get(var));
    }
    out.push_back(b);
  }
  return out;
}

double scene_log_likelihood(const SceneBayesNet& bn, const Scene& scene) {
  const auto bins = scene_bins(bn, scene);
  double ll = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    ll += std::log(vehicle_probability(bn, bins[i], i == 0));
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json bins_to_json(SceneVar v, const VariableBins& b) {
  json j;
  j["name"] = name_of(v);
  if (b.is_categorical()) {
    j["kind"] = "categorical";
    j["categories"] = b.categories();
  } else {
    j["kind"] = "continuous";
    j["edges"] = b.edges();
  }
  return j;
}

}  // namespace

std::string serialize_bn(const SceneBayesNet& bn) {
  json j;
  j["format"] = "crisk-scene-bn";
  j["version"] = 1;
  json vars = json::array();
  for (SceneVar v : kAllSceneVars) vars.push_back(bins_to_json(v, bn.bins()[v]));
  j["variables"] = vars;
  j["fore_velocity_prior"] = bn.fore_velocity_prior();
  json cpts = json::array();
  for (SceneVar v : kAllSceneVars) {
    if (v == SceneVar::kForeVelocity) continue;
    const Cpt& c = bn.cpt(v);
    json cj;
    cj["variable"] = name_of(v);
    json parents = json::array();
    for (SceneVar p : c.parents()) parents.push_back(name_of(p));
    cj["parents"] = parents;
    json rows = json::array();
    for (std::size_t r = 0; r < c.num_rows(); ++r) {
      const auto row = c.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    cj["rows"] = rows;
    cpts.push_back(cj);
  }
  j["cpts"] = cpts;
  return j.dump(1) + "\n";
}

SceneBayesNet deserialize_bn(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed scene model: ") + e.what());
  }
  try {
    if (j.at("format") != "crisk-scene-bn") {
      throw DataError("not a crisk scene model file");
    }
    DiscretizationSpec spec;
    for (const json& vj : j.at("variables")) {
      const auto v = scene_var_from_name(vj.at("name").get<std::string>());
      if (!v) throw DataError("unknown variable in scene model");
      if (vj.at("kind") == "categorical") {
        spec[*v] = VariableBins::categorical(vj.at("categories").get<int>());
      } else {
        spec[*v] =
            VariableBins::continuous(vj.at("edges").get<std::vector<double>>());
      }
    }
    ParentMap parents;
    std::array<std::vector<double>, kNumSceneVars> tables;
    for (const json& cj : j.at("cpts")) {
      const auto v = scene_var_from_name(cj.at("variable").get<std::string>());
      if (!v) throw DataError("unknown CPT variable in scene model");
      for (const json& pj : cj.at("parents")) {
        const auto p = scene_var_from_name(pj.get<std::string>());
        if (!p) throw DataError("unknown parent in scene model");
        parents[idx(*v)].push_back(*p);
      }
      for (const json& row : cj.at("rows")) {
        for (const json& x : row) tables[idx(*v)].push_back(x.get<double>());
      }
    }
    return SceneBayesNet(
        std::move(spec), std::move(parents), std::move(tables),
        j.at("fore_velocity_prior").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed scene model: ") + e.what());
  }
}

void save_bn(const SceneBayesNet& bn, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize_bn(bn);
}

SceneBayesNet load_bn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_bn(ss.str());
}

}  // namespace crisk
