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

#include "crisk/risk_estimator.h"

#include <cmath>
#include <string>

#include "crisk/error.h"
#include "crisk/importance_sampler.h"
#include "crisk/parallel.h"

namespace crisk {

RiskEstimate estimate_bernoulli(int n, std::uint64_t seed,
                                const std::function<bool(Rng&)>& trial) {
  if (n < 1) throw RangeError("rollout count must be >= 1");
  RiskEstimate est;
  est.n = n;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(derive_seed(seed, Stream::kRollout, i));
    if (trial(rng)) ++est.collisions;
  }
  est.p = static_cast<double>(est.collisions) / n;
  est.stderr_ = std::sqrt(est.p * (1.0 - est.p) / n);
  return est;
}

RiskEstimate estimate_risk(const Scene& scene, std::size_t ego, int n,
                           const SimConfig& config, std::uint64_t seed) {
  if (n < 1) throw RangeError("rollout count must be >= 1");
  RiskEstimate est;
  est.n = n;
  est.collision_steps.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(derive_seed(seed, Stream::kRollout, i));
    RolloutResult r;
    try {
      r = rollout(scene, ego, config, rng);
    } catch (const SimulationError& e) {
      throw NumericalError("rollout " + std::to_string(i) + ": " + e.what());
    }
    if (r.collision) ++est.collisions;
    est.collision_steps.push_back(r.collision_step.value_or(-1));
  }
  est.p = static_cast<double>(est.collisions) / n;
  est.stderr_ = std::sqrt(est.p * (1.0 - est.p) / n);
  return est;
}

std::string_view domain_name(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

Domain domain_from_name(std::string_view name) {
  if (name == "source") return Domain::kSource;
  if (name == "target") return Domain::kTarget;
  throw DataError("unknown domain '" + std::string(name) + "'");
}

void SourceConfig::validate() const {
  if (scenes < 0) throw RangeError("scene count must be >= 0");
  if (num_vehicles < 1) throw RangeError("num_vehicles must be >= 1");
  if (ego_index < 0 || ego_index >= num_vehicles) {
    throw RangeError("ego index must lie in [0, num_vehicles)");
  }
  if (rollouts < 1) throw RangeError("rollouts must be >= 1");
  sim.validate();
  road.validate();
}

std::vector<WeightedSample> build_dataset(const SceneBayesNet& rho1,
                                          const SceneBayesNet* proposal,
                                          const SourceConfig& config,
                                          std::uint64_t seed) {
  config.validate();
  if (proposal && !rho1.same_structure(*proposal)) {
    throw RangeError("proposal and scene model differ in structure");
  }
  const auto m = static_cast<std::size_t>(config.scenes);
  const auto ego = static_cast<std::size_t>(config.ego_index);
  std::vector<WeightedSample> out(m);
  parallel_for(m, config.threads, [&](std::size_t s) {
    Rng rng = make_rng(derive_seed(seed, Stream::kSceneSample, s));
    Scene scene;
    double w = 1.0;
    if (proposal) {
      ProposalDraw d = sample_with_proposal(rho1, *proposal, ego,
                                            config.num_vehicles, config.road,
                                            rng);
      scene = std::move(d.scene);
      w = d.w;
    } else {
      scene = sample_scene(rho1, config.num_vehicles, config.road, rng);
    }
    WeightedSample& ws = out[s];
    ws.x = extract_features(scene, ego, config.neighbors, config.ttc_cap);
    const RiskEstimate r =
        estimate_risk(scene, ego, config.rollouts, config.sim,
                      derive_seed(seed, Stream::kRollout, s));
    ws.y = r.p;
    ws.w = w;
    ws.domain = Domain::kSource;
    ws.scene_id = static_cast<std::int64_t>(s);
    ws.ego_id = scene.vehicles[ego].id;
    ws.collision_steps = r.collision_steps;
  });
  return out;
}

std::string_view target_label_name(TargetLabel l) {
  return l == TargetLabel::kCollision ? "collision" : "low-ttc";
}

TargetLabel target_label_from_name(std::string_view name) {
  if (name == "collision") return TargetLabel::kCollision;
  if (name == "low-ttc") return TargetLabel::kLowTtc;
  throw UsageError("unknown target label '" + std::string(name) + "'");
}

void TargetConfig::validate() const {
  if (scenes < 0) throw RangeError("scene count must be >= 0");
  if (vehicles_per_scene < 1) {
    throw RangeError("vehicles_per_scene must be >= 1");
  }
  if (burn_in_steps < 0) throw RangeError("burn-in steps must be >= 0");
  if (rollouts < 1) throw RangeError("rollouts must be >= 1");
  if (!(ttc_threshold >= 0.0)) throw RangeError("TTC threshold must be >= 0");
  sim.validate();
  road.validate();
}

std::vector<WeightedSample> build_target_dataset(const TargetConfig& config,
                                                 std::uint64_t seed) {
  config.validate();
  const auto m = static_cast<std::size_t>(config.scenes);
  const auto per = static_cast<std::size_t>(config.vehicles_per_scene);
  std::vector<WeightedSample> out(m * per);
  parallel_for(m, config.threads, [&](std::size_t s) {
    const auto id = static_cast<std::uint64_t>(config.first_scene_id) + s;
    Rng burn = make_rng(derive_seed(seed, Stream::kBurnIn, id));
    const Scene scene = burn_in_scene(config.road, config.vehicles_per_scene,
                                      config.burn_in_steps, burn);
    std::vector<std::vector<int>> steps(
        per, std::vector<int>(static_cast<std::size_t>(config.rollouts), -1));
    std::vector<int> hits(per, 0);
    for (int r = 0; r < config.rollouts; ++r) {
      Rng rng = make_rng(derive_seed(seed, Stream::kRollout, id,
                                     static_cast<std::uint64_t>(r)));
      std::vector<std::optional<int>> first;
      LowTtcProbe probe;
      probe.threshold = config.ttc_threshold;
      probe.start = config.sim.collision_start;
      const bool low_ttc = config.label == TargetLabel::kLowTtc;
      try {
        first = rollout_all(scene, config.sim, rng, low_ttc ? &probe : nullptr);
      } catch (const SimulationError& e) {
        throw NumericalError("scene " + std::to_string(id) + " rollout " +
                             std::to_string(r) + ": " + e.what());
      }
      for (std::size_t v = 0; v < per; ++v) {
        if (first[v]) steps[v][static_cast<std::size_t>(r)] = *first[v];
        const std::optional<int>& event = low_ttc ? probe.first[v] : first[v];
        if (event && *event >= config.sim.collision_start) ++hits[v];
      }
    }
    for (std::size_t v = 0; v < per; ++v) {
      WeightedSample& ws = out[s * per + v];
      ws.x = extract_features(scene, v, config.neighbors, config.ttc_cap);
      ws.y = static_cast<double>(hits[v]) / config.rollouts;
      ws.w = 1.0;
      ws.domain = Domain::kTarget;
      ws.scene_id = static_cast<std::int64_t>(id);
      ws.ego_id = scene.vehicles[v].id;
      ws.collision_steps = std::move(steps[v]);
    }
  });
  return out;
}

double unconditional_collision_prob(std::span<const WeightedSample> samples) {
  if (samples.empty()) throw DataError("no samples");
  double sum = 0.0;
  for (const WeightedSample& s : samples) sum += s.w * s.y;
  return sum / static_cast<double>(samples.size());
}

double unconditional_collision_stderr(
    std::span<const WeightedSample> samples) {
  const std::size_t m = samples.size();
  if (m < 2) return 0.0;
  const double mean = unconditional_collision_prob(samples);
  double ss = 0.0;
  for (const WeightedSample& s : samples) {
    const double d = s.w * s.y - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m));
}

}  // namespace crisk
