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

#include "crisk/importance_sampler.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crisk/error.h"
#include "crisk/format.h"
#include "crisk/parallel.h"
#include "crisk/risk_estimator.h"

namespace crisk {

namespace {

void check_rows(const SceneBayesNet& rho1, const SceneBayesNet& q,
                const BinAssignment& bins) {
  for (SceneVar v : q.sample_order()) {
    const Cpt& cq = q.cpt(v);
    const Cpt& cr = rho1.cpt(v);
    const std::size_t r = cq.row_index(bins);
    for (int k = 0; k < cq.num_bins(); ++k) {
      if (cr.prob(r, k) > 0.0 && !(cq.prob(r, k) > 0.0)) {
        throw SupportError("proposal assigns zero probability to bin " +
                           std::to_string(k) + " of " +
                           std::string(scene_var_name(v)) +
                           " where the scene model does not");
      }
    }
  }
}

}  // namespace

ProposalDraw sample_with_proposal(const SceneBayesNet& rho1,
                                  const SceneBayesNet& proposal,
                                  std::size_t ego, int num_vehicles,
                                  const RoadSpec& road, Rng& rng) {
  if (num_vehicles < 1) throw RangeError("num_vehicles must be >= 1");
  if (ego >= static_cast<std::size_t>(num_vehicles)) {
    throw RangeError("ego index out of range");
  }
  if (!rho1.same_structure(proposal)) {
    throw RangeError("proposal and scene model differ in structure");
  }
  ProposalDraw out;
  std::vector<VehicleDraw> draws;
  std::vector<DriverParams> params;
  std::optional<double> fore;
  for (std::size_t i = 0; i < static_cast<std::size_t>(num_vehicles); ++i) {
    const SceneBayesNet& bn = i == ego ? proposal : rho1;
    draws.push_back(sample_vehicle(bn, fore, rng));
    VehicleRecord& r = draws.back().values;
    params.push_back(sample_driver_params(r.aggressiveness, rng));
    fore = std::max(0.0, r.fore_velocity + r.relative_velocity);
    if (i == ego) {
      const BinAssignment& b = draws.back().bins;
      check_rows(rho1, proposal, b);
      const double p = vehicle_probability(rho1, b, false);
      const double q = vehicle_probability(proposal, b, false);
      if (!(q > 0.0)) throw SupportError("proposal probability is zero");
      out.w = p / q;
      out.ego_bins = b;
      out.ego_values = r;
    }
  }
  out.scene = place_vehicles(draws, std::move(params), road);
  return out;
}

void CemConfig::validate() const {
  if (population < 1) throw RangeError("population must be >= 1");
  if (rollouts < 1) throw RangeError("rollouts must be >= 1");
  if (!(elite_fraction > 0.0 && elite_fraction <= 1.0)) {
    throw RangeError("elite fraction must lie in (0, 1]");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw RangeError("alpha must lie in (0, 1]");
  }
  if (max_iterations < 0) throw RangeError("max iterations must be >= 0");
  if (!(pseudo_count >= 0.0)) throw RangeError("pseudo-count must be >= 0");
  if (num_vehicles < 1) throw RangeError("num_vehicles must be >= 1");
  if (ego_index < 0 || ego_index >= num_vehicles) {
    throw RangeError("ego index must lie in [0, num_vehicles)");
  }
  if (elite_count() < 1) throw RangeError("elite set would be empty");
  sim.validate();
  road.validate();
}

int CemConfig::elite_count() const {
  return static_cast<int>(std::floor(population * elite_fraction + 1e-9));
}

CemStep cem_iteration(const SceneBayesNet& proposal, const SceneBayesNet& rho1,
                      const CemConfig& config, std::uint64_t seed,
                      int iteration) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.population);
  const auto ego = static_cast<std::size_t>(config.ego_index);
  const auto it = static_cast<std::uint64_t>(iteration);
  std::vector<ProposalDraw> draws(n);
  std::vector<double> scores(n);
  parallel_for(n, config.threads, [&](std::size_t c) {
    Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(
                                              Stream::kCem),
                                          it, c, 0}));
    draws[c] = sample_with_proposal(rho1, proposal, ego, config.num_vehicles,
                                    config.road, rng);
    const std::uint64_t rs = derive_seed(
        seed, {static_cast<std::uint64_t>(Stream::kCem), it, c, 1});
    scores[c] = estimate_risk(draws[c].scene, ego, config.rollouts,
                              config.sim, rs)
                    .p;
  });

  CemRecord rec;
  rec.iteration = iteration;
  for (std::size_t c = 0; c < n; ++c) {
    rec.collision_prob += scores[c];
    rec.mean_attentive += draws[c].ego_values.attentive;
    rec.mean_aggressiveness += draws[c].ego_values.aggressiveness;
    rec.mean_relative_velocity += draws[c].ego_values.relative_velocity;
  }
  rec.collision_prob /= n;
  rec.mean_attentive /= n;
  rec.mean_aggressiveness /= n;
  rec.mean_relative_velocity /= n;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return scores[a] > scores[b];
  });
  std::size_t elites = static_cast<std::size_t>(config.elite_count());
  if (scores[order.front()] <= 0.0) {
    rec.degenerate = true;
    elites = n;
  } else {
    while (elites > 1 && scores[order[elites - 1]] <= 0.0) --elites;
  }
  rec.elite_threshold = scores[order[elites - 1]];

  auto tables = proposal.tables();
  for (SceneVar v : proposal.sample_order()) {
    const Cpt& c = proposal.cpt(v);
    const int nb = c.num_bins();
    std::vector<double> counts(c.table().size(), 0.0);
    for (std::size_t e = 0; e < elites; ++e) {
      const BinAssignment& b = draws[order[e]].ego_bins;
      counts[c.row_index(b) * nb + b[idx(v)]] += 1.0;
    }
    auto& t = tables[idx(v)];
    for (std::size_t r = 0; r < c.num_rows(); ++r) {
      double total = 0.0;
      for (int k = 0; k < nb; ++k) total += counts[r * nb + k];
      if (total <= 0.0) continue;
      const double denom = total + config.pseudo_count * nb;
      double sum = 0.0;
      for (int k = 0; k < nb; ++k) {
        const double fit = (counts[r * nb + k] + config.pseudo_count) / denom;
        double& q = t[r * nb + k];
        q = config.alpha * fit + (1.0 - config.alpha) * q;
        sum += q;
      }
      for (int k = 0; k < nb; ++k) t[r * nb + k] /= sum;
    }
  }
  return {proposal.with_tables(std::move(tables)), rec};
}

CemResult run_cem(const SceneBayesNet& rho1, const CemConfig& config,
                  std::uint64_t seed) {
  config.validate();
  CemResult result{rho1, {}};
  for (int it = 0; it < config.max_iterations; ++it) {
    CemStep step = cem_iteration(result.proposal, rho1, config, seed, it);
    result.history.records.push_back(step.record);
    result.proposal = std::move(step.proposal);
    if (step.record.collision_prob > config.stop_probability) break;
  }
  return result;
}

void write_cem_history_csv(const CemHistory& history, std::ostream& out) {
  out << "iteration,collision_prob,elite_threshold,degenerate,"
         "mean_attentive,mean_aggressiveness,mean_relative_velocity\n";
  for (const CemRecord& r : history.records) {
    out << r.iteration << ',' << format_double(r.collision_prob) << ','
        << format_double(r.elite_threshold) << ',' << (r.degenerate ? 1 : 0)
        << ',' << format_double(r.mean_attentive) << ','
        << format_double(r.mean_aggressiveness) << ','
        << format_double(r.mean_relative_velocity) << '\n';
  }
}

}  // namespace crisk
