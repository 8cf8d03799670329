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

// Acceptance suite. Each criterion prints one PASS/FAIL line; the process
// exits 0 only if every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crisk/dataset_io.h"
#include "crisk/driver_models.h"
#include "crisk/eval_metrics.h"
#include "crisk/features.h"
#include "crisk/importance_sampler.h"
#include "crisk/pipeline.h"
#include "crisk/predictor.h"
#include "crisk/risk_estimator.h"
#include "crisk/rng.h"
#include "crisk/traffic_sim.h"
#include "test_util.h"

namespace crisk {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <typename... T>
std::string fmtn(const char* f, T... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Pinned tolerances.
constexpr double kZ = 3.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kLossTol = 1e-9;
constexpr double kIdmTol = 0.01;
constexpr double kApHandTol = 1e-9;
constexpr double kApRandomTol = 0.01;
constexpr double kCemLift = 5.0;
constexpr double kSignTestAlpha = 0.1;

// --------------------------------------------------------------------------
// 1. Parameter sampling at the aggressiveness endpoints.

Outcome driver_bounds() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kDraws = 100000;
  Rng rng(derive_seed(1, {101}));
  bool ok = true;
  double worst_z = 0.0;
  std::string worst;
  for (double agg : {0.0, 1.0}) {
    std::vector<DriverParams> draws;
    draws.reserve(kDraws);
    for (int i = 0; i < kDraws; ++i) {
      draws.push_back(sample_driver_params(agg, rng));
    }
    for (const ParamBounds& b : kParamBounds) {
      const double expected = agg == 0.0 ? b.least : b.most;
      double sum = 0.0, sq = 0.0;
      for (const DriverParams& p : draws) {
        const double x = p.*(b.field);
        if (x < b.lo() || x > b.hi()) ok = false;
        sum += x;
        sq += x * x;
      }
      const double mean = sum / kDraws;
      const double var = std::max(0.0, sq / kDraws - mean * mean);
      const double se = std::sqrt(var / kDraws);
      const double err = std::abs(mean - expected);
      const double z = se > 0.0 ? err / se : (err == 0.0 ? 0.0 : INFINITY);
      if (z > kZ) ok = false;
      if (z > worst_z) {
        worst_z = z;
        worst = fmtn("%s@agg=%g mean=%.6g expected=%g", std::string(b.name).c_str(),
                     agg, mean, expected);
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 10.0) ok = false;
  return {ok, fmtn("worst |z|=%.1f (%s), limit %.0f; %.1f s", worst_z,
                   worst.c_str(), kZ, secs)};
}

// --------------------------------------------------------------------------
// 2. Importance-sampling unbiasedness on the two-vehicle toy.

// Exact collision probability by enumerating the ego's bin assignments and
// simulating one representative scene per assignment.
double enumerate_toy(const testing::CollisionToy& toy) {
  const SceneBayesNet bn = toy.bn();
  const DiscretizationSpec spec = testing::CollisionToy::spec();
  const auto& rv_bins = spec[SceneVar::kRelativeVelocity];
  const auto& sf_bins = spec[SceneVar::kForeDistance];
  const auto& vf_bins = spec[SceneVar::kForeVelocity];
  const double vf = 0.5 * (vf_bins.bin_lo(0) + vf_bins.bin_hi(0));
  double p = 0.0;
  for (int r = 0; r < rv_bins.num_bins(); ++r) {
    const double pr = bn.cpt(SceneVar::kRelativeVelocity).prob(0, r);
    if (pr == 0.0) continue;
    for (int s = 0; s < sf_bins.num_bins(); ++s) {
      const double ps = bn.cpt(SceneVar::kForeDistance).prob(r, s);
      if (ps == 0.0) continue;
      Scene scene;
      Vehicle fore;
      fore.id = 0;
      fore.position = 200.0;
      fore.velocity = vf;
      fore.params.desired_velocity = vf;
      Vehicle ego;
      ego.id = 1;
      ego.velocity = vf + 0.5 * (rv_bins.bin_lo(r) + rv_bins.bin_hi(r));
      ego.position = fore.rear() - 0.5 * (sf_bins.bin_lo(s) + sf_bins.bin_hi(s));
      scene.vehicles = {fore, ego};
      Rng rng(1);
      const bool hit =
          rollout(scene, 1, testing::CollisionToy::sim(), rng).collision;
      if (hit) p += pr * ps;
    }
  }
  return p;
}

Outcome is_unbiased() {
  const auto t0 = std::chrono::steady_clock::now();
  const testing::CollisionToy toy;
  const testing::CollisionToy prop{0.5, 0.5, 0.5};
  const double exact = enumerate_toy(toy);
  const SceneBayesNet rho1 = toy.bn();
  const SceneBayesNet q = prop.bn();
  SourceConfig cfg;
  cfg.scenes = 400;
  cfg.num_vehicles = 2;
  cfg.ego_index = 1;
  cfg.rollouts = 1;
  cfg.sim = testing::CollisionToy::sim();
  constexpr int kReps = 100;
  int covered = 0;
  for (int rep = 0; rep < kReps; ++rep) {
    const auto data =
        build_dataset(rho1, &q, cfg, derive_seed(2, {202, std::uint64_t(rep)}));
    const double est = unconditional_collision_prob(data);
    const double se = unconditional_collision_stderr(data);
    covered += std::abs(est - exact) <= kZ * se;
  }
  const double secs = seconds_since(t0);
  const bool ok = covered >= 95 && secs < 120.0;
  return {ok, fmtn("p*=%.6g by enumeration; %d/%d replications within %.0f SE "
                   "(need 95); %.1f s",
                   exact, covered, kReps, kZ, secs)};
}

// --------------------------------------------------------------------------
// 3. Cross-entropy lift on the fitted highway model.

// Window-collision rate by plain Monte Carlo over scenes drawn from `q`
// (one vehicle) and `rho1` (the rest).
double window_rate(const SceneBayesNet& rho1, const SceneBayesNet& q,
                   const CemConfig& cfg, int scenes, int rollouts,
                   std::uint64_t seed, int* total) {
  SourceConfig sc;
  sc.scenes = scenes;
  sc.num_vehicles = cfg.num_vehicles;
  sc.ego_index = cfg.ego_index;
  sc.rollouts = rollouts;
  sc.sim = cfg.sim;
  sc.road = cfg.road;
  sc.threads = cfg.threads;
  const auto data = build_dataset(rho1, &q, sc, seed);
  double hits = 0.0;
  for (const WeightedSample& s : data) hits += s.y * rollouts;
  *total = scenes * rollouts;
  return hits / *total;
}

Outcome cem_lift() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = default_config();
  const RecordsFile records = make_records(cfg);
  const SceneBayesNet rho1 = fit_scene_model(cfg, records.records);
  int n_base = 0, n_q = 0;
  const double base =
      window_rate(rho1, rho1, cfg.cem, 5000, 4, derive_seed(3, {301}), &n_base);
  const CemResult res = learn_proposal(cfg, rho1);
  const double lifted = window_rate(rho1, res.proposal, cfg.cem, 5000, 4,
                                    derive_seed(3, {302}), &n_q);
  const auto& h = res.history.records;
  bool monotone = h.size() >= 3;
  double worst_drop = 0.0;
  for (std::size_t i = 3; i < h.size(); ++i) {
    const double prev = (h[i - 3].collision_prob + h[i - 2].collision_prob +
                         h[i - 1].collision_prob) / 3.0;
    const double cur = (h[i - 2].collision_prob + h[i - 1].collision_prob +
                        h[i].collision_prob) / 3.0;
    // Consecutive 3-means differ by (x_i - x_{i-3}) / 3; allow 3 binomial
    // standard errors of that difference.
    const double n = static_cast<double>(cfg.cem.population) * cfg.cem.rollouts;
    const double p = std::max(prev, 1.0 / n);
    const double noise = kZ * std::sqrt(2.0 * p / n) / 3.0;
    worst_drop = std::max(worst_drop, prev - cur);
    if (cur < prev - noise) monotone = false;
  }
  const double lift = base > 0.0 ? lifted / base : (lifted > 0.0 ? INFINITY : 0.0);
  const double secs = seconds_since(t0);
  const bool ok = n_base >= 2000 && lift >= kCemLift && monotone && secs < 600;
  return {ok, fmtn("baseline %.5f over %d rollouts, proposal %.5f over %d; "
                   "lift %.2f (need %.0f); smoothed trace %s (largest drop "
                   "%.5f); %zu iterations; %.0f s",
                   base, n_base, lifted, n_q, lift, kCemLift,
                   monotone ? "non-decreasing" : "decreasing", worst_drop,
                   h.size(), secs)};
}

// --------------------------------------------------------------------------
// 4. Gradient correctness.

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::vector<int>> encoders{
      {512, 256, 128, 64}, {256, 128, 64}, {128, 64}};
  const int d = static_cast<int>(FeatureSchema().size());
  double worst = 0.0;
  int checked = 0;
  for (const auto& enc : encoders) {
    for (double lambda : {0.0, 0.5}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        MlpSpec spec;
        spec.input_dim = d;
        spec.encoder_hidden = enc;
        spec.classifier_hidden = {16};
        spec.discriminator_hidden = {16, 16};
        const Mlp net(spec, derive_seed(4, {401, seed}));
        Rng rng(derive_seed(4, {402, seed}));
        Batch b;
        b.xs.resize(d, 6);
        b.xt.resize(d, 6);
        for (Eigen::Index k = 0; k < b.xs.size(); ++k) {
          b.xs.data()[k] = standard_normal(rng);
          b.xt.data()[k] = standard_normal(rng);
        }
        b.ys.resize(6);
        b.yt.resize(6);
        b.ws.resize(6);
        b.wt = Eigen::VectorXd::Ones(6);
        for (int i = 0; i < 6; ++i) {
          b.ys[i] = uniform01(rng);
          b.yt[i] = i % 2;
          b.ws[i] = uniform(rng, 0.1, 2.0);
        }
        const GradCheckResult r = grad_check(net, b, lambda, kGradStep, rng);
        worst = std::max(worst, r.max_relative_error);
        checked += r.checked;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst < kGradTol && checked > 0 && secs < 120.0;
  return {ok, fmtn("max relative error %.3g over %d entries (limit %.0e), "
                   "3 encoders x 2 lambdas x 10 seeds; %.1f s",
                   worst, checked, kGradTol, secs)};
}

// --------------------------------------------------------------------------
// 5. Average precision oracles.

// Precision at each positive's score threshold by direct counting, summed
// in descending-score order.
double brute_force_ap(const std::vector<double>& s, const std::vector<int>& y) {
  const std::size_t n = s.size();
  std::vector<std::pair<double, double>> terms;  // (score, precision)
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!y[i]) continue;
    ++positives;
    std::size_t above = 0, tp = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (s[j] >= s[i]) {
        ++above;
        tp += y[j] != 0;
      }
    }
    terms.emplace_back(s[i], static_cast<double>(tp) /
                                 static_cast<double>(above));
  }
  std::stable_sort(terms.begin(), terms.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  double sum = 0.0;
  for (const auto& t : terms) sum += t.second;
  return sum / static_cast<double>(positives);
}

Outcome ap_oracles() {
  Rng rng(derive_seed(5, {501}));
  int mismatches = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int n = 1 + static_cast<int>(uniform01(rng) * 60);
    const int levels = 1 + static_cast<int>(uniform01(rng) * 10);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::floor(uniform01(rng) * levels) / levels;
      y[i] = uniform01(rng) < 0.3;
    }
    y[0] = 1;
    if (average_precision(s, y) != brute_force_ap(s, y)) ++mismatches;
  }
  const double hand =
      average_precision(std::vector<double>{0.9, 0.8, 0.7, 0.6},
                        std::vector<int>{1, 0, 1, 0});
  const bool hand_ok = std::abs(hand - 5.0 / 6.0) <= kApHandTol;

  constexpr int kTrials = 1000, kN = 1000, kPos = 50;
  double mean = 0.0;
  std::vector<int> y(kN, 0);
  std::fill(y.begin(), y.begin() + kPos, 1);
  std::vector<double> s(kN);
  for (int t = 0; t < kTrials; ++t) {
    for (double& v : s) v = uniform01(rng);
    mean += average_precision(s, y);
  }
  mean /= kTrials;
  const bool random_ok = std::abs(mean - 0.05) <= kApRandomTol;
  return {mismatches == 0 && hand_ok && random_ok,
          fmtn("%d/1000 brute-force mismatches; hand %.10f; random mean %.4f "
               "(0.05 +/- %.2f)",
               mismatches, hand, mean, kApRandomTol)};
}

// --------------------------------------------------------------------------
// 6. IDM car-following equilibrium.

Outcome idm_equilibrium() {
  SimConfig sim;
  sim.noise = false;
  sim.errors = false;
  sim.collision_start = 0;
  sim.horizon = 3000;  // 300 s
  constexpr double kLeaderSpeed = 10.0;
  Scene scene;
  Vehicle lead;
  lead.id = 0;
  lead.position = 200.0;
  lead.velocity = kLeaderSpeed;
  lead.params.desired_velocity = kLeaderSpeed;
  Vehicle f;
  f.id = 1;
  f.position = 100.0;
  f.velocity = 0.0;
  f.params.desired_velocity = 30.0;
  scene.vehicles = {lead, f};
  Rng rng(6);
  Trace trace;
  const RolloutResult res = rollout(scene, 1, sim, rng, &trace);
  double gap = NAN, v = NAN;
  for (const TraceRecord& r : trace.records) {
    if (r.vehicle == 1) {
      gap = r.leader_gap;
      v = r.velocity;
    }
  }
  const DriverParams& p = f.params;
  const double target = p.min_distance + v * p.time_headway;
  const double rel = std::abs(gap - target) / target;
  const bool ok = !res.collision && rel <= kIdmTol;
  return {ok, fmtn("after 300 s gap %.4f m vs s0 + vT = %.4f m "
                   "(relative error %.4f, limit %.2f), v = %.4f m/s",
                   gap, target, rel, kIdmTol, v)};
}

// --------------------------------------------------------------------------
// 7. Behavioral correlation rises with horizon.

Outcome correlation_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = default_config();
  cfg.target.scenes = 72;  // 72 x 70 = 5040 vehicle samples
  cfg.target.rollouts = 100;
  cfg.fig1.horizons = {2.0, 15.0};
  cfg.resolve();
  const auto samples = build_target_dataset(
      cfg.target, derive_seed(cfg.seed, Stream::kBurnIn));
  const auto curve = fig1_curve(cfg, samples);
  const auto& r2 = curve[0].ratio;
  const auto& r15 = curve[1].ratio;
  const double secs = seconds_since(t0);
  const bool ok = r2 && r15 && *r15 > *r2 && samples.size() >= 5000 &&
                  secs < 1200.0;
  const FeatureSchema schema(cfg.target.neighbors);
  return {ok, fmtn("%zu samples x %d rollouts; ratio(2 s) %s, ratio(15 s) %s; "
                   "best behavioral at 15 s: %s; %.0f s",
                   samples.size(), cfg.target.rollouts,
                   r2 ? fmt("%.4f", *r2).c_str() : "undefined",
                   r15 ? fmt("%.4f", *r15).c_str() : "undefined",
                   r15 ? schema[curve[1].best_behavioral].name.c_str() : "-",
                   secs)};
}

// --------------------------------------------------------------------------
// 8. Joint training beats target-only at low positive counts.

double sign_test_p(int wins, int n) {
  // One-sided P(X >= wins) for X ~ Binomial(n, 1/2).
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0) - n * std::numbers::ln2);
  }
  return p;
}

Outcome transfer_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  // Desk-scale sweep: one small encoder, two grid points.
  ExperimentConfig cfg = config_from_json(R"({
    "source": {"scenes": 1000, "rollouts": 50},
    "sweep": {"positive_counts": [5, 10], "networks": 10, "epochs": 15,
              "grid_points": 2, "encoders": [[128, 64]],
              "classifiers": [[], [64]], "learning_rates": [1e-3, 3e-3],
              "keep_probs": [1.0]}
  })");
  const RecordsFile records = make_records(cfg);
  const SceneBayesNet rho1 = fit_scene_model(cfg, records.records);
  const CemResult cem = learn_proposal(cfg, rho1);
  const Dataset source = build_source(cfg, rho1, &cem.proposal);
  const TargetSplit target = build_target(cfg);
  const SweepResult sweep =
      train_sweep(cfg, source.samples, target.train_binary.samples,
                  target.validation.samples);

  const auto& w = cfg.sweep;
  const std::size_t nn = static_cast<std::size_t>(w.networks);
  const std::size_t nm = w.methods.size();
  const auto m_target = static_cast<std::size_t>(
      std::find(w.methods.begin(), w.methods.end(), Variant::kTargetOnly) -
      w.methods.begin());
  bool ok = m_target < nm;
  std::string detail;
  for (std::size_t c = 0; c < w.positive_counts.size(); ++c) {
    const SweepCell* base = nullptr;
    for (const SweepCell& cell : sweep.cells) {
      if (cell.positive_count == w.positive_counts[c] &&
          cell.method == Variant::kTargetOnly) {
        base = &cell;
      }
    }
    for (std::size_t m = 0; m < nm && base; ++m) {
      if (m == m_target) continue;
      int wins = 0;
      for (std::size_t n = 0; n < nn; ++n) {
        const SweepRow& joint = sweep.rows[(c * nn + n) * nm + m];
        const SweepRow& alone = sweep.rows[(c * nn + n) * nm + m_target];
        wins += joint.nll_positive < alone.nll_positive;
      }
      const SweepCell* cell = nullptr;
      for (const SweepCell& x : sweep.cells) {
        if (x.positive_count == w.positive_counts[c] &&
            x.method == w.methods[m]) {
          cell = &x;
        }
      }
      const bool separated =
          cell->nll_positive_mean + cell->nll_positive_se <
          base->nll_positive_mean - base->nll_positive_se;
      const double p = sign_test_p(wins, static_cast<int>(nn));
      const bool cell_ok = separated || p < kSignTestAlpha;
      ok = ok && cell_ok;
      detail += fmtn("[k=%d %s %.4f+/-%.4f vs %.4f+/-%.4f, wins %d/%zu p=%.3f] ",
                     w.positive_counts[c],
                     std::string(variant_name(w.methods[m])).c_str(),
                     cell->nll_positive_mean, cell->nll_positive_se,
                     base->nll_positive_mean, base->nll_positive_se, wins, nn,
                     p);
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && nn >= 5 && secs < 3600.0;
  return {ok, detail + fmt("%.0f s", secs)};
}

// --------------------------------------------------------------------------
// 9. End-to-end determinism.

ExperimentConfig tiny_config() {
  return config_from_json(R"({
    "records": {"scenes": 2, "burn_in_steps": 200},
    "cem": {"population": 40, "rollouts": 2, "elite_fraction": 0.1,
            "max_iterations": 2},
    "source": {"scenes": 40, "rollouts": 4},
    "target": {"scenes": 6, "rollouts": 8, "burn_in_steps": 200},
    "split": {"validation_scenes": 2},
    "sweep": {"positive_counts": [1], "networks": 2, "epochs": 2,
              "grid_points": 2, "encoders": [[16, 8]], "classifiers": [[]],
              "discriminator": [8]},
    "fig1": {"horizons": [2, 10, 15]}
  })");
}

std::vector<std::pair<std::string, std::string>> csv_files(const fs::path& d) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::directory_iterator(d)) {
    if (e.path().extension() == ".csv") {
      out.emplace_back(e.path().filename().string(), read_text(e.path()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  const ExperimentConfig cfg = tiny_config();
  const fs::path root = fs::temp_directory_path() / "crisk_acceptance_c9";
  fs::remove_all(root);
  run_all(cfg, root / "a");
  run_all(cfg, root / "b");
  const auto a = csv_files(root / "a");
  const auto b = csv_files(root / "b");
  const bool ok = !a.empty() && a == b;
  std::string names;
  for (const auto& [name, text] : a) names += name + " ";
  fs::remove_all(root);
  return {ok, fmtn("%zu report CSVs %s: %s", a.size(),
                   ok ? "byte-identical" : "differ", names.c_str())};
}

// --------------------------------------------------------------------------
// 10. Loss spot values.

Outcome loss_values() {
  const std::vector<double> half{0.5};
  const std::vector<double> one{1.0};
  const double pred = weighted_xent_loss(half, half, one);
  const double adv = domain_adv_loss(half, half);
  const double ln2 = std::numbers::ln2;
  const bool ok = std::abs(pred - ln2) <= kLossTol &&
                  std::abs(adv - 2.0 * ln2) <= kLossTol;
  return {ok, fmtn("prediction loss %.12f (ln 2), adversarial %.12f (2 ln 2)",
                   pred, adv)};
}

}  // namespace
}  // namespace crisk

int main(int argc, char** argv) {
  using crisk::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> all{
      {"driver parameter endpoint means", crisk::driver_bounds},
      {"importance sampling unbiased", crisk::is_unbiased},
      {"cross-entropy proposal lift", crisk::cem_lift},
      {"gradient check", crisk::gradients},
      {"average precision oracles", crisk::ap_oracles},
      {"IDM equilibrium gap", crisk::idm_equilibrium},
      {"behavioral correlation trend", crisk::correlation_trend},
      {"joint training beats target-only", crisk::transfer_trend},
      {"end-to-end determinism", crisk::determinism},
      {"loss spot values", crisk::loss_values},
  };
  CLI::App app{"crisk acceptance suite"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criteria to run (1-10); default all")
      ->check(CLI::Range(1, static_cast<int>(all.size())));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) {
    for (std::size_t i = 1; i <= all.size(); ++i) which.push_back(int(i));
  }
  bool ok = true;
  for (int c : which) {
    Outcome o;
    try {
      o = all[c - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d (%s): %s: %s\n", c, all[c - 1].first,
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
