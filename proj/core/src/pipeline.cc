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

#include "crisk/pipeline.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "crisk/error.h"
#include "crisk/format.h"
#include "crisk/parallel.h"
#include "crisk/traffic_sim.h"
#include "json.hpp"

namespace crisk {

namespace {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config reading

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw UsageError(where() + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) {
        throw UsageError("unknown config key '" + path_ + "." + key + "'");
      }
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw UsageError("config key '" + path_ + "." + key +
                       "' has the wrong type");
    }
  }

  template <typename Fn>
  void object(const std::string& key, Fn&& fn) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    Reader sub(j_.at(key), path_ + "." + key);
    fn(sub);
  }

  template <typename E, typename Parse>
  void name(const std::string& key, E& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (present) out = parse(s);
  }

 private:
  std::string where() const { return "config section '" + path_ + "'"; }
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_road(Reader& r, RoadSpec& road) {
  r.get("length", road.length);
  r.get("circular", road.circular);
  r.get("lane_count", road.lane_count);
  r.get("lane_width", road.lane_width);
}

Json road_json(const RoadSpec& road) {
  return {{"length", road.length},
          {"circular", road.circular},
          {"lane_count", road.lane_count},
          {"lane_width", road.lane_width}};
}

void read_sim(Reader& r, SimConfig& sim) {
  r.get("dt", sim.dt);
  r.get("horizon", sim.horizon);
  r.get("collision_start", sim.collision_start);
  r.get("noise", sim.noise);
  r.get("errors", sim.errors);
  r.get("max_decel", sim.max_decel);
}

Json sim_json(const SimConfig& sim) {
  return {{"dt", sim.dt},
          {"horizon", sim.horizon},
          {"collision_start", sim.collision_start},
          {"noise", sim.noise},
          {"errors", sim.errors},
          {"max_decel", sim.max_decel}};
}

Optimizer optimizer_from_name(std::string_view s) {
  if (s == "sgd-momentum") return Optimizer::kSgdMomentum;
  if (s == "adam") return Optimizer::kAdam;
  throw UsageError("unknown optimizer '" + std::string(s) + "'");
}

std::string_view optimizer_name(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "sgd-momentum";
}

Subset subset_from_name(std::string_view s) {
  if (s == "all") return Subset::kAll;
  if (s == "positive-risk") return Subset::kPositiveRisk;
  throw UsageError("unknown selection subset '" + std::string(s) + "'");
}

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_opt(double x) {
  return std::isnan(x) ? std::string() : format_double(x);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void SweepConfig::validate() const {
  if (methods.empty()) throw UsageError("sweep needs at least one method");
  if (positive_counts.empty()) {
    throw UsageError("sweep needs at least one positive count");
  }
  for (std::size_t i = 0; i < positive_counts.size(); ++i) {
    if (positive_counts[i] < 0) {
      throw UsageError("positive counts must be >= 0");
    }
    if (i && positive_counts[i] < positive_counts[i - 1]) {
      throw UsageError("positive counts must be non-decreasing");
    }
  }
  if (networks < 1) throw UsageError("networks per method must be >= 1");
  if (encoders.empty() || classifiers.empty() || learning_rates.empty() ||
      keep_probs.empty()) {
    throw UsageError("hyperparameter grid has an empty axis");
  }
  if (grid_points < 1) throw UsageError("grid_points must be >= 1");
  for (double lr : learning_rates) {
    if (!(lr > 0.0)) throw UsageError("learning rates must be > 0");
  }
  for (double k : keep_probs) {
    if (!(k > 0.0 && k <= 1.0)) {
      throw UsageError("keep probabilities must lie in (0, 1]");
    }
  }
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
  if (models_saved < 0) throw UsageError("models_saved must be >= 0");
}

void ExperimentConfig::resolve() {
  if (threads < 1) throw UsageError("threads must be >= 1");
  cem.threads = threads;
  source.threads = threads;
  target.threads = threads;
  if (cem.num_vehicles != source.num_vehicles ||
      cem.ego_index != source.ego_index) {
    throw UsageError("cem and source must agree on num_vehicles and ego");
  }
  if (records.scenes < 1) throw UsageError("records.scenes must be >= 1");
  if (records.vehicles_per_scene < 2) {
    throw UsageError("records.vehicles_per_scene must be >= 2");
  }
  if (records.burn_in_steps < 0) {
    throw UsageError("records.burn_in_steps must be >= 0");
  }
  records.road.validate();
  if (scene_model.bins < 1) throw UsageError("scene_model.bins must be >= 1");
  if (scene_model.aggressiveness_bins < 1) {
    throw UsageError("scene_model.aggressiveness_bins must be >= 1");
  }
  if (!(scene_model.smoothing >= 0.0)) {
    throw UsageError("scene_model.smoothing must be >= 0");
  }
  if (split.validation_scenes < 1) {
    throw UsageError("split.validation_scenes must be >= 1");
  }
  if (fig1.horizons.empty()) throw UsageError("fig1 needs horizons");
  for (double h : fig1.horizons) {
    if (!(h > 0.0)) throw UsageError("fig1 horizons must be > 0");
    if (std::lround(h / target.sim.dt) > target.sim.horizon) {
      throw UsageError("fig1 horizon " + format_double(h) +
                       " s exceeds the target rollout horizon");
    }
  }
  try {
    cem.validate();
    source.validate();
    target.validate();
  } catch (const RangeError& e) {
    throw UsageError(e.what());
  }
  sweep.validate();
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.resolve();
  return c;
}

ExperimentConfig config_from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  {
    Reader r(j, "config");
    r.get("seed", c.seed);
    r.get("threads", c.threads);
    r.object("records", [&](Reader& s) {
      s.get("scenes", c.records.scenes);
      s.get("vehicles_per_scene", c.records.vehicles_per_scene);
      s.get("burn_in_steps", c.records.burn_in_steps);
      s.object("road", [&](Reader& x) { read_road(x, c.records.road); });
    });
    r.object("scene_model", [&](Reader& s) {
      s.get("bins", c.scene_model.bins);
      s.get("aggressiveness_bins", c.scene_model.aggressiveness_bins);
      s.get("smoothing", c.scene_model.smoothing);
    });
    r.object("cem", [&](Reader& s) {
      s.get("population", c.cem.population);
      s.get("rollouts", c.cem.rollouts);
      s.get("elite_fraction", c.cem.elite_fraction);
      s.get("alpha", c.cem.alpha);
      s.get("max_iterations", c.cem.max_iterations);
      s.get("stop_probability", c.cem.stop_probability);
      s.get("pseudo_count", c.cem.pseudo_count);
      s.get("ego_index", c.cem.ego_index);
      s.get("num_vehicles", c.cem.num_vehicles);
      s.object("sim", [&](Reader& x) { read_sim(x, c.cem.sim); });
      s.object("road", [&](Reader& x) { read_road(x, c.cem.road); });
    });
    r.object("source", [&](Reader& s) {
      s.get("scenes", c.source.scenes);
      s.get("num_vehicles", c.source.num_vehicles);
      s.get("ego_index", c.source.ego_index);
      s.get("rollouts", c.source.rollouts);
      s.get("neighbors", c.source.neighbors);
      s.get("ttc_cap", c.source.ttc_cap);
      s.object("sim", [&](Reader& x) { read_sim(x, c.source.sim); });
      s.object("road", [&](Reader& x) { read_road(x, c.source.road); });
    });
    r.object("target", [&](Reader& s) {
      s.get("scenes", c.target.scenes);
      s.get("vehicles_per_scene", c.target.vehicles_per_scene);
      s.get("burn_in_steps", c.target.burn_in_steps);
      s.get("rollouts", c.target.rollouts);
      s.name("label", c.target.label, target_label_from_name);
      s.get("ttc_threshold", c.target.ttc_threshold);
      s.get("neighbors", c.target.neighbors);
      s.get("ttc_cap", c.target.ttc_cap);
      s.object("sim", [&](Reader& x) { read_sim(x, c.target.sim); });
      s.object("road", [&](Reader& x) { read_road(x, c.target.road); });
    });
    r.object("split", [&](Reader& s) {
      s.get("validation_scenes", c.split.validation_scenes);
    });
    r.object("sweep", [&](Reader& s) {
      SweepConfig& w = c.sweep;
      std::vector<std::string> methods;
      const bool has_methods = j.contains("sweep") &&
                               j["sweep"].is_object() &&
                               j["sweep"].contains("methods");
      s.get("methods", methods);
      if (has_methods) {
        w.methods.clear();
        for (const std::string& m : methods) {
          w.methods.push_back(variant_from_name(m));
        }
      }
      s.get("positive_counts", w.positive_counts);
      s.get("networks", w.networks);
      s.get("encoders", w.encoders);
      s.get("classifiers", w.classifiers);
      s.get("learning_rates", w.learning_rates);
      s.get("keep_probs", w.keep_probs);
      s.get("grid_points", w.grid_points);
      s.get("discriminator", w.discriminator);
      s.get("epochs", w.epochs);
      s.get("batch_size", w.batch_size);
      s.get("lambda", w.lambda);
      s.name("optimizer", w.optimizer, optimizer_from_name);
      s.get("momentum", w.momentum);
      s.get("clip_norm", w.clip_norm);
      s.name("selection", w.selection, subset_from_name);
      s.get("models_saved", w.models_saved);
    });
    r.object("fig1", [&](Reader& s) { s.get("horizons", c.fig1.horizons); });
  }
  c.resolve();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  return config_from_json(text);
}

std::string config_to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["records"] = {{"scenes", c.records.scenes},
                  {"vehicles_per_scene", c.records.vehicles_per_scene},
                  {"burn_in_steps", c.records.burn_in_steps},
                  {"road", road_json(c.records.road)}};
  j["scene_model"] = {{"bins", c.scene_model.bins},
                      {"aggressiveness_bins", c.scene_model.aggressiveness_bins},
                      {"smoothing", c.scene_model.smoothing}};
  j["cem"] = {{"population", c.cem.population},
              {"rollouts", c.cem.rollouts},
              {"elite_fraction", c.cem.elite_fraction},
              {"alpha", c.cem.alpha},
              {"max_iterations", c.cem.max_iterations},
              {"stop_probability", c.cem.stop_probability},
              {"pseudo_count", c.cem.pseudo_count},
              {"ego_index", c.cem.ego_index},
              {"num_vehicles", c.cem.num_vehicles},
              {"sim", sim_json(c.cem.sim)},
              {"road", road_json(c.cem.road)}};
  j["source"] = {{"scenes", c.source.scenes},
                 {"num_vehicles", c.source.num_vehicles},
                 {"ego_index", c.source.ego_index},
                 {"rollouts", c.source.rollouts},
                 {"neighbors", c.source.neighbors},
                 {"ttc_cap", c.source.ttc_cap},
                 {"sim", sim_json(c.source.sim)},
                 {"road", road_json(c.source.road)}};
  j["target"] = {{"scenes", c.target.scenes},
                 {"vehicles_per_scene", c.target.vehicles_per_scene},
                 {"burn_in_steps", c.target.burn_in_steps},
                 {"rollouts", c.target.rollouts},
                 {"label", target_label_name(c.target.label)},
                 {"ttc_threshold", c.target.ttc_threshold},
                 {"neighbors", c.target.neighbors},
                 {"ttc_cap", c.target.ttc_cap},
                 {"sim", sim_json(c.target.sim)},
                 {"road", road_json(c.target.road)}};
  j["split"] = {{"validation_scenes", c.split.validation_scenes}};
  Json methods = Json::array();
  for (Variant v : c.sweep.methods) methods.push_back(variant_name(v));
  const SweepConfig& w = c.sweep;
  j["sweep"] = {{"methods", methods},
                {"positive_counts", w.positive_counts},
                {"networks", w.networks},
                {"encoders", w.encoders},
                {"classifiers", w.classifiers},
                {"learning_rates", w.learning_rates},
                {"keep_probs", w.keep_probs},
                {"grid_points", w.grid_points},
                {"discriminator", w.discriminator},
                {"epochs", w.epochs},
                {"batch_size", w.batch_size},
                {"lambda", w.lambda},
                {"optimizer", optimizer_name(w.optimizer)},
                {"momentum", w.momentum},
                {"clip_norm", w.clip_norm},
                {"selection", subset_name(w.selection)},
                {"models_saved", w.models_saved}};
  j["fig1"] = {{"horizons", c.fig1.horizons}};
  return j.dump(2) + "\n";
}

namespace {

std::string compact_config(const ExperimentConfig& c) {
  return Json::parse(config_to_json(c)).dump();
}

FileHeader make_header(const ExperimentConfig& c, std::string kind) {
  FileHeader h;
  h.kind = std::move(kind);
  h.seed = c.seed;
  h.config_json = compact_config(c);
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

RecordsFile make_records(const ExperimentConfig& config) {
  const RecordsConfig& rc = config.records;
  const auto n = static_cast<std::size_t>(rc.scenes);
  std::vector<std::vector<VehicleRecord>> per(n);
  parallel_for(n, config.threads, [&](std::size_t s) {
    Rng rng = make_rng(derive_seed(config.seed, Stream::kRecords, s));
    const Scene scene =
        burn_in_scene(rc.road, rc.vehicles_per_scene, rc.burn_in_steps, rng);
    per[s] = scene_records(scene);
  });
  RecordsFile out;
  out.header = make_header(config, "records");
  for (auto& v : per) out.records.insert(out.records.end(), v.begin(), v.end());
  return out;
}

SceneBayesNet fit_scene_model(const ExperimentConfig& config,
                              std::span<const VehicleRecord> records) {
  if (records.empty()) throw DataError("no vehicle records to fit");
  const DiscretizationSpec spec =
      DiscretizationSpec::from_quantiles(records, config.scene_model.bins,
                                      config.scene_model.aggressiveness_bins);
  return fit_scene_bn(records, spec, config.scene_model.smoothing);
}

CemResult learn_proposal(const ExperimentConfig& config,
                         const SceneBayesNet& rho1) {
  return run_cem(rho1, config.cem, derive_seed(config.seed, Stream::kCem));
}

Dataset build_source(const ExperimentConfig& config,
                     const SceneBayesNet& rho1,
                     const SceneBayesNet* proposal) {
  Dataset d;
  d.header = make_header(config, proposal ? "source" : "source-plain");
  d.neighbors = config.source.neighbors;
  d.samples = build_dataset(rho1, proposal, config.source,
                            derive_seed(config.seed, Stream::kSceneSample));
  return d;
}

TargetSplit build_target(const ExperimentConfig& config) {
  const std::uint64_t seed = derive_seed(config.seed, Stream::kBurnIn);
  TargetSplit out;
  TargetConfig train = config.target;
  train.first_scene_id = 0;
  TargetConfig val = config.target;
  val.scenes = config.split.validation_scenes;
  val.first_scene_id = config.target.scenes;
  out.train.header = make_header(config, "target-train");
  out.train.neighbors = train.neighbors;
  out.train.samples = build_target_dataset(train, seed);
  out.train_binary.header = make_header(config, "target-train-binary");
  out.train_binary.neighbors = train.neighbors;
  out.train_binary.samples = binarize_labels(
      out.train.samples, derive_seed(config.seed, Stream::kBinarize));
  out.validation.header = make_header(config, "target-validation");
  out.validation.neighbors = val.neighbors;
  out.validation.samples = build_target_dataset(val, seed);
  return out;
}

std::vector<WeightedSample> subsample_positives(
    std::span<const WeightedSample> pool, int count, std::uint64_t seed) {
  std::vector<std::size_t> pos;
  std::vector<WeightedSample> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].y == 1.0) {
      pos.push_back(i);
    } else if (pool[i].y == 0.0) {
      out.push_back(pool[i]);
    } else {
      throw DataError("target training labels must be binary");
    }
  }
  if (static_cast<std::size_t>(count) > pos.size()) {
    throw DataError("requested " + std::to_string(count) +
                    " positive target samples but the pool holds " +
                    std::to_string(pos.size()));
  }
  Rng rng = make_rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  pos.resize(static_cast<std::size_t>(count));
  std::sort(pos.begin(), pos.end());
  for (std::size_t i : pos) out.push_back(pool[i]);
  return out;
}

namespace {

struct GridPoint {
  std::vector<int> encoder;
  std::vector<int> classifier;
  double learning_rate;
  double keep_prob;
};

std::vector<GridPoint> grid(const ExperimentConfig& config) {
  const SweepConfig& w = config.sweep;
  std::vector<GridPoint> all;
  for (const auto& e : w.encoders) {
    for (const auto& c : w.classifiers) {
      for (double lr : w.learning_rates) {
        for (double k : w.keep_probs) all.push_back({e, c, lr, k});
      }
    }
  }
  Rng rng = make_rng(derive_seed(config.seed, Stream::kSubsample, 0xffff));
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(all.size(), static_cast<std::size_t>(w.grid_points)));
  return all;
}

}  // namespace

SweepResult train_sweep(const ExperimentConfig& config,
                        std::span<const WeightedSample> source,
                        std::span<const WeightedSample> target_train,
                        std::span<const WeightedSample> validation) {
  const SweepConfig& w = config.sweep;
  const std::vector<GridPoint> points = grid(config);
  const std::size_t nc = w.positive_counts.size();
  const std::size_t nn = static_cast<std::size_t>(w.networks);
  const std::size_t nm = w.methods.size();

  // One subsample per (count, network), shared by all methods.
  std::vector<std::vector<WeightedSample>> subsets(nc * nn);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t n = 0; n < nn; ++n) {
      subsets[c * nn + n] = subsample_positives(
          target_train, w.positive_counts[c],
          derive_seed(config.seed, Stream::kSubsample, c, n));
    }
  }

  SweepResult result;
  result.rows.resize(nc * nn * nm);
  std::vector<std::optional<Mlp>> nets(nc * nn * nm);
  const std::uint64_t schema_hash = FeatureSchema(config.target.neighbors).hash();
  parallel_for(result.rows.size(), config.threads, [&](std::size_t job) {
    const std::size_t c = job / (nn * nm);
    const std::size_t n = (job / nm) % nn;
    const std::size_t m = job % nm;
    const GridPoint& g = points[n % points.size()];
    MlpSpec spec;
    spec.encoder_hidden = g.encoder;
    spec.classifier_hidden = g.classifier;
    spec.keep_prob = g.keep_prob;
    spec.discriminator_hidden = w.discriminator;
    TrainConfig tc;
    tc.variant = w.methods[m];
    tc.learning_rate = g.learning_rate;
    tc.lambda = w.lambda;
    tc.epochs = w.epochs;
    tc.batch_size = w.batch_size;
    tc.seed = derive_seed(config.seed, Stream::kTrainInit, c, n);
    tc.optimizer = w.optimizer;
    tc.momentum = w.momentum;
    tc.clip_norm = w.clip_norm;
    tc.selection = w.selection;
    const bool joint = tc.variant != Variant::kTargetOnly;
    TrainResult tr = train(joint ? source : std::span<const WeightedSample>{},
                           subsets[c * nn + n], spec, tc, validation);
    tr.net.schema_hash = schema_hash;
    const Evaluation ev = evaluate_model(tr.net, validation);
    SweepRow& row = result.rows[job];
    row.method = tc.variant;
    row.positive_count = w.positive_counts[c];
    row.network = static_cast<int>(n);
    row.grid_point = static_cast<int>(n % points.size());
    row.encoder = g.encoder;
    row.classifier = g.classifier;
    row.learning_rate = g.learning_rate;
    row.keep_prob = g.keep_prob;
    row.best_epoch = tr.best_epoch;
    row.nll_all = ev.nll_all;
    row.nll_positive =
        ev.nll_positive.value_or(std::numeric_limits<double>::quiet_NaN());
    row.ap = ev.ap.value_or(std::numeric_limits<double>::quiet_NaN());
    if (c == 0 && n < static_cast<std::size_t>(w.models_saved)) {
      nets[job] = std::move(tr.net);
    }
  });

  for (std::size_t job = 0; job < nets.size(); ++job) {
    if (!nets[job]) continue;
    const SweepRow& r = result.rows[job];
    result.models.emplace_back(std::string(variant_name(r.method)) + "-k" +
                                   std::to_string(r.positive_count) + "-net" +
                                   std::to_string(r.network),
                               std::move(*nets[job]));
  }

  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t m = 0; m < nm; ++m) {
      std::vector<double> all, pos, ap;
      for (std::size_t n = 0; n < nn; ++n) {
        const SweepRow& r = result.rows[(c * nn + n) * nm + m];
        all.push_back(r.nll_all);
        if (!std::isnan(r.nll_positive)) pos.push_back(r.nll_positive);
        if (!std::isnan(r.ap)) ap.push_back(r.ap);
      }
      SweepCell cell;
      cell.method = w.methods[m];
      cell.positive_count = w.positive_counts[c];
      cell.n = static_cast<int>(nn);
      cell.nll_all_mean = mean_of(all);
      cell.nll_all_se = se_of(all);
      cell.nll_positive_mean = mean_of(pos);
      cell.nll_positive_se = se_of(pos);
      cell.ap_mean = mean_of(ap);
      cell.ap_se = se_of(ap);
      result.cells.push_back(cell);
    }
  }
  return result;
}

std::vector<CorrelationPoint> fig1_curve(
    const ExperimentConfig& config, std::span<const WeightedSample> samples) {
  const double dt = config.target.sim.dt;
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  std::vector<std::vector<double>> labels(config.fig1.horizons.size());
  for (const WeightedSample& s : samples) {
    if (s.collision_steps.empty()) {
      throw DataError("sample without per-rollout collision steps");
    }
    rows.push_back(s.x);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const long limit = std::lround(config.fig1.horizons[k] / dt);
      int hits = 0;
      for (int step : s.collision_steps) hits += step >= 0 && step <= limit;
      labels[k].push_back(static_cast<double>(hits) /
                          static_cast<double>(s.collision_steps.size()));
    }
  }
  return behavioral_correlation_curve(rows, labels, config.fig1.horizons,
                                      FeatureSchema(config.target.neighbors));
}

Evaluation evaluate_model(const Mlp& net,
                          std::span<const WeightedSample> samples) {
  if (samples.empty()) throw DataError("no samples to evaluate");
  const auto d = static_cast<Eigen::Index>(samples.front().x.size());
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(samples.size()));
  std::vector<double> y, w;
  std::vector<int> bin;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<Eigen::Index>(samples[i].x.size()) != d) {
      throw DataError("feature length mismatch in evaluation data");
    }
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(samples[i].x.data(), d);
    y.push_back(samples[i].y);
    w.push_back(samples[i].w);
    bin.push_back(samples[i].y > 0.0 ? 1 : 0);
  }
  const Eigen::VectorXd p = net.predict(x);
  Evaluation e;
  e.predictions.assign(p.data(), p.data() + p.size());
  e.nll_all = nll(e.predictions, y, w, Subset::kAll);
  if (std::any_of(bin.begin(), bin.end(), [](int b) { return b; })) {
    e.nll_positive = nll(e.predictions, y, w, Subset::kPositiveRisk);
    e.ap = average_precision(e.predictions, bin);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Reports

Report::Report(std::string name, std::vector<std::string> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {}

void Report::add(std::vector<std::string> row) {
  if (row.size() != columns_.size()) {
    throw DataError("report '" + name_ + "' row has " +
                    std::to_string(row.size()) + " fields, expected " +
                    std::to_string(columns_.size()));
  }
  rows_.push_back(std::move(row));
}

std::string Report::to_csv(const ExperimentConfig& config) const {
  std::ostringstream os;
  os << "# report: " << name_ << '\n';
  os << "# seed: " << config.seed << '\n';
  os << "# config: " << compact_config(config) << '\n';
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    os << (i ? "," : "") << csv_field(columns_[i]);
  }
  os << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << (i ? "," : "") << csv_field(row[i]);
    }
    os << '\n';
  }
  return os.str();
}

std::string Report::schema() const {
  Json j;
  j["report"] = name_;
  j["comment_prefix"] = "#";
  j["columns"] = columns_;
  return j.dump(2) + "\n";
}

void Report::write(const std::filesystem::path& dir,
                   const ExperimentConfig& config) const {
  write_text(dir / (name_ + ".csv"), to_csv(config));
  write_text(dir / (name_ + ".csv.schema.json"), schema());
}

Report cem_report(const CemHistory& history) {
  Report r("cem_history",
           {"iteration", "collision_prob", "elite_threshold", "degenerate",
            "mean_attentive", "mean_aggressiveness", "mean_relative_velocity"});
  for (const CemRecord& c : history.records) {
    r.add({std::to_string(c.iteration), format_double(c.collision_prob),
           format_double(c.elite_threshold), c.degenerate ? "1" : "0",
           format_double(c.mean_attentive),
           format_double(c.mean_aggressiveness),
           format_double(c.mean_relative_velocity)});
  }
  return r;
}

Report sweep_report(const SweepResult& result) {
  Report r("sweep_results",
           {"method", "positive_count", "network", "grid_point", "encoder",
            "classifier", "learning_rate", "keep_prob", "best_epoch",
            "nll_all", "nll_positive", "ap"});
  for (const SweepRow& s : result.rows) {
    r.add({std::string(variant_name(s.method)),
           std::to_string(s.positive_count), std::to_string(s.network),
           std::to_string(s.grid_point), join_ints(s.encoder, '-'),
           join_ints(s.classifier, '-'), format_double(s.learning_rate),
           format_double(s.keep_prob), std::to_string(s.best_epoch),
           format_double(s.nll_all), fmt_opt(s.nll_positive),
           fmt_opt(s.ap)});
  }
  return r;
}

Report sweep_summary_report(const SweepResult& result) {
  Report r("sweep_summary",
           {"method", "positive_count", "networks", "nll_all_mean",
            "nll_all_se", "nll_positive_mean", "nll_positive_se", "ap_mean",
            "ap_se"});
  for (const SweepCell& c : result.cells) {
    r.add({std::string(variant_name(c.method)),
           std::to_string(c.positive_count), std::to_string(c.n),
           fmt_opt(c.nll_all_mean), fmt_opt(c.nll_all_se),
           fmt_opt(c.nll_positive_mean), fmt_opt(c.nll_positive_se),
           fmt_opt(c.ap_mean), fmt_opt(c.ap_se)});
  }
  return r;
}

Report fig1_report(const std::vector<CorrelationPoint>& curve,
                   const FeatureSchema& schema) {
  Report r("fig1", {"horizon_s", "ratio", "max_behavioral", "max_all",
                    "best_behavioral", "best_overall"});
  for (const CorrelationPoint& p : curve) {
    const bool ok = p.ratio.has_value();
    r.add({format_double(p.horizon), ok ? format_double(*p.ratio) : "",
           format_double(p.max_behavioral), format_double(p.max_all),
           ok ? schema[p.best_behavioral].name : "",
           ok ? schema[p.best_overall].name : ""});
  }
  return r;
}

Report metrics_report(const Evaluation& eval, std::size_t rows) {
  Report r("metrics", {"metric", "value"});
  r.add({"rows", std::to_string(rows)});
  r.add({"nll_all", format_double(eval.nll_all)});
  r.add({"nll_positive",
         eval.nll_positive ? format_double(*eval.nll_positive) : ""});
  r.add({"average_precision", eval.ap ? format_double(*eval.ap) : ""});
  return r;
}

Report predictions_report(const Evaluation& eval,
                          std::span<const WeightedSample> samples) {
  Report r("predictions", {"scene_id", "ego_id", "y", "w", "prediction"});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    r.add({std::to_string(samples[i].scene_id),
           std::to_string(samples[i].ego_id), format_double(samples[i].y),
           format_double(samples[i].w), format_double(eval.predictions[i])});
  }
  return r;
}

void run_all(const ExperimentConfig& config, const std::filesystem::path& out) {
  const RecordsFile records = make_records(config);
  write_records(out / "records.jsonl", records);

  const SceneBayesNet rho1 = fit_scene_model(config, records.records);
  save_bn(rho1, out / "scene_model.json");

  const CemResult cem = learn_proposal(config, rho1);
  save_bn(cem.proposal, out / "proposal.json");
  cem_report(cem.history).write(out, config);

  const Dataset source = build_source(config, rho1, &cem.proposal);
  write_dataset(out / "source.jsonl", source);

  const TargetSplit target = build_target(config);
  write_dataset(out / "target_train.jsonl", target.train);
  write_dataset(out / "target_train_binary.jsonl", target.train_binary);
  write_dataset(out / "target_validation.jsonl", target.validation);

  const SweepResult sweep =
      train_sweep(config, source.samples, target.train_binary.samples,
                  target.validation.samples);
  sweep_report(sweep).write(out, config);
  sweep_summary_report(sweep).write(out, config);
  for (const auto& [name, net] : sweep.models) {
    save_model(net, out / "models" / (name + ".json"));
  }

  std::vector<WeightedSample> all = target.train.samples;
  all.insert(all.end(), target.validation.samples.begin(),
             target.validation.samples.end());
  const auto curve = fig1_curve(config, all);
  fig1_report(curve, FeatureSchema(config.target.neighbors)).write(out, config);

  Report summary("risk_summary", {"metric", "value"});
  summary.add({"source_rows", std::to_string(source.samples.size())});
  summary.add({"source_collision_prob",
               format_double(unconditional_collision_prob(source.samples))});
  summary.add({"source_collision_stderr",
               format_double(unconditional_collision_stderr(source.samples))});
  summary.add({"target_train_rows", std::to_string(target.train.samples.size())});
  summary.add({"target_validation_rows",
               std::to_string(target.validation.samples.size())});
  summary.add({"target_train_collision_prob",
               format_double(unconditional_collision_prob(target.train.samples))});
  if (!cem.history.records.empty()) {
    summary.add({"cem_first_collision_prob",
                 format_double(cem.history.records.front().collision_prob)});
    summary.add({"cem_last_collision_prob",
                 format_double(cem.history.records.back().collision_prob)});
  }
  summary.write(out, config);

  if (!sweep.models.empty()) {
    const Evaluation ev =
        evaluate_model(sweep.models.front().second, target.validation.samples);
    metrics_report(ev, target.validation.samples.size()).write(out, config);
  }
}

}  // namespace crisk
