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

// crisk: command-line front end for the collision-risk pipeline.
//
// Every subcommand writes into --out (default "."), using the same file
// names as run-all, so stages can be chained by pointing them at one
// directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crisk/dataset_io.h"
#include "crisk/error.h"
#include "crisk/pipeline.h"
#include "crisk/rng.h"
#include "crisk/traffic_sim.h"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = ".";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON experiment config")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed (overrides config)");
  sub->add_option("--threads", c.threads, "worker threads (overrides config)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory");
}

crisk::ExperimentConfig resolve(const Common& c) {
  crisk::ExperimentConfig cfg =
      c.config.empty() ? crisk::default_config() : crisk::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  cfg.resolve();
  return cfg;
}

fs::path in_out(const Common& c, const std::string& given,
                const char* fallback) {
  return given.empty() ? fs::path(c.out) / fallback : fs::path(given);
}

std::vector<crisk::WeightedSample> concat_datasets(
    const std::vector<std::string>& paths, int* neighbors) {
  std::vector<crisk::WeightedSample> all;
  for (const std::string& p : paths) {
    crisk::Dataset d = crisk::read_dataset(p);
    if (neighbors) *neighbors = d.neighbors;
    all.insert(all.end(), d.samples.begin(), d.samples.end());
  }
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crisk: highway collision-risk estimation"};
  app.require_subcommand(1);

  Common common;
  std::string records_path, bn_path, proposal_path, model_path;
  std::string source_path, target_path, validation_path;
  std::vector<std::string> datasets;
  std::vector<double> horizons;
  std::optional<int> scenes;
  bool plain = false;
  int scene_index = 0;

  auto* make_records = app.add_subcommand(
      "make-records", "simulate burn-in traffic and export vehicle records");
  add_common(make_records, common);

  auto* fit = app.add_subcommand("fit-scene-model",
                                 "fit the Bayesian-network scene model");
  add_common(fit, common);
  fit->add_option("--records", records_path, "records JSONL");

  auto* cem = app.add_subcommand("cem", "learn the proposal by cross-entropy");
  add_common(cem, common);
  cem->add_option("--scene-model", bn_path, "scene model JSON");

  auto* source = app.add_subcommand("build-source",
                                    "build the weighted source dataset");
  add_common(source, common);
  source->add_option("--scene-model", bn_path, "scene model JSON");
  source->add_option("--proposal", proposal_path, "proposal JSON");
  source->add_flag("--plain", plain, "sample from the scene model directly");
  source->add_option("--scenes", scenes, "number of scenes (overrides config)")
      ->check(CLI::PositiveNumber);

  auto* target = app.add_subcommand(
      "build-target", "build the target training and validation datasets");
  add_common(target, common);
  target->add_option("--scenes", scenes,
                     "training scenes (overrides config)")
      ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("train-sweep",
                                   "train every method over the sweep");
  add_common(sweep, common);
  sweep->add_option("--source", source_path, "source dataset");
  sweep->add_option("--target", target_path, "binary target training set");
  sweep->add_option("--validation", validation_path, "validation set");

  auto* fig1 = app.add_subcommand(
      "fig1", "behavioral correlation ratio against prediction horizon");
  add_common(fig1, common);
  fig1->add_option("--dataset", datasets, "target datasets with rollouts");
  fig1->add_option("--horizons", horizons, "horizons in seconds");

  auto* evaluate = app.add_subcommand("evaluate",
                                      "score a saved model on a dataset");
  add_common(evaluate, common);
  evaluate->add_option("--model", model_path, "model JSON")->required();
  evaluate->add_option("--dataset", datasets, "dataset JSONL")->required();

  auto* trace = app.add_subcommand(
      "trace", "simulate one sampled source scene and write its trace");
  add_common(trace, common);
  trace->add_option("--scene-model", bn_path, "scene model JSON");
  trace->add_option("--scene-index", scene_index, "scene stream index")
      ->check(CLI::NonNegativeNumber);

  auto* run_all = app.add_subcommand("run-all", "run every stage in order");
  add_common(run_all, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    crisk::ExperimentConfig cfg = resolve(common);
    const fs::path out(common.out);
    fs::create_directories(out);

    if (*make_records) {
      crisk::write_records(out / "records.jsonl", crisk::make_records(cfg));
    } else if (*fit) {
      const auto rf =
          crisk::read_records(in_out(common, records_path, "records.jsonl"));
      crisk::save_bn(crisk::fit_scene_model(cfg, rf.records),
                     out / "scene_model.json");
    } else if (*cem) {
      const auto rho1 =
          crisk::load_bn(in_out(common, bn_path, "scene_model.json"));
      const auto res = crisk::learn_proposal(cfg, rho1);
      crisk::save_bn(res.proposal, out / "proposal.json");
      crisk::cem_report(res.history).write(out, cfg);
    } else if (*source) {
      if (scenes) cfg.source.scenes = *scenes;
      cfg.resolve();
      const auto rho1 =
          crisk::load_bn(in_out(common, bn_path, "scene_model.json"));
      std::optional<crisk::SceneBayesNet> q;
      if (!plain) {
        q = crisk::load_bn(in_out(common, proposal_path, "proposal.json"));
      }
      crisk::write_dataset(
          out / (plain ? "source_plain.jsonl" : "source.jsonl"),
          crisk::build_source(cfg, rho1, q ? &*q : nullptr));
    } else if (*target) {
      if (scenes) cfg.target.scenes = *scenes;
      cfg.resolve();
      const auto t = crisk::build_target(cfg);
      crisk::write_dataset(out / "target_train.jsonl", t.train);
      crisk::write_dataset(out / "target_train_binary.jsonl", t.train_binary);
      crisk::write_dataset(out / "target_validation.jsonl", t.validation);
    } else if (*sweep) {
      const auto s = crisk::read_dataset(
          in_out(common, source_path, "source.jsonl"));
      const auto t = crisk::read_dataset(
          in_out(common, target_path, "target_train_binary.jsonl"));
      const auto v = crisk::read_dataset(
          in_out(common, validation_path, "target_validation.jsonl"));
      if (s.neighbors != t.neighbors || t.neighbors != v.neighbors) {
        throw crisk::DataError("datasets disagree on the neighbor count");
      }
      const auto res =
          crisk::train_sweep(cfg, s.samples, t.samples, v.samples);
      crisk::sweep_report(res).write(out, cfg);
      crisk::sweep_summary_report(res).write(out, cfg);
      for (const auto& [name, net] : res.models) {
        crisk::save_model(net, out / "models" / (name + ".json"));
      }
    } else if (*fig1) {
      if (!horizons.empty()) cfg.fig1.horizons = horizons;
      cfg.resolve();
      if (datasets.empty()) {
        datasets = {(out / "target_train.jsonl").string(),
                    (out / "target_validation.jsonl").string()};
      }
      int neighbors = cfg.target.neighbors;
      const auto all =
          concat_datasets(datasets, &neighbors);
      cfg.target.neighbors = neighbors;
      crisk::fig1_report(crisk::fig1_curve(cfg, all),
                         crisk::FeatureSchema(neighbors))
          .write(out, cfg);
    } else if (*evaluate) {
      const crisk::Mlp net = crisk::load_model(model_path);
      int neighbors = 0;
      const auto all =
          concat_datasets(datasets, &neighbors);
      if (net.schema_hash != 0 &&
          net.schema_hash != crisk::FeatureSchema(neighbors).hash()) {
        throw crisk::DataError("model schema does not match the dataset");
      }
      const auto ev = crisk::evaluate_model(net, all);
      crisk::metrics_report(ev, all.size()).write(out, cfg);
      crisk::predictions_report(ev, all).write(out, cfg);
    } else if (*trace) {
      const auto rho1 =
          crisk::load_bn(in_out(common, bn_path, "scene_model.json"));
      crisk::Rng rng = crisk::make_rng(crisk::derive_seed(
          cfg.seed, crisk::Stream::kSceneSample,
          static_cast<std::uint64_t>(scene_index)));
      const crisk::Scene scene = crisk::sample_scene(
          rho1, cfg.source.num_vehicles, cfg.source.road, rng);
      crisk::Trace tr;
      crisk::Rng sim_rng = crisk::make_rng(crisk::derive_seed(
          cfg.seed, crisk::Stream::kRollout,
          static_cast<std::uint64_t>(scene_index)));
      const auto res = crisk::rollout(
          scene, static_cast<std::size_t>(cfg.source.ego_index),
          cfg.source.sim, sim_rng, &tr);
      const fs::path p = out / "trace.jsonl";
      std::ofstream os(p, std::ios::binary | std::ios::trunc);
      if (!os) throw crisk::DataError("cannot write " + p.string());
      crisk::write_trace_jsonl(tr, os);
      std::cout << "collision=" << (res.collision ? 1 : 0)
                << " steps=" << res.steps << '\n';
    } else if (*run_all) {
      crisk::run_all(cfg, out);
    }
  } catch (const crisk::Error& e) {
    std::cerr << "crisk: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "crisk: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "crisk: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
