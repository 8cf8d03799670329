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

// Experiment orchestration shared by the command-line tool and the
// acceptance suite.

#ifndef CRISK_PIPELINE_H_
#define CRISK_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crisk/dataset_io.h"
#include "crisk/features.h"
#include "crisk/importance_sampler.h"
#include "crisk/predictor.h"
#include "crisk/risk_estimator.h"
#include "crisk/scene_model.h"

namespace crisk {

// Vehicle records for fitting the scene model, taken from burn-in scenes.
struct RecordsConfig {
  int scenes = 20;
  int vehicles_per_scene = 70;
  int burn_in_steps = 600;
  RoadSpec road{800.0, true, 1, 3.7};
};

struct SceneModelConfig {
  int bins = 8;
  int aggressiveness_bins = 16;
  double smoothing = 1.0;
};

struct SplitConfig {
  int validation_scenes = 15;
};

struct SweepConfig {
  std::vector<Variant> methods{Variant::kTargetOnly, Variant::kJointNoAdapt,
                               Variant::kDann, Variant::kDannSourceOnly};
  std::vector<int> positive_counts{5, 10, 20};
  int networks = 10;  // per method and count
  std::vector<std::vector<int>> encoders{
      {512, 256, 128, 64}, {256, 128, 64}, {128, 64}};
  std::vector<std::vector<int>> classifiers{{}, {64}, {64, 64}};
  std::vector<double> learning_rates{1e-4, 3e-4, 1e-3};
  std::vector<double> keep_probs{0.5, 0.75, 1.0};
  int grid_points = 6;  // subsampled from the full grid
  std::vector<int> discriminator{64, 64};
  int epochs = 30;
  int batch_size = 64;
  double lambda = 0.5;
  Optimizer optimizer = Optimizer::kSgdMomentum;
  double momentum = 0.9;
  double clip_norm = 1.0;
  Subset selection = Subset::kAll;
  int models_saved = 1;  // networks per method written at the lowest count

  void validate() const;
};

struct Fig1Config {
  std::vector<double> horizons{1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20};  // s
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  RecordsConfig records;
  SceneModelConfig scene_model;
  CemConfig cem;
  SourceConfig source;
  TargetConfig target;  // `scenes` counts training scenes
  SplitConfig split;
  SweepConfig sweep;
  Fig1Config fig1;

  // Propagates `threads` and the shared simulation settings; validates.
  void resolve();
};

ExperimentConfig default_config();
// Missing keys keep their defaults; unknown keys raise UsageError.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

RecordsFile make_records(const ExperimentConfig& config);
SceneBayesNet fit_scene_model(const ExperimentConfig& config,
                              std::span<const VehicleRecord> records);
CemResult learn_proposal(const ExperimentConfig& config,
                         const SceneBayesNet& rho1);
Dataset build_source(const ExperimentConfig& config,
                     const SceneBayesNet& rho1, const SceneBayesNet* proposal);

struct TargetSplit {
  Dataset train;         // continuous labels
  Dataset train_binary;  // labels sampled from the continuous ones
  Dataset validation;    // continuous, scene-disjoint from training
};
TargetSplit build_target(const ExperimentConfig& config);

struct SweepRow {
  Variant method = Variant::kTargetOnly;
  int positive_count = 0;
  int network = 0;
  int grid_point = 0;
  std::vector<int> encoder;
  std::vector<int> classifier;
  double learning_rate = 0.0;
  double keep_prob = 1.0;
  int best_epoch = 0;
  double nll_all = 0.0;
  double nll_positive = 0.0;
  double ap = 0.0;
};

struct SweepCell {
  Variant method = Variant::kTargetOnly;
  int positive_count = 0;
  int n = 0;
  double nll_all_mean = 0.0, nll_all_se = 0.0;
  double nll_positive_mean = 0.0, nll_positive_se = 0.0;
  double ap_mean = 0.0, ap_se = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepCell> cells;
  // Selected networks at the lowest positive count, per method.
  std::vector<std::pair<std::string, Mlp>> models;
};

// Target samples with label 1 are positives; each run keeps every negative
// and `count` positives drawn without replacement. DataError when the pool
// holds fewer positives than requested.
std::vector<WeightedSample> subsample_positives(
    std::span<const WeightedSample> pool, int count, std::uint64_t seed);

SweepResult train_sweep(const ExperimentConfig& config,
                        std::span<const WeightedSample> source,
                        std::span<const WeightedSample> target_train,
                        std::span<const WeightedSample> validation);

// Per-horizon labels: the fraction of rollouts whose first collision falls
// within `h` seconds.
std::vector<CorrelationPoint> fig1_curve(
    const ExperimentConfig& config, std::span<const WeightedSample> samples);

struct Evaluation {
  std::vector<double> predictions;
  double nll_all = 0.0;
  std::optional<double> nll_positive;
  std::optional<double> ap;  // labels y > 0 count as positive
};
Evaluation evaluate_model(const Mlp& net,
                          std::span<const WeightedSample> samples);

// CSV reports: `#` comment lines carry the seed and the resolved config.
class Report {
 public:
  Report(std::string name, std::vector<std::string> columns);
  void add(std::vector<std::string> row);
  std::string to_csv(const ExperimentConfig& config) const;
  std::string schema() const;
  // Writes `<dir>/<name>.csv` and its sidecar schema.
  void write(const std::filesystem::path& dir,
             const ExperimentConfig& config) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::string name_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

Report cem_report(const CemHistory& history);
Report sweep_report(const SweepResult& result);
Report sweep_summary_report(const SweepResult& result);
Report fig1_report(const std::vector<CorrelationPoint>& curve,
                   const FeatureSchema& schema);
Report metrics_report(const Evaluation& eval, std::size_t rows);
Report predictions_report(const Evaluation& eval,
                          std::span<const WeightedSample> samples);

// Every stage in order, writing all artifacts under `out`.
void run_all(const ExperimentConfig& config, const std::filesystem::path& out);

}  // namespace crisk

#endif  // CRISK_PIPELINE_H_
