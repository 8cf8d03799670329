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

// Feedforward risk predictor: encoder -> classifier -> sigmoid, plus a
// domain classifier D on the encoder output for adversarial training.

#ifndef CRISK_PREDICTOR_H_
#define CRISK_PREDICTOR_H_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crisk/eval_metrics.h"
#include "crisk/risk_estimator.h"
#include "crisk/rng.h"

namespace crisk {

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> encoder_hidden{128, 64};
  std::vector<int> classifier_hidden;
  double keep_prob = 1.0;  // dropout keep probability on hidden layers
  std::vector<int> discriminator_hidden{64, 64};

  // Throws RangeError on invalid sizes.
  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Dense {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;

  int in() const { return static_cast<int>(w.cols()); }
  int out() const { return static_cast<int>(w.rows()); }
};

class Mlp {
 public:
  Mlp() = default;
  // He-normal weights from `rng`, zero biases. D is initialized from its
  // own stream so that its presence never changes the predictor weights.
  Mlp(const MlpSpec& spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::vector<Dense>& encoder() { return encoder_; }
  std::vector<Dense>& classifier() { return classifier_; }
  std::vector<Dense>& discriminator() { return discriminator_; }
  const std::vector<Dense>& encoder() const { return encoder_; }
  const std::vector<Dense>& classifier() const { return classifier_; }
  const std::vector<Dense>& discriminator() const { return discriminator_; }
  int feature_dim() const;  // encoder output width

  // Standardization applied before the encoder: (x - mean) / std.
  Eigen::VectorXd& mean() { return mean_; }
  Eigen::VectorXd& std() { return std_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& std() const { return std_; }
  // Statistics pooled over every given set (unweighted). Features with
  // std below 1e-8 keep std 1.
  void set_standardization(std::span<const WeightedSample> data,
                           std::span<const WeightedSample> more = {});
  std::uint64_t schema_hash = 0;

  // Inference (dropout off). Throws DataError on a dimension mismatch.
  double forward(std::span<const double> x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;  // d x n
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const;

  // Every weight and bias, predictor first then D.
  std::vector<Eigen::Map<Eigen::VectorXd>> predictor_tensors();
  std::vector<Eigen::Map<Eigen::VectorXd>> discriminator_tensors();

  friend bool operator==(const Mlp&, const Mlp&);

 private:
  MlpSpec spec_;
  std::vector<Dense> encoder_;
  std::vector<Dense> classifier_;
  std::vector<Dense> discriminator_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
};

// sum_i w_i ce(p_i, y_i) / n, predictions clamped to [eps, 1 - eps].
// Throws DataError on a negative weight or length mismatch.
double weighted_xent_loss(std::span<const double> preds,
                          std::span<const double> labels,
                          std::span<const double> weights);

// -mean log D(M_s) - mean log(1 - D(M_t)) from D's outputs on the two
// batches, same clamp. The encoder minimizes this; D minimizes its
// negative.
double domain_adv_loss(std::span<const double> d_source,
                       std::span<const double> d_target);

enum class Variant { kTargetOnly, kJointNoAdapt, kDann, kDannSourceOnly };
std::string_view variant_name(Variant v);
Variant variant_from_name(std::string_view name);

enum class Optimizer { kSgdMomentum, kAdam };

struct TrainConfig {
  Variant variant = Variant::kDann;
  double learning_rate = 1e-3;
  double lambda = 0.5;
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kSgdMomentum;
  double momentum = 0.9;
  double clip_norm = 1.0;  // global gradient-norm cap per update; 0 disables
  Subset selection = Subset::kAll;  // validation NLL used for selection

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double adv_loss = 0.0;
  double val_nll_all = 0.0;
  double val_nll_positive = 0.0;  // NaN when no positive-risk rows
};

struct TrainResult {
  Mlp net;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

// Mini-batch training of L_pred + lambda L_adv. One D step precedes each
// predictor step. The source-only variant detaches target activations from
// the adversarial term; lambda = 0 skips D entirely. Throws NumericalError
// naming the epoch and batch on a non-finite loss.
TrainResult train(std::span<const WeightedSample> source,
                  std::span<const WeightedSample> target, MlpSpec spec,
                  const TrainConfig& config,
                  std::span<const WeightedSample> validation);

// One batch for loss and gradient evaluation (columns are samples). The
// prediction loss covers both batches; the adversarial term is added when
// lambda > 0 and both are non-empty.
struct Batch {
  Eigen::MatrixXd xs;
  Eigen::VectorXd ys, ws;
  Eigen::MatrixXd xt;
  Eigen::VectorXd yt, wt;
};

struct Gradients {
  std::vector<Dense> encoder, classifier, discriminator;
  double pred_loss = 0.0;
  double adv_loss = 0.0;
};

// Losses and analytic gradients (no dropout): encoder/classifier gradients of
// L_pred + lambda L_adv, D gradients of -L_adv. Inputs are used as given
// (no standardization).
Gradients loss_and_gradients(const Mlp& net, const Batch& batch,
                             double lambda, bool source_only = false);

struct GradCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  int skipped_kinks = 0;  // entries whose +/- step crossed a ReLU kink
};

// Central differences over up to `per_tensor` entries of every tensor
// (chosen by `rng`), compared against loss_and_gradients.
GradCheckResult grad_check(const Mlp& net, const Batch& batch, double lambda,
                           double step, Rng& rng, int per_tensor = 24);

// y_i' ~ Bernoulli(y_i) with rng stream (seed, kBinarize, i).
std::vector<WeightedSample> binarize_labels(
    std::span<const WeightedSample> samples, std::uint64_t seed);

std::string serialize_model(const Mlp& net);
Mlp deserialize_model(std::string_view text);
void save_model(const Mlp& net, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

}  // namespace crisk

#endif  // CRISK_PREDICTOR_H_
