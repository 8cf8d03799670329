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

#include "crisk/predictor.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "crisk/error.h"
#include "json.hpp"

namespace crisk {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void MlpSpec::validate() const {
  if (input_dim < 1) throw RangeError("input dimension must be >= 1");
  const auto check = [](const std::vector<int>& sizes, const char* what) {
    for (int s : sizes) {
      if (s < 1) throw RangeError(std::string(what) + " sizes must be >= 1");
    }
  };
  check(encoder_hidden, "encoder");
  check(classifier_hidden, "classifier");
  check(discriminator_hidden, "discriminator");
  if (!(keep_prob >= 0.5 && keep_prob <= 1.0)) {
    throw RangeError("dropout keep probability must lie in [0.5, 1]");
  }
}

namespace {

std::vector<Dense> make_stack(int in, const std::vector<int>& hidden,
                              bool output_unit, Rng& rng) {
  std::vector<Dense> layers;
  std::vector<int> sizes = hidden;
  if (output_unit) sizes.push_back(1);
  for (int out : sizes) {
    Dense d;
    d.w.resize(out, in);
    const double scale = std::sqrt(2.0 / in);
    for (Eigen::Index c = 0; c < d.w.cols(); ++c) {
      for (Eigen::Index r = 0; r < d.w.rows(); ++r) {
        d.w(r, c) = scale * standard_normal(rng);
      }
    }
    d.b = VectorXd::Zero(out);
    layers.push_back(std::move(d));
    in = out;
  }
  return layers;
}

// One layer's forward cache.
struct LayerCache {
  MatrixXd a;  // input
  MatrixXd z;  // pre-activation
  MatrixXd mask;  // inverted-dropout scale per unit, empty when off
};
using StackCache = std::vector<LayerCache>;

// Hidden layers are ReLU (+ dropout); with `linear_last` the final layer
// outputs logits.
MatrixXd forward_stack(const std::vector<Dense>& layers, const MatrixXd& x,
                       bool linear_last, double keep, Rng* drop,
                       StackCache* cache) {
  MatrixXd a = x;
  if (cache) cache->resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Dense& d = layers[l];
    MatrixXd z = (d.w * a).colwise() + d.b;
    const bool last = l + 1 == layers.size();
    MatrixXd h;
    MatrixXd mask;
    if (last && linear_last) {
      h = z;
    } else {
      h = z.cwiseMax(0.0);
      if (drop && keep < 1.0) {
        mask.resize(h.rows(), h.cols());
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
          for (Eigen::Index r = 0; r < mask.rows(); ++r) {
            mask(r, c) = uniform01(*drop) < keep ? 1.0 / keep : 0.0;
          }
        }
        h = h.cwiseProduct(mask);
      }
    }
    if (cache) {
      (*cache)[l].a = std::move(a);
      (*cache)[l].z = std::move(z);
      (*cache)[l].mask = std::move(mask);
    }
    a = std::move(h);
  }
  return a;
}

std::vector<Dense> zeros_like(const std::vector<Dense>& layers) {
  std::vector<Dense> g(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    g[l].w = MatrixXd::Zero(layers[l].w.rows(), layers[l].w.cols());
    g[l].b = VectorXd::Zero(layers[l].b.size());
  }
  return g;
}

// Accumulates parameter gradients into `grads` and returns dL/dx.
MatrixXd backward_stack(const std::vector<Dense>& layers,
                        const StackCache& cache, MatrixXd dout,
                        bool linear_last, std::vector<Dense>* grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerCache& c = cache[l];
    const bool last = l + 1 == layers.size();
    MatrixXd dz;
    if (last && linear_last) {
      dz = std::move(dout);
    } else {
      dz = dout.cwiseProduct((c.z.array() > 0.0).cast<double>().matrix());
      if (c.mask.size() > 0) dz = dz.cwiseProduct(c.mask);
    }
    if (grads) {
      (*grads)[l].w.noalias() += dz * c.a.transpose();
      (*grads)[l].b += dz.rowwise().sum();
    }
    dout = layers[l].w.transpose() * dz;
  }
  return dout;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

VectorXd sigmoid_row(const MatrixXd& logits) {
  VectorXd p(logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i) p(i) = sigmoid(logits(0, i));
  return p;
}

bool in_clamp(double p) {
  return p >= kProbEpsilon && p <= 1.0 - kProbEpsilon;
}

}  // namespace

Mlp::Mlp(const MlpSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng = make_rng(derive_seed(seed, Stream::kTrainInit));
  encoder_ = make_stack(spec_.input_dim, spec_.encoder_hidden, false, rng);
  classifier_ = make_stack(feature_dim(), spec_.classifier_hidden, true, rng);
  Rng drng = make_rng(derive_seed(seed, Stream::kDiscriminator));
  discriminator_ =
      make_stack(feature_dim(), spec_.discriminator_hidden, true, drng);
  mean_ = VectorXd::Zero(spec_.input_dim);
  std_ = VectorXd::Ones(spec_.input_dim);
}

int Mlp::feature_dim() const {
  return spec_.encoder_hidden.empty() ? spec_.input_dim
                                      : spec_.encoder_hidden.back();
}

void Mlp::set_standardization(std::span<const WeightedSample> data,
                              std::span<const WeightedSample> more) {
  const int d = spec_.input_dim;
  mean_ = VectorXd::Zero(d);
  std_ = VectorXd::Ones(d);
  const double n = static_cast<double>(data.size() + more.size());
  if (n == 0.0) return;
  for (auto set : {data, more}) {
    for (const WeightedSample& s : set) {
      for (int k = 0; k < d; ++k) mean_(k) += s.x[static_cast<std::size_t>(k)];
    }
  }
  mean_ /= n;
  VectorXd var = VectorXd::Zero(d);
  for (auto set : {data, more}) {
    for (const WeightedSample& s : set) {
      for (int k = 0; k < d; ++k) {
        const double dx = s.x[static_cast<std::size_t>(k)] - mean_(k);
        var(k) += dx * dx;
      }
    }
  }
  for (int k = 0; k < d; ++k) {
    const double sd = std::sqrt(var(k) / n);
    std_(k) = sd > 1e-8 ? sd : 1.0;
  }
}

MatrixXd Mlp::standardize(const MatrixXd& x) const {
  return (x.colwise() - mean_).array().colwise() / std_.array();
}

VectorXd Mlp::predict(const MatrixXd& x) const {
  if (x.rows() != spec_.input_dim) {
    throw DataError("expected " + std::to_string(spec_.input_dim) +
                    " features, got " + std::to_string(x.rows()));
  }
  const MatrixXd m =
      forward_stack(encoder_, standardize(x), false, 1.0, nullptr, nullptr);
  return sigmoid_row(
      forward_stack(classifier_, m, true, 1.0, nullptr, nullptr));
}

double Mlp::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != spec_.input_dim) {
    throw DataError("expected " + std::to_string(spec_.input_dim) +
                    " features, got " + std::to_string(x.size()));
  }
  MatrixXd m(spec_.input_dim, 1);
  for (int k = 0; k < spec_.input_dim; ++k) m(k, 0) = x[k];
  return predict(m)(0);
}

namespace {

void append_maps(std::vector<Dense>& layers,
                 std::vector<Eigen::Map<VectorXd>>& out) {
  for (Dense& d : layers) {
    out.emplace_back(d.w.data(), d.w.size());
    out.emplace_back(d.b.data(), d.b.size());
  }
}

}  // namespace

std::vector<Eigen::Map<VectorXd>> Mlp::predictor_tensors() {
  std::vector<Eigen::Map<VectorXd>> out;
  append_maps(encoder_, out);
  append_maps(classifier_, out);
  return out;
}

std::vector<Eigen::Map<VectorXd>> Mlp::discriminator_tensors() {
  std::vector<Eigen::Map<VectorXd>> out;
  append_maps(discriminator_, out);
  return out;
}

bool operator==(const Mlp& a, const Mlp& b) {
  const auto same = [](const std::vector<Dense>& x,
                       const std::vector<Dense>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t l = 0; l < x.size(); ++l) {
      if (x[l].w.rows() != y[l].w.rows() || x[l].w.cols() != y[l].w.cols() ||
          x[l].w != y[l].w || x[l].b != y[l].b) {
        return false;
      }
    }
    return true;
  };
  return a.spec_ == b.spec_ && a.schema_hash == b.schema_hash &&
         same(a.encoder_, b.encoder_) && same(a.classifier_, b.classifier_) &&
         same(a.discriminator_, b.discriminator_) && a.mean_ == b.mean_ &&
         a.std_ == b.std_;
}

// ---------------------------------------------------------------------------
// Losses

double weighted_xent_loss(std::span<const double> preds,
                          std::span<const double> labels,
                          std::span<const double> weights) {
  if (preds.size() != labels.size() || preds.size() != weights.size()) {
    throw DataError("loss: preds, labels, and weights differ in length");
  }
  if (preds.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (weights[i] < 0.0) throw DataError("loss: negative sample weight");
    sum += weights[i] * cross_entropy(preds[i], labels[i]);
  }
  return sum / static_cast<double>(preds.size());
}

double domain_adv_loss(std::span<const double> d_source,
                       std::span<const double> d_target) {
  double ls = 0.0;
  for (double d : d_source) ls -= std::log(clamp_prob(d));
  double lt = 0.0;
  for (double d : d_target) lt -= std::log(1.0 - clamp_prob(d));
  if (!d_source.empty()) ls /= static_cast<double>(d_source.size());
  if (!d_target.empty()) lt /= static_cast<double>(d_target.size());
  return ls + lt;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kTargetOnly:
      return "target-only";
    case Variant::kJointNoAdapt:
      return "joint-no-adapt";
    case Variant::kDann:
      return "dann";
    case Variant::kDannSourceOnly:
      return "dann-source-only";
  }
  return "";
}

Variant variant_from_name(std::string_view name) {
  for (Variant v : {Variant::kTargetOnly, Variant::kJointNoAdapt,
                    Variant::kDann, Variant::kDannSourceOnly}) {
    if (variant_name(v) == name) return v;
  }
  throw UsageError("unknown training variant '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw RangeError("learning rate must be > 0");
  if (!(lambda >= 0.0)) throw RangeError("lambda must be >= 0");
  if (epochs < 1) throw RangeError("epochs must be >= 1");
  if (batch_size < 1) throw RangeError("batch size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw RangeError("momentum must lie in [0, 1)");
  }
  if (!(clip_norm >= 0.0)) throw RangeError("clip_norm must be >= 0");
}

// ---------------------------------------------------------------------------
// Gradients

namespace {

struct PassOptions {
  double lambda = 0.0;
  bool source_only = false;
  double keep = 1.0;
  Rng* dropout = nullptr;
  // Called with D's gradients before the predictor's adversarial gradient
  // is taken; may update D in place (alternating schedule).
  const std::function<void(std::vector<Dense>&)>* d_step = nullptr;
};

Gradients forward_backward(Mlp& net, const Batch& batch,
                           const PassOptions& opt) {
  Gradients g;
  g.encoder = zeros_like(net.encoder());
  g.classifier = zeros_like(net.classifier());
  g.discriminator = zeros_like(net.discriminator());

  const Eigen::Index ns = batch.xs.cols();
  const Eigen::Index nt = batch.xt.cols();
  const double total = static_cast<double>(ns + nt);
  if (total == 0) return g;

  StackCache enc_s, enc_t, cls_s, cls_t;
  MatrixXd ms, mt;
  if (ns > 0) {
    ms = forward_stack(net.encoder(), batch.xs, false, opt.keep, opt.dropout,
                       &enc_s);
  }
  if (nt > 0) {
    mt = forward_stack(net.encoder(), batch.xt, false, opt.keep, opt.dropout,
                       &enc_t);
  }

  MatrixXd dms = MatrixXd::Zero(ms.rows(), ms.cols());
  MatrixXd dmt = MatrixXd::Zero(mt.rows(), mt.cols());

  // Prediction loss: sum_i w_i ce_i / (ns + nt).
  const auto pred = [&](const MatrixXd& m, const VectorXd& y,
                        const VectorXd& w, StackCache& cache, MatrixXd& dm) {
    const MatrixXd logits =
        forward_stack(net.classifier(), m, true, opt.keep, opt.dropout, &cache);
    const VectorXd p = sigmoid_row(logits);
    MatrixXd dlogit(1, p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      g.pred_loss += w(i) * cross_entropy(p(i), y(i)) / total;
      dlogit(0, i) = in_clamp(p(i)) ? w(i) * (p(i) - y(i)) / total : 0.0;
    }
    dm += backward_stack(net.classifier(), cache, std::move(dlogit), true,
                         &g.classifier);
  };
  if (ns > 0) pred(ms, batch.ys, batch.ws, cls_s, dms);
  if (nt > 0) pred(mt, batch.yt, batch.wt, cls_t, dmt);

  if (opt.lambda > 0.0 && ns > 0 && nt > 0) {
    const auto adv_pass = [&](std::vector<Dense>* dgrad, double scale,
                              MatrixXd* dms_out, MatrixXd* dmt_out) {
      StackCache ds, dt;
      const VectorXd ps =
          sigmoid_row(forward_stack(net.discriminator(), ms, true, 1.0,
                                    nullptr, &ds));
      const VectorXd pt =
          sigmoid_row(forward_stack(net.discriminator(), mt, true, 1.0,
                                    nullptr, &dt));
      MatrixXd gs(1, ns), gt(1, nt);
      double loss = 0.0;
      for (Eigen::Index i = 0; i < ns; ++i) {
        loss -= std::log(clamp_prob(ps(i))) / ns;
        gs(0, i) = in_clamp(ps(i)) ? scale * (ps(i) - 1.0) / ns : 0.0;
      }
      for (Eigen::Index i = 0; i < nt; ++i) {
        loss -= std::log(1.0 - clamp_prob(pt(i))) / nt;
        gt(0, i) = in_clamp(pt(i)) ? scale * pt(i) / nt : 0.0;
      }
      MatrixXd a = backward_stack(net.discriminator(), ds, std::move(gs),
                                  true, dgrad);
      MatrixXd b = backward_stack(net.discriminator(), dt, std::move(gt),
                                  true, dgrad);
      if (dms_out) *dms_out = std::move(a);
      if (dmt_out) *dmt_out = std::move(b);
      return loss;
    };
    // D minimizes -L_adv.
    g.adv_loss = adv_pass(&g.discriminator, -1.0, nullptr, nullptr);
    if (opt.d_step) {
      (*opt.d_step)(g.discriminator);
    }
    MatrixXd as, at;
    const double loss = adv_pass(nullptr, opt.lambda, &as, &at);
    if (opt.d_step) g.adv_loss = loss;
    dms += as;
    if (!opt.source_only) dmt += at;
  }

  if (ns > 0) backward_stack(net.encoder(), enc_s, dms, false, &g.encoder);
  if (nt > 0) backward_stack(net.encoder(), enc_t, dmt, false, &g.encoder);
  return g;
}

}  // namespace

Gradients loss_and_gradients(const Mlp& net, const Batch& batch,
                             double lambda, bool source_only) {
  PassOptions opt;
  opt.lambda = lambda;
  opt.source_only = source_only;
  return forward_backward(const_cast<Mlp&>(net), batch, opt);
}

namespace {

double total_loss(Mlp& net, const Batch& batch, double lambda,
                  bool discriminator,
                  std::vector<MatrixXd>* pre_activations) {
  // Re-evaluates the losses and optionally records every ReLU input.
  const Gradients g = loss_and_gradients(net, batch, lambda);
  if (pre_activations) {
    pre_activations->clear();
    const auto collect = [&](const std::vector<Dense>& layers,
                             const MatrixXd& x, bool linear_last) {
      StackCache c;
      MatrixXd out = forward_stack(layers, x, linear_last, 1.0, nullptr, &c);
      for (const LayerCache& l : c) pre_activations->push_back(l.z);
      return out;
    };
    for (const MatrixXd* x : {&batch.xs, &batch.xt}) {
      if (x->cols() == 0) continue;
      const MatrixXd m = collect(net.encoder(), *x, false);
      collect(net.classifier(), m, true);
      if (lambda > 0.0) collect(net.discriminator(), m, true);
    }
  }
  return discriminator ? -g.adv_loss : g.pred_loss + lambda * g.adv_loss;
}

bool same_signs(const std::vector<MatrixXd>& a,
                const std::vector<MatrixXd>& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (((a[k].array() > 0.0) != (b[k].array() > 0.0)).any()) return false;
  }
  return true;
}

}  // namespace

GradCheckResult grad_check(const Mlp& net_in, const Batch& batch,
                           double lambda, double step, Rng& rng,
                           int per_tensor) {
  Mlp net = net_in;
  const Gradients g = loss_and_gradients(net, batch, lambda);
  std::vector<Dense> grads_pred = g.encoder;
  grads_pred.insert(grads_pred.end(), g.classifier.begin(), g.classifier.end());
  std::vector<Dense> grads_d = g.discriminator;

  GradCheckResult result;
  const auto check = [&](std::vector<Eigen::Map<VectorXd>> params,
                         std::vector<Dense>& grads, bool disc) {
    std::vector<Eigen::Map<VectorXd>> gmaps;
    append_maps(grads, gmaps);
    std::vector<MatrixXd> sp, sm;
    for (std::size_t t = 0; t < params.size(); ++t) {
      const Eigen::Index n = params[t].size();
      std::vector<Eigen::Index> entries(static_cast<std::size_t>(n));
      std::iota(entries.begin(), entries.end(), 0);
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(std::min<std::size_t>(entries.size(), per_tensor));
      for (Eigen::Index e : entries) {
        double& p = params[t](e);
        const double saved = p;
        p = saved + step;
        const double lp = total_loss(net, batch, lambda, disc, &sp);
        p = saved - step;
        const double lm = total_loss(net, batch, lambda, disc, &sm);
        p = saved;
        if (!same_signs(sp, sm)) {
          ++result.skipped_kinks;
          continue;
        }
        const double numeric = (lp - lm) / (2.0 * step);
        const double analytic = gmaps[t](e);
        const double denom =
            std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        result.max_relative_error = std::max(result.max_relative_error,
                                             std::abs(numeric - analytic) /
                                                 denom);
        ++result.checked;
      }
    }
  };
  check(net.predictor_tensors(), grads_pred, false);
  if (lambda > 0.0 && batch.xs.cols() > 0 && batch.xt.cols() > 0) {
    check(net.discriminator_tensors(), grads_d, true);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training

namespace {

class OptimizerState {
 public:
  OptimizerState(const TrainConfig& c,
                 std::vector<Eigen::Map<VectorXd>> params)
      : config_(c) {
    for (auto& p : params) {
      m_.push_back(VectorXd::Zero(p.size()));
      v_.push_back(VectorXd::Zero(p.size()));
    }
  }

  void apply(std::vector<Eigen::Map<VectorXd>> params,
             std::vector<Eigen::Map<VectorXd>> grads) {
    ++t_;
    const double lr = config_.learning_rate;
    if (config_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& g : grads) sq += g.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > config_.clip_norm) {
        for (auto& g : grads) g *= config_.clip_norm / norm;
      }
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (config_.optimizer == Optimizer::kSgdMomentum) {
        m_[k] = config_.momentum * m_[k] + grads[k];
        params[k] -= lr * m_[k];
      } else {
        constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
        m_[k] = kB1 * m_[k] + (1.0 - kB1) * grads[k];
        v_[k] = kB2 * v_[k] + (1.0 - kB2) * grads[k].cwiseAbs2();
        const double c1 = 1.0 - std::pow(kB1, t_);
        const double c2 = 1.0 - std::pow(kB2, t_);
        params[k].array() -=
            lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + kEps);
      }
    }
  }

 private:
  TrainConfig config_;
  std::vector<VectorXd> m_, v_;
  int t_ = 0;
};

struct Matrixed {
  MatrixXd x;
  VectorXd y, w;
};

Matrixed to_matrix(const Mlp& net, std::span<const WeightedSample> data) {
  const int d = net.spec().input_dim;
  Matrixed m;
  m.x.resize(d, static_cast<Eigen::Index>(data.size()));
  m.y.resize(static_cast<Eigen::Index>(data.size()));
  m.w.resize(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (static_cast<int>(data[i].x.size()) != d) {
      throw DataError("sample " + std::to_string(i) + " has " +
                      std::to_string(data[i].x.size()) + " features, expected " +
                      std::to_string(d));
    }
    for (int k = 0; k < d; ++k) m.x(k, i) = data[i].x[k];
    m.y(i) = data[i].y;
    m.w(i) = data[i].w;
    if (!(data[i].w >= 0.0)) throw DataError("negative sample weight");
  }
  m.x = net.standardize(m.x);
  return m;
}

void gather(const Matrixed& m, const std::vector<std::size_t>& order,
            std::size_t begin, std::size_t end, MatrixXd& x, VectorXd& y,
            VectorXd& w) {
  const auto n = static_cast<Eigen::Index>(end - begin);
  x.resize(m.x.rows(), n);
  y.resize(n);
  w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto j = static_cast<Eigen::Index>(order[begin + i]);
    x.col(i) = m.x.col(j);
    y(i) = m.y(j);
    w(i) = m.w(j);
  }
}

}  // namespace

TrainResult train(std::span<const WeightedSample> source,
                  std::span<const WeightedSample> target, MlpSpec spec,
                  const TrainConfig& config,
                  std::span<const WeightedSample> validation) {
  config.validate();
  const bool joint = config.variant != Variant::kTargetOnly;
  const bool adversarial =
      (config.variant == Variant::kDann ||
       config.variant == Variant::kDannSourceOnly) &&
      config.lambda > 0.0;
  if (target.empty()) throw DataError("training requires target samples");
  if (joint && source.empty()) {
    throw DataError(std::string(variant_name(config.variant)) +
                    " requires source samples");
  }
  if (validation.empty()) throw DataError("training requires validation data");
  spec.input_dim = static_cast<int>(target.front().x.size());

  TrainResult result;
  Mlp net(spec, config.seed);
  if (joint) {
    net.set_standardization(source, target);
  } else {
    net.set_standardization(target);
  }

  const Matrixed tgt = to_matrix(net, target);
  const Matrixed src = joint ? to_matrix(net, source) : Matrixed{};
  const Matrixed val = to_matrix(net, validation);

  OptimizerState pred_opt(config, net.predictor_tensors());
  OptimizerState disc_opt(config, net.discriminator_tensors());
  Rng shuffle = make_rng(derive_seed(config.seed, Stream::kTrainShuffle));
  Rng dropout = make_rng(derive_seed(config.seed, Stream::kTrainDropout));

  const std::function<void(std::vector<Dense>&)> d_step =
      [&](std::vector<Dense>& grads) {
        std::vector<Eigen::Map<VectorXd>> gm;
        append_maps(grads, gm);
        disc_opt.apply(net.discriminator_tensors(), std::move(gm));
      };
  PassOptions opt;
  opt.lambda = adversarial ? config.lambda : 0.0;
  opt.source_only = config.variant == Variant::kDannSourceOnly;
  opt.keep = spec.keep_prob;
  opt.dropout = &dropout;
  opt.d_step = adversarial ? &d_step : nullptr;

  std::vector<std::size_t> src_order(source.size());
  std::vector<std::size_t> tgt_order(target.size());
  std::iota(src_order.begin(), src_order.end(), 0);
  std::iota(tgt_order.begin(), tgt_order.end(), 0);
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::size_t tgt_pos = tgt_order.size();

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> ones(validation.size(), 1.0);
  std::vector<double> vy(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i) vy[i] = validation[i].y;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::size_t primary = joint ? source.size() : target.size();
    if (joint) std::shuffle(src_order.begin(), src_order.end(), shuffle);
    if (!joint) {
      std::shuffle(tgt_order.begin(), tgt_order.end(), shuffle);
      tgt_pos = 0;
    }
    const std::size_t steps = (primary + bs - 1) / bs;
    double loss_sum = 0.0, adv_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      Batch batch;
      const std::size_t b0 = s * bs;
      const std::size_t b1 = std::min(primary, b0 + bs);
      if (joint) {
        gather(src, src_order, b0, b1, batch.xs, batch.ys, batch.ws);
        // Target batches cycle through reshuffled passes.
        const std::size_t want = std::min(bs, target.size());
        if (tgt_pos + want > tgt_order.size()) {
          std::shuffle(tgt_order.begin(), tgt_order.end(), shuffle);
          tgt_pos = 0;
        }
        gather(tgt, tgt_order, tgt_pos, tgt_pos + want, batch.xt, batch.yt,
               batch.wt);
        tgt_pos += want;
      } else {
        gather(tgt, tgt_order, b0, b1, batch.xt, batch.yt, batch.wt);
      }
      Gradients g = forward_backward(net, batch, opt);
      if (!std::isfinite(g.pred_loss) || !std::isfinite(g.adv_loss)) {
        throw NumericalError("non-finite loss at epoch " +
                             std::to_string(epoch) + " batch " +
                             std::to_string(s));
      }
      loss_sum += g.pred_loss;
      adv_sum += g.adv_loss;
      std::vector<Dense> pg = std::move(g.encoder);
      pg.insert(pg.end(), std::make_move_iterator(g.classifier.begin()),
                std::make_move_iterator(g.classifier.end()));
      std::vector<Eigen::Map<VectorXd>> gm;
      append_maps(pg, gm);
      pred_opt.apply(net.predictor_tensors(), std::move(gm));
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(steps);
    log.adv_loss = adv_sum / static_cast<double>(steps);
    const VectorXd preds =
        sigmoid_row(forward_stack(net.classifier(),
                                  forward_stack(net.encoder(), val.x, false,
                                                1.0, nullptr, nullptr),
                                  true, 1.0, nullptr, nullptr));
    const std::span<const double> ps(preds.data(),
                                     static_cast<std::size_t>(preds.size()));
    log.val_nll_all = nll(ps, vy, ones, Subset::kAll);
    const bool has_pos =
        std::any_of(vy.begin(), vy.end(), [](double y) { return y > 0.0; });
    log.val_nll_positive = has_pos ? nll(ps, vy, ones, Subset::kPositiveRisk)
                                   : std::numeric_limits<double>::quiet_NaN();
    result.log.push_back(log);
    const double metric =
        config.selection == Subset::kPositiveRisk && has_pos
            ? log.val_nll_positive
            : log.val_nll_all;
    if (metric < best) {
      best = metric;
      result.best_epoch = epoch;
      result.net = net;
    }
  }
  if (result.best_epoch == 0) result.net = net;
  return result;
}

std::vector<WeightedSample> binarize_labels(
    std::span<const WeightedSample> samples, std::uint64_t seed) {
  std::vector<WeightedSample> out(samples.begin(), samples.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = out[i].y;
    if (!(y >= 0.0 && y <= 1.0)) {
      throw RangeError("label " + std::to_string(y) + " outside [0, 1]");
    }
    Rng rng = make_rng(derive_seed(seed, Stream::kBinarize, i));
    out[i].y = uniform01(rng) < y ? 1.0 : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json layers_to_json(const std::vector<Dense>& layers) {
  json arr = json::array();
  for (const Dense& d : layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(d.w.size()));
    for (Eigen::Index r = 0; r < d.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < d.w.cols(); ++c) w.push_back(d.w(r, c));
    }
    arr.push_back({{"in", d.in()},
                   {"out", d.out()},
                   {"weights", w},
                   {"bias", std::vector<double>(d.b.data(),
                                                d.b.data() + d.b.size())}});
  }
  return arr;
}

std::vector<Dense> layers_from_json(const json& arr) {
  std::vector<Dense> layers;
  for (const json& j : arr) {
    Dense d;
    const int in = j.at("in").get<int>();
    const int out = j.at("out").get<int>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(in) * out ||
        b.size() != static_cast<std::size_t>(out)) {
      throw DataError("model layer has inconsistent sizes");
    }
    d.w.resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) {
        d.w(r, c) = w[static_cast<std::size_t>(r) * in + c];
      }
    }
    d.b = Eigen::Map<const VectorXd>(b.data(), out);
    layers.push_back(std::move(d));
  }
  return layers;
}

}  // namespace

std::string serialize_model(const Mlp& net) {
  const MlpSpec& s = net.spec();
  json j;
  j["format"] = "crisk-mlp";
  j["version"] = 1;
  j["spec"] = {{"input_dim", s.input_dim},
               {"encoder_hidden", s.encoder_hidden},
               {"classifier_hidden", s.classifier_hidden},
               {"keep_prob", s.keep_prob},
               {"discriminator_hidden", s.discriminator_hidden}};
  j["schema_hash"] = std::to_string(net.schema_hash);
  j["mean"] = std::vector<double>(net.mean().data(),
                                  net.mean().data() + net.mean().size());
  j["std"] = std::vector<double>(net.std().data(),
                                 net.std().data() + net.std().size());
  j["encoder"] = layers_to_json(net.encoder());
  j["classifier"] = layers_to_json(net.classifier());
  j["discriminator"] = layers_to_json(net.discriminator());
  return j.dump() + "\n";
}

Mlp deserialize_model(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "crisk-mlp") throw DataError("not a crisk model");
    MlpSpec s;
    const json& js = j.at("spec");
    s.input_dim = js.at("input_dim").get<int>();
    s.encoder_hidden = js.at("encoder_hidden").get<std::vector<int>>();
    s.classifier_hidden = js.at("classifier_hidden").get<std::vector<int>>();
    s.keep_prob = js.at("keep_prob").get<double>();
    s.discriminator_hidden =
        js.at("discriminator_hidden").get<std::vector<int>>();
    Mlp net(s, 0);
    net.encoder() = layers_from_json(j.at("encoder"));
    net.classifier() = layers_from_json(j.at("classifier"));
    net.discriminator() = layers_from_json(j.at("discriminator"));
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (mean.size() != static_cast<std::size_t>(s.input_dim) ||
        sd.size() != mean.size()) {
      throw DataError("model standardization has the wrong length");
    }
    net.mean() = Eigen::Map<const VectorXd>(mean.data(), s.input_dim);
    net.std() = Eigen::Map<const VectorXd>(sd.data(), s.input_dim);
    net.schema_hash = std::stoull(j.at("schema_hash").get<std::string>());
    return net;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const Mlp& net, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize_model(net);
}

Mlp load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace crisk
