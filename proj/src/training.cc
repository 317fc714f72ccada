//
// Copyright 2026 The Delta Authors
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
//

#include "delta/training.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "delta/errors.h"
#include "delta/rng.h"

namespace delta {
namespace {

constexpr std::uint64_t kBatchStreamBase = 0x2000000;

void RequireFiniteLoss(double loss, const char* where) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(where) + ": non-finite loss");
  }
}

Tensor3 LogitTensor(std::span<const double> g) {
  Tensor3 t(g.size(), 1, 1);
  std::copy(g.begin(), g.end(), t.values().begin());
  return t;
}

double Accuracy(std::size_t correct, std::size_t total) {
  return total == 0 ? 0.0
                    : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

// ----------------------------------------------------------- TrainConfig

void TrainConfig::Validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument("weight_decay must be >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
  if (!(orth_reg >= 0.0)) throw std::invalid_argument("orth_reg must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must be in (0, 1)");
  }
}

double TrainConfig::SamplingRate(std::size_t n_train) const {
  if (n_train == 0) throw std::invalid_argument("no training samples");
  return std::min(1.0, static_cast<double>(batch_size) /
                           static_cast<double>(n_train));
}

PrivacyParams TrainConfig::Privacy(std::size_t n_train, double clip) const {
  PrivacyParams p = Calibrate(epsilon, delta, SamplingRate(n_train), clip);
  if (sigma >= 0.0) p.sigma = sigma;
  return p;
}

// --------------------------------------------------------- Loss / grads

std::vector<double> Softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double CrossEntropy(std::span<const double> z, std::size_t label) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return m + std::log(sum) - z[label];
}

std::vector<double> OneHot(std::size_t label, std::size_t classes) {
  if (label >= classes) throw std::invalid_argument("OneHot: label >= L");
  std::vector<double> y(classes, 0.0);
  y[label] = 1.0;
  return y;
}

PrivateGrads PrivateBackprop(std::span<const double> z_main,
                             std::span<const double> z_res,
                             std::span<const double> y, double alpha) {
  if (z_main.size() != y.size() || z_res.size() != y.size()) {
    throw std::invalid_argument("PrivateBackprop: length mismatch");
  }
  PrivateGrads g;
  g.g_main = Softmax(MergeLogits(z_main, z_res, alpha));
  g.g_res = Softmax(z_res);
  for (std::size_t i = 0; i < y.size(); ++i) {
    g.g_main[i] -= y[i];
    g.g_res[i] -= y[i];
  }
  return g;
}

// ------------------------------------------------------------ Optimizer

double CosineLr(double lr0, std::size_t step, std::size_t total) {
  if (total == 0) return lr0;
  const double t = static_cast<double>(std::min(step, total)) /
                   static_cast<double>(total);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void SgdStep(std::span<double> w, std::span<const double> g,
             std::span<double> v, double lr, double momentum, double wd) {
  if (w.size() != g.size() || w.size() != v.size()) {
    throw std::invalid_argument("SgdStep: shape mismatch");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw DivergenceError("non-finite gradient");
    }
    v[i] = momentum * v[i] + (g[i] + wd * w[i]);
    w[i] -= lr * v[i];
  }
}

Sgd::Sgd(Network& net, double momentum, double weight_decay)
    : net_(&net), momentum_(momentum), weight_decay_(weight_decay) {
  for (const ParamView& p : net.Params()) {
    velocity_.emplace_back(p.value.size(), 0.0);
  }
}

void Sgd::Step(double lr) {
  std::vector<ParamView> params = net_->Params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    SgdStep(params[i].value, params[i].grad, velocity_[i], lr, momentum_,
            weight_decay_);
  }
}

std::vector<std::vector<std::size_t>> EpochBatches(
    std::span<const std::size_t> ids, std::size_t batch_size,
    std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(ids.begin(), ids.end());
  RandomStream rng(seed, kBatchStreamBase + epoch);
  rng.Shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  return batches;
}

std::size_t StepsFor(std::size_t n, std::size_t batch_size,
                     std::size_t epochs) {
  return epochs * ((n + batch_size - 1) / batch_size);
}

// --------------------------------------------------------------- Report

double TrainReport::FinalMain() const {
  return epochs.empty() ? 0.0 : epochs.back().val_main;
}

double TrainReport::FinalMerged() const {
  return epochs.empty() ? 0.0 : epochs.back().val_merged;
}

// --------------------------------------------------------------- Stage 1

double EvaluateMain(const ModelSpec& spec, Models& models,
                    const Dataset& data, std::span<const std::size_t> ids) {
  const MainProjector proj(spec.decomposition);
  std::size_t correct = 0;
  Matrix basis;
  for (std::size_t id : ids) {
    const Tensor3 ir = models.bb.Infer(data.images[id]);
    const Tensor3 z = models.main.Infer(proj.Forward(ir, basis));
    if (Argmax(z.values()) == data.labels[id]) ++correct;
  }
  return Accuracy(correct, ids.size());
}

void Stage1(const ModelSpec& spec, Models& models, const Dataset& data,
            const TrainConfig& cfg, TrainReport& report) {
  cfg.Validate();
  const MainProjector proj(spec.decomposition);
  Sgd sgd_bb(models.bb, cfg.momentum, cfg.weight_decay);
  Sgd sgd_main(models.main, cfg.momentum, cfg.weight_decay);
  const std::size_t total = StepsFor(data.train.size(), cfg.batch_size, cfg.ep1);
  std::size_t step = 0;
  const Shape ir_shape = spec.IrShape();

  for (std::size_t epoch = 0; epoch < cfg.ep1; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& ids : EpochBatches(data.train, cfg.batch_size, cfg.seed,
                                        epoch)) {
      Batch x;
      for (std::size_t id : ids) x.push_back(data.images[id]);
      const Batch ir = models.bb.Forward(x, true);
      Batch ir_main;
      std::vector<Matrix> bases(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        ir_main.push_back(proj.Forward(ir[i], bases[i]));
      }
      const Batch z = models.main.Forward(ir_main, true);

      const double inv_b = 1.0 / static_cast<double>(ids.size());
      Batch gz;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t label = data.labels[ids[i]];
        loss_sum += CrossEntropy(z[i].values(), label);
        std::vector<double> g = Softmax(z[i].values());
        g[label] -= 1.0;
        for (double& v : g) v *= inv_b;
        gz.push_back(LogitTensor(g));
      }
      seen += ids.size();
      RequireFiniteLoss(loss_sum, "stage1");

      models.main.ZeroGrad();
      models.bb.ZeroGrad();
      const Batch g_main_in = models.main.Backward(gz, true);
      models.main.AddOrthReg(cfg.orth_reg);
      Batch g_ir;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        g_ir.push_back(
            proj.Backward(g_main_in[i], bases[i], ir_shape.h, ir_shape.w));
      }
      models.bb.Backward(g_ir, false);

      const double lr = CosineLr(cfg.lr, step++, total);
      sgd_main.Step(lr);
      sgd_bb.Step(lr);
    }
    EpochStats stats;
    stats.stage = "stage1";
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(seen, 1));
    stats.val_main = EvaluateMain(spec, models, data, data.val);
    report.epochs.push_back(stats);
  }
}

// --------------------------------------------------------------- Stage 2

void Stage2(const ModelSpec& spec, Models& models, const Dataset& data,
            const TrainConfig& cfg, ResidualPeer* peer, TrainReport& report) {
  cfg.Validate();
  // M_bb is frozen, so the main-path inputs are computed once.
  std::map<std::size_t, Tensor3> main_in;
  for (std::size_t id : data.train) {
    main_in[id] = ExtractFeatures(spec, models.bb, data.images[id]).ir_main;
  }
  std::vector<PrivateFeatures> val_features;
  for (std::size_t id : data.val) {
    val_features.push_back(ExtractFeatures(spec, models.bb, data.images[id]));
  }
  const PrivacyParams privacy =
      cfg.Privacy(data.train.size(), spec.decomposition.clip);

  Sgd sgd_main(models.main, cfg.momentum, cfg.weight_decay);
  const std::size_t total = StepsFor(data.train.size(), cfg.batch_size, cfg.ep2);
  std::size_t step = 0;
  std::uint32_t batch_index = 0;

  for (std::size_t epoch = 0; epoch < cfg.ep2; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& ids : EpochBatches(data.train, cfg.batch_size, cfg.seed,
                                        cfg.ep1 + epoch)) {
      std::vector<std::vector<double>> z_res;
      if (peer) z_res = peer->Forward(ids, batch_index);
      Batch x;
      for (std::size_t id : ids) x.push_back(main_in.at(id));
      const Batch z = models.main.Forward(x, true);

      const double inv_b = 1.0 / static_cast<double>(ids.size());
      Batch gz;
      std::vector<std::vector<double>> g_res;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t label = data.labels[ids[i]];
        const std::vector<double> y = OneHot(label, spec.num_classes);
        std::vector<double> g_main;
        if (peer) {
          PrivateGrads g = PrivateBackprop(z[i].values(), z_res[i], y,
                                           spec.alpha);
          loss_sum += CrossEntropy(
              MergeLogits(z[i].values(), z_res[i], spec.alpha), label);
          g_main = std::move(g.g_main);
          g_res.push_back(std::move(g.g_res));
        } else {
          loss_sum += CrossEntropy(z[i].values(), label);
          g_main = Softmax(z[i].values());
          g_main[label] -= 1.0;
        }
        for (double& v : g_main) v *= inv_b;
        gz.push_back(LogitTensor(g_main));
      }
      seen += ids.size();
      RequireFiniteLoss(loss_sum, "stage2");
      if (peer) peer->Backward(g_res, batch_index);
      ++batch_index;

      models.main.ZeroGrad();
      models.main.Backward(gz, false);
      models.main.AddOrthReg(cfg.orth_reg);
      sgd_main.Step(CosineLr(cfg.lr, step++, total));
    }

    EpochStats stats;
    stats.stage = "stage2";
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(seen, 1));
    std::size_t correct_main = 0, correct_merged = 0;
    for (std::size_t k = 0; k < data.val.size(); ++k) {
      const std::size_t id = data.val[k];
      const std::vector<double> zm =
          models.main.Infer(val_features[k].ir_main).values();
      if (Argmax(zm) == data.labels[id]) ++correct_main;
      if (peer) {
        const ResidualRelease release{privacy, cfg.seed,
                                      kValidationNoiseDomain + id,
                                      cfg.perturb_inference};
        const std::vector<double> zr =
            peer->Infer(val_features[k].residual, release);
        if (Argmax(MergeLogits(zm, zr, spec.alpha)) == data.labels[id]) {
          ++correct_merged;
        }
      }
    }
    stats.val_main = Accuracy(correct_main, data.val.size());
    stats.val_merged =
        peer ? Accuracy(correct_merged, data.val.size()) : stats.val_main;
    report.epochs.push_back(stats);
  }
}

// ------------------------------------------------------ Public trainer

ResidualTrainer::ResidualTrainer(Network& res, const TrainConfig& cfg,
                                 std::size_t steps_total)
    : res_(&res),
      sgd_(res, cfg.momentum, cfg.weight_decay),
      lr0_(cfg.lr),
      steps_total_(steps_total) {}

std::vector<std::vector<double>> ResidualTrainer::Forward(
    const Batch& inputs) {
  const Batch z = res_->Forward(inputs, true);
  pending_ = inputs.size();
  std::vector<std::vector<double>> out;
  for (const Tensor3& t : z) out.push_back(t.values());
  return out;
}

void ResidualTrainer::Backward(const std::vector<std::vector<double>>& g_res) {
  if (g_res.size() != pending_ || pending_ == 0) {
    throw std::invalid_argument("ResidualTrainer: gradient count " +
                                std::to_string(g_res.size()) +
                                " does not match the last batch");
  }
  const double inv_b = 1.0 / static_cast<double>(pending_);
  Batch g;
  for (const auto& row : g_res) {
    std::vector<double> scaled = row;
    for (double& v : scaled) v *= inv_b;
    g.push_back(LogitTensor(scaled));
  }
  res_->ZeroGrad();
  res_->Backward(g, false);
  sgd_.Step(CosineLr(lr0_, step_++, steps_total_));
  pending_ = 0;
}

std::vector<double> ResidualTrainer::Infer(const Tensor3& input) {
  return res_->Infer(input).values();
}

DirectFloatPeer::DirectFloatPeer(Network& res,
                                 std::map<std::size_t, Tensor3> inputs,
                                 const TrainConfig& cfg,
                                 std::size_t steps_total)
    : inputs_(std::move(inputs)), trainer_(res, cfg, steps_total) {}

std::vector<std::vector<double>> DirectFloatPeer::Forward(
    std::span<const std::size_t> ids, std::uint32_t) {
  Batch x;
  for (std::size_t id : ids) x.push_back(inputs_.at(id));
  return trainer_.Forward(x);
}

void DirectFloatPeer::Backward(const std::vector<std::vector<double>>& g_res,
                               std::uint32_t) {
  trainer_.Backward(g_res);
}

std::vector<double> DirectFloatPeer::Infer(const Tensor3& residual,
                                           const ResidualRelease& release) {
  const double sigma = release.perturb ? release.params.sigma : 0.0;
  return trainer_.Infer(
      Perturb(residual, sigma, release.seed, release.stream));
}

std::map<std::size_t, Tensor3> ReleaseFloatResiduals(
    const ModelSpec& spec, Network& bb, const Dataset& data,
    std::span<const std::size_t> ids, const PrivacyParams& params,
    std::uint64_t seed) {
  std::map<std::size_t, Tensor3> out;
  for (std::size_t id : ids) {
    const Tensor3 r = ExtractFeatures(spec, bb, data.images[id]).residual;
    out[id] = Perturb(r, params.sigma, seed, kTrainNoiseDomain + id);
  }
  return out;
}

}  // namespace delta
