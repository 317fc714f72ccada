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

#ifndef DELTA_TRAINING_H_
#define DELTA_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "delta/dataset.h"
#include "delta/model.h"
#include "delta/privacy.h"

namespace delta {

struct TrainConfig {
  std::size_t ep1 = 15;
  std::size_t ep2 = 15;
  std::size_t batch_size = 64;
  double lr = 0.1;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  double orth_reg = 8e-4;
  double epsilon = std::numeric_limits<double>::infinity();
  double delta = 1e-6;
  // Negative: derive sigma from (epsilon, delta, p); otherwise use as is.
  double sigma = -1.0;
  bool perturb_inference = true;
  std::uint64_t seed = 1;

  void Validate() const;
  // Sampling probability p = b / N for N training samples.
  double SamplingRate(std::size_t n_train) const;
  PrivacyParams Privacy(std::size_t n_train, double clip) const;
};

// --- Loss and gradients ----------------------------------------------------

std::vector<double> Softmax(std::span<const double> z);
// -log softmax(z)[label], computed with log-sum-exp.
double CrossEntropy(std::span<const double> z, std::size_t label);
std::vector<double> OneHot(std::size_t label, std::size_t classes);

struct PrivateGrads {
  std::vector<double> g_main;  // softmax(z_main + alpha z_res) - y
  std::vector<double> g_res;   // softmax(z_res) - y; never reads z_main
};
PrivateGrads PrivateBackprop(std::span<const double> z_main,
                             std::span<const double> z_res,
                             std::span<const double> y, double alpha);

// --- Optimizer -------------------------------------------------------------

// lr0 * (1 + cos(pi * step / total)) / 2.
double CosineLr(double lr0, std::size_t step, std::size_t total);

// v <- momentum v + (g + wd w); w <- w - lr v. Throws DivergenceError on a
// non-finite gradient.
void SgdStep(std::span<double> w, std::span<const double> g,
             std::span<double> v, double lr, double momentum, double wd);

// Momentum buffers for every parameter of one network.
class Sgd {
 public:
  Sgd(Network& net, double momentum, double weight_decay);
  void Step(double lr);

 private:
  Network* net_;
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

// Shuffled mini-batches of `ids` for one epoch; both environments derive the
// same schedule from (seed, epoch).
std::vector<std::vector<std::size_t>> EpochBatches(
    std::span<const std::size_t> ids, std::size_t batch_size,
    std::uint64_t seed, std::size_t epoch);

// --- Reporting -------------------------------------------------------------

struct EpochStats {
  std::string stage;  // "stage1" or "stage2"
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_main = 0.0;  // accuracy of argmax z_main
  double val_merged = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::string residual_mode;  // "bits", "float" or "none"
  std::vector<EpochStats> epochs;
  PrivacyParams privacy;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  MacReport macs;
  std::map<std::string, std::size_t> phase_bytes;
  double compression_ratio = 0.0;

  double FinalMain() const;
  double FinalMerged() const;
};

// --- Stages ----------------------------------------------------------------

// Trains M_bb and M_main on IR_main alone. The gradient reaches the backbone
// through the block lowpass and the projection onto the top-r left singular
// vectors, with the singular subspace held fixed.
void Stage1(const ModelSpec& spec, Models& models, const Dataset& data,
            const TrainConfig& cfg, TrainReport& report);

// Validation accuracy of the main head alone.
double EvaluateMain(const ModelSpec& spec, Models& models,
                    const Dataset& data, std::span<const std::size_t> ids);

// The public half of stage 2 as seen from the private side.
class ResidualPeer {
 public:
  virtual ~ResidualPeer() = default;
  // z_res for the cached residuals of `ids`; batch_index counts stage-2
  // batches from 0.
  virtual std::vector<std::vector<double>> Forward(
      std::span<const std::size_t> ids, std::uint32_t batch_index) = 0;
  // Per-sample g_res = softmax(z_res) - y for the last Forward.
  virtual void Backward(const std::vector<std::vector<double>>& g_res,
                        std::uint32_t batch_index) = 0;
  // z_res for a fresh residual released under `release`.
  virtual std::vector<double> Infer(const Tensor3& residual,
                                    const ResidualRelease& release) = 0;
};

// Trains M_main (on merged logits) against `peer`; peer == nullptr trains
// M_main alone on z_main. M_bb is only read.
void Stage2(const ModelSpec& spec, Models& models, const Dataset& data,
            const TrainConfig& cfg, ResidualPeer* peer, TrainReport& report);

// Public-side trainer for M_res over in-memory inputs. Used directly for the
// unquantized ablation and by the public protocol endpoint.
class ResidualTrainer {
 public:
  ResidualTrainer(Network& res, const TrainConfig& cfg,
                  std::size_t steps_total);

  std::vector<std::vector<double>> Forward(const Batch& inputs);
  void Backward(const std::vector<std::vector<double>>& g_res);
  std::vector<double> Infer(const Tensor3& input);
  std::size_t step() const { return step_; }

 private:
  Network* res_;
  Sgd sgd_;
  double lr0_;
  std::size_t steps_total_;
  std::size_t step_ = 0;
  std::size_t pending_ = 0;
};

// In-process peer over float residuals: perturbed (per the release) but not
// quantized. This is the unquantized ablation; it never uses the protocol.
class DirectFloatPeer : public ResidualPeer {
 public:
  DirectFloatPeer(Network& res, std::map<std::size_t, Tensor3> inputs,
                  const TrainConfig& cfg, std::size_t steps_total);

  std::vector<std::vector<double>> Forward(std::span<const std::size_t> ids,
                                           std::uint32_t batch_index) override;
  void Backward(const std::vector<std::vector<double>>& g_res,
                std::uint32_t batch_index) override;
  std::vector<double> Infer(const Tensor3& residual,
                            const ResidualRelease& release) override;

 private:
  std::map<std::size_t, Tensor3> inputs_;
  ResidualTrainer trainer_;
};

// Perturbed (not quantized) float residuals of `ids`, noise stream
// kTrainNoiseDomain + id, for the unquantized ablation.
std::map<std::size_t, Tensor3> ReleaseFloatResiduals(
    const ModelSpec& spec, Network& bb, const Dataset& data,
    std::span<const std::size_t> ids, const PrivacyParams& params,
    std::uint64_t seed);

// Number of optimizer steps in `epochs` passes over n samples.
std::size_t StepsFor(std::size_t n, std::size_t batch_size,
                     std::size_t epochs);

}  // namespace delta

#endif  // DELTA_TRAINING_H_
