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

#ifndef DELTA_LAYERS_H_
#define DELTA_LAYERS_H_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "delta/conv.h"
#include "delta/rng.h"
#include "delta/tensor.h"

namespace delta {

using Batch = std::vector<Tensor3>;

struct Shape {
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return c * h * w; }
  std::string ToString() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

Shape ShapeOf(const Tensor3& t);

// A trainable tensor and its gradient accumulator.
struct ParamView {
  std::span<double> value;
  std::span<double> grad;
};

// One stage of a network acting on a batch. Backward must follow the
// matching Forward; parameter gradients accumulate until ZeroGrad.
class Module {
 public:
  virtual ~Module() = default;

  virtual Batch Forward(const Batch& in, bool training) = 0;
  virtual Batch Backward(const Batch& grad_out, bool need_input_grad) = 0;

  virtual void CollectParams(std::vector<ParamView>& out) { (void)out; }
  // Non-trainable buffers that belong in checkpoints (running statistics).
  virtual void CollectState(std::vector<std::span<double>>& out) { (void)out; }
  // Adds coef * sum over low-rank sublayers of ||G G^T - I||_F^2 to the
  // gradients and returns the unscaled penalty.
  virtual double AddOrthReg(double coef) {
    (void)coef;
    return 0.0;
  }

  virtual Shape OutputShape(Shape in) const = 0;
  virtual std::size_t Macs(Shape in) const = 0;
  virtual std::unique_ptr<Module> Clone() const = 0;
  virtual std::string Describe() const = 0;
};

// Dense k x k convolution without bias.
class Conv2d : public Module {
 public:
  Conv2d(Kernel weights, ConvGeometry geo);
  // He-normal initialization with the given gain (sqrt(2) before a ReLU).
  static Conv2d Random(std::size_t n, std::size_t c, std::size_t k,
                       ConvGeometry geo, double gain, RandomStream& rng);

  Batch Forward(const Batch& in, bool training) override;
  Batch Backward(const Batch& grad_out, bool need_input_grad) override;
  void CollectParams(std::vector<ParamView>& out) override;
  Shape OutputShape(Shape in) const override;
  std::size_t Macs(Shape in) const override;
  std::unique_ptr<Module> Clone() const override;
  std::string Describe() const override;

  const Kernel& weights() const { return weights_; }
  Kernel& weights() { return weights_; }
  const Kernel& grad() const { return grad_; }

 private:
  Kernel weights_;
  Kernel grad_;
  ConvGeometry geo_;
  std::vector<Matrix> cols_;  // lowered inputs cached by Forward
  Shape in_shape_;
};

// k x k convolution to q channels followed by a 1 x 1 convolution to n
// channels. Costs q*c*k^2 + n*q MACs per output position instead of n*c*k^2.
class LowRankConv : public Module {
 public:
  LowRankConv(Kernel w1, Kernel w2, ConvGeometry geo);
  static LowRankConv Random(std::size_t n, std::size_t c, std::size_t k,
                            std::size_t q, ConvGeometry geo,
                            RandomStream& rng);

  Batch Forward(const Batch& in, bool training) override;
  Batch Backward(const Batch& grad_out, bool need_input_grad) override;
  void CollectParams(std::vector<ParamView>& out) override;
  double AddOrthReg(double coef) override;
  Shape OutputShape(Shape in) const override;
  std::size_t Macs(Shape in) const override;
  std::unique_ptr<Module> Clone() const override;
  std::string Describe() const override;

  const Kernel& w1() const { return w1_; }
  const Kernel& w2() const { return w2_; }
  const Kernel& grad_w1() const { return grad_w1_; }
  const Kernel& grad_w2() const { return grad_w2_; }
  Kernel& w1() { return w1_; }
  Kernel& w2() { return w2_; }

 private:
  Kernel w1_;
  Kernel w2_;
  Kernel grad_w1_;
  Kernel grad_w2_;
  ConvGeometry geo_;
  std::vector<Matrix> cols_;
  Shape in_shape_;
  Batch mid_;
};

// Per-channel normalization over batch and spatial positions, with running
// statistics for evaluation.
class BatchNorm : public Module {
 public:
  explicit BatchNorm(std::size_t channels, double momentum = 0.1,
                     double eps = 1e-5);

  Batch Forward(const Batch& in, bool training) override;
  Batch Backward(const Batch& grad_out, bool need_input_grad) override;
  void CollectParams(std::vector<ParamView>& out) override;
  void CollectState(std::vector<std::span<double>>& out) override;
  Shape OutputShape(Shape in) const override { return in; }
  std::size_t Macs(Shape) const override { return 0; }
  std::unique_ptr<Module> Clone() const override;
  std::string Describe() const override;

  std::vector<double>& gamma() { return gamma_; }
  std::vector<double>& beta() { return beta_; }

 private:
  std::size_t channels_;
  double momentum_;
  double eps_;
  std::vector<double> gamma_, beta_, grad_gamma_, grad_beta_;
  std::vector<double> running_mean_, running_var_;
  Batch xhat_;
  std::vector<double> inv_std_;
};

class Relu : public Module {
 public:
  Batch Forward(const Batch& in, bool training) override;
  Batch Backward(const Batch& grad_out, bool need_input_grad) override;
  Shape OutputShape(Shape in) const override { return in; }
  std::size_t Macs(Shape) const override { return 0; }
  std::unique_ptr<Module> Clone() const override;
  std::string Describe() const override { return "relu"; }

 private:
  Batch output_;
};

// relu(bn(conv_b(relu(bn(conv_a(x))))) + shortcut(x)). The shortcut is a
// 1 x 1 strided convolution (plus normalization) when the shape changes and
// the identity otherwise. Normalization layers are omitted when disabled.
class ResBlock : public Module {
 public:
  ResBlock(std::unique_ptr<Module> conv_a, std::unique_ptr<Module> conv_b,
           std::unique_ptr<Module> shortcut, bool batch_norm,
           std::size_t out_channels);
  ResBlock(const ResBlock& other);

  Batch Forward(const Batch& in, bool training) override;
  Batch Backward(const Batch& grad_out, bool need_input_grad) override;
  void CollectParams(std::vector<ParamView>& out) override;
  void CollectState(std::vector<std::span<double>>& out) override;
  double AddOrthReg(double coef) override;
  Shape OutputShape(Shape in) const override;
  std::size_t Macs(Shape in) const override;
  std::unique_ptr<Module> Clone() const override;
  std::string Describe() const override;

 private:
  std::vector<Module*> MainPath();

  std::unique_ptr<Module> conv_a_, bn_a_, relu_a_, conv_b_, bn_b_;
  std::unique_ptr<Module> shortcut_, bn_s_;
  Batch sum_;  // pre-activation of the final relu
};

// Global average pooling followed by a linear classifier; emits logits as
// L x 1 x 1 tensors.
class PoolLinear : public Module {
 public:
  PoolLinear(std::size_t in_channels, std::size_t classes, RandomStream& rng);

  Batch Forward(const Batch& in, bool training) override;
  Batch Backward(const Batch& grad_out, bool need_input_grad) override;
  void CollectParams(std::vector<ParamView>& out) override;
  Shape OutputShape(Shape in) const override;
  std::size_t Macs(Shape in) const override;
  std::unique_ptr<Module> Clone() const override;
  std::string Describe() const override;

 private:
  std::size_t in_;
  std::size_t classes_;
  std::vector<double> weights_, bias_, grad_weights_, grad_bias_;
  std::vector<std::vector<double>> pooled_;
  Shape input_shape_;
};

// Orthogonality penalty ||G G^T - I||_F^2 of a kernel flattened to
// q x (c k^2), and its gradient 4 (G G^T - I) G.
struct OrthRegResult {
  double loss = 0.0;
  Kernel grad;
};
OrthRegResult OrthReg(const Kernel& w1);

}  // namespace delta

#endif  // DELTA_LAYERS_H_
