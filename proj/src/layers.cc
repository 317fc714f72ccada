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

#include "delta/layers.h"

#include <cmath>
#include <stdexcept>

#include "delta/linalg.h"

namespace delta {
namespace {

void AddInto(std::vector<double>& acc, const std::vector<double>& v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

ParamView View(std::vector<double>& value, std::vector<double>& grad) {
  return {std::span<double>(value), std::span<double>(grad)};
}

void RequireChannels(const Batch& in, std::size_t c, const char* who) {
  for (const Tensor3& t : in) {
    if (t.channels() != c) {
      throw std::invalid_argument(std::string(who) + ": input " +
                                  t.ShapeString() + " expects " +
                                  std::to_string(c) + " channels");
    }
  }
}

Shape ConvOut(Shape in, std::size_t n, std::size_t k, ConvGeometry geo) {
  return {n, geo.OutExtent(in.h, k), geo.OutExtent(in.w, k)};
}

std::string GeoString(ConvGeometry geo) {
  return "s" + std::to_string(geo.stride) + "p" + std::to_string(geo.padding);
}

}  // namespace

std::string Shape::ToString() const {
  return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

Shape ShapeOf(const Tensor3& t) {
  return {t.channels(), t.height(), t.width()};
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(Kernel weights, ConvGeometry geo)
    : weights_(std::move(weights)),
      grad_(weights_.out_channels(), weights_.in_channels(), weights_.size()),
      geo_(geo) {}

Conv2d Conv2d::Random(std::size_t n, std::size_t c, std::size_t k,
                      ConvGeometry geo, double gain, RandomStream& rng) {
  Kernel w(n, c, k);
  const double std = gain / std::sqrt(static_cast<double>(c * k * k));
  for (double& v : w.values()) v = std * rng.Normal();
  return Conv2d(std::move(w), geo);
}

Batch Conv2d::Forward(const Batch& in, bool training) {
  RequireChannels(in, weights_.in_channels(), "Conv2d");
  Batch out;
  out.reserve(in.size());
  if (training) cols_.assign(in.size(), Matrix());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (training) {
      out.push_back(Conv2dForward(in[i], weights_, geo_, cols_[i]));
    } else {
      out.push_back(Conv2dForward(in[i], weights_, geo_));
    }
  }
  if (!in.empty()) in_shape_ = ShapeOf(in[0]);
  return out;
}

Batch Conv2d::Backward(const Batch& grad_out, bool need_input_grad) {
  if (grad_out.size() != cols_.size()) {
    throw std::logic_error("Conv2d::Backward without matching Forward");
  }
  Batch grad_in;
  if (need_input_grad) grad_in.reserve(grad_out.size());
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    ConvGrads g = Conv2dBackwardLowered(grad_out[i], cols_[i], in_shape_.c,
                                        in_shape_.h, in_shape_.w, weights_,
                                        geo_, need_input_grad);
    AddInto(grad_.values(), g.weights.values());
    if (need_input_grad) grad_in.push_back(std::move(g.input));
  }
  return grad_in;
}

void Conv2d::CollectParams(std::vector<ParamView>& out) {
  out.push_back(View(weights_.values(), grad_.values()));
}

Shape Conv2d::OutputShape(Shape in) const {
  return ConvOut(in, weights_.out_channels(), weights_.size(), geo_);
}

std::size_t Conv2d::Macs(Shape in) const {
  const Shape o = OutputShape(in);
  return ConvMacs(weights_, o.h, o.w);
}

std::unique_ptr<Module> Conv2d::Clone() const {
  return std::make_unique<Conv2d>(*this);
}

std::string Conv2d::Describe() const {
  return "conv" + std::to_string(weights_.size()) + "x" +
         std::to_string(weights_.size()) + "(" +
         std::to_string(weights_.in_channels()) + "->" +
         std::to_string(weights_.out_channels()) + "," + GeoString(geo_) +
         ")";
}

// ----------------------------------------------------------- LowRankConv

LowRankConv::LowRankConv(Kernel w1, Kernel w2, ConvGeometry geo)
    : w1_(std::move(w1)),
      w2_(std::move(w2)),
      grad_w1_(w1_.out_channels(), w1_.in_channels(), w1_.size()),
      grad_w2_(w2_.out_channels(), w2_.in_channels(), w2_.size()),
      geo_(geo) {
  if (w2_.size() != 1 || w2_.in_channels() != w1_.out_channels()) {
    throw std::invalid_argument(
        "LowRankConv: second factor must be n x q x 1 x 1");
  }
}

LowRankConv LowRankConv::Random(std::size_t n, std::size_t c, std::size_t k,
                                std::size_t q, ConvGeometry geo,
                                RandomStream& rng) {
  if (q == 0 || q > n) {
    throw std::invalid_argument("LowRankConv: need 0 < q <= n");
  }
  Kernel w1(q, c, k);
  Kernel w2(n, q, 1);
  // Unit-variance first factor; the product then has He scaling.
  const double s1 = 1.0 / std::sqrt(static_cast<double>(c * k * k));
  const double s2 = std::sqrt(2.0 / static_cast<double>(q));
  for (double& v : w1.values()) v = s1 * rng.Normal();
  for (double& v : w2.values()) v = s2 * rng.Normal();
  return LowRankConv(std::move(w1), std::move(w2), geo);
}

Batch LowRankConv::Forward(const Batch& in, bool training) {
  RequireChannels(in, w1_.in_channels(), "LowRankConv");
  Batch mid;
  mid.reserve(in.size());
  if (training) cols_.assign(in.size(), Matrix());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (training) {
      mid.push_back(Conv2dForward(in[i], w1_, geo_, cols_[i]));
    } else {
      mid.push_back(Conv2dForward(in[i], w1_, geo_));
    }
  }
  Batch out;
  out.reserve(in.size());
  for (const Tensor3& m : mid) out.push_back(Conv2dForward(m, w2_, {}));
  if (training) mid_ = std::move(mid);
  if (!in.empty()) in_shape_ = ShapeOf(in[0]);
  return out;
}

Batch LowRankConv::Backward(const Batch& grad_out, bool need_input_grad) {
  if (grad_out.size() != cols_.size()) {
    throw std::logic_error("LowRankConv::Backward without matching Forward");
  }
  Batch grad_in;
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    ConvGrads g2 = Conv2dBackward(grad_out[i], mid_[i], w2_, {});
    AddInto(grad_w2_.values(), g2.weights.values());
    ConvGrads g1 =
        Conv2dBackwardLowered(g2.input, cols_[i], in_shape_.c, in_shape_.h,
                              in_shape_.w, w1_, geo_, need_input_grad);
    AddInto(grad_w1_.values(), g1.weights.values());
    if (need_input_grad) grad_in.push_back(std::move(g1.input));
  }
  return grad_in;
}

void LowRankConv::CollectParams(std::vector<ParamView>& out) {
  out.push_back(View(w1_.values(), grad_w1_.values()));
  out.push_back(View(w2_.values(), grad_w2_.values()));
}

double LowRankConv::AddOrthReg(double coef) {
  OrthRegResult r = OrthReg(w1_);
  for (std::size_t i = 0; i < grad_w1_.count(); ++i) {
    grad_w1_.values()[i] += coef * r.grad.values()[i];
  }
  return r.loss;
}

Shape LowRankConv::OutputShape(Shape in) const {
  return ConvOut(in, w2_.out_channels(), w1_.size(), geo_);
}

std::size_t LowRankConv::Macs(Shape in) const {
  const Shape o = OutputShape(in);
  return ConvMacs(w1_, o.h, o.w) + ConvMacs(w2_, o.h, o.w);
}

std::unique_ptr<Module> LowRankConv::Clone() const {
  return std::make_unique<LowRankConv>(*this);
}

std::string LowRankConv::Describe() const {
  return "lowrank" + std::to_string(w1_.size()) + "x" +
         std::to_string(w1_.size()) + "(" + std::to_string(w1_.in_channels()) +
         "->q" + std::to_string(w1_.out_channels()) + "->" +
         std::to_string(w2_.out_channels()) + "," + GeoString(geo_) + ")";
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels, double momentum, double eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(channels, 1.0),
      beta_(channels, 0.0),
      grad_gamma_(channels, 0.0),
      grad_beta_(channels, 0.0),
      running_mean_(channels, 0.0),
      running_var_(channels, 1.0) {}

Batch BatchNorm::Forward(const Batch& in, bool training) {
  RequireChannels(in, channels_, "BatchNorm");
  Batch out = in;
  if (in.empty()) return out;
  const std::size_t plane = in[0].plane();
  const double m = static_cast<double>(in.size() * plane);
  if (training) {
    xhat_.assign(in.size(), Tensor3());
    inv_std_.assign(channels_, 0.0);
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0;
      for (const Tensor3& x : in) {
        for (double v : x.channel(c)) sum += v;
      }
      mean = sum / m;
      double sq = 0.0;
      for (const Tensor3& x : in) {
        for (double v : x.channel(c)) sq += (v - mean) * (v - mean);
      }
      var = sq / m;
      const double unbiased = m > 1.0 ? sq / (m - 1.0) : var;
      running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] =
          (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    if (training) inv_std_[c] = inv;
    for (Tensor3& y : out) {
      for (double& v : y.channel(c)) v = (v - mean) * inv;
    }
  }
  if (training) xhat_ = out;
  for (Tensor3& y : out) {
    for (std::size_t c = 0; c < channels_; ++c) {
      for (double& v : y.channel(c)) v = gamma_[c] * v + beta_[c];
    }
  }
  return out;
}

Batch BatchNorm::Backward(const Batch& grad_out, bool need_input_grad) {
  if (grad_out.size() != xhat_.size()) {
    throw std::logic_error("BatchNorm::Backward without matching Forward");
  }
  Batch grad_in = grad_out;
  if (grad_out.empty()) return grad_in;
  const double m = static_cast<double>(grad_out.size() * grad_out[0].plane());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
      const auto dy = grad_out[i].channel(c);
      const auto xh = xhat_[i].channel(c);
      for (std::size_t j = 0; j < dy.size(); ++j) {
        sum_dy += dy[j];
        sum_dy_xhat += dy[j] * xh[j];
      }
    }
    grad_gamma_[c] += sum_dy_xhat;
    grad_beta_[c] += sum_dy;
    if (!need_input_grad) continue;
    const double scale = gamma_[c] * inv_std_[c] / m;
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
      const auto xh = xhat_[i].channel(c);
      auto dx = grad_in[i].channel(c);
      for (std::size_t j = 0; j < dx.size(); ++j) {
        dx[j] = scale * (m * dx[j] - sum_dy - xh[j] * sum_dy_xhat);
      }
    }
  }
  if (!need_input_grad) grad_in.clear();
  return grad_in;
}

void BatchNorm::CollectParams(std::vector<ParamView>& out) {
  out.push_back(View(gamma_, grad_gamma_));
  out.push_back(View(beta_, grad_beta_));
}

void BatchNorm::CollectState(std::vector<std::span<double>>& out) {
  out.emplace_back(running_mean_);
  out.emplace_back(running_var_);
}

std::unique_ptr<Module> BatchNorm::Clone() const {
  return std::make_unique<BatchNorm>(*this);
}

std::string BatchNorm::Describe() const {
  return "bn(" + std::to_string(channels_) + ")";
}

// ------------------------------------------------------------------ Relu

Batch Relu::Forward(const Batch& in, bool training) {
  Batch out = in;
  for (Tensor3& t : out) {
    for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
  }
  if (training) output_ = out;
  return out;
}

Batch Relu::Backward(const Batch& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  if (grad_out.size() != output_.size()) {
    throw std::logic_error("Relu::Backward without matching Forward");
  }
  Batch grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i) {
    auto& g = grad_in[i].values();
    const auto& y = output_[i].values();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!(y[j] > 0.0)) g[j] = 0.0;
    }
  }
  return grad_in;
}

std::unique_ptr<Module> Relu::Clone() const {
  return std::make_unique<Relu>(*this);
}

// -------------------------------------------------------------- ResBlock

ResBlock::ResBlock(std::unique_ptr<Module> conv_a,
                   std::unique_ptr<Module> conv_b,
                   std::unique_ptr<Module> shortcut, bool batch_norm,
                   std::size_t out_channels)
    : conv_a_(std::move(conv_a)),
      relu_a_(std::make_unique<Relu>()),
      conv_b_(std::move(conv_b)),
      shortcut_(std::move(shortcut)) {
  if (batch_norm) {
    bn_a_ = std::make_unique<BatchNorm>(out_channels);
    bn_b_ = std::make_unique<BatchNorm>(out_channels);
    if (shortcut_) bn_s_ = std::make_unique<BatchNorm>(out_channels);
  }
}

ResBlock::ResBlock(const ResBlock& other) : sum_(other.sum_) {
  auto copy = [](const std::unique_ptr<Module>& m) {
    return m ? m->Clone() : nullptr;
  };
  conv_a_ = copy(other.conv_a_);
  bn_a_ = copy(other.bn_a_);
  relu_a_ = copy(other.relu_a_);
  conv_b_ = copy(other.conv_b_);
  bn_b_ = copy(other.bn_b_);
  shortcut_ = copy(other.shortcut_);
  bn_s_ = copy(other.bn_s_);
}

std::vector<Module*> ResBlock::MainPath() {
  std::vector<Module*> path;
  for (Module* m : {conv_a_.get(), bn_a_.get(), relu_a_.get(), conv_b_.get(),
                    bn_b_.get()}) {
    if (m) path.push_back(m);
  }
  return path;
}

Batch ResBlock::Forward(const Batch& in, bool training) {
  Batch y = in;
  for (Module* m : MainPath()) y = m->Forward(y, training);
  Batch s = in;
  if (shortcut_) {
    s = shortcut_->Forward(in, training);
    if (bn_s_) s = bn_s_->Forward(s, training);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!y[i].SameShape(s[i])) {
      throw std::invalid_argument("ResBlock: branch shapes " +
                                  y[i].ShapeString() + " and " +
                                  s[i].ShapeString() + " differ");
    }
    auto& a = y[i].values();
    const auto& b = s[i].values();
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  }
  if (training) sum_ = y;
  for (Tensor3& t : y) {
    for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
  }
  return y;
}

Batch ResBlock::Backward(const Batch& grad_out, bool need_input_grad) {
  if (grad_out.size() != sum_.size()) {
    throw std::logic_error("ResBlock::Backward without matching Forward");
  }
  Batch g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto& gv = g[i].values();
    const auto& sv = sum_[i].values();
    for (std::size_t j = 0; j < gv.size(); ++j) {
      if (!(sv[j] > 0.0)) gv[j] = 0.0;
    }
  }
  std::vector<Module*> path = MainPath();
  Batch gm = g;
  for (std::size_t k = path.size(); k-- > 0;) {
    gm = path[k]->Backward(gm, k > 0 || need_input_grad);
  }
  Batch gs = g;
  if (shortcut_) {
    if (bn_s_) gs = bn_s_->Backward(gs, true);
    gs = shortcut_->Backward(gs, need_input_grad);
  }
  if (!need_input_grad) return {};
  for (std::size_t i = 0; i < gm.size(); ++i) {
    auto& a = gm[i].values();
    const auto& b = gs[i].values();
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  }
  return gm;
}

void ResBlock::CollectParams(std::vector<ParamView>& out) {
  for (Module* m : MainPath()) m->CollectParams(out);
  if (shortcut_) shortcut_->CollectParams(out);
  if (bn_s_) bn_s_->CollectParams(out);
}

void ResBlock::CollectState(std::vector<std::span<double>>& out) {
  for (Module* m : MainPath()) m->CollectState(out);
  if (bn_s_) bn_s_->CollectState(out);
}

double ResBlock::AddOrthReg(double coef) {
  return conv_a_->AddOrthReg(coef) + conv_b_->AddOrthReg(coef);
}

Shape ResBlock::OutputShape(Shape in) const {
  return conv_b_->OutputShape(conv_a_->OutputShape(in));
}

std::size_t ResBlock::Macs(Shape in) const {
  const Shape mid = conv_a_->OutputShape(in);
  std::size_t macs = conv_a_->Macs(in) + conv_b_->Macs(mid);
  if (shortcut_) macs += shortcut_->Macs(in);
  return macs;
}

std::unique_ptr<Module> ResBlock::Clone() const {
  return std::make_unique<ResBlock>(*this);
}

std::string ResBlock::Describe() const {
  std::string s = "resblock[" + conv_a_->Describe() + "," +
                  conv_b_->Describe();
  if (shortcut_) s += ",short:" + shortcut_->Describe();
  if (bn_a_) s += ",bn";
  return s + "]";
}

// ------------------------------------------------------------ PoolLinear

PoolLinear::PoolLinear(std::size_t in_channels, std::size_t classes,
                       RandomStream& rng)
    : in_(in_channels),
      classes_(classes),
      weights_(classes * in_channels),
      bias_(classes, 0.0),
      grad_weights_(classes * in_channels, 0.0),
      grad_bias_(classes, 0.0) {
  const double std = 1.0 / std::sqrt(static_cast<double>(in_channels));
  for (double& v : weights_) v = std * rng.Normal();
}

Batch PoolLinear::Forward(const Batch& in, bool training) {
  RequireChannels(in, in_, "PoolLinear");
  Batch out;
  out.reserve(in.size());
  if (training) pooled_.assign(in.size(), {});
  for (std::size_t i = 0; i < in.size(); ++i) {
    std::vector<double> pooled(in_);
    const double inv = 1.0 / static_cast<double>(in[i].plane());
    for (std::size_t c = 0; c < in_; ++c) {
      double s = 0.0;
      for (double v : in[i].channel(c)) s += v;
      pooled[c] = s * inv;
    }
    Tensor3 z(classes_, 1, 1);
    for (std::size_t l = 0; l < classes_; ++l) {
      double s = bias_[l];
      for (std::size_t c = 0; c < in_; ++c) {
        s += weights_[l * in_ + c] * pooled[c];
      }
      z[l] = s;
    }
    out.push_back(std::move(z));
    if (training) pooled_[i] = std::move(pooled);
  }
  if (!in.empty()) input_shape_ = ShapeOf(in[0]);
  return out;
}

Batch PoolLinear::Backward(const Batch& grad_out, bool need_input_grad) {
  if (grad_out.size() != pooled_.size()) {
    throw std::logic_error("PoolLinear::Backward without matching Forward");
  }
  Batch grad_in;
  const double inv = 1.0 / static_cast<double>(input_shape_.h * input_shape_.w);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const Tensor3& g = grad_out[i];
    for (std::size_t l = 0; l < classes_; ++l) {
      grad_bias_[l] += g[l];
      for (std::size_t c = 0; c < in_; ++c) {
        grad_weights_[l * in_ + c] += g[l] * pooled_[i][c];
      }
    }
    if (!need_input_grad) continue;
    Tensor3 gi(in_, input_shape_.h, input_shape_.w);
    for (std::size_t c = 0; c < in_; ++c) {
      double s = 0.0;
      for (std::size_t l = 0; l < classes_; ++l) {
        s += weights_[l * in_ + c] * g[l];
      }
      for (double& v : gi.channel(c)) v = s * inv;
    }
    grad_in.push_back(std::move(gi));
  }
  return grad_in;
}

void PoolLinear::CollectParams(std::vector<ParamView>& out) {
  out.push_back(View(weights_, grad_weights_));
  out.push_back(View(bias_, grad_bias_));
}

Shape PoolLinear::OutputShape(Shape in) const {
  if (in.c != in_) {
    throw std::invalid_argument("PoolLinear: channel mismatch");
  }
  return {classes_, 1, 1};
}

std::size_t PoolLinear::Macs(Shape in) const {
  (void)in;
  return classes_ * in_;
}

std::unique_ptr<Module> PoolLinear::Clone() const {
  return std::make_unique<PoolLinear>(*this);
}

std::string PoolLinear::Describe() const {
  return "pool+linear(" + std::to_string(in_) + "->" +
         std::to_string(classes_) + ")";
}

// --------------------------------------------------------------- OrthReg

OrthRegResult OrthReg(const Kernel& w1) {
  const Matrix g = w1.AsMatrix();
  Matrix d = MatMulTransB(g, g);
  for (std::size_t i = 0; i < d.rows(); ++i) d(i, i) -= 1.0;
  OrthRegResult r;
  for (double v : d.values()) r.loss += v * v;
  Matrix grad = MatMul(d, g);
  for (double& v : grad.values()) v *= 4.0;
  r.grad = Kernel::FromMatrix(grad, w1.in_channels(), w1.size());
  return r;
}

}  // namespace delta
