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

#include "delta/model.h"

#include <cmath>
#include <stdexcept>

#include "delta/byte_io.h"
#include "delta/errors.h"
#include "delta/linalg.h"
#include "delta/rng.h"

namespace delta {

// --------------------------------------------------------------- Network

Network::Network(const Network& other) {
  modules_.reserve(other.modules_.size());
  for (const auto& m : other.modules_) modules_.push_back(m->Clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    modules_ = std::move(copy.modules_);
  }
  return *this;
}

void Network::Add(std::unique_ptr<Module> module) {
  modules_.push_back(std::move(module));
}

Batch Network::Forward(const Batch& in, bool training) {
  Batch x = in;
  for (auto& m : modules_) x = m->Forward(x, training);
  return x;
}

Batch Network::Backward(const Batch& grad_out, bool need_input_grad) {
  Batch g = grad_out;
  for (std::size_t k = modules_.size(); k-- > 0;) {
    g = modules_[k]->Backward(g, k > 0 || need_input_grad);
  }
  return g;
}

Tensor3 Network::Infer(const Tensor3& x) {
  return Forward(Batch{x}, false).front();
}

std::vector<ParamView> Network::Params() {
  std::vector<ParamView> out;
  for (auto& m : modules_) m->CollectParams(out);
  return out;
}

std::vector<std::span<double>> Network::State() {
  std::vector<std::span<double>> out;
  for (auto& m : modules_) m->CollectState(out);
  return out;
}

std::size_t Network::ParamCount() {
  std::size_t n = 0;
  for (const ParamView& p : Params()) n += p.value.size();
  return n;
}

void Network::ZeroGrad() {
  for (ParamView& p : Params()) {
    for (double& g : p.grad) g = 0.0;
  }
}

std::vector<double> Network::Snapshot() {
  std::vector<double> out;
  for (const ParamView& p : Params()) {
    out.insert(out.end(), p.value.begin(), p.value.end());
  }
  for (std::span<double> s : State()) out.insert(out.end(), s.begin(), s.end());
  return out;
}

double Network::AddOrthReg(double coef) {
  double loss = 0.0;
  for (auto& m : modules_) loss += m->AddOrthReg(coef);
  return loss;
}

Shape Network::OutputShape(Shape in) const {
  for (const auto& m : modules_) in = m->OutputShape(in);
  return in;
}

std::size_t Network::Macs(Shape in) const {
  std::size_t macs = 0;
  for (const auto& m : modules_) {
    macs += m->Macs(in);
    in = m->OutputShape(in);
  }
  return macs;
}

std::string Network::Describe() const {
  std::string s;
  for (const auto& m : modules_) {
    if (!s.empty()) s += " ";
    s += m->Describe();
  }
  return s;
}

// ------------------------------------------------------------- ModelSpec

ModelSpec ModelSpec::Toy(Shape input, std::size_t num_classes,
                         const DecompositionConfig& decomposition,
                         double alpha, bool batch_norm) {
  ModelSpec spec;
  spec.input = input;
  spec.decomposition = decomposition;
  spec.num_classes = num_classes;
  spec.alpha = alpha;
  spec.batch_norm = batch_norm;
  const std::size_t r = decomposition.r;
  const std::size_t c = spec.backbone.channels;
  spec.main = {{c, 3, 2 * r, 1}, {2 * c, 3, 4 * r, 2}};
  spec.res = {{c, 3, 1}, {2 * c, 3, 2}};
  return spec;
}

Shape ModelSpec::IrShape() const {
  const ConvGeometry geo{backbone.stride, backbone.k / 2};
  return {backbone.channels, geo.OutExtent(input.h, backbone.k),
          geo.OutExtent(input.w, backbone.k)};
}

Shape ModelSpec::MainInputShape() const {
  const Shape ir = IrShape();
  return {ir.c, decomposition.MainExtent(ir.h), decomposition.MainExtent(ir.w)};
}

void ModelSpec::Validate() const {
  if (input.size() == 0) throw std::invalid_argument("spec: empty input");
  if (num_classes < 2) {
    throw std::invalid_argument("spec: need at least 2 classes");
  }
  if (backbone.channels == 0 || backbone.k == 0 || backbone.stride == 0) {
    throw std::invalid_argument("spec: bad backbone");
  }
  if (main.empty() || res.empty()) {
    throw std::invalid_argument("spec: main and res need at least one block");
  }
  const Shape ir = IrShape();
  decomposition.Validate(ir.c, ir.h, ir.w);
  for (const LowDimBlockSpec& b : main) {
    if (b.q == 0 || b.q > b.n || b.k == 0 || b.stride == 0) {
      throw std::invalid_argument("spec: low-dim block needs 0 < q <= n");
    }
  }
  for (const ResBlockSpec& b : res) {
    if (b.n == 0 || b.k == 0 || b.stride == 0) {
      throw std::invalid_argument("spec: bad residual block");
    }
  }
}

std::string ModelSpec::Canonical() const {
  auto u = [](std::size_t v) { return std::to_string(v); };
  std::string s = "in=" + input.ToString() + ";bb=" + u(backbone.channels) +
                  "k" + u(backbone.k) + "s" + u(backbone.stride) +
                  ";dec=r" + u(decomposition.r) + "t" + u(decomposition.t) +
                  "tp" + u(decomposition.t_prime) + ";main=";
  for (const LowDimBlockSpec& b : main) {
    s += "(" + u(b.n) + "," + u(b.k) + "," + u(b.q) + "," + u(b.stride) + ")";
  }
  s += ";res=";
  for (const ResBlockSpec& b : res) {
    s += "(" + u(b.n) + "," + u(b.k) + "," + u(b.stride) + ")";
  }
  s += ";L=" + u(num_classes) + ";bn=" + (batch_norm ? "1" : "0");
  return s;
}

std::uint64_t ModelSpec::Hash(const std::string& role) const {
  // FNV-1a, 64-bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : Canonical() + "/" + role) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------- Builder

namespace {

constexpr std::uint64_t kInitStreamBase = 0x1000;

std::unique_ptr<Module> Shortcut(std::size_t c, std::size_t n,
                                 std::size_t stride, RandomStream& rng) {
  if (c == n && stride == 1) return nullptr;
  return std::make_unique<Conv2d>(
      Conv2d::Random(n, c, 1, {stride, 0}, std::sqrt(2.0), rng));
}

}  // namespace

Models BuildModels(const ModelSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Models m;
  const double relu_gain = std::sqrt(2.0);

  RandomStream bb_rng(seed, kInitStreamBase + 0);
  const ConvGeometry bb_geo{spec.backbone.stride, spec.backbone.k / 2};
  // Linear feature extractor: no bias, no activation.
  m.bb.Add(std::make_unique<Conv2d>(
      Conv2d::Random(spec.backbone.channels, spec.input.c, spec.backbone.k,
                     bb_geo, 1.0, bb_rng)));

  RandomStream main_rng(seed, kInitStreamBase + 1);
  std::size_t c = spec.backbone.channels;
  for (const LowDimBlockSpec& b : spec.main) {
    auto a = std::make_unique<LowRankConv>(LowRankConv::Random(
        b.n, c, b.k, b.q, {b.stride, b.k / 2}, main_rng));
    auto second = std::make_unique<LowRankConv>(
        LowRankConv::Random(b.n, b.n, b.k, b.q, {1, b.k / 2}, main_rng));
    auto s = Shortcut(c, b.n, b.stride, main_rng);
    m.main.Add(std::make_unique<ResBlock>(std::move(a), std::move(second),
                                          std::move(s), spec.batch_norm, b.n));
    c = b.n;
  }
  m.main.Add(std::make_unique<PoolLinear>(c, spec.num_classes, main_rng));

  RandomStream res_rng(seed, kInitStreamBase + 2);
  c = spec.backbone.channels;
  for (const ResBlockSpec& b : spec.res) {
    auto a = std::make_unique<Conv2d>(Conv2d::Random(
        b.n, c, b.k, {b.stride, b.k / 2}, relu_gain, res_rng));
    auto second = std::make_unique<Conv2d>(
        Conv2d::Random(b.n, b.n, b.k, {1, b.k / 2}, relu_gain, res_rng));
    auto s = Shortcut(c, b.n, b.stride, res_rng);
    m.res.Add(std::make_unique<ResBlock>(std::move(a), std::move(second),
                                         std::move(s), spec.batch_norm, b.n));
    c = b.n;
  }
  m.res.Add(std::make_unique<PoolLinear>(c, spec.num_classes, res_rng));
  return m;
}

MacReport CountMacs(const ModelSpec& spec, const Models& models) {
  MacReport r;
  r.bb = models.bb.Macs(spec.input);
  r.main = models.main.Macs(spec.MainInputShape());
  r.res = models.res.Macs(spec.IrShape());
  return r;
}

// ------------------------------------------------------------ Checkpoint

namespace {

constexpr char kCheckpointMagic[] = "DLTP";

[[noreturn]] void CheckpointFail(const std::string& what, std::size_t offset) {
  throw DataError("checkpoint: " + what, offset);
}

}  // namespace

std::vector<std::uint8_t> EncodeCheckpoint(Network& net, std::uint64_t hash) {
  const std::vector<double> values = net.Snapshot();
  ByteWriter w;
  w.Bytes(kCheckpointMagic);
  w.U64(hash);
  w.U64(values.size());
  w.F64s(values);
  return w.Take();
}

void DecodeCheckpoint(std::span<const std::uint8_t> bytes, Network& net,
                      std::uint64_t hash) {
  ByteReader reader(bytes, CheckpointFail);
  reader.Expect(kCheckpointMagic, "DLTP");
  const std::size_t hash_at = reader.offset();
  if (reader.U64("spec hash") != hash) {
    CheckpointFail("spec hash does not match the configured model", hash_at);
  }
  const std::size_t count_at = reader.offset();
  const std::uint64_t count = reader.U64("value count");
  std::vector<ParamView> params = net.Params();
  std::vector<std::span<double>> state = net.State();
  std::size_t expected = 0;
  for (const ParamView& p : params) expected += p.value.size();
  for (std::span<double> s : state) expected += s.size();
  if (count != expected) {
    CheckpointFail("holds " + std::to_string(count) + " values, model has " +
                       std::to_string(expected),
                   count_at);
  }
  if (reader.remaining() < 8 * count) {
    CheckpointFail("truncated value array", reader.offset());
  }
  std::vector<double> values(count);
  for (double& v : values) {
    const std::size_t at = reader.offset();
    v = reader.F64("value");
    if (!std::isfinite(v)) CheckpointFail("non-finite value", at);
  }
  reader.ExpectEnd();
  std::size_t i = 0;
  for (ParamView& p : params) {
    for (double& v : p.value) v = values[i++];
  }
  for (std::span<double> s : state) {
    for (double& v : s) v = values[i++];
  }
}

// ------------------------------------------------------- Factorization

LowRankFactors FactorizeReference(const Kernel& w, const Matrix& basis,
                                  std::size_t q) {
  const std::size_t n = w.out_channels();
  const std::size_t d = w.fan_in();
  if (basis.rows() != d || basis.cols() == 0) {
    throw std::invalid_argument("FactorizeReference: basis must be (c k^2) x q");
  }
  if (q == 0) throw std::invalid_argument("FactorizeReference: q must be > 0");
  Matrix gram = MatMulTransA(basis, basis);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) -= 1.0;
  for (double v : gram.values()) {
    if (std::abs(v) > 1e-9) {
      throw std::invalid_argument(
          "FactorizeReference: basis columns are not orthonormal");
    }
  }
  const Matrix wu = MatMul(MatMul(w.AsMatrix(), basis), basis.Transposed());
  const SvdFactors f = Svd(wu);
  const double top = f.singular_values.empty() ? 0.0 : f.singular_values[0];
  std::size_t rank = 0;
  for (double s : f.singular_values) {
    if (s > 1e-10 * top && s > 0.0) ++rank;
  }
  if (rank > q) {
    throw std::invalid_argument("FactorizeReference: rank(W^U) = " +
                                std::to_string(rank) + " exceeds q = " +
                                std::to_string(q));
  }
  const std::size_t inner = std::min(q, n);
  Kernel w1(inner, w.in_channels(), w.size());
  Kernel w2(n, inner, 1);
  const std::size_t terms = std::min(inner, rank);
  for (std::size_t i = 0; i < terms; ++i) {
    for (std::size_t j = 0; j < d; ++j) w1.values()[i * d + j] = f.right(i, j);
    for (std::size_t o = 0; o < n; ++o) {
      w2.values()[o * inner + i] = f.singular_values[i] * f.left(o, i);
    }
  }
  return {std::move(w1), std::move(w2)};
}

// ---------------------------------------------------------------- Heads

std::vector<double> MergeLogits(std::span<const double> z_main,
                                std::span<const double> z_res, double alpha) {
  if (z_main.size() != z_res.size()) {
    throw std::invalid_argument("MergeLogits: length mismatch");
  }
  std::vector<double> out(z_main.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = z_main[i] + alpha * z_res[i];
  }
  return out;
}

std::size_t Argmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("Argmax: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

PrivateFeatures ExtractFeatures(const ModelSpec& spec, Network& bb,
                                const Tensor3& x) {
  const Tensor3 ir = bb.Infer(x);
  DecompositionOutput d = Decompose(ir, spec.decomposition);
  return {std::move(d.ir_main), std::move(d.ir_res)};
}

BitTensor ReleaseBits(const Tensor3& residual, const ResidualRelease& release) {
  PrivacyParams params = release.params;
  if (!release.perturb) params.sigma = 0.0;
  return ReleaseResidual(residual, params, release.seed, release.stream);
}

FullOutput ForwardFull(const ModelSpec& spec, Models& models,
                       const Tensor3& x, const ResidualRelease& release) {
  const PrivateFeatures f = ExtractFeatures(spec, models.bb, x);
  FullOutput out;
  out.bits = ReleaseBits(f.residual, release);
  out.z_main = models.main.Infer(f.ir_main).values();
  out.z_res = models.res.Infer(out.bits.ToFloats()).values();
  out.prediction = Argmax(MergeLogits(out.z_main, out.z_res, spec.alpha));
  return out;
}

}  // namespace delta
