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

#ifndef DELTA_MODEL_H_
#define DELTA_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "delta/decompose.h"
#include "delta/layers.h"
#include "delta/privacy.h"
#include "delta/tensor.h"

namespace delta {

// Ordered stack of modules. Copying deep-copies every module.
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void Add(std::unique_ptr<Module> module);
  std::size_t depth() const { return modules_.size(); }

  Batch Forward(const Batch& in, bool training);
  // need_input_grad = false skips the input gradient of the first module.
  Batch Backward(const Batch& grad_out, bool need_input_grad);
  Tensor3 Infer(const Tensor3& x);

  // Parameters in traversal order (module order, then declaration order).
  std::vector<ParamView> Params();
  std::vector<std::span<double>> State();
  std::size_t ParamCount();
  void ZeroGrad();
  // Parameters followed by state, flattened.
  std::vector<double> Snapshot();
  double AddOrthReg(double coef);

  Shape OutputShape(Shape in) const;
  std::size_t Macs(Shape in) const;
  std::string Describe() const;

 private:
  std::vector<std::unique_ptr<Module>> modules_;
};

struct BackboneSpec {
  std::size_t channels = 16;
  std::size_t k = 3;
  std::size_t stride = 2;
};

// Low-dimensional residual block: two (k x k to q, then 1 x 1 to n)
// factorized convolutions plus skip.
struct LowDimBlockSpec {
  std::size_t n;
  std::size_t k;
  std::size_t q;
  std::size_t stride;
};

struct ResBlockSpec {
  std::size_t n;
  std::size_t k;
  std::size_t stride;
};

struct ModelSpec {
  Shape input{3, 32, 32};
  BackboneSpec backbone;
  DecompositionConfig decomposition;
  std::vector<LowDimBlockSpec> main;
  std::vector<ResBlockSpec> res;
  std::size_t num_classes = 4;
  double alpha = 1.0;
  bool batch_norm = true;

  // The shipped desk-scale layout. Main blocks use q = 2r, doubling r (and
  // so q) at the downsampling block; the residual model is two standard
  // blocks.
  static ModelSpec Toy(Shape input, std::size_t num_classes,
                       const DecompositionConfig& decomposition,
                       double alpha = 1.0, bool batch_norm = true);

  // Throws std::invalid_argument on inconsistent shapes.
  void Validate() const;
  Shape IrShape() const;
  Shape MainInputShape() const;
  // Architecture string; alpha is excluded (it holds no parameters).
  std::string Canonical() const;
  std::uint64_t Hash(const std::string& role) const;
};

struct Models {
  Network bb;
  Network main;
  Network res;
};

Models BuildModels(const ModelSpec& spec, std::uint64_t seed);

struct MacReport {
  std::size_t bb = 0;
  std::size_t main = 0;
  std::size_t res = 0;
  double PrivateToPublic() const {
    return static_cast<double>(bb + main) / static_cast<double>(res);
  }
};
// Multiply-accumulates of convolutions and the classifier for one sample.
MacReport CountMacs(const ModelSpec& spec, const Models& models);

// Checkpoint: "DLTP", u64 spec hash, u64 value count, then that many f64
// (parameters then running statistics, in traversal order), little-endian.
std::vector<std::uint8_t> EncodeCheckpoint(Network& net, std::uint64_t hash);
// Throws DataError on a bad magic, hash mismatch, wrong count or truncation.
void DecodeCheckpoint(std::span<const std::uint8_t> bytes, Network& net,
                      std::uint64_t hash);

// Exact low-rank factorization for inputs whose lowered (Im2Col) columns lie
// in span(basis): W^U = W U U^T, split by SVD into an inner dimension of
// min(q, n). Rejects a basis without orthonormal columns and a W^U whose
// numerical rank exceeds q.
struct LowRankFactors {
  Kernel w1;  // inner x c x k x k
  Kernel w2;  // n x inner x 1 x 1
};
LowRankFactors FactorizeReference(const Kernel& w, const Matrix& basis,
                                  std::size_t q);

// z_main + alpha * z_res.
std::vector<double> MergeLogits(std::span<const double> z_main,
                                std::span<const double> z_res, double alpha);
// Index of the largest entry; ties go to the lowest index.
std::size_t Argmax(std::span<const double> v);

// How a residual leaves the private side: optional perturbation with the
// given noise stream, then quantization.
struct ResidualRelease {
  PrivacyParams params;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool perturb = true;
};

// Private-side features of one image.
struct PrivateFeatures {
  Tensor3 ir_main;
  Tensor3 residual;  // normalized, before perturbation
};
PrivateFeatures ExtractFeatures(const ModelSpec& spec, Network& bb,
                                const Tensor3& x);
BitTensor ReleaseBits(const Tensor3& residual, const ResidualRelease& release);

struct FullOutput {
  BitTensor bits;
  std::vector<double> z_main;
  std::vector<double> z_res;
  std::size_t prediction = 0;
};
// Monolithic evaluation of all three models in inference mode.
FullOutput ForwardFull(const ModelSpec& spec, Models& models,
                       const Tensor3& x, const ResidualRelease& release);

}  // namespace delta

#endif  // DELTA_MODEL_H_
