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

#ifndef DELTA_DECOMPOSE_H_
#define DELTA_DECOMPOSE_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "delta/dct.h"
#include "delta/linalg.h"
#include "delta/tensor.h"

namespace delta {

struct DecompositionConfig {
  std::size_t r = 2;        // principal channels kept
  std::size_t t = 8;        // DCT source block size
  std::size_t t_prime = 2;  // DCT kept block size
  double clip = 1.0;        // l2 clipping scale C

  // Throws std::invalid_argument unless 1 <= r <= c, 1 <= t' <= t,
  // t | h, t | w and C > 0.
  void Validate(std::size_t c, std::size_t h, std::size_t w) const;
  std::size_t MainExtent(std::size_t extent) const {
    return extent / t * t_prime;
  }
};

struct DecompositionOutput {
  Tensor3 ir_main;     // c x (h/t)t' x (w/t)t', rank <= r
  Tensor3 ir_res_raw;  // c x h x w, X_svd_res + X_dct_res
  Tensor3 ir_res;      // ir_res_raw scaled into the l2 ball of radius C
  SvdFactors factors;  // of the flattened c x hw input
  std::vector<Matrix> dct_coeffs;  // h x w block coefficients per principal
                                   // channel, r entries
};

// Splits X into the low-rank low-frequency main part and the full-resolution
// residual. The residual is built from its two pieces (discarded singular
// directions plus discarded frequencies of the kept ones) rather than by
// subtracting tensors of different sizes.
DecompositionOutput Decompose(const Tensor3& x, const DecompositionConfig& cfg);

// x / max(1, ||x||_F / clip).
Tensor3 NormalizeResidual(const Tensor3& raw, double clip);

// Fused main-path projection used during training: ir_main = LF(U_r U_r^T X),
// with LF the per-channel block lowpass. Backward treats the singular
// subspace U_r as a constant.
class MainProjector {
 public:
  explicit MainProjector(const DecompositionConfig& cfg);

  // Returns ir_main; stores the c x r basis in `basis`.
  Tensor3 Forward(const Tensor3& x, Matrix& basis) const;
  Tensor3 Backward(const Tensor3& grad_main, const Matrix& basis,
                   std::size_t height, std::size_t width) const;

  const DecompositionConfig& config() const { return cfg_; }

 private:
  DecompositionConfig cfg_;
  BlockLowpass lowpass_;
};

struct SpectrumRow {
  std::string kind;  // "svd" or "dct"
  std::size_t param;
  double rel_error;
};

// ||X - X_lr|| / ||X|| for each r, and ||X - X_lf|| / ||X|| for each t',
// where X_lf zero-pads the kept coefficients of every channel and inverts at
// full resolution.
std::vector<SpectrumRow> Spectrum(const Tensor3& x,
                                  std::span<const std::size_t> r_grid,
                                  std::size_t t,
                                  std::span<const std::size_t> tprime_grid);

// Mean of per-sample spectra (all samples must share a shape).
std::vector<SpectrumRow> MeanSpectrum(std::span<const Tensor3> samples,
                                      std::span<const std::size_t> r_grid,
                                      std::size_t t,
                                      std::span<const std::size_t> tprime_grid);

// CSV with header `kind,param,rel_error`.
std::string SpectrumCsv(std::span<const SpectrumRow> rows);

}  // namespace delta

#endif  // DELTA_DECOMPOSE_H_
