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

#ifndef DELTA_DCT_H_
#define DELTA_DCT_H_

#include <cstddef>
#include <span>

#include "delta/tensor.h"

namespace delta {

// Orthonormal DCT-II matrix: row 0 scaled by sqrt(1/t), others by sqrt(2/t),
// T(k, n) = s_k * cos(pi * (2n + 1) * k / (2t)). T * T^T = I.
Matrix DctMatrix(std::size_t t);

// Block-wise forward transform of an h x w channel: every t x t block B is
// replaced by T * B * T^T. Throws if t does not divide h and w.
Matrix DctBlockForward(const Matrix& channel, std::size_t t);

// Keeps the top-left t_keep x t_keep coefficients of each t_src block and
// inverts them with the t_keep-point DCT. Output is
// (h / t_src) * t_keep by (w / t_src) * t_keep.
Matrix IdctBlock(const Matrix& coeffs, std::size_t t_src, std::size_t t_keep);

// Zeroes everything outside the top-left t_keep x t_keep corner of each
// t x t coefficient block and inverts at full size t. The full-resolution
// counterpart of IdctBlock used for residual bookkeeping.
Matrix IdctBlockPadded(const Matrix& coeffs, std::size_t t, std::size_t t_keep);

// Fused linear map channel -> IdctBlock(DctBlockForward(channel, t), t, t')
// applied per block as A * B * A^T with A = T'^T * [I 0] * T (t' x t).
// Also exposes the adjoint for backpropagation.
class BlockLowpass {
 public:
  BlockLowpass(std::size_t t, std::size_t t_keep);

  std::size_t block() const { return t_; }
  std::size_t kept() const { return t_keep_; }
  std::size_t OutputExtent(std::size_t extent) const {
    return extent / t_ * t_keep_;
  }

  // `in` is h x w, `out` is OutputExtent(h) x OutputExtent(w).
  void Apply(std::span<const double> in, std::size_t h, std::size_t w,
             std::span<double> out) const;
  // Adjoint: `grad_out` reduced size, `grad_in` h x w (overwritten).
  void ApplyAdjoint(std::span<const double> grad_out, std::size_t h,
                    std::size_t w, std::span<double> grad_in) const;

  const Matrix& op() const { return a_; }

 private:
  std::size_t t_;
  std::size_t t_keep_;
  Matrix a_;  // t' x t
};

}  // namespace delta

#endif  // DELTA_DCT_H_
