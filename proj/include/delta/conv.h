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

#ifndef DELTA_CONV_H_
#define DELTA_CONV_H_

#include <cstddef>

#include "delta/tensor.h"

namespace delta {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zero padding on every side

  std::size_t OutExtent(std::size_t in, std::size_t k) const;
};

// Lowers a c x h x w input to the (c*k*k) x (ho*wo) patch matrix so that the
// convolution becomes W (n x c*k*k) times the patch matrix.
Matrix Im2Col(const Tensor3& input, std::size_t k, ConvGeometry geo);
// Adjoint of Im2Col: scatters patch-matrix gradients back onto the input.
Tensor3 Col2Im(const Matrix& cols, std::size_t channels, std::size_t height,
               std::size_t width, std::size_t k, ConvGeometry geo);

// Cross-correlation (the deep-learning convention) via Im2Col + GEMM.
Tensor3 Conv2dForward(const Tensor3& input, const Kernel& weights,
                      ConvGeometry geo);
// Same, also handing back the lowered input for a later backward pass.
Tensor3 Conv2dForward(const Tensor3& input, const Kernel& weights,
                      ConvGeometry geo, Matrix& cols);

struct ConvGrads {
  Tensor3 input;   // empty when not requested
  Kernel weights;
};

ConvGrads Conv2dBackward(const Tensor3& grad_out, const Tensor3& input,
                         const Kernel& weights, ConvGeometry geo,
                         bool want_input_grad = true);
// Backward from a cached Im2Col of a c x h x w input.
ConvGrads Conv2dBackwardLowered(const Tensor3& grad_out, const Matrix& cols,
                                std::size_t channels, std::size_t height,
                                std::size_t width, const Kernel& weights,
                                ConvGeometry geo, bool want_input_grad = true);

// Multiply-accumulate count of one forward pass.
std::size_t ConvMacs(const Kernel& weights, std::size_t out_h,
                     std::size_t out_w);

}  // namespace delta

#endif  // DELTA_CONV_H_
