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

#include "delta/conv.h"

#include <stdexcept>
#include <string>

#include "delta/linalg.h"

namespace delta {

std::size_t ConvGeometry::OutExtent(std::size_t in, std::size_t k) const {
  if (stride == 0) throw std::invalid_argument("conv: stride must be >= 1");
  if (in + 2 * padding < k) {
    throw std::invalid_argument("conv: kernel larger than padded input");
  }
  return (in + 2 * padding - k) / stride + 1;
}

Matrix Im2Col(const Tensor3& input, std::size_t k, ConvGeometry geo) {
  const std::size_t c = input.channels();
  const std::size_t h = input.height();
  const std::size_t w = input.width();
  const std::size_t ho = geo.OutExtent(h, k);
  const std::size_t wo = geo.OutExtent(w, k);
  Matrix cols(c * k * k, ho * wo);
  const auto pad = static_cast<std::ptrdiff_t>(geo.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geo.stride);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = input.channel(ch).data();
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = cols.row((ch * k + ky) * k + kx).data();
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride - pad +
              static_cast<std::ptrdiff_t>(ky);
          double* drow = dst + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            for (std::size_t ox = 0; ox < wo; ++ox) drow[ox] = 0.0;
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * stride - pad +
                static_cast<std::ptrdiff_t>(kx);
            drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                           ? 0.0
                           : srow[ix];
          }
        }
      }
    }
  }
  return cols;
}

Tensor3 Col2Im(const Matrix& cols, std::size_t channels, std::size_t height,
               std::size_t width, std::size_t k, ConvGeometry geo) {
  const std::size_t ho = geo.OutExtent(height, k);
  const std::size_t wo = geo.OutExtent(width, k);
  if (cols.rows() != channels * k * k || cols.cols() != ho * wo) {
    throw std::invalid_argument("Col2Im: patch matrix shape mismatch");
  }
  Tensor3 out(channels, height, width);
  const auto pad = static_cast<std::ptrdiff_t>(geo.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geo.stride);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    double* dst = out.channel(ch).data();
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = cols.row((ch * k + ky) * k + kx).data();
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride - pad +
              static_cast<std::ptrdiff_t>(ky);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          double* drow = dst + static_cast<std::size_t>(iy) * width;
          const double* srow = src + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * stride - pad +
                static_cast<std::ptrdiff_t>(kx);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
            drow[ix] += srow[ox];
          }
        }
      }
    }
  }
  return out;
}

Tensor3 Conv2dForward(const Tensor3& input, const Kernel& weights,
                      ConvGeometry geo, Matrix& cols) {
  if (input.channels() != weights.in_channels()) {
    throw std::invalid_argument(
        "Conv2dForward: input has " + std::to_string(input.channels()) +
        " channels, kernel expects " + std::to_string(weights.in_channels()));
  }
  const std::size_t k = weights.size();
  const std::size_t ho = geo.OutExtent(input.height(), k);
  const std::size_t wo = geo.OutExtent(input.width(), k);
  cols = Im2Col(input, k, geo);
  Matrix y = MatMul(weights.AsMatrix(), cols);
  // Moved in without the finiteness check; divergence is detected upstream.
  Tensor3 out(weights.out_channels(), ho, wo);
  out.values().swap(y.values());
  return out;
}

Tensor3 Conv2dForward(const Tensor3& input, const Kernel& weights,
                      ConvGeometry geo) {
  Matrix cols;
  return Conv2dForward(input, weights, geo, cols);
}

ConvGrads Conv2dBackwardLowered(const Tensor3& grad_out, const Matrix& cols,
                                std::size_t channels, std::size_t height,
                                std::size_t width, const Kernel& weights,
                                ConvGeometry geo, bool want_input_grad) {
  if (channels != weights.in_channels()) {
    throw std::invalid_argument("Conv2dBackward: input/kernel mismatch");
  }
  const std::size_t k = weights.size();
  const std::size_t ho = geo.OutExtent(height, k);
  const std::size_t wo = geo.OutExtent(width, k);
  if (grad_out.channels() != weights.out_channels() ||
      grad_out.height() != ho || grad_out.width() != wo) {
    throw std::invalid_argument("Conv2dBackward: grad_out shape " +
                                grad_out.ShapeString() + " inconsistent");
  }
  if (cols.rows() != weights.fan_in() || cols.cols() != ho * wo) {
    throw std::invalid_argument("Conv2dBackward: lowered input mismatch");
  }
  const Matrix g(weights.out_channels(), ho * wo, grad_out.values());
  ConvGrads grads;
  grads.weights =
      Kernel::FromMatrix(MatMulTransB(g, cols), weights.in_channels(), k);
  if (want_input_grad) {
    grads.input = Col2Im(MatMulTransA(weights.AsMatrix(), g), channels,
                         height, width, k, geo);
  }
  return grads;
}

ConvGrads Conv2dBackward(const Tensor3& grad_out, const Tensor3& input,
                         const Kernel& weights, ConvGeometry geo,
                         bool want_input_grad) {
  if (input.channels() != weights.in_channels()) {
    throw std::invalid_argument("Conv2dBackward: input/kernel mismatch");
  }
  return Conv2dBackwardLowered(grad_out, Im2Col(input, weights.size(), geo),
                               input.channels(), input.height(),
                               input.width(), weights, geo, want_input_grad);
}

std::size_t ConvMacs(const Kernel& weights, std::size_t out_h,
                     std::size_t out_w) {
  return weights.out_channels() * weights.fan_in() * out_h * out_w;
}

}  // namespace delta
