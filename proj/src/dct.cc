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

#include "delta/dct.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "delta/linalg.h"

namespace delta {
namespace {

void RequireBlocks(std::size_t h, std::size_t w, std::size_t t,
                   const char* who) {
  if (t == 0) throw std::invalid_argument(std::string(who) + ": t must be >= 1");
  if (h % t != 0 || w % t != 0) {
    throw std::invalid_argument(std::string(who) + ": block size " +
                                std::to_string(t) + " does not divide " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
}

// out_block = L * in_block * R^T for every block; L is a x t, R is b x t.
Matrix BlockSandwich(const Matrix& in, std::size_t t, const Matrix& l,
                     const Matrix& r) {
  const std::size_t bh = in.rows() / t;
  const std::size_t bw = in.cols() / t;
  const std::size_t oa = l.rows();
  const std::size_t ob = r.rows();
  Matrix out(bh * oa, bw * ob);
  Matrix block(t, t);
  for (std::size_t by = 0; by < bh; ++by) {
    for (std::size_t bx = 0; bx < bw; ++bx) {
      for (std::size_t y = 0; y < t; ++y) {
        for (std::size_t x = 0; x < t; ++x) {
          block(y, x) = in(by * t + y, bx * t + x);
        }
      }
      const Matrix res = MatMulTransB(MatMul(l, block), r);
      for (std::size_t y = 0; y < oa; ++y) {
        for (std::size_t x = 0; x < ob; ++x) {
          out(by * oa + y, bx * ob + x) = res(y, x);
        }
      }
    }
  }
  return out;
}

}  // namespace

Matrix DctMatrix(std::size_t t) {
  if (t == 0) throw std::invalid_argument("DctMatrix: t must be >= 1");
  Matrix m(t, t);
  const double td = static_cast<double>(t);
  for (std::size_t k = 0; k < t; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / td) : std::sqrt(2.0 / td);
    for (std::size_t n = 0; n < t; ++n) {
      m(k, n) = s * std::cos(std::numbers::pi * (2.0 * n + 1.0) *
                             static_cast<double>(k) / (2.0 * td));
    }
  }
  return m;
}

Matrix DctBlockForward(const Matrix& channel, std::size_t t) {
  RequireBlocks(channel.rows(), channel.cols(), t, "DctBlockForward");
  const Matrix tm = DctMatrix(t);
  return BlockSandwich(channel, t, tm, tm);
}

Matrix IdctBlock(const Matrix& coeffs, std::size_t t_src, std::size_t t_keep) {
  RequireBlocks(coeffs.rows(), coeffs.cols(), t_src, "IdctBlock");
  if (t_keep == 0 || t_keep > t_src) {
    throw std::invalid_argument("IdctBlock: need 1 <= t_keep <= t_src");
  }
  // Crop each block to its top-left corner, then T'^T * C * T'.
  const std::size_t bh = coeffs.rows() / t_src;
  const std::size_t bw = coeffs.cols() / t_src;
  Matrix cropped(bh * t_keep, bw * t_keep);
  for (std::size_t by = 0; by < bh; ++by) {
    for (std::size_t bx = 0; bx < bw; ++bx) {
      for (std::size_t y = 0; y < t_keep; ++y) {
        for (std::size_t x = 0; x < t_keep; ++x) {
          cropped(by * t_keep + y, bx * t_keep + x) =
              coeffs(by * t_src + y, bx * t_src + x);
        }
      }
    }
  }
  const Matrix tinv = DctMatrix(t_keep).Transposed();
  return BlockSandwich(cropped, t_keep, tinv, tinv);
}

Matrix IdctBlockPadded(const Matrix& coeffs, std::size_t t,
                       std::size_t t_keep) {
  RequireBlocks(coeffs.rows(), coeffs.cols(), t, "IdctBlockPadded");
  if (t_keep == 0 || t_keep > t) {
    throw std::invalid_argument("IdctBlockPadded: need 1 <= t_keep <= t");
  }
  Matrix masked(coeffs.rows(), coeffs.cols());
  for (std::size_t y = 0; y < coeffs.rows(); ++y) {
    for (std::size_t x = 0; x < coeffs.cols(); ++x) {
      if (y % t < t_keep && x % t < t_keep) masked(y, x) = coeffs(y, x);
    }
  }
  const Matrix tinv = DctMatrix(t).Transposed();
  return BlockSandwich(masked, t, tinv, tinv);
}

BlockLowpass::BlockLowpass(std::size_t t, std::size_t t_keep)
    : t_(t), t_keep_(t_keep) {
  if (t == 0 || t_keep == 0 || t_keep > t) {
    throw std::invalid_argument("BlockLowpass: need 1 <= t_keep <= t");
  }
  const Matrix full = DctMatrix(t);
  const Matrix small = DctMatrix(t_keep);
  Matrix top(t_keep, t);  // first t' rows of T
  for (std::size_t i = 0; i < t_keep; ++i) {
    for (std::size_t j = 0; j < t; ++j) top(i, j) = full(i, j);
  }
  a_ = MatMulTransA(small, top);
}

void BlockLowpass::Apply(std::span<const double> in, std::size_t h,
                         std::size_t w, std::span<double> out) const {
  RequireBlocks(h, w, t_, "BlockLowpass::Apply");
  const std::size_t oh = OutputExtent(h);
  const std::size_t ow = OutputExtent(w);
  if (in.size() != h * w || out.size() != oh * ow) {
    throw std::invalid_argument("BlockLowpass::Apply: buffer size mismatch");
  }
  // Rows first: tmp (h x ow) = in * blockdiag(A^T); then A * tmp per block.
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    const double* src = in.data() + y * w;
    double* dst = tmp.data() + y * ow;
    for (std::size_t bx = 0; bx < w / t_; ++bx) {
      for (std::size_t i = 0; i < t_keep_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < t_; ++j) s += a_(i, j) * src[bx * t_ + j];
        dst[bx * t_keep_ + i] = s;
      }
    }
  }
  for (std::size_t by = 0; by < h / t_; ++by) {
    for (std::size_t i = 0; i < t_keep_; ++i) {
      double* dst = out.data() + (by * t_keep_ + i) * ow;
      for (std::size_t x = 0; x < ow; ++x) dst[x] = 0.0;
      for (std::size_t j = 0; j < t_; ++j) {
        const double a = a_(i, j);
        const double* src = tmp.data() + (by * t_ + j) * ow;
        for (std::size_t x = 0; x < ow; ++x) dst[x] += a * src[x];
      }
    }
  }
}

void BlockLowpass::ApplyAdjoint(std::span<const double> grad_out,
                                std::size_t h, std::size_t w,
                                std::span<double> grad_in) const {
  RequireBlocks(h, w, t_, "BlockLowpass::ApplyAdjoint");
  const std::size_t ow = OutputExtent(w);
  const std::size_t oh = OutputExtent(h);
  if (grad_in.size() != h * w || grad_out.size() != oh * ow) {
    throw std::invalid_argument(
        "BlockLowpass::ApplyAdjoint: buffer size mismatch");
  }
  // Per block: G_in = A^T * G_out * A.
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t by = 0; by < h / t_; ++by) {
    for (std::size_t j = 0; j < t_; ++j) {
      double* dst = tmp.data() + (by * t_ + j) * ow;
      for (std::size_t i = 0; i < t_keep_; ++i) {
        const double a = a_(i, j);
        const double* src = grad_out.data() + (by * t_keep_ + i) * ow;
        for (std::size_t x = 0; x < ow; ++x) dst[x] += a * src[x];
      }
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    const double* src = tmp.data() + y * ow;
    double* dst = grad_in.data() + y * w;
    for (std::size_t bx = 0; bx < w / t_; ++bx) {
      for (std::size_t j = 0; j < t_; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < t_keep_; ++i) {
          s += a_(i, j) * src[bx * t_keep_ + i];
        }
        dst[bx * t_ + j] = s;
      }
    }
  }
}

}  // namespace delta
