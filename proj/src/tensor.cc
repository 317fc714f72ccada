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

#include "delta/tensor.h"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace delta {
namespace {

void RequireFinite(const std::vector<double>& data, const char* what) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: data length does not match shape");
  }
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::Transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width)
    : c_(channels), h_(height), w_(width), data_(channels * height * width) {}

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width,
                 std::vector<double> data)
    : c_(channels), h_(height), w_(width), data_(std::move(data)) {
  if (data_.size() != c_ * h_ * w_) {
    throw std::invalid_argument("Tensor3: data length " +
                                std::to_string(data_.size()) +
                                " does not match " + ShapeString());
  }
  RequireFinite(data_, "Tensor3");
}

std::string Tensor3::ShapeString() const {
  return std::to_string(c_) + "x" + std::to_string(h_) + "x" +
         std::to_string(w_);
}

Matrix Tensor3::Flatten() const { return Matrix(c_, h_ * w_, data_); }

Tensor3 Tensor3::FromMatrix(const Matrix& m, std::size_t height,
                            std::size_t width) {
  if (m.cols() != height * width) {
    throw std::invalid_argument("Tensor3::FromMatrix: column count mismatch");
  }
  return Tensor3(m.rows(), height, width, m.values());
}

double Tensor3::FrobeniusNorm() const { return delta::FrobeniusNorm(data_); }

bool Tensor3::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Kernel::Kernel(std::size_t out_channels, std::size_t in_channels,
               std::size_t size)
    : n_(out_channels),
      c_(in_channels),
      k_(size),
      data_(out_channels * in_channels * size * size) {}

Kernel::Kernel(std::size_t out_channels, std::size_t in_channels,
               std::size_t size, std::vector<double> data)
    : n_(out_channels), c_(in_channels), k_(size), data_(std::move(data)) {
  if (data_.size() != n_ * c_ * k_ * k_) {
    throw std::invalid_argument("Kernel: data length does not match shape");
  }
}

Matrix Kernel::AsMatrix() const { return Matrix(n_, fan_in(), data_); }

Kernel Kernel::FromMatrix(const Matrix& m, std::size_t in_channels,
                          std::size_t size) {
  if (m.cols() != in_channels * size * size) {
    throw std::invalid_argument("Kernel::FromMatrix: column count mismatch");
  }
  return Kernel(m.rows(), in_channels, size, m.values());
}

double FrobeniusNorm(std::span<const double> values) {
  // Scaled accumulation keeps tiny and huge entries from under/overflowing.
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : values) {
    if (v == 0.0) continue;
    const double a = std::abs(v);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("MaxAbsDiff: length mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace delta
