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

#ifndef DELTA_TENSOR_H_
#define DELTA_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace delta {

// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  Matrix Transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Dense channels x height x width tensor, row-major by (channel, row, col).
class Tensor3 {
 public:
  Tensor3() = default;
  // Zero-filled.
  Tensor3(std::size_t channels, std::size_t height, std::size_t width);
  // Takes ownership of `data`; rejects wrong lengths and non-finite entries.
  Tensor3(std::size_t channels, std::size_t height, std::size_t width,
          std::vector<double> data);

  std::size_t channels() const { return c_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t plane() const { return h_ * w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * h_ + y) * w_ + x];
  }
  double operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * h_ + y) * w_ + x];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> channel(std::size_t c) {
    return {data_.data() + c * h_ * w_, h_ * w_};
  }
  std::span<const double> channel(std::size_t c) const {
    return {data_.data() + c * h_ * w_, h_ * w_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool SameShape(const Tensor3& other) const {
    return c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
  }
  std::string ShapeString() const;

  // c x (h*w) view as a matrix copy.
  Matrix Flatten() const;
  static Tensor3 FromMatrix(const Matrix& m, std::size_t height,
                            std::size_t width);

  double FrobeniusNorm() const;
  bool AllFinite() const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t c_ = 0;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<double> data_;
};

// Convolution kernel laid out as out x in x k x k.
class Kernel {
 public:
  Kernel() = default;
  Kernel(std::size_t out_channels, std::size_t in_channels, std::size_t size);
  Kernel(std::size_t out_channels, std::size_t in_channels, std::size_t size,
         std::vector<double> data);

  std::size_t out_channels() const { return n_; }
  std::size_t in_channels() const { return c_; }
  std::size_t size() const { return k_; }
  // Length of one flattened filter, c*k*k.
  std::size_t fan_in() const { return c_ * k_ * k_; }
  std::size_t count() const { return data_.size(); }

  double& operator()(std::size_t n, std::size_t c, std::size_t y,
                     std::size_t x) {
    return data_[((n * c_ + c) * k_ + y) * k_ + x];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t y,
                    std::size_t x) const {
    return data_[((n * c_ + c) * k_ + y) * k_ + x];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  // The n x (c*k*k) matrix form used by the lowered convolution.
  Matrix AsMatrix() const;
  static Kernel FromMatrix(const Matrix& m, std::size_t in_channels,
                           std::size_t size);

  friend bool operator==(const Kernel&, const Kernel&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t c_ = 0;
  std::size_t k_ = 0;
  std::vector<double> data_;
};

double FrobeniusNorm(std::span<const double> values);
double MaxAbsDiff(std::span<const double> a, std::span<const double> b);

}  // namespace delta

#endif  // DELTA_TENSOR_H_
