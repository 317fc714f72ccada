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

#ifndef DELTA_LINALG_H_
#define DELTA_LINALG_H_

#include <cstddef>
#include <vector>

#include "delta/tensor.h"

namespace delta {

// C = A * B
Matrix MatMul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix MatMulTransA(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix MatMulTransB(const Matrix& a, const Matrix& b);

// Thin SVD M = sum_i s_i u_i v_i^T with m = min(rows, cols) terms.
struct SvdFactors {
  std::vector<double> singular_values;  // non-increasing, >= 0
  Matrix left;                          // rows x m, orthonormal columns
  Matrix right;                         // m x cols, orthonormal rows

  std::size_t rank_count() const { return singular_values.size(); }
  // sum_{i < terms} s_i u_i v_i^T
  Matrix Reconstruct(std::size_t terms) const;
};

// Householder QR of the wide side followed by one-sided (Hestenes) Jacobi on
// the small triangular factor. Deterministic for a fixed input. Throws
// std::invalid_argument on empty or non-finite input.
SvdFactors Svd(const Matrix& m);

// Left singular vectors and values only (rows x m), skipping the right
// factor. Same algorithm and ordering as Svd().
struct LeftSingular {
  std::vector<double> singular_values;
  Matrix left;
};
LeftSingular LeftSingularVectors(const Matrix& m);

}  // namespace delta

#endif  // DELTA_LINALG_H_
