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

#include "delta/linalg.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace delta {
namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap View(const Matrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}
MutMap View(Matrix& m) {
  return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

double Dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

constexpr int kMaxSweeps = 80;

// Householder QR of A = wide^T where `wide` is m x n with m <= n. Rows of
// `wide` are the columns of A, so every reflector works on contiguous memory.
struct HouseholderQr {
  Matrix r;                               // m x m upper triangular
  std::vector<std::vector<double>> v;     // unit reflector j, length n - j
  std::vector<bool> active;               // false when column was already zero
};

HouseholderQr FactorQr(Matrix work) {
  const std::size_t m = work.rows();
  const std::size_t n = work.cols();
  HouseholderQr qr;
  qr.r = Matrix(m, m);
  qr.v.resize(m);
  qr.active.assign(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    double* x = work.row(j).data() + j;
    const std::size_t len = n - j;
    const double norm = FrobeniusNorm(std::span<const double>(x, len));
    if (norm == 0.0) {
      qr.r(j, j) = 0.0;
      for (std::size_t k = j + 1; k < m; ++k) qr.r(j, k) = work(k, j);
      continue;
    }
    const double alpha = x[0] > 0 ? -norm : norm;
    std::vector<double> v(x, x + len);
    v[0] -= alpha;
    const double vnorm = FrobeniusNorm(v);
    if (vnorm == 0.0) {
      // x is already alpha * e1.
      qr.r(j, j) = alpha;
      for (std::size_t k = j + 1; k < m; ++k) qr.r(j, k) = work(k, j);
      continue;
    }
    for (double& e : v) e /= vnorm;
    qr.r(j, j) = alpha;
    for (std::size_t k = j + 1; k < m; ++k) {
      double* col = work.row(k).data() + j;
      const double d = 2.0 * Dot(v.data(), col, len);
      for (std::size_t i = 0; i < len; ++i) col[i] -= d * v[i];
      qr.r(j, k) = col[0];
    }
    qr.v[j] = std::move(v);
    qr.active[j] = true;
  }
  return qr;
}

struct JacobiResult {
  std::vector<double> sigma;  // sorted non-increasing
  Matrix left;                // m x m, orthonormal columns
  Matrix rotations;           // m x m, accumulated right rotations (sorted)
};

// One-sided Jacobi on the columns of `b` (m x m). Columns are stored as rows
// of `cols` for contiguous access.
JacobiResult OneSidedJacobi(const Matrix& b, double frob) {
  const std::size_t m = b.rows();
  Matrix cols = b.Transposed();     // row i = column i of b
  Matrix rot = Matrix::Identity(m);  // row i = column i of J
  const double tol = static_cast<double>(m) *
                     std::numeric_limits<double>::epsilon();
  const double floor = std::numeric_limits<double>::min() / tol;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        double* bp = cols.row(p).data();
        double* bq = cols.row(q).data();
        const double alpha = Dot(bp, bp, m);
        const double beta = Dot(bq, bq, m);
        const double gamma = Dot(bp, bq, m);
        if (alpha <= floor || beta <= floor) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = bp[i];
          const double xq = bq[i];
          bp[i] = c * xp - s * xq;
          bq[i] = s * xp + c * xq;
        }
        double* jp = rot.row(p).data();
        double* jq = rot.row(q).data();
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = jp[i];
          const double xq = jq[i];
          jp[i] = c * xp - s * xq;
          jq[i] = s * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) norms[i] = FrobeniusNorm(cols.row(i));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return norms[a] > norms[b];
  });

  JacobiResult out;
  out.sigma.resize(m);
  out.left = Matrix(m, m);
  out.rotations = Matrix(m, m);
  // Columns whose norm is lost in rounding relative to the input get an
  // orthonormal completion instead of a normalized noise vector.
  const double zero_cut = frob * std::numeric_limits<double>::epsilon() *
                          std::numeric_limits<double>::epsilon();
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t src = order[k];
    out.sigma[k] = norms[src];
    for (std::size_t i = 0; i < m; ++i) {
      out.rotations(i, k) = rot(src, i);
    }
    if (norms[src] <= zero_cut || norms[src] == 0.0) {
      missing.push_back(k);
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      out.left(i, k) = cols(src, i) / norms[src];
    }
  }
  std::vector<bool> filled(m, true);
  for (std::size_t k : missing) filled[k] = false;
  for (std::size_t k : missing) {
    // Basis vector with the largest component outside the current span,
    // orthogonalized twice.
    double best_norm = -1.0;
    std::vector<double> best;
    for (std::size_t e = 0; e < m; ++e) {
      std::vector<double> v(m, 0.0);
      v[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < m; ++j) {
          if (!filled[j]) continue;
          double d = 0.0;
          for (std::size_t i = 0; i < m; ++i) d += out.left(i, j) * v[i];
          for (std::size_t i = 0; i < m; ++i) v[i] -= d * out.left(i, j);
        }
      }
      const double nv = FrobeniusNorm(v);
      if (nv > best_norm) {
        best_norm = nv;
        best = std::move(v);
      }
    }
    for (std::size_t i = 0; i < m; ++i) out.left(i, k) = best[i] / best_norm;
    filled[k] = true;
  }
  return out;
}

void RequireUsable(const Matrix& m, const char* who) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument(std::string(who) + ": empty matrix");
  }
  for (double v : m.values()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(who) +
                                  ": non-finite entry in input");
    }
  }
}

// Core routine for rows <= cols.
void WideSvd(const Matrix& wide, bool want_right, std::vector<double>& sigma,
             Matrix& left, Matrix* right) {
  const std::size_t m = wide.rows();
  const std::size_t n = wide.cols();
  HouseholderQr qr = FactorQr(wide);
  // wide = A^T = R^T Q^T; orthogonalize the columns of R^T.
  JacobiResult jr = OneSidedJacobi(qr.r.Transposed(),
                                   FrobeniusNorm(wide.values()));
  sigma = std::move(jr.sigma);
  left = std::move(jr.left);
  if (!want_right) return;
  // right = (Q J)^T; row k of `yt` is column k of Q J.
  Matrix yt(m, n);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < m; ++i) yt(k, i) = jr.rotations(i, k);
  }
  for (std::size_t jj = m; jj-- > 0;) {
    if (!qr.active[jj]) continue;
    const std::vector<double>& v = qr.v[jj];
    for (std::size_t k = 0; k < m; ++k) {
      double* y = yt.row(k).data() + jj;
      const double d = 2.0 * Dot(v.data(), y, v.size());
      for (std::size_t i = 0; i < v.size(); ++i) y[i] -= d * v[i];
    }
  }
  *right = std::move(yt);
}

}  // namespace

Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("MatMul: inner dimension mismatch");
  }
  Matrix c(a.rows(), b.cols());
  View(c).noalias() = View(a) * View(b);
  return c;
}

Matrix MatMulTransA(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("MatMulTransA: inner dimension mismatch");
  }
  Matrix c(a.cols(), b.cols());
  View(c).noalias() = View(a).transpose() * View(b);
  return c;
}

Matrix MatMulTransB(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("MatMulTransB: inner dimension mismatch");
  }
  Matrix c(a.rows(), b.rows());
  View(c).noalias() = View(a) * View(b).transpose();
  return c;
}

Matrix SvdFactors::Reconstruct(std::size_t terms) const {
  terms = std::min(terms, singular_values.size());
  Matrix out(left.rows(), right.cols());
  for (std::size_t k = 0; k < terms; ++k) {
    const double s = singular_values[k];
    if (s == 0.0) continue;
    for (std::size_t i = 0; i < left.rows(); ++i) {
      const double a = s * left(i, k);
      if (a == 0.0) continue;
      double* dst = out.row(i).data();
      const double* v = right.row(k).data();
      for (std::size_t j = 0; j < right.cols(); ++j) dst[j] += a * v[j];
    }
  }
  return out;
}

SvdFactors Svd(const Matrix& m) {
  RequireUsable(m, "Svd");
  SvdFactors f;
  if (m.rows() <= m.cols()) {
    WideSvd(m, true, f.singular_values, f.left, &f.right);
    return f;
  }
  // Tall input: factor the transpose and swap roles.
  Matrix left_t;
  Matrix right_t;
  WideSvd(m.Transposed(), true, f.singular_values, left_t, &right_t);
  f.left = right_t.Transposed();
  f.right = left_t.Transposed();
  return f;
}

LeftSingular LeftSingularVectors(const Matrix& m) {
  RequireUsable(m, "LeftSingularVectors");
  LeftSingular out;
  if (m.rows() <= m.cols()) {
    WideSvd(m, false, out.singular_values, out.left, nullptr);
    return out;
  }
  SvdFactors f = Svd(m);
  out.singular_values = std::move(f.singular_values);
  out.left = std::move(f.left);
  return out;
}

}  // namespace delta
