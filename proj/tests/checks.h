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

// Finite-difference checks for modules and the separable-exponential input
// construction used to exercise exact low-rank factorization.

#ifndef DELTA_TESTS_CHECKS_H_
#define DELTA_TESTS_CHECKS_H_

#include <algorithm>
#include <cmath>
#include <vector>

#include "delta/layers.h"
#include "delta/linalg.h"
#include "delta/rng.h"
#include "test_util.h"

namespace delta::testing {

struct GradCheck {
  double input_rel = 0.0;  // relative error of the input gradient
  double param_rel = 0.0;  // worst relative error over parameter tensors
};

// Loss = sum_i <proj_i, module(x)_i> in training mode. Compares the
// analytic input and parameter gradients against central differences.
inline GradCheck CheckModule(Module& m, Batch x, RandomStream& rng,
                             double step = 1e-6) {
  Batch probe = m.Forward(x, true);
  Batch proj;
  for (const Tensor3& t : probe) {
    proj.push_back(RandomTensor(t.channels(), t.height(), t.width(), rng));
  }
  auto loss = [&]() {
    const Batch y = m.Forward(x, true);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      s += Dot(y[i].values(), proj[i].values());
    }
    return s;
  };

  std::vector<ParamView> params;
  m.CollectParams(params);
  for (ParamView& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  m.Forward(x, true);
  const Batch gx = m.Backward(proj, true);

  GradCheck out;
  std::vector<double> analytic, numeric;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::vector<double> num =
        NumericGradient(x[i].values(), loss, step);
    analytic.insert(analytic.end(), gx[i].values().begin(),
                    gx[i].values().end());
    numeric.insert(numeric.end(), num.begin(), num.end());
  }
  out.input_rel = RelativeError(analytic, numeric);
  for (ParamView& p : params) {
    const std::vector<double> a(p.grad.begin(), p.grad.end());
    const std::vector<double> num = NumericGradient(p.value, loss, step);
    out.param_rel = std::max(out.param_rel, RelativeError(a, num));
  }
  return out;
}

// Input whose k x k patches (valid convolution) span at most q directions:
// X(c, y, x) = sum_j a_j[c] rho_j^y sigma_j^x. Every patch of term j is a
// multiple of a_j (x) e_j with e_j(dy, dx) = rho_j^dy sigma_j^dx.
struct LowRankInput {
  Tensor3 x;
  Matrix basis;  // (c k^2) x q, orthonormal columns spanning the patches
};

inline LowRankInput MakeLowRankInput(std::size_t c, std::size_t h,
                                     std::size_t w, std::size_t k,
                                     std::size_t q, RandomStream& rng) {
  LowRankInput out{Tensor3(c, h, w), Matrix()};
  Matrix dirs(c * k * k, q);
  for (std::size_t j = 0; j < q; ++j) {
    const std::vector<double> a = RandomVector(c, rng);
    const double rho = 0.7 + 0.6 * rng.Uniform();
    const double sigma = 0.7 + 0.6 * rng.Uniform();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t xx = 0; xx < w; ++xx) {
          out.x(ch, y, xx) += a[ch] * std::pow(rho, y) * std::pow(sigma, xx);
        }
      }
      for (std::size_t dy = 0; dy < k; ++dy) {
        for (std::size_t dx = 0; dx < k; ++dx) {
          dirs((ch * k + dy) * k + dx, j) =
              a[ch] * std::pow(rho, dy) * std::pow(sigma, dx);
        }
      }
    }
  }
  // Orthonormalize the q directions.
  const SvdFactors f = Svd(dirs);
  out.basis = Matrix(c * k * k, q);
  for (std::size_t i = 0; i < c * k * k; ++i) {
    for (std::size_t j = 0; j < q; ++j) out.basis(i, j) = f.left(i, j);
  }
  return out;
}

}  // namespace delta::testing

#endif  // DELTA_TESTS_CHECKS_H_
