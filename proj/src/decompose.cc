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

#include "delta/decompose.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace delta {
namespace {

Matrix ChannelMatrix(std::span<const double> plane, std::size_t h,
                     std::size_t w) {
  return Matrix(h, w, std::vector<double>(plane.begin(), plane.end()));
}

// X_lr = sum_{i<r} s_i u_i v_i^T = U_r (U_r^T X), exact up to rounding.
Matrix LowRankPart(const Matrix& flat, const Matrix& left, std::size_t r) {
  Matrix basis(left.rows(), r);
  for (std::size_t i = 0; i < left.rows(); ++i) {
    for (std::size_t j = 0; j < r; ++j) basis(i, j) = left(i, j);
  }
  return MatMul(basis, MatMulTransA(basis, flat));
}

double RelativeError(const Matrix& a, const Matrix& b, double denom) {
  if (denom == 0.0) return 0.0;
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff[i] = a.values()[i] - b.values()[i];
  }
  return FrobeniusNorm(diff) / denom;
}

}  // namespace

void DecompositionConfig::Validate(std::size_t c, std::size_t h,
                                   std::size_t w) const {
  if (r < 1 || r > c) {
    throw std::invalid_argument("decompose: need 1 <= r <= c (r=" +
                                std::to_string(r) + ", c=" +
                                std::to_string(c) + ")");
  }
  if (t < 1 || t_prime < 1 || t_prime > t) {
    throw std::invalid_argument("decompose: need 1 <= t' <= t");
  }
  if (h % t != 0 || w % t != 0) {
    throw std::invalid_argument("decompose: t=" + std::to_string(t) +
                                " does not divide " + std::to_string(h) +
                                "x" + std::to_string(w));
  }
  if (!(clip > 0.0)) {
    throw std::invalid_argument("decompose: clipping scale must be > 0");
  }
}

DecompositionOutput Decompose(const Tensor3& x,
                              const DecompositionConfig& cfg) {
  const std::size_t c = x.channels();
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  cfg.Validate(c, h, w);
  const std::size_t hw = h * w;
  const Matrix flat = x.Flatten();

  DecompositionOutput out;
  out.factors = Svd(flat);
  const std::size_t r = std::min(cfg.r, out.factors.rank_count());
  const auto& s = out.factors.singular_values;
  const Matrix& u = out.factors.left;

  const std::size_t mh = cfg.MainExtent(h);
  const std::size_t mw = cfg.MainExtent(w);
  out.ir_main = Tensor3(c, mh, mw);

  // Residual piece 1: discarded singular directions.
  const Matrix lowrank = LowRankPart(flat, u, r);
  Matrix svd_res(c, hw);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    svd_res.values()[i] = flat.values()[i] - lowrank.values()[i];
  }

  // Residual piece 2: discarded frequencies of the kept principal channels.
  Matrix dct_res(c, hw);
  out.dct_coeffs.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    const Matrix v = ChannelMatrix(out.factors.right.row(i), h, w);
    Matrix coeffs = DctBlockForward(v, cfg.t);
    const Matrix v_lf = IdctBlock(coeffs, cfg.t, cfg.t_prime);
    Matrix high = coeffs;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        if (y % cfg.t < cfg.t_prime && xx % cfg.t < cfg.t_prime) {
          high(y, xx) = 0.0;
        }
      }
    }
    const Matrix v_high = IdctBlockPadded(high, cfg.t, cfg.t);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double a = s[i] * u(ch, i);
      double* main = out.ir_main.channel(ch).data();
      for (std::size_t j = 0; j < mh * mw; ++j) main[j] += a * v_lf.values()[j];
      double* res = dct_res.row(ch).data();
      for (std::size_t j = 0; j < hw; ++j) res[j] += a * v_high.values()[j];
    }
    out.dct_coeffs.push_back(std::move(coeffs));
  }

  std::vector<double> raw(c * hw);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = svd_res.values()[i] + dct_res.values()[i];
  }
  out.ir_res_raw = Tensor3(c, h, w, std::move(raw));
  out.ir_res = NormalizeResidual(out.ir_res_raw, cfg.clip);
  return out;
}

Tensor3 NormalizeResidual(const Tensor3& raw, double clip) {
  if (!(clip > 0.0)) {
    throw std::invalid_argument("NormalizeResidual: clip must be > 0");
  }
  const double scale = std::max(1.0, raw.FrobeniusNorm() / clip);
  if (scale == 1.0) return raw;
  Tensor3 out = raw;
  for (double& v : out.values()) v /= scale;
  return out;
}

MainProjector::MainProjector(const DecompositionConfig& cfg)
    : cfg_(cfg), lowpass_(cfg.t, cfg.t_prime) {}

Tensor3 MainProjector::Forward(const Tensor3& x, Matrix& basis) const {
  const std::size_t c = x.channels();
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  cfg_.Validate(c, h, w);
  const Matrix flat = x.Flatten();
  const LeftSingular ls = LeftSingularVectors(flat);
  const std::size_t r = std::min(cfg_.r, ls.singular_values.size());
  basis = Matrix(c, r);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < r; ++j) basis(i, j) = ls.left(i, j);
  }
  const Matrix projected = MatMul(basis, MatMulTransA(basis, flat));
  Tensor3 out(c, cfg_.MainExtent(h), cfg_.MainExtent(w));
  for (std::size_t ch = 0; ch < c; ++ch) {
    lowpass_.Apply(projected.row(ch), h, w, out.channel(ch));
  }
  return out;
}

Tensor3 MainProjector::Backward(const Tensor3& grad_main, const Matrix& basis,
                                std::size_t height, std::size_t width) const {
  const std::size_t c = grad_main.channels();
  Matrix g(c, height * width);
  for (std::size_t ch = 0; ch < c; ++ch) {
    lowpass_.ApplyAdjoint(grad_main.channel(ch), height, width, g.row(ch));
  }
  const Matrix projected = MatMul(basis, MatMulTransA(basis, g));
  Tensor3 out(c, height, width);
  out.values() = projected.values();
  return out;
}

std::vector<SpectrumRow> Spectrum(const Tensor3& x,
                                  std::span<const std::size_t> r_grid,
                                  std::size_t t,
                                  std::span<const std::size_t> tprime_grid) {
  const std::size_t c = x.channels();
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const Matrix flat = x.Flatten();
  const double norm = FrobeniusNorm(flat.values());
  std::vector<SpectrumRow> rows;
  if (!r_grid.empty()) {
    const SvdFactors f = Svd(flat);
    for (std::size_t r : r_grid) {
      if (r < 1 || r > c) {
        throw std::invalid_argument("spectrum: r outside [1, c]");
      }
      const Matrix lr = LowRankPart(flat, f.left,
                                    std::min(r, f.rank_count()));
      rows.push_back({"svd", r, RelativeError(flat, lr, norm)});
    }
  }
  for (std::size_t tp : tprime_grid) {
    if (tp < 1 || tp > t) {
      throw std::invalid_argument("spectrum: t' outside [1, t]");
    }
    Matrix lf(c, h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Matrix coeffs = DctBlockForward(ChannelMatrix(x.channel(ch), h, w), t);
      const Matrix back = IdctBlockPadded(coeffs, t, tp);
      std::copy(back.values().begin(), back.values().end(),
                lf.row(ch).begin());
    }
    rows.push_back({"dct", tp, RelativeError(flat, lf, norm)});
  }
  return rows;
}

std::vector<SpectrumRow> MeanSpectrum(
    std::span<const Tensor3> samples, std::span<const std::size_t> r_grid,
    std::size_t t, std::span<const std::size_t> tprime_grid) {
  if (samples.empty()) {
    throw std::invalid_argument("spectrum: no samples");
  }
  std::vector<SpectrumRow> mean;
  for (const Tensor3& x : samples) {
    std::vector<SpectrumRow> rows = Spectrum(x, r_grid, t, tprime_grid);
    if (mean.empty()) {
      mean = std::move(rows);
      continue;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      mean[i].rel_error += rows[i].rel_error;
    }
  }
  for (SpectrumRow& row : mean) {
    row.rel_error /= static_cast<double>(samples.size());
  }
  return mean;
}

std::string SpectrumCsv(std::span<const SpectrumRow> rows) {
  std::ostringstream os;
  os << "kind,param,rel_error\n";
  char buf[64];
  for (const SpectrumRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.12g", row.rel_error);
    os << row.kind << ',' << row.param << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace delta
