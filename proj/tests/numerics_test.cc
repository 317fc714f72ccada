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

#include <cmath>
#include <numbers>

#include "delta/conv.h"
#include "delta/dct.h"
#include "delta/errors.h"
#include "delta/linalg.h"
#include "delta/tensor_io.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace delta {
namespace {

using testing::RandomKernel;
using testing::RandomMatrix;
using testing::RandomTensor;
using testing::RelativeError;

double MaxOffIdentity(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      worst = std::max(worst, std::abs(m(i, j) - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double ReconstructionError(const Matrix& m, const SvdFactors& f) {
  const Matrix back = f.Reconstruct(f.rank_count());
  return RelativeError(m.values(), back.values());
}

void ExpectValidFactors(const Matrix& m, const SvdFactors& f) {
  const std::size_t k = std::min(m.rows(), m.cols());
  ASSERT_EQ(f.rank_count(), k);
  ASSERT_EQ(f.left.rows(), m.rows());
  ASSERT_EQ(f.right.cols(), m.cols());
  for (std::size_t i = 0; i + 1 < k; ++i) {
    EXPECT_GE(f.singular_values[i], f.singular_values[i + 1]);
  }
  for (double s : f.singular_values) EXPECT_GE(s, 0.0);
  EXPECT_LE(MaxOffIdentity(MatMulTransA(f.left, f.left)), 1e-9);
  EXPECT_LE(MaxOffIdentity(MatMulTransB(f.right, f.right)), 1e-9);
  EXPECT_LE(ReconstructionError(m, f), 1e-9);
}

TEST(SvdTest, IdentityHasUnitSingularValues) {
  const SvdFactors f = Svd(Matrix::Identity(2));
  EXPECT_NEAR(f.singular_values[0], 1.0, 1e-15);
  EXPECT_NEAR(f.singular_values[1], 1.0, 1e-15);
}

TEST(SvdTest, RankOneOuterProduct) {
  // |a| = 2, |b| = 3.
  const std::vector<double> a = {2.0 / std::sqrt(2.0), 2.0 / std::sqrt(2.0)};
  const std::vector<double> b = {3.0 * 0.6, 0.0, 3.0 * 0.8};
  Matrix m(2, 3);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = a[i] * b[j];
  }
  const SvdFactors f = Svd(m);
  EXPECT_NEAR(f.singular_values[0], 6.0, 1e-12);
  EXPECT_NEAR(f.singular_values[1], 0.0, 1e-12);
  ExpectValidFactors(m, f);
}

TEST(SvdTest, Random8x50Reconstructs) {
  RandomStream rng(11, 0);
  const Matrix m = RandomMatrix(8, 50, rng);
  ExpectValidFactors(m, Svd(m));
}

TEST(SvdTest, RandomShapesProperty) {
  RandomStream rng(12, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t rows = 1 + rng.Below(12);
    const std::size_t cols = 1 + rng.Below(40);
    Matrix m = RandomMatrix(rows, cols, rng);
    if (trial % 4 == 0 && rows > 2) {
      // Force rank deficiency by duplicating a row.
      for (std::size_t j = 0; j < cols; ++j) m(1, j) = m(0, j);
    }
    SCOPED_TRACE(std::to_string(rows) + "x" + std::to_string(cols));
    ExpectValidFactors(m, Svd(m));
  }
}

TEST(SvdTest, ZeroMatrixGetsOrthonormalCompletion) {
  const Matrix m(3, 5);
  const SvdFactors f = Svd(m);
  for (double s : f.singular_values) EXPECT_EQ(s, 0.0);
  EXPECT_LE(MaxOffIdentity(MatMulTransA(f.left, f.left)), 1e-12);
}

TEST(SvdTest, Deterministic) {
  RandomStream rng(13, 0);
  const Matrix m = RandomMatrix(6, 30, rng);
  const SvdFactors a = Svd(m);
  const SvdFactors b = Svd(m);
  EXPECT_EQ(a.singular_values, b.singular_values);
  EXPECT_EQ(a.left, b.left);
  EXPECT_EQ(a.right, b.right);
}

TEST(SvdTest, RejectsNonFinite) {
  Matrix m(2, 2);
  m(0, 1) = std::nan("");
  EXPECT_THROW(Svd(m), std::invalid_argument);
  m(0, 1) = INFINITY;
  EXPECT_THROW(Svd(m), std::invalid_argument);
}

TEST(SvdTest, LeftVectorsMatchFullSvd) {
  RandomStream rng(14, 0);
  const Matrix m = RandomMatrix(5, 64, rng);
  const SvdFactors f = Svd(m);
  const LeftSingular l = LeftSingularVectors(m);
  EXPECT_EQ(f.singular_values, l.singular_values);
  EXPECT_EQ(f.left, l.left);
}

TEST(DctTest, SizeOneIsIdentity) {
  const Matrix t = DctMatrix(1);
  ASSERT_EQ(t.rows(), 1u);
  EXPECT_DOUBLE_EQ(t(0, 0), 1.0);
}

TEST(DctTest, SizeTwoEntries) {
  const Matrix t = DctMatrix(2);
  const double h = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(t(0, 0), h, 1e-15);
  EXPECT_NEAR(t(0, 1), h, 1e-15);
  EXPECT_NEAR(t(1, 0), std::cos(std::numbers::pi / 4.0), 1e-15);
  EXPECT_NEAR(t(1, 1), -h, 1e-15);
  EXPECT_LE(MaxOffIdentity(MatMulTransB(t, t)), 1e-12);
}

TEST(DctTest, OrthonormalUpTo32) {
  for (std::size_t t = 1; t <= 32; ++t) {
    const Matrix m = DctMatrix(t);
    EXPECT_LE(MaxOffIdentity(MatMulTransB(m, m)), 1e-12) << "t=" << t;
  }
}

TEST(DctTest, ConstantChannelOnlyHasDc) {
  const double v = 0.75;
  const std::size_t t = 4;
  Matrix ch(8, 12);
  for (double& x : ch.values()) x = v;
  const Matrix c = DctBlockForward(ch, t);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 12; ++x) {
      const double expected = (y % t == 0 && x % t == 0) ? v * t : 0.0;
      EXPECT_NEAR(c(y, x), expected, 1e-14);
    }
  }
}

TEST(DctTest, ZeroChannelZeroCoefficients) {
  const Matrix c = DctBlockForward(Matrix(8, 8), 4);
  for (double x : c.values()) EXPECT_EQ(x, 0.0);
}

TEST(DctTest, RoundTripAtFullBlock) {
  RandomStream rng(21, 0);
  const Matrix x = RandomMatrix(16, 16, rng);
  const Matrix back = IdctBlock(DctBlockForward(x, 8), 8, 8);
  EXPECT_LE(MaxAbsDiff(x.values(), back.values()), 1e-10);
}

TEST(DctTest, RejectsNonDividingBlock) {
  EXPECT_THROW(DctBlockForward(Matrix(10, 8), 4), std::invalid_argument);
  EXPECT_THROW(IdctBlock(Matrix(8, 8), 4, 5), std::invalid_argument);
}

TEST(DctTest, ConstantSurvivesTruncation) {
  const double v = -1.25;
  Matrix ch(16, 16);
  for (double& x : ch.values()) x = v;
  const Matrix coeffs = DctBlockForward(ch, 8);
  for (std::size_t keep = 1; keep <= 8; ++keep) {
    const Matrix small = IdctBlock(coeffs, 8, keep);
    ASSERT_EQ(small.rows(), 2 * keep);
    for (double x : small.values()) {
      EXPECT_NEAR(x, small(0, 0), 1e-12);  // spatially constant
    }
    // Zero-padded inverse at the source size recovers the input exactly.
    const Matrix padded = IdctBlockPadded(coeffs, 8, keep);
    EXPECT_LE(MaxAbsDiff(padded.values(), ch.values()), 1e-12);
  }
}

TEST(DctTest, DiscardedFrequencyVanishes) {
  Matrix coeffs(8, 8);
  coeffs(7, 7) = 3.0;
  for (std::size_t keep = 1; keep < 8; ++keep) {
    const Matrix out = IdctBlock(coeffs, 8, keep);
    for (double x : out.values()) EXPECT_EQ(x, 0.0);
  }
}

TEST(BlockLowpassTest, MatchesTwoStepTransform) {
  RandomStream rng(22, 0);
  const Matrix x = RandomMatrix(16, 24, rng);
  for (std::size_t keep : {1u, 2u, 4u, 8u}) {
    BlockLowpass lp(8, keep);
    const Matrix expected = IdctBlock(DctBlockForward(x, 8), 8, keep);
    std::vector<double> out(expected.size());
    lp.Apply(x.values(), 16, 24, out);
    EXPECT_LE(MaxAbsDiff(out, expected.values()), 1e-12);
  }
}

TEST(BlockLowpassTest, AdjointIdentity) {
  RandomStream rng(23, 0);
  BlockLowpass lp(8, 3);
  const Matrix x = RandomMatrix(16, 16, rng);
  const Matrix y = RandomMatrix(6, 6, rng);
  std::vector<double> ax(36), aty(256);
  lp.Apply(x.values(), 16, 16, ax);
  lp.ApplyAdjoint(y.values(), 16, 16, aty);
  EXPECT_NEAR(testing::Dot(ax, y.values()), testing::Dot(x.values(), aty),
              1e-11);
}

// Direct sliding-window cross-correlation.
Tensor3 NaiveConv(const Tensor3& in, const Kernel& w, ConvGeometry geo) {
  const std::size_t k = w.size();
  const std::size_t ho = geo.OutExtent(in.height(), k);
  const std::size_t wo = geo.OutExtent(in.width(), k);
  Tensor3 out(w.out_channels(), ho, wo);
  for (std::size_t n = 0; n < w.out_channels(); ++n) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double s = 0.0;
        for (std::size_t c = 0; c < in.channels(); ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(oy * geo.stride + ky) -
                              static_cast<long>(geo.padding);
              const long ix = static_cast<long>(ox * geo.stride + kx) -
                              static_cast<long>(geo.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.height()) ||
                  ix >= static_cast<long>(in.width())) {
                continue;
              }
              s += w(n, c, ky, kx) * in(c, iy, ix);
            }
          }
        }
        out(n, oy, ox) = s;
      }
    }
  }
  return out;
}

TEST(ConvTest, DeltaKernelIsIdentity) {
  RandomStream rng(31, 0);
  const Tensor3 x = RandomTensor(3, 5, 7, rng);
  Kernel w(3, 3, 3);
  for (std::size_t c = 0; c < 3; ++c) w(c, c, 1, 1) = 1.0;
  const Tensor3 y = Conv2dForward(x, w, {1, 1});
  EXPECT_EQ(y.values(), x.values());
}

TEST(ConvTest, AllOnesValidConvolution) {
  Tensor3 x(1, 4, 4);
  for (double& v : x.values()) v = 1.0;
  Kernel w(1, 1, 3);
  for (double& v : w.values()) v = 1.0;
  const Tensor3 y = Conv2dForward(x, w, {1, 0});
  ASSERT_EQ(y.height(), 2u);
  for (double v : y.values()) EXPECT_EQ(v, 9.0);
}

TEST(ConvTest, LoweredMatchesNaiveProperty) {
  RandomStream rng(32, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 1 + rng.Below(4);
    const std::size_t n = 1 + rng.Below(4);
    const std::size_t k = 1 + rng.Below(3);
    const std::size_t h = k + rng.Below(9 - k);
    const std::size_t w = k + rng.Below(9 - k);
    const ConvGeometry geo{1 + rng.Below(2), rng.Below(2) ? k / 2 : 0};
    const Tensor3 x = RandomTensor(c, h, w, rng);
    const Kernel kern = RandomKernel(n, c, k, rng);
    const Tensor3 fast = Conv2dForward(x, kern, geo);
    const Tensor3 slow = NaiveConv(x, kern, geo);
    ASSERT_TRUE(fast.SameShape(slow));
    EXPECT_LE(MaxAbsDiff(fast.values(), slow.values()), 1e-10);
  }
}

TEST(ConvTest, RejectsChannelMismatch) {
  EXPECT_THROW(Conv2dForward(Tensor3(2, 4, 4), Kernel(1, 3, 3), {1, 1}),
               std::invalid_argument);
  EXPECT_THROW(Conv2dBackward(Tensor3(2, 4, 4), Tensor3(3, 4, 4),
                              Kernel(1, 3, 3), {1, 1}),
               std::invalid_argument);
}

TEST(ConvBackwardTest, ZeroUpstreamGivesZeroGradients) {
  RandomStream rng(33, 0);
  const Tensor3 x = RandomTensor(2, 5, 5, rng);
  const Kernel w = RandomKernel(3, 2, 3, rng);
  const ConvGrads g = Conv2dBackward(Tensor3(3, 5, 5), x, w, {1, 1});
  for (double v : g.input.values()) EXPECT_EQ(v, 0.0);
  for (double v : g.weights.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvBackwardTest, ScalarKernelFiniteDifference) {
  Tensor3 x(1, 1, 1, {1.7});
  Kernel w(1, 1, 1, {0.4});
  // loss = 0.5 * y^2 with y = w * x.
  auto loss = [&] {
    const double y = Conv2dForward(x, w, {1, 0})[0];
    return 0.5 * y * y;
  };
  const Tensor3 y = Conv2dForward(x, w, {1, 0});
  const ConvGrads g = Conv2dBackward(Tensor3(1, 1, 1, {y[0]}), x, w, {1, 0});
  const std::vector<double> fd = testing::NumericGradient(w.values(), loss);
  EXPECT_NEAR(g.weights.values()[0], fd[0], 1e-7);
}

TEST(ConvBackwardTest, RandomCaseMatchesFiniteDifferences) {
  RandomStream rng(34, 0);
  for (const ConvGeometry geo : {ConvGeometry{1, 1}, ConvGeometry{2, 1},
                                 ConvGeometry{1, 0}}) {
    Tensor3 x = RandomTensor(2, 6, 6, rng);
    Kernel w = RandomKernel(3, 2, 3, rng);
    const std::size_t ho = geo.OutExtent(6, 3);
    const Tensor3 probe = RandomTensor(3, ho, ho, rng);
    // loss = <probe, tanh(conv(x))> keeps it nonlinear in the parameters.
    auto loss = [&] {
      const Tensor3 y = Conv2dForward(x, w, geo);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += probe[i] * std::tanh(y[i]);
      return s;
    };
    const Tensor3 y = Conv2dForward(x, w, geo);
    Tensor3 upstream = probe;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double th = std::tanh(y[i]);
      upstream[i] *= 1.0 - th * th;
    }
    const ConvGrads g = Conv2dBackward(upstream, x, w, geo);
    EXPECT_LE(RelativeError(g.weights.values(),
                            testing::NumericGradient(w.values(), loss)),
              1e-5);
    EXPECT_LE(RelativeError(g.input.values(),
                            testing::NumericGradient(x.values(), loss)),
              1e-5);
  }
}

TEST(ConvTest, MacCount) {
  EXPECT_EQ(ConvMacs(Kernel(16, 3, 3), 32, 32), 16u * 3 * 9 * 1024);
}

TEST(TensorIoTest, RoundTripIsBitExact) {
  RandomStream rng(41, 0);
  const Tensor3 x = RandomTensor(2, 3, 4, rng);
  const std::vector<std::uint8_t> bytes = EncodeTensor(x);
  ASSERT_EQ(bytes.size(), 16u + 8 * 24);
  EXPECT_EQ(bytes[4], 2);  // little-endian channel count
  EXPECT_EQ(DecodeTensor(bytes), x);
}

TEST(TensorIoTest, RejectsBadMagicAndTruncation) {
  std::vector<std::uint8_t> bytes = EncodeTensor(Tensor3(1, 2, 2));
  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(DecodeTensor(bad), DataError);
  bytes.pop_back();
  try {
    DecodeTensor(bytes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.offset(), 16u);
  }
}

TEST(TensorTest, RejectsNonFiniteOnConstruction) {
  EXPECT_THROW(Tensor3(1, 1, 2, {1.0, std::nan("")}), std::invalid_argument);
  EXPECT_THROW(Tensor3(1, 1, 2, {1.0}), std::invalid_argument);
}

}  // namespace
}  // namespace delta
