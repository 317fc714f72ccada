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

#include "delta/privacy.h"

#include <cmath>
#include <limits>

#include "delta/decompose.h"
#include "delta/rng.h"
#include "gtest/gtest.h"
#include "oracles.h"
#include "test_util.h"

namespace delta {
namespace {

using testing::BigAmplifyEps;
using testing::BigSigma;

TEST(PhiloxTest, KnownAnswers) {
  using A = std::array<std::uint32_t, 4>;
  EXPECT_EQ(Philox4x32({0, 0, 0, 0}, {0, 0}),
            (A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                       {0xffffffff, 0xffffffff}),
            (A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                       {0xa4093822, 0x299f31d0}),
            (A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStreamTest, StreamsAreReproducibleAndDistinct) {
  RandomStream a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t va = a.NextU64();
    EXPECT_EQ(va, b.NextU64());
    EXPECT_NE(va, c.NextU64());
  }
}

TEST(RandomStreamTest, BelowStaysInRange) {
  RandomStream rng(8, 0);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.Below(7)];
  for (int n : counts) {
    EXPECT_GT(n, 9400);
    EXPECT_LT(n, 10600);
  }
}

TEST(AmplifyTest, FullSamplingIsIdentity) {
  const AmplifiedBudget b = Amplify(0.7, 1e-5, 1.0);
  EXPECT_NEAR(b.epsilon, 0.7, 1e-15);
  EXPECT_NEAR(b.delta, 1e-5, 1e-20);
}

TEST(AmplifyTest, FrozenValues) {
  // mpmath at 50 digits: ln(1 + 0.5(e - 1)).
  EXPECT_NEAR(Amplify(1.0, 1e-3, 0.5).epsilon, 0.62011450695827752, 1e-15);
  EXPECT_NEAR(Amplify(1.0, 1e-3, 0.5).delta, 5e-4, 1e-18);
  // ln(1 + 0.1(e^0.01 - 1)).
  EXPECT_NEAR(Amplify(0.01, 1e-3, 0.1).epsilon, 0.0010045120172451088,
              1e-17);
}

TEST(AmplifyTest, AgreesWithHighPrecisionRoute) {
  RandomStream rng(9, 0);
  for (int i = 0; i < 200; ++i) {
    const double eps_prime = 0.001 + 8.0 * rng.Uniform();
    const double p = 0.001 + 0.999 * rng.Uniform();
    const double got = Amplify(eps_prime, 1e-5, p).epsilon;
    const double want = BigAmplifyEps(eps_prime, p);
    EXPECT_LE(std::abs(got - want), 1e-13 * want);
  }
}

TEST(AmplifyTest, SmallEpsilonIsRoughlyLinear) {
  for (double p : {0.01, 0.1, 0.5}) {
    const double eps = Amplify(1e-3, 1e-6, p).epsilon;
    EXPECT_NEAR(eps / (p * 1e-3), 1.0, 0.01);
  }
}

TEST(AmplifyTest, RejectsBadArguments) {
  EXPECT_THROW(Amplify(0.0, 1e-5, 0.5), std::invalid_argument);
  EXPECT_THROW(Amplify(1.0, 1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(Amplify(1.0, 1e-5, 0.0), std::invalid_argument);
  EXPECT_THROW(Amplify(1.0, 1e-5, 1.5), std::invalid_argument);
}

TEST(CalibrateTest, FrozenValues) {
  // p = 1: eps' = eps = 1, delta' = 1e-6, sigma = sqrt(2 ln(2e6)).
  const PrivacyParams a = Calibrate(1.0, 1e-6, 1.0, 1.0);
  EXPECT_NEAR(a.sigma, 5.3867722689054193, 1e-13);
  const PrivacyParams b = Calibrate(1.4, 1e-6, 0.1, 1.0);
  EXPECT_NEAR(b.eps_prime, 3.4516369679120715, 1e-13);
  EXPECT_NEAR(b.delta_prime, 1e-5, 1e-19);
  EXPECT_NEAR(b.sigma, 2.6594413505925766, 1e-13);
}

TEST(CalibrateTest, RoundTripThroughAmplify) {
  RandomStream rng(10, 0);
  for (int i = 0; i < 200; ++i) {
    const double eps = 0.01 + 5.0 * rng.Uniform();
    const double p = 0.01 + 0.99 * rng.Uniform();
    const double delta = 1e-6;
    const PrivacyParams prm = Calibrate(eps, delta, p, 1.0);
    const AmplifiedBudget back = Amplify(prm.eps_prime, prm.delta_prime, p);
    EXPECT_LE(std::abs(back.epsilon - eps), 1e-12 * eps);
    EXPECT_LE(std::abs(back.delta - delta), 1e-12 * delta);
    EXPECT_LE(std::abs(prm.sigma - BigSigma(eps, delta, p, 1.0)),
              1e-12 * prm.sigma);
  }
}

TEST(CalibrateTest, SigmaIsLinearInClip) {
  const double s1 = Calibrate(0.5, 1e-6, 0.04, 1.0).sigma;
  for (double c : {0.1, 2.0, 7.5}) {
    EXPECT_NEAR(Calibrate(0.5, 1e-6, 0.04, c).sigma, c * s1, 1e-12 * c * s1);
  }
}

TEST(CalibrateTest, SigmaMonotoneInBudgetAndRate) {
  const std::vector<double> eps_grid = {0.05, 0.1, 0.5, 1.0, 2.0, 8.0};
  const std::vector<double> p_grid = {0.01, 0.04, 0.2, 0.6, 1.0};
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    for (std::size_t j = 0; j < p_grid.size(); ++j) {
      const double s = Calibrate(eps_grid[i], 1e-6, p_grid[j], 1.0).sigma;
      if (i + 1 < eps_grid.size()) {
        EXPECT_GT(s, Calibrate(eps_grid[i + 1], 1e-6, p_grid[j], 1.0).sigma);
      }
      if (j + 1 < p_grid.size()) {
        EXPECT_LT(s, Calibrate(eps_grid[i], 1e-6, p_grid[j + 1], 1.0).sigma);
      }
    }
  }
}

TEST(CalibrateTest, InfiniteEpsilonMeansNoNoise) {
  const PrivacyParams prm = Calibrate(
      std::numeric_limits<double>::infinity(), 1e-6, 0.04, 1.0);
  EXPECT_TRUE(prm.unbounded());
  EXPECT_EQ(prm.sigma, 0.0);
}

TEST(CalibrateTest, RejectsDeltaOverRateAtLeastOne) {
  EXPECT_THROW(Calibrate(1.0, 0.05, 0.05, 1.0), std::invalid_argument);
  EXPECT_THROW(Calibrate(1.0, 0.1, 0.05, 1.0), std::invalid_argument);
  EXPECT_THROW(Calibrate(0.0, 1e-6, 0.05, 1.0), std::invalid_argument);
  EXPECT_THROW(Calibrate(1.0, 1e-6, 0.05, 0.0), std::invalid_argument);
}

TEST(CalibrateTest, AccountantJsonKeys) {
  const std::string js = AccountantJson(Calibrate(1.0, 1e-6, 1.0, 1.0));
  for (const char* key : {"\"epsilon\"", "\"delta\"", "\"p\"", "\"C\"",
                          "\"eps_prime\"", "\"delta_prime\"", "\"sigma\""}) {
    EXPECT_NE(js.find(key), std::string::npos) << key;
  }
  EXPECT_NE(js.find("5.38677226891"), std::string::npos);
}

TEST(PerturbTest, ZeroSigmaIsExact) {
  RandomStream rng(11, 0);
  const Tensor3 x = testing::RandomTensor(3, 4, 5, rng);
  EXPECT_EQ(Perturb(x, 0.0, 1, 2), x);
}

TEST(PerturbTest, NoiseMomentsOverAMillionDraws) {
  const double sigma = 2.5;
  const Tensor3 x(1, 1000, 1000);
  const Tensor3 y = Perturb(x, sigma, 12, 0);
  double sum = 0.0, sq = 0.0;
  for (double v : y.values()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(y.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  // 5 standard errors.
  EXPECT_LT(std::abs(mean), 5.0 * sigma / std::sqrt(n));
  EXPECT_LT(std::abs(sd - sigma), 5.0 * sigma / std::sqrt(2.0 * n));
}

TEST(PerturbTest, DeterministicPerStream) {
  const Tensor3 x(2, 3, 3);
  EXPECT_EQ(Perturb(x, 1.0, 5, 9), Perturb(x, 1.0, 5, 9));
  EXPECT_NE(Perturb(x, 1.0, 5, 9), Perturb(x, 1.0, 5, 10));
  EXPECT_NE(Perturb(x, 1.0, 5, 9), Perturb(x, 1.0, 6, 9));
}

TEST(QuantizeTest, SignRule) {
  const Tensor3 x(1, 1, 6, {-2.0, -1e-300, 0.0, -0.0, 1e-300, 3.0});
  const BitTensor b = Quantize(x);
  EXPECT_FALSE(b.Get(0));
  EXPECT_FALSE(b.Get(1));
  EXPECT_TRUE(b.Get(2));
  EXPECT_TRUE(b.Get(3));  // -0.0 >= 0
  EXPECT_TRUE(b.Get(4));
  EXPECT_TRUE(b.Get(5));
  ASSERT_EQ(b.packed().size(), 1u);
  EXPECT_EQ(b.packed()[0], 0b00111100);
}

TEST(QuantizeTest, IdempotentOnCenteredBits) {
  RandomStream rng(13, 0);
  const Tensor3 x = testing::RandomTensor(3, 5, 7, rng);
  const BitTensor once = Quantize(x);
  // Bits read back as {-1, +1} keep their sign, so re-quantizing is a no-op.
  Tensor3 centered = once.ToFloats();
  for (double& v : centered.values()) v = 2.0 * v - 1.0;
  EXPECT_EQ(Quantize(centered), once);
  // Read back as {0, 1} every entry is >= 0 and maps to 1.
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_TRUE(Quantize(once.ToFloats()).Get(i));
  }
}

TEST(QuantizeTest, PackingIsChannelMajorMsbFirst) {
  BitTensor b(2, 1, 5);  // 10 bits -> 2 bytes
  b.Set(0, true);
  b.Set(9, true);
  ASSERT_EQ(b.packed().size(), 2u);
  EXPECT_EQ(b.packed()[0], 0x80);
  EXPECT_EQ(b.packed()[1], 0x40);
  EXPECT_THROW(BitTensor(2, 1, 5, {0x80}), std::invalid_argument);
  EXPECT_THROW(BitTensor(2, 1, 5, {0x80, 0x41}), std::invalid_argument);
}

TEST(ResidualCacheTest, SignPatternWithoutNoise) {
  const PrivacyParams prm =
      Calibrate(std::numeric_limits<double>::infinity(), 1e-6, 0.04, 1.0);
  const Tensor3 r(1, 2, 2, {0.1, -0.2, 0.0, -0.3});
  const std::vector<Tensor3> rs = {r};
  const std::vector<std::uint64_t> ids = {42};
  const ResidualCache cache = BuildCache(rs, ids, prm, 1);
  ASSERT_TRUE(cache.Contains(42));
  const BitTensor& b = cache.Get(42);
  EXPECT_TRUE(b.Get(0));
  EXPECT_FALSE(b.Get(1));
  EXPECT_TRUE(b.Get(2));
  EXPECT_FALSE(b.Get(3));
  EXPECT_THROW(cache.Get(7), std::out_of_range);
}

TEST(ResidualCacheTest, RejectsOverSensitivityAndDuplicates) {
  const PrivacyParams prm = Calibrate(0.5, 1e-6, 0.04, 1.0);
  const std::vector<Tensor3> big = {Tensor3(1, 1, 2, {1.0, 1.0})};
  const std::vector<std::uint64_t> one = {0};
  EXPECT_THROW(BuildCache(big, one, prm, 1), std::invalid_argument);
  const std::vector<Tensor3> two = {Tensor3(1, 1, 1, {0.1}),
                                    Tensor3(1, 1, 1, {0.2})};
  const std::vector<std::uint64_t> dup = {3, 3};
  EXPECT_THROW(BuildCache(two, dup, prm, 1), std::invalid_argument);
}

TEST(ResidualCacheTest, NoiseDependsOnlyOnSampleId) {
  const PrivacyParams prm = Calibrate(0.5, 1e-6, 0.04, 1.0);
  RandomStream rng(14, 0);
  Tensor3 a = testing::RandomTensor(2, 4, 4, rng);
  Tensor3 b = testing::RandomTensor(2, 4, 4, rng);
  a = NormalizeResidual(a, 1.0);
  b = NormalizeResidual(b, 1.0);
  const std::vector<Tensor3> ab = {a, b}, ba = {b, a};
  const std::vector<std::uint64_t> ids_ab = {10, 11}, ids_ba = {11, 10};
  const ResidualCache c1 = BuildCache(ab, ids_ab, prm, 5);
  const ResidualCache c2 = BuildCache(ba, ids_ba, prm, 5);
  EXPECT_EQ(c1.Get(10), c2.Get(10));
  EXPECT_EQ(c1.Get(11), c2.Get(11));
}

}  // namespace
}  // namespace delta
