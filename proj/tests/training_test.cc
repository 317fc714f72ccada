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

#include "delta/training.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "delta/errors.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace delta {
namespace {

using testing::RandomVector;

TEST(PrivateBackpropTest, UniformLogits) {
  const std::vector<double> z(2, 0.0);
  const std::vector<double> y = {1.0, 0.0};
  const PrivateGrads g = PrivateBackprop(z, z, y, 1.0);
  EXPECT_DOUBLE_EQ(g.g_main[0], -0.5);
  EXPECT_DOUBLE_EQ(g.g_main[1], 0.5);
  EXPECT_DOUBLE_EQ(g.g_res[0], -0.5);
  EXPECT_DOUBLE_EQ(g.g_res[1], 0.5);
}

TEST(PrivateBackpropTest, ResidualGradientIgnoresMainLogits) {
  RandomStream rng(90, 0);
  for (int i = 0; i < 50; ++i) {
    const auto zr = RandomVector(5, rng, 3.0);
    const auto y = OneHot(rng.Below(5), 5);
    const auto a = PrivateBackprop(RandomVector(5, rng, 3.0), zr, y, 0.7);
    const auto b = PrivateBackprop(RandomVector(5, rng, 30.0), zr, y, 0.7);
    EXPECT_EQ(a.g_res, b.g_res);  // bitwise
  }
}

TEST(PrivateBackpropTest, MainGradientMatchesFiniteDifferences) {
  RandomStream rng(91, 0);
  for (double alpha : {1.0, 0.3}) {
    for (int i = 0; i < 20; ++i) {
      auto zm = RandomVector(4, rng, 2.0);
      const auto zr = RandomVector(4, rng, 2.0);
      const std::size_t label = rng.Below(4);
      const auto g = PrivateBackprop(zm, zr, OneHot(label, 4), alpha);
      const auto num = testing::NumericGradient(zm, [&] {
        return CrossEntropy(MergeLogits(zm, zr, alpha), label);
      });
      EXPECT_LE(testing::RelativeError(g.g_main, num), 1e-6);
    }
  }
}

TEST(CrossEntropyTest, StableForLargeLogits) {
  const std::vector<double> z = {1000.0, 0.0};
  EXPECT_NEAR(CrossEntropy(z, 0), 0.0, 1e-12);
  EXPECT_NEAR(CrossEntropy(z, 1), 1000.0, 1e-9);
}

TEST(SgdTest, ZeroGradientZeroDecayLeavesWeights) {
  std::vector<double> w = {1.0, -2.0}, g = {0.0, 0.0}, v = {0.0, 0.0};
  SgdStep(w, g, v, 0.1, 0.9, 0.0);
  EXPECT_EQ(w, (std::vector<double>{1.0, -2.0}));
}

TEST(SgdTest, PlainStep) {
  std::vector<double> w = {1.0}, g = {1.0}, v = {0.0};
  SgdStep(w, g, v, 0.1, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(w[0], 0.9);
}

TEST(SgdTest, MomentumRecurrence) {
  std::vector<double> w = {0.0}, g = {1.0}, v = {0.0};
  SgdStep(w, g, v, 0.1, 0.9, 0.0);
  SgdStep(w, g, v, 0.1, 0.9, 0.0);
  EXPECT_NEAR(w[0], -0.29, 1e-15);
}

TEST(SgdTest, WeightDecayAddsToGradient) {
  std::vector<double> w = {2.0}, g = {0.0}, v = {0.0};
  SgdStep(w, g, v, 0.5, 0.0, 0.1);
  EXPECT_DOUBLE_EQ(w[0], 2.0 - 0.5 * 0.2);
}

TEST(SgdTest, NonFiniteGradientAborts) {
  std::vector<double> w = {1.0}, g = {std::nan("")}, v = {0.0};
  EXPECT_THROW(SgdStep(w, g, v, 0.1, 0.9, 0.0), DivergenceError);
}

TEST(CosineLrTest, Endpoints) {
  EXPECT_DOUBLE_EQ(CosineLr(0.1, 0, 100), 0.1);
  EXPECT_NEAR(CosineLr(0.1, 50, 100), 0.05, 1e-15);
  EXPECT_NEAR(CosineLr(0.1, 100, 100), 0.0, 1e-15);
}

TEST(EpochBatchesTest, PartitionAndDeterminism) {
  std::vector<std::size_t> ids(103);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = 2 * i;
  const auto a = EpochBatches(ids, 10, 5, 0);
  const auto b = EpochBatches(ids, 10, 5, 0);
  const auto c = EpochBatches(ids, 10, 5, 1);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  ASSERT_EQ(a.size(), 11u);
  EXPECT_EQ(a.back().size(), 3u);
  std::multiset<std::size_t> all;
  for (const auto& batch : a) all.insert(batch.begin(), batch.end());
  EXPECT_EQ(all, std::multiset<std::size_t>(ids.begin(), ids.end()));
}

TEST(TrainConfigTest, SamplingRateAndPrivacy) {
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.epsilon = 0.5;
  EXPECT_DOUBLE_EQ(cfg.SamplingRate(1600), 0.04);
  const PrivacyParams p = cfg.Privacy(1600, 1.0);
  EXPECT_DOUBLE_EQ(p.p, 0.04);
  EXPECT_NEAR(Amplify(p.eps_prime, p.delta_prime, p.p).epsilon, 0.5, 1e-12);
  cfg.sigma = 0.25;
  EXPECT_EQ(cfg.Privacy(1600, 1.0).sigma, 0.25);
}

// Small, fast setup: 3x16x16 inputs, IR 16x8x8, main input 16x4x4.
struct Small {
  ModelSpec spec;
  Dataset data;
  TrainConfig cfg;
};

Small MakeSmall(std::size_t classes, bool pair_split, std::size_t n,
                std::uint64_t seed) {
  Small s;
  SyntheticParams sp;
  sp.n = n;
  sp.classes = classes;
  sp.height = 16;
  sp.width = 16;
  sp.pair_split = pair_split;
  sp.seed = seed;
  s.data = MakeSynthetic(sp);
  SplitTrainVal(s.data, 0.25, seed);
  s.spec = ModelSpec::Toy({3, 16, 16}, classes, {2, 4, 2, 1.0});
  s.cfg.batch_size = 32;
  s.cfg.seed = seed;
  return s;
}

TEST(Stage1Test, SeparableTwoClassProblem) {
  Small s = MakeSmall(2, false, 200, 7);
  s.cfg.ep1 = 20;
  Models m = BuildModels(s.spec, 7);
  TrainReport report;
  Stage1(s.spec, m, s.data, s.cfg, report);
  ASSERT_EQ(report.epochs.size(), 20u);
  EXPECT_GE(report.epochs.back().val_main, 0.95);
}

TEST(Stage1Test, BitwiseDeterministic) {
  Small s = MakeSmall(4, true, 96, 8);
  s.cfg.ep1 = 2;
  Models a = BuildModels(s.spec, 8);
  Models b = BuildModels(s.spec, 8);
  TrainReport ra, rb;
  Stage1(s.spec, a, s.data, s.cfg, ra);
  Stage1(s.spec, b, s.data, s.cfg, rb);
  EXPECT_EQ(a.bb.Snapshot(), b.bb.Snapshot());
  EXPECT_EQ(a.main.Snapshot(), b.main.Snapshot());
  EXPECT_EQ(ra.epochs[1].train_loss, rb.epochs[1].train_loss);
}

TEST(Stage1Test, BackboneIsTrained) {
  Small s = MakeSmall(4, true, 96, 9);
  s.cfg.ep1 = 1;
  Models m = BuildModels(s.spec, 9);
  const auto before = m.bb.Snapshot();
  TrainReport report;
  Stage1(s.spec, m, s.data, s.cfg, report);
  EXPECT_NE(m.bb.Snapshot(), before);
}

TEST(Stage2Test, BackboneFrozenAndMainTrained) {
  Small s = MakeSmall(4, true, 96, 10);
  s.cfg.ep1 = 1;
  s.cfg.ep2 = 2;
  Models m = BuildModels(s.spec, 10);
  TrainReport report;
  Stage1(s.spec, m, s.data, s.cfg, report);
  const auto bb_before = m.bb.Snapshot();
  const auto main_before = m.main.Snapshot();
  const auto res_before = m.res.Snapshot();
  const PrivacyParams p = s.cfg.Privacy(s.data.train.size(), 1.0);
  DirectFloatPeer peer(
      m.res,
      ReleaseFloatResiduals(s.spec, m.bb, s.data, s.data.train, p, 10),
      s.cfg, StepsFor(s.data.train.size(), s.cfg.batch_size, s.cfg.ep2));
  Stage2(s.spec, m, s.data, s.cfg, &peer, report);
  EXPECT_EQ(m.bb.Snapshot(), bb_before);
  EXPECT_NE(m.main.Snapshot(), main_before);
  EXPECT_NE(m.res.Snapshot(), res_before);
  ASSERT_EQ(report.epochs.size(), 3u);
  EXPECT_EQ(report.epochs.back().stage, "stage2");
  EXPECT_GE(report.FinalMerged(), 0.0);
  EXPECT_LE(report.FinalMerged(), 1.0);
}

TEST(Stage2Test, MainOnlyReportsMainAccuracy) {
  Small s = MakeSmall(4, true, 64, 11);
  s.cfg.ep1 = 1;
  s.cfg.ep2 = 1;
  Models m = BuildModels(s.spec, 11);
  TrainReport report;
  Stage1(s.spec, m, s.data, s.cfg, report);
  Stage2(s.spec, m, s.data, s.cfg, nullptr, report);
  EXPECT_EQ(report.FinalMain(), report.FinalMerged());
}

TEST(Stage1Test, DivergenceIsReported) {
  Small s = MakeSmall(4, true, 64, 12);
  s.cfg.ep1 = 3;
  s.cfg.lr = 1e6;
  Models m = BuildModels(s.spec, 12);
  TrainReport report;
  EXPECT_THROW(Stage1(s.spec, m, s.data, s.cfg, report), DivergenceError);
}

// Stage-1 loss on the default 3x32x32 benchmark falls between the first and
// fifth epoch; median over five seeds.
TEST(Stage1Test, LossDecreasesOnDefaultBenchmark) {
  std::vector<double> drops;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticParams sp;
    sp.seed = seed;
    Dataset data = MakeSynthetic(sp);
    SplitTrainVal(data, 0.2, seed);
    const ModelSpec spec = ModelSpec::Toy({3, 32, 32}, 4, {2, 8, 4, 1.0});
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.ep1 = 5;
    Models m = BuildModels(spec, seed);
    TrainReport report;
    Stage1(spec, m, data, cfg, report);
    drops.push_back(report.epochs[0].train_loss - report.epochs[4].train_loss);
  }
  std::sort(drops.begin(), drops.end());
  EXPECT_GT(drops[2], 0.0);
}

}  // namespace
}  // namespace delta
