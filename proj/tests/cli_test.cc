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

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <map>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "delta/config.h"
#include "delta/report.h"
#include "gtest/gtest.h"

namespace delta {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

Result RunCli(const std::string& args) {
  const std::string cmd = std::string(DELTA_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("delta_cli_" +
            std::string(testing::UnitTest::GetInstance()
                            ->current_test_info()
                            ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.cfg")
        << "# tiny synthetic run\n"
        << "synthetic_n = 120\nsynthetic_height = 16\n"
        << "synthetic_width = 16\nbatch_size = 30\n"
        << "ep1 = 1\nep2 = 1\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Train(const std::string& name, const std::string& extra) {
    const fs::path out = dir_ / name;
    const Result r = RunCli("train -c " + (dir_ / "small.cfg").string() +
                            " --out " + out.string() + " " + extra);
    EXPECT_EQ(r.code, 0) << r.out;
    return out.string();
  }

  fs::path dir_;
};

TEST_F(CliTest, AccountPrintsCalibratedSigma) {
  const Result r = RunCli("account --epsilon 1 --delta 1e-6 --p 1 --C 1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"sigma\": 5.38677226891"), std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("\"eps_prime\": 1,"), std::string::npos) << r.out;
}

TEST_F(CliTest, StageOneOnlyRunSendsNoPublicBytes) {
  const std::string run = Train("r", "--ep2 0");
  EXPECT_EQ(Slurp(fs::path(run) / "transcript.csv"),
            "index,direction,kind,bytes,phase\n");
  const RunSummary s =
      ParseTrainReport(Slurp(fs::path(run) / "report.json"), run);
  EXPECT_EQ(s.input, (Shape{3, 16, 16}));
  for (const char* f : {"config.txt", "report.json", "transcript.csv",
                        "ckpt/bb.dltp", "ckpt/main.dltp", "ckpt/res.dltp"}) {
    EXPECT_TRUE(fs::exists(fs::path(run) / f)) << f;
  }
}

TEST_F(CliTest, TrainIsByteReproducible) {
  const fs::path a = Train("a", "");
  const fs::path b = Train("b", "");
  for (const char* f : {"report.json", "transcript.csv", "ckpt/bb.dltp",
                        "ckpt/main.dltp", "ckpt/res.dltp"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
  // config.txt differs only in the out key.
  EXPECT_NE(Slurp(a / "config.txt"), Slurp(b / "config.txt"));
}

TEST_F(CliTest, ReportSortsByEpsilon) {
  const std::string inf = Train("inf", "");
  const std::string half = Train("half", "--epsilon 0.5");
  const std::string mid = Train("mid", "--epsilon 1.4");
  const Result r = RunCli("report " + inf + " " + half + " " + mid);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto p_half = r.out.find("0.500");
  const auto p_mid = r.out.find("1.400");
  const auto p_inf = r.out.find(" inf ");
  ASSERT_NE(p_half, std::string::npos) << r.out;
  ASSERT_NE(p_mid, std::string::npos) << r.out;
  ASSERT_NE(p_inf, std::string::npos) << r.out;
  EXPECT_LT(p_half, p_mid);
  EXPECT_LT(p_mid, p_inf);
  EXPECT_NE(r.out.find("acc_merged"), std::string::npos);
}

TEST_F(CliTest, InferExchangesTwoFrames) {
  const std::string run = Train("r", "");
  const fs::path x = dir_ / "x.dlt";
  const Result s = RunCli("sample -c " + (dir_ / "small.cfg").string() +
                          " --index 3 --output " + x.string());
  ASSERT_EQ(s.code, 0) << s.out;
  const fs::path t = dir_ / "t.csv";
  const Result r = RunCli("infer --run " + run + " --input " + x.string() +
                          " --transcript " + t.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const int cls = std::stoi(r.out);
  EXPECT_GE(cls, 0);
  EXPECT_LT(cls, 4);
  const std::string csv = Slurp(t);
  EXPECT_NE(csv.find("0,private->public,residual-bits,"), std::string::npos);
  EXPECT_NE(csv.find("1,public->private,logits,54,inference"),
            std::string::npos);
}

TEST_F(CliTest, SpectrumIsMonotone) {
  const fs::path csv = dir_ / "s.csv";
  const Result r = RunCli("spectrum -c " + (dir_ / "small.cfg").string() +
                          " --samples 16 --output " + csv.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream in(Slurp(csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "kind,param,rel_error");
  std::map<std::string, std::vector<double>> curves;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    curves[line.substr(0, a)].push_back(std::stod(line.substr(b + 1)));
  }
  ASSERT_EQ(curves["svd"].size(), 3u);
  ASSERT_EQ(curves["dct"].size(), 8u);
  for (const auto& [kind, v] : curves) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      EXPECT_LE(v[i], v[i - 1] + 1e-12) << kind;
    }
    EXPECT_LT(v.back(), 1e-9) << kind;
  }
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(RunCli("").code, 1);
  EXPECT_EQ(RunCli("train --no-such-flag 1").code, 1);
  std::ofstream(dir_ / "bad.cfg") << "no_such_key = 1\n";
  EXPECT_EQ(RunCli("train -c " + (dir_ / "bad.cfg").string()).code, 1);
  EXPECT_EQ(RunCli("train --idx_images /no/such/file").code, 1);

  const std::string run = Train("r", "");
  std::ofstream(dir_ / "junk.dlt") << "junk";
  EXPECT_EQ(RunCli("infer --run " + run + " --input " +
                   (dir_ / "junk.dlt").string())
                .code,
            2);
  std::ofstream(fs::path(run) / "ckpt" / "res.dltp") << "DLTP";
  const fs::path x = dir_ / "x.dlt";
  ASSERT_EQ(RunCli("sample -c " + (dir_ / "small.cfg").string() +
                   " --output " + x.string())
                .code,
            0);
  EXPECT_EQ(RunCli("infer --run " + run + " --input " + x.string()).code, 2);

  const Result div = RunCli("train -c " + (dir_ / "small.cfg").string() +
                            " --out " + (dir_ / "d").string() + " --lr 1e9");
  EXPECT_EQ(div.code, 4) << div.out;
}

// ------------------------------------------------------------ RunConfig

TEST(RunConfigTest, DefaultsAreTheBenchmark) {
  const RunConfig c = ParseRunConfig("");
  EXPECT_EQ(c.dataset, "synthetic");
  EXPECT_EQ(c.synthetic.n, 2000u);
  EXPECT_EQ(c.num_classes, 4u);
  EXPECT_EQ(c.decomposition.r, 2u);
  EXPECT_EQ(c.decomposition.t, 8u);
  EXPECT_EQ(c.decomposition.t_prime, 4u);
  EXPECT_EQ(c.train.ep1, 15u);
  EXPECT_TRUE(std::isinf(c.train.epsilon));
}

TEST(RunConfigTest, ParsesCommentsAndWhitespace) {
  const RunConfig c = ParseRunConfig(
      "# header\n\n  ep1 =  3  # trailing\nepsilon = inf\nlr=0.05\n"
      "batch_norm = false\nmode = none\n");
  EXPECT_EQ(c.train.ep1, 3u);
  EXPECT_EQ(c.train.lr, 0.05);
  EXPECT_FALSE(c.batch_norm);
  EXPECT_EQ(c.mode, "none");
}

TEST(RunConfigTest, RejectsBadInput) {
  EXPECT_THROW(ParseRunConfig("foo = 1\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("ep1 = 1\nep1 = 2\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("ep1 = -1\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("ep1 = 2x\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("lr\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("batch_norm = maybe\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("mode = float\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("dataset = idx\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("idx_images = /no/such/path\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("val_fraction = 0\n"), ConfigError);
  try {
    ParseRunConfig("ep1 = 1\n\nbogus = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(RunConfigTest, TextRoundTrip) {
  RunConfig c = ParseRunConfig("ep2 = 7\nepsilon = 0.5\nsigma = 1.25\n");
  const RunConfig back = ParseRunConfig(c.ToText());
  EXPECT_EQ(back.ToText(), c.ToText());
  EXPECT_EQ(back.train.ep2, 7u);
  EXPECT_EQ(back.train.epsilon, 0.5);
  EXPECT_EQ(back.train.sigma, 1.25);
  for (const ConfigKey& k : RunConfig::Keys()) {
    EXPECT_NE(c.ToText().find(k.name + " = "), std::string::npos) << k.name;
  }
}

TEST(ComparisonTableTest, MainOnlyFirstThenAscendingEpsilon) {
  std::vector<RunSummary> runs(4);
  runs[0].path = "inf";
  runs[0].residual_mode = "bits";
  runs[0].privacy.epsilon = INFINITY;
  runs[1].path = "b";
  runs[1].residual_mode = "bits";
  runs[1].privacy.epsilon = 1.4;
  runs[2].path = "a";
  runs[2].residual_mode = "bits";
  runs[2].privacy.epsilon = 0.5;
  runs[3].path = "m";
  runs[3].residual_mode = "none";
  const std::string t = ComparisonTable(runs);
  std::vector<std::string> order;
  std::istringstream in(t);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) order.push_back(line.substr(0, line.find(' ')));
  EXPECT_EQ(order, (std::vector<std::string>{"m", "a", "b", "inf"}));
}

}  // namespace
}  // namespace delta
