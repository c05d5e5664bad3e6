/*
 * Copyright 2026 The pacstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "pacstab/cli.hpp"
#include "pacstab/dataset.hpp"
#include "pacstab/model.hpp"
#include "test_util.hpp"

namespace pacstab {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome Invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "pacstab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = ParseAndDispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = TempDir("cli");
    train_ = (dir_ / "train.fds").string();
    test_ = (dir_ / "test.fds").string();
    ASSERT_EQ(Invoke({"synth", "--n", "300", "--d", "6", "--classes", "3", "--sep", "3",
                   "--seed", "1", "--out", train_})
                  .code,
              0);
    ASSERT_EQ(Invoke({"synth", "--n", "90", "--d", "6", "--classes", "3", "--sep", "3",
                   "--seed", "2", "--out", test_})
                  .code,
              0);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::string train_;
  std::string test_;
};

TEST_F(CliTest, HelpListsEveryFlag) {
  const auto r = Invoke({"train", "--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--data", "--test", "--config", "--lr", "--epochs", "--momentum",
                           "--nesterov", "--weight-decay", "--clip", "--clip-threshold",
                           "--group-size", "--prune-fraction", "--prune-when",
                           "--record-every", "--freeze", "--init", "--seed", "--out"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  EXPECT_EQ(Invoke({"--help"}).code, 0);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(Invoke({}).code, kExitError);
  EXPECT_EQ(Invoke({"frobnicate"}).code, kExitError);
  const auto missing = Invoke({"train", "--data", (dir_ / "nope.fds").string(), "--out", "x"});
  EXPECT_EQ(missing.code, kExitError);
  EXPECT_NE(missing.err.find("error"), std::string::npos);
  const auto bad_value = Invoke({"train", "--data", train_, "--lr", "fast", "--out",
                              (dir_ / "m.pvc").string()});
  EXPECT_EQ(bad_value.code, kExitError);
  EXPECT_NE(bad_value.err.find("lr"), std::string::npos);
}

TEST_F(CliTest, CorruptDataReportsByteOffset) {
  const auto bad = dir_ / "bad.fds";
  std::ofstream(bad, std::ios::binary) << "FDS1xx";
  const auto r = Invoke({"train", "--data", bad.string(), "--out", (dir_ / "m.pvc").string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("byte"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainPrintsConfigAndFlagsOverrideFile) {
  const auto cfg = dir_ / "train.cfg";
  std::ofstream(cfg) << "lr = 0.05\nepochs = 3\n";
  const auto r = Invoke({"train", "--data", train_, "--config", cfg.string(), "--epochs", "4",
                      "--out", (dir_ / "m.pvc").string(), "--trace",
                      (dir_ / "t.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("[config]\ncommand = train\n", 0), 0u);
  EXPECT_NE(r.out.find("lr = 0.05\n"), std::string::npos);
  EXPECT_NE(r.out.find("epochs = 4\n"), std::string::npos);
  EXPECT_NE(r.out.find("[result]"), std::string::npos);
  const auto m = LoadParamVector(dir_ / "m.pvc");
  EXPECT_EQ(m.layout().feature_dim, 6u);
  EXPECT_EQ(m.layout().n_classes, 3u);
  EXPECT_EQ(Slurp(dir_ / "t.csv").rfind("epoch,loss,test_accuracy\n", 0), 0u);
}

TEST_F(CliTest, UnknownConfigKeyFails) {
  const auto cfg = dir_ / "train.cfg";
  std::ofstream(cfg) << "learning_rate = 0.05\n";
  const auto r = Invoke({"train", "--data", train_, "--config", cfg.string(), "--out",
                      (dir_ / "m.pvc").string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos);
}

TEST_F(CliTest, EnsembleDeterministicAcrossWorkers) {
  const auto a = dir_ / "a";
  const auto b = dir_ / "b";
  const std::vector<std::string> common = {"ensemble", "--data", train_, "--test", test_,
                                           "--models", "4", "--subset-size", "200",
                                           "--epochs", "10", "--seed", "5"};
  auto args_a = common;
  args_a.insert(args_a.end(), {"--workers", "1", "--out", a.string()});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--workers", "4", "--out", b.string()});
  const auto ra = Invoke(args_a);
  const auto rb = Invoke(args_b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  for (const char* f : {"deviation.csv", "report.json", "trace_0.csv", "trace_3.csv",
                        "models/member_0.pvc", "models/member_3.pvc"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
    EXPECT_FALSE(Slurp(a / f).empty()) << f;
  }
  EXPECT_EQ(ra.out.substr(ra.out.find("[result]")), rb.out.substr(rb.out.find("[result]")));
}

TEST_F(CliTest, StabilityOfIdenticalModelsIsZero) {
  const auto m = (dir_ / "m.pvc").string();
  ASSERT_EQ(Invoke({"train", "--data", train_, "--epochs", "3", "--out", m}).code, 0);
  const auto r = Invoke({"stability", "--models", m, m, "--json", (dir_ / "s.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("deviation_l2 = 0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n_models = 2\n"), std::string::npos);
  EXPECT_EQ(Invoke({"stability", "--models", m}).code, kExitError);
}

TEST_F(CliTest, PrivatizeModelAndData) {
  const auto ens = dir_ / "ens";
  ASSERT_EQ(Invoke({"ensemble", "--data", train_, "--models", "3", "--subset-size", "150",
                 "--epochs", "5", "--out", ens.string()})
                .code,
            0);
  const auto m0 = (ens / "models" / "member_0.pvc").string();
  const auto m1 = (ens / "models" / "member_1.pvc").string();
  const auto m2 = (ens / "models" / "member_2.pvc").string();
  const auto out = (dir_ / "p.pvc").string();
  const auto r = Invoke({"privatize", "--model", m0, "--ensemble", m0, m1, m2, "--noise-seed",
                      "9", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("noise_l2 = "), std::string::npos);
  EXPECT_NE(LoadParamVector(out), LoadParamVector(m0));
  // Same seed, same output.
  const auto again = (dir_ / "q.pvc").string();
  ASSERT_EQ(Invoke({"privatize", "--model", m0, "--ensemble", m0, m1, m2, "--noise-seed", "9",
                 "--out", again})
                .code,
            0);
  EXPECT_EQ(Slurp(out), Slurp(again));

  const auto noisy = (dir_ / "noisy.csv").string();
  const auto d = Invoke({"privatize", "--data", train_, "--input-sigma", "0.5", "--noise-seed",
                      "1", "--out", noisy});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_EQ(LoadDataset(noisy, DatasetFormat::csv).n_samples(), 300u);
}

TEST_F(CliTest, ConvertRoundTrip) {
  const auto csv = (dir_ / "train.csv").string();
  const auto back = (dir_ / "back.fds").string();
  ASSERT_EQ(Invoke({"convert", "--in", train_, "--out", csv}).code, 0);
  ASSERT_EQ(Invoke({"convert", "--in", csv, "--out", back, "--classes", "3"}).code, 0);
  EXPECT_EQ(Slurp(train_), Slurp(back));
}

TEST_F(CliTest, TreeTrainsNineNodes) {
  const auto data = (dir_ / "ten.fds").string();
  ASSERT_EQ(Invoke({"synth", "--n", "500", "--d", "12", "--classes", "10", "--sep", "4",
                 "--seed", "3", "--out", data})
                .code,
            0);
  const auto r = Invoke({"tree", "--data", data, "--epochs", "20", "--out",
                      (dir_ / "tree").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("node_classifiers = 9\n"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "tree" / "tree.json"));
}

TEST_F(CliTest, ExperimentReadsDataFromSpec) {
  const auto spec = dir_ / "group.cfg";
  std::ofstream(spec) << "experiment = group_clip_sweep\ndata = train.fds\ntest = test.fds\n"
                         "sweep = 10, 100\nensemble_size = 3\nsubset_size = 200\n"
                         "epochs = 6\nrecord_every = 3\nseed = 4\n";
  const auto out = dir_ / "results";
  const auto r = Invoke({"experiment", "--spec", spec.string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("experiment = group_clip_sweep\n"), std::string::npos);
  EXPECT_NE(r.out.find("cell 1: value = 100"), std::string::npos) << r.out;
  for (const char* f : {"report.json", "config.txt", "deviation_0.csv", "deviation_1.csv",
                        "series_1_2.csv", "models/sweep_1_member_2.pvc"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  // Flags override the spec file.
  const auto r2 = Invoke({"experiment", "--spec", spec.string(), "--sweep", "25", "--workers",
                       "2", "--out", (dir_ / "r2").string()});
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_NE(r2.out.find("sweep = 25\n"), std::string::npos);
  EXPECT_EQ(r2.out.find("cell 1:"), std::string::npos);
}

TEST(CliBinary, ProcessExitCodes) {
  const std::string tool = PACSTAB_TOOL;
  const int help = std::system((tool + " --help > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(help));
  EXPECT_EQ(WEXITSTATUS(help), 0);
  const int bad = std::system((tool + " train --data /nonexistent.fds --out x.pvc"
                                      " > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(bad));
  EXPECT_EQ(WEXITSTATUS(bad), 2);
}

}  // namespace
}  // namespace pacstab
