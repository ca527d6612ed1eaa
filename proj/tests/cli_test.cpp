// Copyright 2026 The Antehoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the built command-line tool end to end.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#ifndef ANTEHOC_CLI_PATH
#error "ANTEHOC_CLI_PATH must point at the antehoc executable"
#endif

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("antehoc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = "ANTEHOC_OUTPUT_ROOT='" + dir_.string() + "' '" ANTEHOC_CLI_PATH "' " + args +
                            " >'" + (dir_ / "stdout.txt").string() + "' 2>'" + (dir_ / "stderr.txt").string() + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string generate_small(const std::string& name, int seed = 3) const {
    const fs::path out = dir_ / name;
    EXPECT_EQ(run("generate planted-clique --out '" + out.string() + "' --seed " + std::to_string(seed) +
                  " --num-graphs 100 --nodes 10 --p 0.2 --k 4 --dim 4"),
              0);
    return out.string();
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  std::string tiny_flags(const std::string& data, const std::string& seeds = "1-2") const {
    return "--dataset '" + data + "/dataset.jsonl' --out-dir '" + (dir_ / "run").string() + "' --seeds " + seeds +
           " --inner-steps 2 --outer-steps 2 --width 4";
  }

  fs::path dir_;
};

TEST_F(Cli, GenerateIsDeterministic) {
  const std::string a = generate_small("a");
  const std::string b = generate_small("b");
  EXPECT_EQ(slurp(fs::path(a) / "dataset.jsonl"), slurp(fs::path(b) / "dataset.jsonl"));
  EXPECT_EQ(slurp(fs::path(a) / "ground_truth.jsonl"), slurp(fs::path(b) / "ground_truth.jsonl"));
  EXPECT_TRUE(fs::exists(fs::path(a) / "manifest.json"));
  const std::string c = generate_small("c", 4);
  EXPECT_NE(slurp(fs::path(a) / "dataset.jsonl"), slurp(fs::path(c) / "dataset.jsonl"));
}

TEST_F(Cli, NoiseKeepsTheGraphCount) {
  const std::string data = generate_small("d");
  ASSERT_EQ(run("generate noise --input '" + data + "/dataset.jsonl' --x 3 --out '" + (dir_ / "n").string() + "'"), 0);
  EXPECT_EQ(lines(dir_ / "n" / "dataset.jsonl").size(), 100u);
}

TEST_F(Cli, TrainThenEvaluateWritesOneRowPerSeedAndMetric) {
  const std::string data = generate_small("d");
  ASSERT_EQ(run("train " + tiny_flags(data)), 0) << slurp(dir_ / "stderr.txt");
  const fs::path base = dir_ / "run" / "rage";
  for (const char* seed : {"seed-1", "seed-2"}) {
    for (const char* f : {"phi.params", "theta.params", "train_log.csv", "explanations.jsonl"}) {
      EXPECT_TRUE(fs::exists(base / seed / f)) << seed << '/' << f;
    }
  }
  // header + 2 seeds + mean + std
  EXPECT_EQ(lines(base / "metrics.csv").size(), 5u);

  ASSERT_EQ(run("evaluate " + tiny_flags(data) + " --ground-truth '" + data +
                "/ground_truth.jsonl' --skip-reproducibility"),
            0)
      << slurp(dir_ / "stderr.txt");
  // test_auc, test_ap, faithfulness, precision: 4 metrics x (2 seeds + 2 aggregates)
  EXPECT_EQ(lines(base / "evaluation.csv").size(), 1u + 4u * 4u);
}

TEST_F(Cli, TrainingIsReproducible) {
  const std::string data = generate_small("d");
  ASSERT_EQ(run("train " + tiny_flags(data, "1")), 0);
  const std::string first = slurp(dir_ / "run" / "rage" / "seed-1" / "phi.params");
  ASSERT_EQ(run("train " + tiny_flags(data, "1-2") + " --parallel 2"), 0);
  EXPECT_EQ(slurp(dir_ / "run" / "rage" / "seed-1" / "phi.params"), first);
}

TEST_F(Cli, AblationPairsTheThreeMethods) {
  const std::string data = generate_small("d");
  ASSERT_EQ(run("ablate " + tiny_flags(data)), 0) << slurp(dir_ / "stderr.txt");
  const auto rows = lines(dir_ / "run" / "ablation.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].rfind("seed,split_seed,metric,rage,rage-single,rage-keep", 0), 0u);
}

TEST_F(Cli, ExitCodes) {
  const std::string data = generate_small("d");
  EXPECT_EQ(run("train " + tiny_flags(data) + " --inner-steps 0"), 2);
  EXPECT_EQ(run("train " + tiny_flags(data) + " --set bogus=1"), 2);
  EXPECT_EQ(run("train --no-such-flag"), 2);
  EXPECT_EQ(run("train --outer-steps 2"), 2);  // no dataset
  EXPECT_EQ(run("train --dataset '" + (dir_ / "absent.jsonl").string() + "'"), 3);
  std::ofstream(dir_ / "bad.jsonl") << "{oops\n";
  EXPECT_EQ(run("train --dataset '" + (dir_ / "bad.jsonl").string() + "'"), 3);
  EXPECT_EQ(run("evaluate " + tiny_flags(data)), 3);  // no checkpoints yet
}

}  // namespace
