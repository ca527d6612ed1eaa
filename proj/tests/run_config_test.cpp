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

#include <sstream>

#include <gtest/gtest.h>

#include "antehoc/run_config.hpp"

namespace antehoc {
namespace {

ConfigMap parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

TEST(Config, ParsesKeysCommentsAndBlankLines) {
  const ConfigMap m = parse("# header\n\ndataset = data/x.jsonl\n  inner_lr=0.05  # trailing\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("dataset"), "data/x.jsonl");
  EXPECT_EQ(m.at("inner_lr"), "0.05");
}

TEST(Config, UnknownKeysAndBadLinesAreRejected) {
  EXPECT_THROW(parse("learning_rate = 1\n"), ParameterError);
  EXPECT_THROW(parse("inner_lr\n"), ParameterError);
  try {
    parse("dataset = a\nbogus = 2\n");
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Config, Defaults) {
  const RunConfig rc;
  EXPECT_EQ(rc.train.inner_steps, 20u);
  EXPECT_EQ(rc.train.outer_steps, 100u);
  EXPECT_EQ(rc.train.inner_lr, 0.001);
  EXPECT_EQ(rc.train.outer_lr, 0.001);
  EXPECT_EQ(rc.train.inner_l2, 0.001);
  EXPECT_EQ(rc.train.outer_l1, 0.001);
  EXPECT_EQ(rc.train.outer_l2, 0.001);
  EXPECT_EQ(rc.train.patience, 10u);
  EXPECT_EQ(rc.train.inner_optimizer, InnerOptimizer::kSgd);
  EXPECT_EQ(rc.train.l1_reduction, L1Reduction::kSum);
  EXPECT_EQ(rc.seeds.size(), 20u);
  EXPECT_EQ(rc.method, Method::kRage);
}

TEST(Config, ApplyOverridesAndValidates) {
  const RunConfig rc = apply_config(RunConfig{}, parse("method = keep\ninner_steps = 5\ninner_optimizer = adam\n"
                                                       "l1_reduction = graph\nseeds = 2,4-5\n"));
  EXPECT_EQ(rc.method, Method::kKeep);
  EXPECT_EQ(rc.train.inner_steps, 5u);
  EXPECT_EQ(rc.train.inner_optimizer, InnerOptimizer::kAdam);
  EXPECT_EQ(rc.train.l1_reduction, L1Reduction::kPerGraph);
  EXPECT_EQ(rc.seeds, (std::vector<std::uint64_t>{2, 4, 5}));
  EXPECT_THROW(apply_config(RunConfig{}, parse("inner_steps = 0\n")), ParameterError);
  EXPECT_THROW(apply_config(RunConfig{}, parse("inner_lr = fast\n")), ParameterError);
  EXPECT_THROW(apply_config(RunConfig{}, parse("patience = -1\n")), ParameterError);
  EXPECT_THROW(apply_config(RunConfig{}, parse("method = other\n")), ParameterError);
}

TEST(Config, MethodAliases) {
  EXPECT_EQ(parse_method("full"), Method::kRage);
  EXPECT_EQ(parse_method("rage-single"), Method::kSingle);
  EXPECT_EQ(parse_method("rage-keep"), Method::kKeep);
}

TEST(SeedList, RangesAndLists) {
  EXPECT_EQ(parse_seed_list("3"), (std::vector<std::uint64_t>{3}));
  EXPECT_EQ(parse_seed_list("1-3,7"), (std::vector<std::uint64_t>{1, 2, 3, 7}));
  EXPECT_THROW(parse_seed_list("5-2"), ParameterError);
  EXPECT_THROW(parse_seed_list("a"), ParameterError);
  EXPECT_THROW(parse_seed_list(""), ParameterError);
}

TEST(Digest, StableAndSensitiveToResultKeys) {
  RunConfig a;
  a.dataset = "d.jsonl";
  RunConfig b = a;
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 16u);
  b.train.outer_lr = 0.002;
  EXPECT_NE(a.digest(), b.digest());
  // The output directory does not influence results.
  RunConfig c = a;
  c.out_dir = "elsewhere";
  EXPECT_EQ(a.digest(), c.digest());
  // Key order in the file does not matter.
  const RunConfig x = apply_config(RunConfig{}, parse("width = 8\ninner_lr = 0.1\n"));
  const RunConfig y = apply_config(RunConfig{}, parse("inner_lr = 0.1\nwidth = 8\n"));
  EXPECT_EQ(x.digest(), y.digest());
}

}  // namespace
}  // namespace antehoc
