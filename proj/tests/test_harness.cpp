/*
 * Copyright 2026 The sardec Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sardec/harness.hpp"
#include "sardec/soft_store.hpp"

namespace sardec {
namespace {

namespace fs = std::filesystem;

class Harness : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sardec_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ::unsetenv("SARDEC_OUTPUT_ROOT");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }
  std::string read(const std::string& name) const {
    std::stringstream ss;
    ss << std::ifstream(path(name), std::ios::binary).rdbuf();
    return ss.str();
  }
  RunConfig config_in_dir() const {
    RunConfig c;
    c.out_dir = dir_.string();
    return c;
  }

  fs::path dir_;
};

TEST_F(Harness, FlagsOverrideFileOverrideDefaults) {
  write("cfg.json", R"({"n": 2, "k": 4, "lr0": 0.5, "k_list": [1, 3], "corpus": "c.jsonl"})");
  const RunConfig c = resolve_config(path("cfg.json"), {{"k", "2"}, {"untrained_baseline", "false"}});
  EXPECT_EQ(c.n, 2);
  EXPECT_EQ(c.k, 2);
  EXPECT_DOUBLE_EQ(c.lr0, 0.5);
  EXPECT_EQ(c.k_list, (std::vector<int>{1, 3}));
  EXPECT_FALSE(c.untrained_baseline);
  EXPECT_EQ(c.prompt_len, 16);
  EXPECT_EQ(c.corpus, path("c.jsonl"));
}

TEST_F(Harness, BadSettingsAreConfigErrors) {
  write("unknown.json", R"({"nn": 2})");
  write("typed.json", R"({"n": "two"})");
  EXPECT_THROW(resolve_config(path("unknown.json"), {}), ConfigError);
  EXPECT_THROW(resolve_config(path("typed.json"), {}), ConfigError);
  EXPECT_THROW(resolve_config("", {{"n", "2x"}}), ConfigError);
  EXPECT_THROW(resolve_config("", {{"bogus", "1"}}), ConfigError);
  EXPECT_THROW(resolve_config("", {{"inject_fault", "maybe"}}), ConfigError);
  EXPECT_THROW(resolve_config(path("absent.json"), {}), IoError);
  EXPECT_EQ(resolve_config("", {{"k_list", "2,3,4"}}).k_list, (std::vector<int>{2, 3, 4}));
}

TEST_F(Harness, EveryFieldHasAFlagAndSnapshotEntry) {
  RunConfig c;
  const std::string snapshot = run_config_json(c);
  for (const auto& f : run_config_fields()) {
    if (f.name == "out_dir") {
      EXPECT_EQ(snapshot.find("\"out_dir\""), std::string::npos);
    } else {
      EXPECT_NE(snapshot.find("\"" + f.name + "\""), std::string::npos) << f.name;
    }
  }
}

TEST_F(Harness, OutputRootEnvironmentVariable) {
  RunConfig c;
  c.out_dir = "run";
  EXPECT_EQ(output_path(c, "bench.json"), (fs::path("run") / "bench.json").string());
  ::setenv("SARDEC_OUTPUT_ROOT", dir_.c_str(), 1);
  EXPECT_EQ(output_path(c, "bench.json"), (dir_ / "run" / "bench.json").string());
  c.out_dir = "/abs";
  EXPECT_EQ(output_root(c), "/abs");
  ::unsetenv("SARDEC_OUTPUT_ROOT");
}

TEST_F(Harness, JsonlIngestion) {
  write("ok.jsonl", "{\"text\": \"a b\"}\n\n{\"text\": \"c\"}\n");
  write("bad.jsonl", "{\"text\": 3}\n");
  write("garbled.jsonl", "{oops\n");
  EXPECT_EQ(read_jsonl_field(path("ok.jsonl"), "text"), (std::vector<std::string>{"a b", "c"}));
  EXPECT_THROW(read_jsonl_field(path("bad.jsonl"), "text"), ConfigError);
  EXPECT_THROW(read_jsonl_field(path("garbled.jsonl"), "text"), ConfigError);
  EXPECT_THROW(read_jsonl_field(path("ok.jsonl"), "question"), ConfigError);
  EXPECT_THROW(read_jsonl_field(path("none.jsonl"), "text"), IoError);
}

TEST_F(Harness, VerifyLosslessNeedsTrials) {
  RunConfig c = config_in_dir();
  c.trials = 0;
  EXPECT_THROW(cmd_verify_lossless(c), ConfigError);
}

TEST_F(Harness, VerifyLosslessPassesAndReports) {
  RunConfig c = config_in_dir();
  c.trials = 12;
  EXPECT_EQ(cmd_verify_lossless(c), 0);
  EXPECT_NE(read("verify_report.json").find("\"identical\": 12"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("counterexample.json")));
}

TEST_F(Harness, InjectedFaultIsCaughtWithCounterexample) {
  RunConfig c = config_in_dir();
  c.trials = 3;
  c.inject_fault = true;
  EXPECT_EQ(cmd_verify_lossless(c), 1);
  const std::string dump = read("counterexample.json");
  EXPECT_NE(dump.find("\"first_divergent_index\""), std::string::npos);
  EXPECT_NE(dump.find("\"weights_seed\""), std::string::npos);
  EXPECT_NE(dump.find("\"soft_seed\""), std::string::npos);
}

TEST_F(Harness, LosslessTrialsAreReproducible) {
  const LosslessTrial a = run_lossless_trial(4, 17, false);
  const LosslessTrial b = run_lossless_trial(4, 17, false);
  EXPECT_EQ(a.query, b.query);
  EXPECT_EQ(a.reference, b.reference);
  EXPECT_EQ(a.passes, b.passes);
  EXPECT_TRUE(a.identical());
  EXPECT_LE(a.n, a.n_masks);
}

TEST_F(Harness, MissingCorpusIsAStageLabeledError) {
  RunConfig c = config_in_dir();
  c.corpus = path("absent.jsonl");
  try {
    cmd_pipeline(c);
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("[setup]", 0), 0u) << e.what();
    EXPECT_EQ(exit_code_for(e), 2);
  }
}

TEST_F(Harness, BenchWithoutCheckpointsFails) {
  RunConfig c = config_in_dir();
  EXPECT_THROW(cmd_bench(c), IoError);
}

TEST_F(Harness, ExitCodes) {
  EXPECT_EQ(exit_code_for(VerificationError("x")), 1);
  EXPECT_EQ(exit_code_for(NumericError("x")), 1);
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(IoError("x")), 2);
  EXPECT_EQ(exit_code_for(ChecksumError("x")), 2);
}

TEST_F(Harness, TinyPipelineProducesEveryArtifactDeterministically) {
  RunConfig c = config_in_dir();
  c.synth_docs = 60;
  ASSERT_EQ(cmd_synth_corpus(c), 0);
  c.corpus = path("corpus.jsonl");
  c.questions = path("questions.jsonl");
  c.dim = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.hidden = 32;
  c.base_steps = 5;
  c.gen_max_new = 12;
  c.samples_per_pair = 1;
  c.epochs = 1;
  c.prompt_len = 2;
  c.max_new = 8;
  c.k = 3;
  c.untrained_baseline = true;
  ASSERT_EQ(cmd_pipeline(c), 0);
  const std::vector<std::string> files = {"config.json", "weights.json", "train_base.json",
                                          "dataset.jsonl", "dataset.jsonl.config.json",
                                          "soft.json", "tune_log.csv", "tune_log.csv.config.json",
                                          "bench.json", "bench.csv", "bench.csv.config.json",
                                          "timing.json"};
  std::map<std::string, std::string> first;
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(path(f))) << f;
    first[f] = read(f);
  }
  EXPECT_NE(first["timing.json"].find("\"warning\""), std::string::npos);
  EXPECT_NE(first["soft.json"].find("run_config"), std::string::npos);
  ASSERT_EQ(cmd_pipeline(c), 0);
  for (const auto& f : files) {
    if (f == "timing.json") continue;
    EXPECT_EQ(read(f), first[f]) << f;
  }
}

}  // namespace
}  // namespace sardec
