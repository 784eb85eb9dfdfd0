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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sardec/common.hpp"
#include "sardec/toy_lm.hpp"

namespace sardec {

// Raised when a verification or assertion step fails (exit status 1).
class VerificationError : public Error {
 public:
  using Error::Error;
};

// Every knob of every subcommand. Defaults are shipped values; a JSON config
// file overrides them and individual flags override the file.
struct RunConfig {
  // Paths. Relative output paths are resolved under out_dir.
  std::string config_file;
  std::string out_dir = "sardec_out";
  std::string corpus;
  std::string questions;
  std::string prompts;
  std::string weights = "weights.json";
  std::string dataset = "dataset.jsonl";
  std::string soft = "soft.json";

  // Base model.
  int dim = 32;
  int n_layers = 2;
  int n_heads = 4;
  int hidden = 128;
  int max_positions = 256;
  int base_steps = 600;
  int base_batch = 8;
  double base_lr = 3e-3;
  int base_warmup = 50;
  double grad_clip = 1.0;
  double heldout_fraction = 0.1;
  double ce_threshold = 0.0;
  double init_scale = 1.0;
  std::uint64_t base_seed = 1;

  // Synthetic corpus.
  int synth_docs = 400;
  std::uint64_t grammar_seed = 7;
  std::uint64_t corpus_seed = 11;

  // Self-generated data.
  int gen_max_new = 40;
  int samples_per_pair = 8;
  std::uint64_t data_seed = 3;

  // Soft parameters and tuning.
  std::string prompting = "deep";
  int prompt_len = 16;
  int n_masks = 3;
  int epochs = 4;
  int tune_batch = 16;
  double lr0 = 3e-2;
  std::string optimizer = "sgd";
  std::uint64_t tune_seed = 5;

  // Decoding.
  std::string mode = "efficient";
  int n = 3;
  int k = 5;
  std::vector<int> k_list = {2};
  int max_new = 40;
  int eos = 1;
  std::string query;
  bool untrained_baseline = true;

  // Lossless verification.
  int trials = 200;
  std::uint64_t verify_seed = 1;
  bool inject_fault = false;

  bool operator==(const RunConfig&) const = default;
};

struct ConfigField {
  std::string name;
  std::string kind;  // "string", "int", "real", "seed", "bool" or "int_list"
};

// Field table in declaration order; drives flag registration and parsing.
const std::vector<ConfigField>& run_config_fields();

// Parses `value` according to the field kind. Lists are comma separated.
void apply_setting(RunConfig& config, std::string_view name, std::string_view value);

// Reads a JSON object whose keys are field names. Unknown keys are an error.
// Relative corpus, questions and prompts paths are taken relative to the
// file's directory.
void apply_config_file(RunConfig& config, const std::string& path);

// Defaults, then the config file (if any), then the flag overrides in order.
RunConfig resolve_config(const std::string& config_file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

// JSON rendering of every field. Output locations are left out so artifacts
// do not depend on where they were written.
std::string run_config_json(const RunConfig& config, int indent = 1);

// out_dir, prefixed with $SARDEC_OUTPUT_ROOT when it is relative and the
// variable is set.
std::string output_root(const RunConfig& config);
// `path` as is when absolute, otherwise under output_root().
std::string output_path(const RunConfig& config, const std::string& path);

ModelConfig model_config_of(const RunConfig& config);

// JSONL ingestion: lines are {"text": ...} or {"question": ...}.
std::vector<std::string> read_jsonl_field(const std::string& path, const std::string& field);

// Subcommands. Each returns a process exit status and prints a short summary
// to stdout; failures are reported by throwing Error subclasses.
int cmd_synth_corpus(const RunConfig& config);
int cmd_train_base(const RunConfig& config);
int cmd_gen_data(const RunConfig& config);
int cmd_tune(const RunConfig& config);
int cmd_decode(const RunConfig& config);
int cmd_verify_lossless(const RunConfig& config);
int cmd_bench(const RunConfig& config);
int cmd_pipeline(const RunConfig& config);

// 0 success, 1 verification or numeric failure, 2 configuration or input error.
int exit_code_for(const std::exception& error);

// One lossless trial. Shared by the CLI and the acceptance suite.
struct LosslessTrial {
  std::size_t index = 0;
  std::uint64_t weights_seed = 0;
  std::uint64_t soft_seed = 0;
  std::vector<TokenId> query;
  PromptingMode prompting = PromptingMode::deep;
  int n = 1;
  int k = 1;
  int n_masks = 1;
  std::size_t max_new = 0;
  std::vector<TokenId> reference;
  // mode name -> first index where the output differs from the reference,
  // or -1 when identical.
  std::map<std::string, long> divergence;
  // mode name -> forward passes used (the reference uses one per token).
  std::map<std::string, std::size_t> passes;

  bool identical() const;
};

LosslessTrial run_lossless_trial(std::uint64_t base_seed, std::size_t index, bool inject_fault);

}  // namespace sardec
