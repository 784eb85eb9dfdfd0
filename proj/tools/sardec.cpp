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

#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "sardec/harness.hpp"

namespace {

struct Subcommand {
  const char* name;
  const char* help;
  std::function<int(const sardec::RunConfig&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Draft-and-verify decoding toolkit for a small transformer"};
  app.require_subcommand(1);

  const std::vector<Subcommand> commands = {
      {"synth-corpus", "write a synthetic question/answer corpus", sardec::cmd_synth_corpus},
      {"train-base", "train the frozen base language model", sardec::cmd_train_base},
      {"gen-data", "self-generate answers and slice them into training samples", sardec::cmd_gen_data},
      {"tune", "fit prompt and mask parameters on a dataset", sardec::cmd_tune},
      {"decode", "decode one query", sardec::cmd_decode},
      {"verify-lossless", "randomized check that every mode matches greedy decoding",
       sardec::cmd_verify_lossless},
      {"bench", "compare forward-pass counts across decoding modes", sardec::cmd_bench},
      {"pipeline", "train, generate, tune and bench in one output directory", sardec::cmd_pipeline},
  };

  // Every subcommand accepts every setting as a flag; values are parsed by the
  // harness so a flag and a config-file entry behave identically.
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::string> config_files;
  std::vector<std::pair<CLI::App*, const Subcommand*>> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_files[cmd.name], "JSON file of settings");
    for (const auto& field : sardec::run_config_fields()) {
      if (field.name == "config_file") continue;
      std::string flag = "--" + field.name;
      for (char& ch : flag) {
        if (ch == '_') ch = '-';
      }
      sub->add_option(flag, raw[cmd.name][field.name], field.kind);
    }
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const auto& field : sardec::run_config_fields()) {
        if (field.name == "config_file") continue;
        std::string flag = "--" + field.name;
        for (char& ch : flag) {
          if (ch == '_') ch = '-';
        }
        if (sub->count(flag) > 0) overrides.emplace_back(field.name, raw[cmd->name][field.name]);
      }
      const sardec::RunConfig config = sardec::resolve_config(config_files[cmd->name], overrides);
      return cmd->run(config);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return sardec::exit_code_for(e);
    }
  }
  return 2;
}
