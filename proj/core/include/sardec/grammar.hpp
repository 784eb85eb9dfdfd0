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
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sardec {

// Weighted context-free grammar. Symbols written as "<name>" are
// nonterminals, everything else is emitted verbatim.
class Grammar {
 public:
  struct Production {
    double weight = 1.0;
    std::vector<std::string> symbols;
  };

  void add_rule(const std::string& lhs, double weight, std::vector<std::string> symbols);
  std::string expand(const std::string& symbol, std::mt19937_64& rng) const;
  const std::map<std::string, std::vector<Production>>& rules() const { return rules_; }

 private:
  std::map<std::string, std::vector<Production>> rules_;
};

// Question/answer grammar over animals. The answer is a deterministic function
// of the question; only the question itself carries entropy. Fact tables and
// weights are drawn from `seed`.
Grammar make_demo_grammar(std::uint64_t seed);

// Expands "<S>" `count` times.
std::vector<std::string> sample_documents(const Grammar& grammar, std::size_t count,
                                          std::uint64_t seed);

// "Q: <question> A: <answer>" -> "<question>"; empty when not in that framing.
std::string question_of(std::string_view document);

}  // namespace sardec
