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

#include "sardec/grammar.hpp"

#include <algorithm>

#include "sardec/common.hpp"

namespace sardec {

void Grammar::add_rule(const std::string& lhs, double weight,
                       std::vector<std::string> symbols) {
  if (!(weight > 0.0)) throw ConfigError("production weight must be positive");
  rules_[lhs].push_back({weight, std::move(symbols)});
}

std::string Grammar::expand(const std::string& symbol, std::mt19937_64& rng) const {
  if (symbol.size() < 2 || symbol.front() != '<' || symbol.back() != '>') return symbol;
  const auto it = rules_.find(symbol);
  if (it == rules_.end()) throw ConfigError("grammar has no rule for " + symbol);
  std::vector<double> weights;
  for (const auto& p : it->second) weights.push_back(p.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::string out;
  for (const auto& s : it->second[pick(rng)].symbols) out += expand(s, rng);
  return out;
}

Grammar make_demo_grammar(std::uint64_t seed) {
  static const std::vector<std::string> animals = {"cat", "dog", "bird", "cow",
                                                   "fox", "owl", "bee", "frog"};
  static const std::vector<std::string> verbs = {"eat", "like", "fear"};
  static const std::vector<std::string> objects = {
      "fish", "seeds", "grass", "mice", "bugs", "honey",
      "rain", "snow", "wolves", "water", "milk", "nuts"};
  static const std::vector<std::string> homes = {"barn", "den",  "nest", "pond",
                                                 "hive", "tree", "field", "cave"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> obj(0, objects.size() - 1);
  std::uniform_int_distribution<int> weight(1, 3);

  Grammar g;
  g.add_rule("<S>", 3.0, {"Q: ", "<DIET>"});
  g.add_rule("<S>", 1.0, {"Q: ", "<HOME>"});
  std::vector<std::string> shuffled_homes = homes;
  std::shuffle(shuffled_homes.begin(), shuffled_homes.end(), rng);
  for (std::size_t a = 0; a < animals.size(); ++a) {
    const std::string& an = animals[a];
    for (const auto& v : verbs) {
      g.add_rule("<DIET>", weight(rng),
                 {"what does the ", an, " ", v, "? A: the ", an, " ", v, "s ",
                  objects[obj(rng)], "."});
    }
    g.add_rule("<HOME>", weight(rng),
               {"where does the ", an, " live? A: the ", an, " lives in the ",
                shuffled_homes[a], "."});
  }
  return g;
}

std::vector<std::string> sample_documents(const Grammar& grammar, std::size_t count,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> docs;
  docs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) docs.push_back(grammar.expand("<S>", rng));
  return docs;
}

std::string question_of(std::string_view document) {
  constexpr std::string_view kQ = "Q: ";
  constexpr std::string_view kA = " A:";
  if (document.substr(0, kQ.size()) != kQ) return {};
  const auto end = document.find(kA);
  if (end == std::string_view::npos) return {};
  return std::string(document.substr(kQ.size(), end - kQ.size()));
}

}  // namespace sardec
