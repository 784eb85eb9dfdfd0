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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sardec/common.hpp"

namespace sardec {

// Byte-level vocabulary over a fixed printable alphabet. Ids 0 and 1 are the
// <bos> and <eos> specials; every other id maps to exactly one byte.
class Vocabulary {
 public:
  static const Vocabulary& standard();

  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;

  int size() const { return static_cast<int>(alphabet_.size()) + 2; }
  std::string_view alphabet() const { return alphabet_; }

  // Throws ConfigError on bytes outside the alphabet.
  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> tokens) const;

  // <bos> text <eos>
  std::vector<TokenId> encode_document(std::string_view text) const;
  // <bos> "Q: " question " A:"; the answer is the model continuation.
  std::vector<TokenId> encode_question(std::string_view question) const;

 private:
  explicit Vocabulary(std::string alphabet);
  std::string alphabet_;
  std::vector<TokenId> byte_to_id_;
};

}  // namespace sardec
