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

#include "sardec/vocab.hpp"

#include <string>

namespace sardec {

Vocabulary::Vocabulary(std::string alphabet)
    : alphabet_(std::move(alphabet)), byte_to_id_(256, -1) {
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    byte_to_id_[static_cast<unsigned char>(alphabet_[i])] = static_cast<TokenId>(i) + 2;
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab(" abcdefghijklmnopqrstuvwxyz.,?:QA");
  return vocab;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (char c : text) {
    const TokenId id = byte_to_id_[static_cast<unsigned char>(c)];
    if (id < 0) {
      throw ConfigError("byte 0x" + std::to_string(static_cast<unsigned char>(c)) +
                        " is outside the vocabulary");
    }
    out.push_back(id);
  }
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t == kBos) {
      out += "<bos>";
    } else if (t == kEos) {
      out += "<eos>";
    } else if (t >= 2 && t < size()) {
      out.push_back(alphabet_[t - 2]);
    } else {
      out += "<" + std::to_string(t) + ">";
    }
  }
  return out;
}

std::vector<TokenId> Vocabulary::encode_document(std::string_view text) const {
  std::vector<TokenId> out{kBos};
  const auto body = encode(text);
  out.insert(out.end(), body.begin(), body.end());
  out.push_back(kEos);
  return out;
}

std::vector<TokenId> Vocabulary::encode_question(std::string_view question) const {
  std::vector<TokenId> out{kBos};
  const auto body = encode("Q: " + std::string(question) + " A:");
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

}  // namespace sardec
