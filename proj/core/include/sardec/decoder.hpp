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

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "sardec/attention_plan.hpp"
#include "sardec/common.hpp"
#include "sardec/toy_lm.hpp"

namespace sardec {

enum class DecodeMode { straightforward, efficient, full };

const char* to_string(DecodeMode mode);
DecodeMode decode_mode_from_string(std::string_view name);

struct DecodeStats {
  std::size_t forward_passes = 0;
  // Length of the returned output (after EOS / max_new truncation).
  std::size_t tokens_emitted = 0;
  // Tokens appended before truncation; equals the histogram's weighted sum.
  std::size_t tokens_appended = 0;
  // tokens appended in one pass -> number of passes
  std::map<std::size_t, std::size_t> histogram;
  std::vector<std::size_t> per_pass;
  double wall_seconds = 0.0;

  double mean_accepted_per_pass() const;
  // tokens_emitted / forward_passes; 0 when no pass ran.
  double pass_reduction() const;
  void record_pass(std::size_t appended);
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  DecodeStats stats;
};

// Anything that maps a plan to per-slot logits. The toy model is one; tests
// also plug in scripted models.
using ForwardFn = std::function<Logits(const FlatPlan&)>;

ForwardFn model_forward(const ModelWeights& weights, const SoftParams& soft);

// Plain greedy decoding, one forward pass per token, full recompute.
DecodeResult decode_ar(const ForwardFn& model, std::span<const TokenId> query,
                       std::size_t max_new, TokenId eos);
DecodeResult decode_ar(const ModelWeights& weights, std::span<const TokenId> query,
                       std::size_t max_new, TokenId eos);

enum class VerifyFault {
  none,
  // Test-only: verification picks the runner-up token instead of the argmax.
  misranked_pick,
};

struct StreamConfig {
  std::size_t max_new = 64;
  TokenId eos = 1;
  DecodeMode mode = DecodeMode::efficient;
  int n = 3;  // draft depth (levels / chain length), <= n_masks
  int k = 5;  // candidates per level (ignored by straightforward)
  VerifyFault fault = VerifyFault::none;
};

// Draft-and-verify decoding in one pass per step. Pass 1 runs the query plus
// one mask group; later passes verify the drafts of the previous pass and
// draft again from the mask group attached to the last accepted token.
DecodeResult decode_streamlined(const ForwardFn& model, int n_masks,
                                std::span<const TokenId> query, const StreamConfig& config);
DecodeResult decode_streamlined(const ModelWeights& weights, const SoftParams& soft,
                                std::span<const TokenId> query, const StreamConfig& config);

// Slots a pass appends after the context.
std::size_t count_extra_slots(DecodeMode mode, std::size_t ctx_len, int n, int k, int n_masks);

}  // namespace sardec
