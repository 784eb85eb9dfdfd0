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
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sardec/common.hpp"
#include "sardec/draft_tree.hpp"

namespace sardec {

enum class SlotRole : std::uint8_t { context, candidate, mask };

const char* to_string(SlotRole role);

struct Slot {
  SlotRole role = SlotRole::context;
  // Token id for context/candidate slots, mask-embedding index for masks.
  TokenId token = 0;
  std::size_t position = 0;
  // Tree node id for candidates; owning node (or kRootFallback) for masks.
  int node = kRootFallback;
  int group = -1;  // mask group index, -1 for non-mask slots

  bool operator==(const Slot&) const = default;
};

// A flattened model input. attention is n x n row-major (row = query,
// column = key); prompt_visible marks rows whose queries also see the prompt.
struct FlatPlan {
  std::vector<Slot> slots;
  std::vector<std::uint8_t> attention;
  std::vector<std::uint8_t> prompt_visible;

  std::size_t ctx_len = 0;
  // Candidate slot of each tree node id (empty when the plan has no tree).
  std::vector<std::size_t> node_slot;
  // Mask groups: first slot, owner node (kRootFallback for the root group).
  std::vector<std::size_t> group_start;
  std::vector<int> group_owner;
  std::size_t group_size = 0;

  std::size_t size() const { return slots.size(); }
  bool attends(std::size_t query, std::size_t key) const {
    return attention[query * slots.size() + key] != 0;
  }
  std::size_t mask_slot(std::size_t group, std::size_t j) const {
    return group_start.at(group) + j;
  }

  bool operator==(const FlatPlan&) const = default;
};

inline constexpr std::size_t kDefaultMaxPosition = 1u << 20;

// Causal plan over context only; the last row is the AR prediction.
FlatPlan build_causal_plan(std::span<const TokenId> context);

// Context followed by one root-anchored mask group of n_masks slots; mask j
// (1-based) sits at position ctx_len + j and predicts that position.
FlatPlan build_training_plan(std::span<const TokenId> context, int n_masks);
FlatPlan build_first_pass_plan(std::span<const TokenId> context, int n_masks);

// Context, the previous pass's draft chain, and a mask group that sees the
// context only. The chain may hold fewer than n_masks drafts.
FlatPlan build_straightforward_plan(std::span<const TokenId> context,
                                    std::span<const TokenId> chain,
                                    int n_masks);

// Context, candidates level-major, then (tree.size() + 1) mask groups: the
// root-fallback group first, then one per candidate in layout order.
FlatPlan build_tree_plan(std::span<const TokenId> context,
                         const DraftTree& tree, int n_masks,
                         std::size_t max_position = kDefaultMaxPosition);

// Rows of 0/1 characters, one line per query slot.
std::string render_attention(const FlatPlan& plan);

}  // namespace sardec
