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

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sardec/common.hpp"

namespace sardec {

struct FlatPlan;

enum class TreeShape { efficient, full, chain };

const char* to_string(TreeShape shape);

inline constexpr int kRootFallback = -1;

struct TreeNode {
  int id = 0;
  int level = 1;  // 1-based
  int rank = 1;   // 1-based, rank 1 = top score among siblings
  TokenId token = 0;
  int parent = kRootFallback;
  double score = 0.0;  // raw logit

  bool operator==(const TreeNode&) const = default;
};

// Candidate token tree. Nodes are stored level-major; inside a level they are
// ordered by parent (in layout order) and then by rank, so a node's id is also
// its offset inside the flattened candidate block.
struct DraftTree {
  int n_levels = 0;
  int k = 1;
  TreeShape shape = TreeShape::efficient;
  std::vector<TreeNode> nodes;

  std::size_t size() const { return nodes.size(); }
  std::vector<int> children(int parent) const;
  // Node ids from level 1 down to `node`, inclusive.
  std::vector<int> path_to(int node) const;

  bool operator==(const DraftTree&) const = default;
};

// Throws ShapeError when the tree violates its shape's structural rules.
void validate_tree(const DraftTree& tree);

// Top-k (token, score) pairs of a logits row; ties go to the lower token id.
std::vector<std::pair<TokenId, double>> top_k(std::span<const double> row,
                                              int k);

using LogitRows = std::vector<std::span<const double>>;

// Level i holds the top-k of rows[i-1]; only the rank-1 node of each level has
// children.
DraftTree build_efficient_tree(const LogitRows& level_rows, int k);

// Every node above the last level has k children. Children of any level-i node
// come from level_rows[i], the row predicting level i+1 in the selected group.
DraftTree build_full_tree(const LogitRows& level_rows, int k, int n_levels);

// Linear chain, one node per token. May be empty.
DraftTree build_chain_tree(std::span<const TokenId> tokens);

struct CandidateOutcome {
  std::vector<TokenId> accepted;
  std::vector<int> accepted_nodes;
  int last_node = kRootFallback;
  TokenId ar_token = 0;

  std::size_t tokens_appended() const { return accepted.size() + 1; }
};

using Picker = std::function<TokenId(std::span<const double>)>;

// Walks the tree from the root: the greedy pick at the current slot is compared
// against the children of the current node in rank order; a match is accepted
// and the walk descends into it. The pick that fails to match (or the pick at a
// childless node) becomes the AR token.
CandidateOutcome verify(const DraftTree& tree, const Logits& logits,
                        const FlatPlan& plan, std::size_t ctx_last_slot,
                        const Picker& pick = {});

// Mask group that drafts the next pass: the one owned by the last accepted
// node, or the root-fallback group (index 0) when nothing was accepted.
std::size_t next_group(const FlatPlan& plan, const CandidateOutcome& outcome);

// "level: rank: token" lines, one per node in layout order.
std::string render_tree(const DraftTree& tree);

}  // namespace sardec
