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

#include "sardec/draft_tree.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "sardec/attention_plan.hpp"
#include "sardec/toy_lm.hpp"

namespace sardec {

namespace {

void add_level(DraftTree& tree, int level, int parent,
               const std::vector<std::pair<TokenId, double>>& ranked) {
  int rank = 1;
  for (const auto& [token, score] : ranked) {
    TreeNode node;
    node.id = static_cast<int>(tree.nodes.size());
    node.level = level;
    node.rank = rank++;
    node.token = token;
    node.parent = parent;
    node.score = score;
    tree.nodes.push_back(node);
  }
}

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

const char* to_string(TreeShape shape) {
  switch (shape) {
    case TreeShape::efficient: return "efficient";
    case TreeShape::full: return "full";
    case TreeShape::chain: return "chain";
  }
  return "?";
}

std::vector<int> DraftTree::children(int parent) const {
  std::vector<int> out;
  for (const auto& n : nodes) {
    if (n.parent == parent) out.push_back(n.id);
  }
  return out;
}

std::vector<int> DraftTree::path_to(int node) const {
  std::vector<int> path;
  for (int a = node; a != kRootFallback; a = nodes.at(a).parent) path.push_back(a);
  std::reverse(path.begin(), path.end());
  return path;
}

void validate_tree(const DraftTree& tree) {
  if (tree.k < 1) throw ShapeError("tree branching k must be positive");
  if (tree.n_levels < 0 || (tree.n_levels == 0 && tree.shape != TreeShape::chain)) {
    throw ShapeError("tree must have at least one level");
  }
  std::vector<std::size_t> per_level(tree.n_levels + 1, 0);
  int prev_level = 1;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    if (n.id != static_cast<int>(i)) throw ShapeError("tree node ids must match layout order");
    if (n.level < 1 || n.level > tree.n_levels) throw ShapeError("tree node level out of range");
    if (n.level < prev_level) throw ShapeError("tree nodes must be level-major");
    prev_level = n.level;
    if (n.level == 1) {
      if (n.parent != kRootFallback) throw ShapeError("level-1 node must hang off the root");
    } else {
      if (n.parent < 0 || n.parent >= n.id ||
          tree.nodes[n.parent].level != n.level - 1) {
        throw ShapeError("tree node parent is not on the previous level");
      }
    }
    if (n.rank < 1 || n.rank > tree.k) throw ShapeError("tree node rank out of range");
    ++per_level[n.level];
  }
  // Siblings: ranks 1..m in order, scores non-increasing.
  std::vector<int> parents{kRootFallback};
  for (const auto& n : tree.nodes) parents.push_back(n.id);
  for (int p : parents) {
    const auto kids = tree.children(p);
    for (std::size_t r = 0; r < kids.size(); ++r) {
      const TreeNode& c = tree.nodes[kids[r]];
      if (c.rank != static_cast<int>(r) + 1) throw ShapeError("sibling ranks must be 1..m in order");
      if (r > 0 && tree.nodes[kids[r - 1]].score < c.score) {
        throw ShapeError("sibling scores must be non-increasing by rank");
      }
    }
    if (static_cast<int>(kids.size()) > tree.k) throw ShapeError("node has more than k children");
    if (tree.shape == TreeShape::efficient && p != kRootFallback && !kids.empty() &&
        tree.nodes[p].rank != 1) {
      throw ShapeError("efficient tree: only rank-1 nodes may have children");
    }
  }
  for (int level = 1; level <= tree.n_levels; ++level) {
    std::size_t want = 0;
    switch (tree.shape) {
      case TreeShape::efficient: want = tree.k; break;
      case TreeShape::full: want = ipow(tree.k, level); break;
      case TreeShape::chain: want = 1; break;
    }
    if (per_level[level] != want) throw ShapeError("tree level has the wrong node count");
  }
  if (tree.shape == TreeShape::chain && tree.k != 1) throw ShapeError("chain tree must have k == 1");
}

std::vector<std::pair<TokenId, double>> top_k(std::span<const double> row, int k) {
  if (k < 1) throw ShapeError("k must be positive");
  if (static_cast<std::size_t>(k) > row.size()) throw ShapeError("k exceeds vocabulary size");
  std::vector<TokenId> ids(row.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](TokenId a, TokenId b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return a < b;
  });
  std::vector<std::pair<TokenId, double>> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.emplace_back(ids[i], row[ids[i]]);
  return out;
}

DraftTree build_efficient_tree(const LogitRows& level_rows, int k) {
  if (level_rows.empty()) throw ShapeError("efficient tree needs at least one row");
  DraftTree tree;
  tree.n_levels = static_cast<int>(level_rows.size());
  tree.k = k;
  tree.shape = TreeShape::efficient;
  int parent = kRootFallback;
  for (int level = 1; level <= tree.n_levels; ++level) {
    const int first = static_cast<int>(tree.nodes.size());
    add_level(tree, level, parent, top_k(level_rows[level - 1], k));
    parent = first;
  }
  return tree;
}

DraftTree build_full_tree(const LogitRows& level_rows, int k, int n_levels) {
  if (n_levels < 1) throw ShapeError("full tree needs at least one level");
  if (level_rows.size() < static_cast<std::size_t>(n_levels)) {
    throw ShapeError("missing logit rows for full tree");
  }
  DraftTree tree;
  tree.n_levels = n_levels;
  tree.k = k;
  tree.shape = TreeShape::full;
  add_level(tree, 1, kRootFallback, top_k(level_rows[0], k));
  std::size_t begin = 0;
  for (int level = 2; level <= n_levels; ++level) {
    const std::size_t end = tree.nodes.size();
    const auto ranked = top_k(level_rows[level - 1], k);
    for (std::size_t p = begin; p < end; ++p) {
      add_level(tree, level, static_cast<int>(p), ranked);
    }
    begin = end;
  }
  return tree;
}

DraftTree build_chain_tree(std::span<const TokenId> tokens) {
  DraftTree tree;
  tree.n_levels = static_cast<int>(tokens.size());
  tree.k = 1;
  tree.shape = TreeShape::chain;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    TreeNode node;
    node.id = static_cast<int>(i);
    node.level = static_cast<int>(i) + 1;
    node.rank = 1;
    node.token = tokens[i];
    node.parent = i == 0 ? kRootFallback : static_cast<int>(i) - 1;
    tree.nodes.push_back(node);
  }
  return tree;
}

CandidateOutcome verify(const DraftTree& tree, const Logits& logits,
                        const FlatPlan& plan, std::size_t ctx_last_slot,
                        const Picker& pick) {
  if (logits.shape.size() != 2 || logits.shape[0] != plan.size()) {
    throw ShapeError("logits rows do not match plan slots");
  }
  if (plan.node_slot.size() != tree.size()) {
    throw ShapeError("plan was not built from this tree");
  }
  if (ctx_last_slot >= plan.size()) throw ShapeError("context slot out of range");
  const auto choose = [&](std::size_t slot) {
    return pick ? pick(logits.row_span(slot)) : greedy_pick(logits.row_span(slot));
  };

  CandidateOutcome out;
  TokenId a = choose(ctx_last_slot);
  int current = kRootFallback;
  for (;;) {
    int matched = kRootFallback;
    for (int c : tree.children(current)) {
      if (tree.nodes[c].token == a) {
        matched = c;
        break;
      }
    }
    if (matched == kRootFallback) break;
    out.accepted.push_back(a);
    out.accepted_nodes.push_back(matched);
    a = choose(plan.node_slot[matched]);
    current = matched;
  }
  out.last_node = current;
  out.ar_token = a;
  return out;
}

std::size_t next_group(const FlatPlan& plan, const CandidateOutcome& outcome) {
  for (std::size_t g = 0; g < plan.group_owner.size(); ++g) {
    if (plan.group_owner[g] == outcome.last_node) return g;
  }
  throw ShapeError("no mask group owned by node " + std::to_string(outcome.last_node));
}

std::string render_tree(const DraftTree& tree) {
  std::string out;
  for (const auto& n : tree.nodes) {
    out += std::to_string(n.level) + ": " + std::to_string(n.rank) + ": " +
           std::to_string(n.token) + "\n";
  }
  return out;
}

}  // namespace sardec
