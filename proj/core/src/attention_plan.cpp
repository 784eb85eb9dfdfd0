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

#include "sardec/attention_plan.hpp"

#include <algorithm>
#include <string>

namespace sardec {

namespace {

class PlanBuilder {
 public:
  explicit PlanBuilder(std::size_t total) {
    plan_.slots.reserve(total);
    plan_.attention.assign(total * total, 0);
    plan_.prompt_visible.assign(total, 0);
    total_ = total;
  }

  std::size_t add(const Slot& slot, bool prompt_visible) {
    const std::size_t i = plan_.slots.size();
    plan_.slots.push_back(slot);
    plan_.prompt_visible[i] = prompt_visible ? 1 : 0;
    allow(i, i);
    return i;
  }

  void allow(std::size_t query, std::size_t key) {
    plan_.attention[query * total_ + key] = 1;
  }

  void allow_range(std::size_t query, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) allow(query, k);
  }

  FlatPlan& plan() { return plan_; }
  FlatPlan finish() {
    if (plan_.slots.size() != total_) throw ShapeError("plan slot count mismatch");
    return std::move(plan_);
  }

 private:
  FlatPlan plan_;
  std::size_t total_ = 0;
};

void add_context(PlanBuilder& b, std::span<const TokenId> context) {
  if (context.empty()) throw ConfigError("context must be non-empty");
  for (std::size_t i = 0; i < context.size(); ++i) {
    const std::size_t s = b.add({SlotRole::context, context[i], i, kRootFallback, -1}, false);
    b.allow_range(s, 0, s);
  }
  b.plan().ctx_len = context.size();
}

// Appends one mask group. `visible` lists the non-mask slots every mask in
// the group attends to; masks also see earlier masks of the same group.
void add_mask_group(PlanBuilder& b, int n_masks, int owner,
                    std::size_t first_position,
                    const std::vector<std::size_t>& visible) {
  FlatPlan& p = b.plan();
  const int group = static_cast<int>(p.group_start.size());
  const std::size_t start = p.slots.size();
  p.group_start.push_back(start);
  p.group_owner.push_back(owner);
  for (int j = 0; j < n_masks; ++j) {
    const std::size_t s = b.add(
        {SlotRole::mask, j, first_position + static_cast<std::size_t>(j), owner, group},
        true);
    for (std::size_t v : visible) b.allow(s, v);
    b.allow_range(s, start, s);
  }
}

std::vector<std::size_t> iota_slots(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

const char* to_string(SlotRole role) {
  switch (role) {
    case SlotRole::context: return "context";
    case SlotRole::candidate: return "candidate";
    case SlotRole::mask: return "mask";
  }
  return "?";
}

FlatPlan build_causal_plan(std::span<const TokenId> context) {
  PlanBuilder b(context.size());
  add_context(b, context);
  return b.finish();
}

FlatPlan build_training_plan(std::span<const TokenId> context, int n_masks) {
  if (n_masks < 1) throw ConfigError("n_masks must be positive");
  const std::size_t L = context.size();
  PlanBuilder b(L + static_cast<std::size_t>(n_masks));
  add_context(b, context);
  b.plan().group_size = static_cast<std::size_t>(n_masks);
  add_mask_group(b, n_masks, kRootFallback, L + 1, iota_slots(L));
  return b.finish();
}

FlatPlan build_first_pass_plan(std::span<const TokenId> context, int n_masks) {
  return build_training_plan(context, n_masks);
}

FlatPlan build_straightforward_plan(std::span<const TokenId> context,
                                    std::span<const TokenId> chain,
                                    int n_masks) {
  if (n_masks < 1) throw ConfigError("n_masks must be positive");
  if (chain.size() > static_cast<std::size_t>(n_masks)) {
    throw ConfigError("draft chain longer than the mask count");
  }
  const std::size_t L = context.size();
  PlanBuilder b(L + chain.size() + static_cast<std::size_t>(n_masks));
  add_context(b, context);
  FlatPlan& p = b.plan();
  p.group_size = static_cast<std::size_t>(n_masks);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const std::size_t s =
        b.add({SlotRole::candidate, chain[i], L + i, static_cast<int>(i), -1}, false);
    b.allow_range(s, 0, s);
    p.node_slot.push_back(s);
  }
  add_mask_group(b, n_masks, kRootFallback, L + 1, iota_slots(L));
  return b.finish();
}

FlatPlan build_tree_plan(std::span<const TokenId> context, const DraftTree& tree,
                         int n_masks, std::size_t max_position) {
  if (n_masks < 1) throw ConfigError("n_masks must be positive");
  validate_tree(tree);
  const std::size_t L = context.size();
  const std::size_t nodes = tree.size();
  const std::size_t M = static_cast<std::size_t>(n_masks);
  const std::size_t deepest = L + static_cast<std::size_t>(tree.n_levels) + M;
  if (deepest >= max_position) throw ShapeError("position overflow in tree plan");

  PlanBuilder b(L + nodes + (nodes + 1) * M);
  add_context(b, context);
  FlatPlan& p = b.plan();
  p.group_size = M;
  for (const TreeNode& node : tree.nodes) {
    const std::size_t pos = L + static_cast<std::size_t>(node.level) - 1;
    const std::size_t s = b.add({SlotRole::candidate, node.token, pos, node.id, -1}, false);
    b.allow_range(s, 0, L);
    for (int a = node.parent; a != kRootFallback; a = tree.nodes[a].parent) {
      b.allow(s, L + static_cast<std::size_t>(a));
    }
    p.node_slot.push_back(s);
  }

  const std::vector<std::size_t> ctx = iota_slots(L);
  add_mask_group(b, n_masks, kRootFallback, L + 1, ctx);
  for (const TreeNode& node : tree.nodes) {
    std::vector<std::size_t> visible = ctx;
    for (int a : tree.path_to(node.id)) visible.push_back(p.node_slot[a]);
    const std::size_t pos = L + static_cast<std::size_t>(node.level) - 1;
    add_mask_group(b, n_masks, node.id, pos + 2, visible);
  }
  return b.finish();
}

std::string render_attention(const FlatPlan& plan) {
  const std::size_t n = plan.size();
  std::string out;
  out.reserve(n * (n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.push_back(plan.attends(i, j) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

}  // namespace sardec
