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

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "sardec/attention_plan.hpp"
#include "sardec/draft_tree.hpp"
#include "test_util.hpp"

namespace sardec {
namespace {

std::vector<TokenId> context_of(std::size_t n) {
  std::vector<TokenId> ctx(n);
  for (std::size_t i = 0; i < n; ++i) ctx[i] = static_cast<TokenId>(i % 7);
  return ctx;
}

std::vector<std::size_t> positions(const FlatPlan& plan) {
  std::vector<std::size_t> out;
  for (const auto& s : plan.slots) out.push_back(s.position);
  return out;
}

TEST(TrainingPlan, MaskPositionsFollowTheContext) {
  const FlatPlan plan = build_training_plan(context_of(5), 3);
  EXPECT_EQ(positions(plan), (std::vector<std::size_t>{0, 1, 2, 3, 4, 6, 7, 8}));
  EXPECT_EQ(plan.slots[4].role, SlotRole::context);
  EXPECT_EQ(plan.slots[5].role, SlotRole::mask);
  EXPECT_EQ(plan.slots[5].token, 0);
  EXPECT_EQ(plan.slots[7].token, 2);
}

TEST(TrainingPlan, SmallestCase) {
  const FlatPlan plan = build_training_plan(context_of(1), 1);
  EXPECT_EQ(render_attention(plan), "10\n11\n");
  EXPECT_EQ(plan.prompt_visible, (std::vector<std::uint8_t>{0, 1}));
}

TEST(TrainingPlan, ExhaustiveContextRowsIgnoreMasksAndPrompt) {
  for (std::size_t len = 1; len <= 8; ++len) {
    for (int m = 1; m <= 4; ++m) {
      const FlatPlan plan = build_training_plan(context_of(len), m);
      ASSERT_EQ(plan.size(), len + m);
      for (std::size_t r = 0; r < plan.size(); ++r) {
        const bool is_mask = r >= len;
        EXPECT_EQ(plan.prompt_visible[r] != 0, is_mask);
        EXPECT_TRUE(plan.attends(r, r));
        for (std::size_t c = 0; c < plan.size(); ++c) {
          const bool want = is_mask ? (c < len || c <= r) : c <= r;
          EXPECT_EQ(plan.attends(r, c), want) << len << " " << m << " " << r << " " << c;
        }
      }
    }
  }
}

TEST(TrainingPlan, EmptyContextOrNoMasksIsAnError) {
  EXPECT_THROW(build_training_plan({}, 1), ConfigError);
  EXPECT_THROW(build_training_plan(context_of(2), 0), ConfigError);
}

TEST(FirstPassPlan, SameStructureAsTraining) {
  const auto ctx = context_of(6);
  EXPECT_EQ(build_first_pass_plan(ctx, 3), build_training_plan(ctx, 3));
  const FlatPlan one = build_first_pass_plan(ctx, 1);
  ASSERT_EQ(one.size(), 7u);
  EXPECT_EQ(one.slots[6].position, 7u);
}

TEST(StraightforwardPlan, MasksNeverSeeTheChain) {
  const std::vector<TokenId> chain = {3, 4, 5};
  const FlatPlan plan = build_straightforward_plan(context_of(4), chain, 3);
  ASSERT_EQ(plan.size(), 10u);
  EXPECT_EQ(positions(plan), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 5, 6, 7}));
  for (std::size_t r = 7; r < 10; ++r) {
    for (std::size_t c = 4; c < 7; ++c) EXPECT_FALSE(plan.attends(r, c));
    EXPECT_TRUE(plan.prompt_visible[r]);
  }
  for (std::size_t r = 4; r < 7; ++r) {
    for (std::size_t c = 0; c <= r; ++c) EXPECT_TRUE(plan.attends(r, c));
    EXPECT_FALSE(plan.prompt_visible[r]);
  }
}

TEST(StraightforwardPlan, SingleMaskSeesContextAndItself) {
  const std::vector<TokenId> chain = {2};
  const FlatPlan plan = build_straightforward_plan(context_of(3), chain, 1);
  EXPECT_EQ(render_attention(plan), "10000\n11000\n11100\n11110\n11101\n");
}

TEST(StraightforwardPlan, ChainLongerThanMaskCountIsAnError) {
  const std::vector<TokenId> chain = {1, 2, 3, 4};
  EXPECT_THROW(build_straightforward_plan(context_of(3), chain, 3), ConfigError);
}

TEST(TreePlan, FigureFiveShapeCounts) {
  std::mt19937_64 rng(5);
  const auto rows = testing::random_rows(rng, 4, 10);
  const DraftTree tree = build_efficient_tree(testing::as_rows(rows), 3);
  const FlatPlan plan = build_tree_plan(context_of(6), tree, 4);
  std::size_t candidates = 0, masks = 0;
  for (const auto& s : plan.slots) {
    candidates += s.role == SlotRole::candidate;
    masks += s.role == SlotRole::mask;
  }
  EXPECT_EQ(candidates, 12u);
  EXPECT_EQ(plan.group_start.size(), 13u);
  EXPECT_EQ(masks, 52u);
}

TEST(TreePlan, DeepestGroupSeesItsAncestorChain) {
  std::mt19937_64 rng(6);
  const auto rows = testing::random_rows(rng, 4, 10);
  const DraftTree tree = build_efficient_tree(testing::as_rows(rows), 3);
  const std::size_t ctx_len = 6;
  const FlatPlan plan = build_tree_plan(context_of(ctx_len), tree, 4);
  for (const auto& node : tree.nodes) {
    if (node.level != 4) continue;
    const std::size_t g = static_cast<std::size_t>(node.id) + 1;
    const std::vector<int> chain = tree.path_to(node.id);
    ASSERT_EQ(chain.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t row = plan.mask_slot(g, j);
      for (std::size_t c = 0; c < plan.size(); ++c) {
        const bool in_chain = c >= ctx_len && c < ctx_len + tree.size() &&
                              std::find(chain.begin(), chain.end(), static_cast<int>(c - ctx_len)) != chain.end();
        const bool in_group = c >= plan.mask_slot(g, 0) && c <= row;
        EXPECT_EQ(plan.attends(row, c), c < ctx_len || in_chain || in_group);
      }
    }
  }
}

// n=2, k=2, ctx_len=5, M=2. Slots: context 0-4; candidates A=5, B=6 (level 1)
// and C=7, D=8 (level 2, children of A); mask groups root=9-10, A=11-12,
// B=13-14, C=15-16, D=17-18.
TEST(TreePlan, HandWrittenNineteenSlotFixture) {
  const std::vector<double> row1 = {0.0, 0.6, 0.3, 0.0, 0.0, 0.0};
  const std::vector<double> row2 = {0.0, 0.0, 0.0, 0.5, 0.4, 0.0};
  const DraftTree tree = build_efficient_tree({row1, row2}, 2);
  const FlatPlan plan = build_tree_plan(context_of(5), tree, 2);
  const std::string expected =
      "1000000000000000000\n"
      "1100000000000000000\n"
      "1110000000000000000\n"
      "1111000000000000000\n"
      "1111100000000000000\n"
      "1111110000000000000\n"
      "1111101000000000000\n"
      "1111110100000000000\n"
      "1111110010000000000\n"
      "1111100001000000000\n"
      "1111100001100000000\n"
      "1111110000010000000\n"
      "1111110000011000000\n"
      "1111101000000100000\n"
      "1111101000000110000\n"
      "1111110100000001000\n"
      "1111110100000001100\n"
      "1111110010000000010\n"
      "1111110010000000011\n";
  EXPECT_EQ(render_attention(plan), expected);
  EXPECT_EQ(positions(plan),
            (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 5, 6, 6, 6, 7, 7, 8, 7, 8, 8, 9, 8, 9}));
  EXPECT_EQ(plan.prompt_visible,
            (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(plan.group_owner, (std::vector<int>{kRootFallback, 0, 1, 2, 3}));
  std::vector<TokenId> tokens;
  for (std::size_t s = 5; s < 9; ++s) tokens.push_back(plan.slots[s].token);
  EXPECT_EQ(tokens, (std::vector<TokenId>{1, 2, 3, 4}));
}

TEST(TreePlan, ExhaustiveAgainstLayoutOracle) {
  std::mt19937_64 rng(7);
  for (std::size_t len = 1; len <= 8; ++len) {
    for (int n = 1; n <= 4; ++n) {
      for (int k = 1; k <= 3; ++k) {
        for (int m = n; m <= 4; ++m) {
          const auto rows = testing::random_rows(rng, n, 6);
          for (const DraftTree& tree : {build_efficient_tree(testing::as_rows(rows), k),
                                        build_full_tree(testing::as_rows(rows), k, n)}) {
            const FlatPlan plan = build_tree_plan(context_of(len), tree, m);
            ASSERT_EQ(testing::check_tree_plan(plan, len, tree, m), "")
                << "len " << len << " n " << n << " k " << k << " m " << m << " "
                << to_string(tree.shape);
          }
        }
      }
    }
  }
}

TEST(TreePlan, PositionOverflowIsAnError) {
  const std::vector<TokenId> chain = {1, 2};
  EXPECT_THROW(build_tree_plan(context_of(8), build_chain_tree(chain), 2, 10), ShapeError);
  EXPECT_NO_THROW(build_tree_plan(context_of(8), build_chain_tree(chain), 2, 64));
}

TEST(TreePlan, MalformedTreeIsAnError) {
  const std::vector<TokenId> chain = {1, 2};
  DraftTree tree = build_chain_tree(chain);
  tree.nodes[1].parent = 5;
  EXPECT_THROW(build_tree_plan(context_of(3), tree, 2), ShapeError);
}

}  // namespace
}  // namespace sardec
