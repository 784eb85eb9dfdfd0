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

#include "sardec/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "sardec/draft_tree.hpp"

namespace sardec {

namespace {

using Clock = std::chrono::steady_clock;

TokenId runner_up(std::span<const double> row) {
  if (row.size() < 2) return greedy_pick(row);
  return top_k(row, 2)[1].first;
}

// Truncates at the first EOS or at max_new; true when decoding is finished.
bool finish_if_done(std::vector<TokenId>& out, std::size_t max_new, TokenId eos) {
  const auto it = std::find(out.begin(), out.end(), eos);
  if (it != out.end()) {
    out.erase(it, out.end());
    if (out.size() > max_new) out.resize(max_new);
    return true;
  }
  if (out.size() >= max_new) {
    out.resize(max_new);
    return true;
  }
  return false;
}

LogitRows group_rows(const Logits& logits, const FlatPlan& plan, std::size_t group, int n) {
  LogitRows rows;
  for (int j = 0; j < n; ++j) rows.push_back(logits.row_span(plan.mask_slot(group, j)));
  return rows;
}

}  // namespace

const char* to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::straightforward: return "straightforward";
    case DecodeMode::efficient: return "efficient";
    case DecodeMode::full: return "full";
  }
  return "?";
}

DecodeMode decode_mode_from_string(std::string_view name) {
  if (name == "straightforward") return DecodeMode::straightforward;
  if (name == "efficient") return DecodeMode::efficient;
  if (name == "full") return DecodeMode::full;
  throw ConfigError("unknown decode mode '" + std::string(name) + "'");
}

double DecodeStats::mean_accepted_per_pass() const {
  return forward_passes ? static_cast<double>(tokens_appended) / forward_passes : 0.0;
}

double DecodeStats::pass_reduction() const {
  return forward_passes ? static_cast<double>(tokens_emitted) / forward_passes : 0.0;
}

void DecodeStats::record_pass(std::size_t appended) {
  ++forward_passes;
  tokens_appended += appended;
  ++histogram[appended];
  per_pass.push_back(appended);
}

ForwardFn model_forward(const ModelWeights& weights, const SoftParams& soft) {
  return [&weights, &soft](const FlatPlan& plan) { return forward(plan, weights, soft); };
}

DecodeResult decode_ar(const ForwardFn& model, std::span<const TokenId> query,
                       std::size_t max_new, TokenId eos) {
  if (query.empty()) throw ConfigError("query must be non-empty");
  const auto t0 = Clock::now();
  DecodeResult res;
  std::vector<TokenId> seq(query.begin(), query.end());
  while (res.tokens.size() < max_new) {
    const Logits logits = model(build_causal_plan(seq));
    const TokenId a = greedy_pick(logits.row_span(seq.size() - 1));
    res.stats.record_pass(1);
    res.tokens.push_back(a);
    seq.push_back(a);
    if (finish_if_done(res.tokens, max_new, eos)) break;
  }
  res.stats.tokens_emitted = res.tokens.size();
  res.stats.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return res;
}

DecodeResult decode_ar(const ModelWeights& weights, std::span<const TokenId> query,
                       std::size_t max_new, TokenId eos) {
  const SoftParams none = SoftParams::zeros(weights.config, PromptingMode::mask_only, 0, 1);
  return decode_ar(model_forward(weights, none), query, max_new, eos);
}

DecodeResult decode_streamlined(const ForwardFn& model, int n_masks,
                                std::span<const TokenId> query, const StreamConfig& cfg) {
  if (query.empty()) throw ConfigError("query must be non-empty");
  if (cfg.n < 1 || cfg.k < 1) throw ConfigError("n and k must be positive");
  if (cfg.n > n_masks) throw ConfigError("draft depth n exceeds the mask count");
  const auto t0 = Clock::now();
  const Picker pick = cfg.fault == VerifyFault::misranked_pick ? Picker(runner_up)
                                                               : Picker(greedy_pick);
  DecodeResult res;
  auto& out = res.tokens;
  if (cfg.max_new == 0) return res;

  std::vector<TokenId> ctx(query.begin(), query.end());
  FlatPlan plan = build_first_pass_plan(ctx, n_masks);
  Logits logits = model(plan);
  out.push_back(greedy_pick(logits.row_span(ctx.size() - 1)));
  res.stats.record_pass(1);

  DraftTree tree;
  std::vector<TokenId> chain;
  const auto draft = [&](std::size_t group, int first_mask) {
    if (cfg.mode == DecodeMode::straightforward) {
      chain.clear();
      for (int j = first_mask; j < cfg.n; ++j) {
        chain.push_back(greedy_pick(logits.row_span(plan.mask_slot(group, j))));
      }
    } else {
      const LogitRows rows = group_rows(logits, plan, group, cfg.n);
      tree = cfg.mode == DecodeMode::efficient ? build_efficient_tree(rows, cfg.k)
                                               : build_full_tree(rows, cfg.k, cfg.n);
    }
  };
  draft(0, 0);

  while (!finish_if_done(out, cfg.max_new, cfg.eos)) {
    ctx.assign(query.begin(), query.end());
    ctx.insert(ctx.end(), out.begin(), out.end());
    CandidateOutcome outcome;
    if (cfg.mode == DecodeMode::straightforward) {
      plan = build_straightforward_plan(ctx, chain, n_masks);
      logits = model(plan);
      outcome = verify(build_chain_tree(chain), logits, plan, ctx.size() - 1, pick);
      // Mask j predicts position ctx_len + j; the first `accepted` of them are
      // now covered by accepted tokens and the AR token.
      draft(0, static_cast<int>(outcome.accepted.size()));
    } else {
      plan = build_tree_plan(ctx, tree, n_masks);
      logits = model(plan);
      outcome = verify(tree, logits, plan, ctx.size() - 1, pick);
      draft(next_group(plan, outcome), 0);
    }
    out.insert(out.end(), outcome.accepted.begin(), outcome.accepted.end());
    out.push_back(outcome.ar_token);
    res.stats.record_pass(outcome.tokens_appended());
  }
  res.stats.tokens_emitted = out.size();
  res.stats.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return res;
}

DecodeResult decode_streamlined(const ModelWeights& weights, const SoftParams& soft,
                                std::span<const TokenId> query, const StreamConfig& cfg) {
  soft.validate(weights.config);
  if (cfg.k > weights.config.vocab_size) throw ConfigError("k exceeds vocabulary size");
  return decode_streamlined(model_forward(weights, soft), soft.n_masks, query, cfg);
}

std::size_t count_extra_slots(DecodeMode mode, std::size_t /*ctx_len*/, int n, int k,
                              int n_masks) {
  const std::size_t M = static_cast<std::size_t>(n_masks);
  switch (mode) {
    case DecodeMode::straightforward:
      return static_cast<std::size_t>(n) + M;
    case DecodeMode::efficient: {
      const std::size_t nodes = static_cast<std::size_t>(n) * static_cast<std::size_t>(k);
      return nodes + (nodes + 1) * M;
    }
    case DecodeMode::full: {
      std::size_t nodes = 0, level = 1;
      for (int i = 1; i <= n; ++i) {
        level *= static_cast<std::size_t>(k);
        nodes += level;
      }
      return nodes + (nodes + 1) * M;
    }
  }
  return 0;
}

}  // namespace sardec
