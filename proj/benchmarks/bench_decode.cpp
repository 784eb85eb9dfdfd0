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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sardec/attention_plan.hpp"
#include "sardec/decoder.hpp"
#include "sardec/draft_tree.hpp"
#include "sardec/toy_lm.hpp"
#include "sardec/tuner.hpp"

namespace {

using namespace sardec;

ModelConfig bench_config() {
  ModelConfig c;
  c.vocab_size = 32;
  c.dim = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  c.hidden = 128;
  c.max_positions = 1024;
  return c;
}

std::vector<TokenId> query_of(std::size_t len) {
  std::vector<TokenId> q(len);
  for (std::size_t i = 0; i < len; ++i) q[i] = static_cast<TokenId>((i * 7 + 3) % 32);
  return q;
}

const ModelWeights& weights() {
  static const ModelWeights w = init_weights(bench_config(), 42);
  return w;
}

void BM_ForwardCausal(benchmark::State& state) {
  const auto ctx = query_of(static_cast<std::size_t>(state.range(0)));
  const FlatPlan plan = build_causal_plan(ctx);
  const SoftParams soft = SoftParams::zeros(bench_config(), PromptingMode::mask_only, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(plan, weights(), soft));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(plan.size()));
}
BENCHMARK(BM_ForwardCausal)->Arg(16)->Arg(64)->Arg(128);

void BM_ForwardEfficientTree(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const auto ctx = query_of(64);
  const SoftParams soft = init_soft(bench_config(), 16, 3, 1, PromptingMode::deep);
  const Logits first = forward(build_first_pass_plan(ctx, 3), weights(), soft);
  LogitRows rows;
  for (std::size_t j = 0; j < 3; ++j) rows.push_back(first.row_span(ctx.size() + j));
  const FlatPlan plan = build_tree_plan(ctx, build_efficient_tree(rows, k), 3);
  for (auto _ : state) benchmark::DoNotOptimize(forward(plan, weights(), soft));
  state.counters["slots"] = static_cast<double>(plan.size());
}
BENCHMARK(BM_ForwardEfficientTree)->Arg(1)->Arg(3)->Arg(5);

void BM_BuildTreePlan(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> data(4, std::vector<double>(32));
  for (auto& r : data) {
    for (double& v : r) v = normal(rng);
  }
  const LogitRows rows(data.begin(), data.end());
  const DraftTree tree = state.range(0) ? build_full_tree(rows, 3, 4) : build_efficient_tree(rows, 3);
  const auto ctx = query_of(64);
  for (auto _ : state) benchmark::DoNotOptimize(build_tree_plan(ctx, tree, 4));
}
BENCHMARK(BM_BuildTreePlan)->Arg(0)->Arg(1);

void BM_Decode(benchmark::State& state) {
  const SoftParams soft = init_soft(bench_config(), 16, 3, 2, PromptingMode::deep);
  const auto query = query_of(12);
  const int mode = static_cast<int>(state.range(0));
  std::size_t passes = 0;
  for (auto _ : state) {
    DecodeResult r;
    if (mode < 0) {
      r = decode_ar(weights(), query, 32, -1);
    } else {
      StreamConfig cfg;
      cfg.max_new = 32;
      cfg.eos = -1;
      cfg.mode = static_cast<DecodeMode>(mode);
      cfg.n = 3;
      cfg.k = mode == static_cast<int>(DecodeMode::full) ? 2 : 5;
      r = decode_streamlined(weights(), soft, query, cfg);
    }
    passes = r.stats.forward_passes;
    benchmark::DoNotOptimize(r.tokens.data());
  }
  state.counters["forward_passes"] = static_cast<double>(passes);
}
BENCHMARK(BM_Decode)->Arg(-1)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
