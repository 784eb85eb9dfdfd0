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

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sardec/base_trainer.hpp"
#include "sardec/common.hpp"
#include "sardec/toy_lm.hpp"

namespace sardec {

// A question and the base model's own greedy answer to it.
struct QaPair {
  std::vector<TokenId> question;
  std::vector<TokenId> answer;
  std::size_t source = 0;  // index into the question list
};

struct SelfGenResult {
  std::vector<QaPair> pairs;
  std::size_t dropped = 0;
};

// Greedy-decodes every question. Answers too short to slice for n_masks
// labels (|Y| <= n_masks + 1) are dropped and counted.
SelfGenResult self_generate(const ModelWeights& weights, const TokenSequences& questions,
                            std::size_t max_new, TokenId eos, int n_masks);

// context = X ++ y_0..y_k, labels = y_{k+1}..y_{k+M}.
struct TrainSample {
  std::vector<TokenId> context;
  std::vector<TokenId> labels;
  std::size_t source = 0;
  std::size_t k = 0;

  bool operator==(const TrainSample&) const = default;
};

// Slices at a given k; requires |Y| > M + 1 and k <= |Y| - M - 1.
TrainSample make_sample_at(const QaPair& pair, int n_masks, std::size_t k);
// Draws k uniformly from {0, ..., |Y| - M - 1}.
TrainSample make_sample(const QaPair& pair, int n_masks, std::mt19937_64& rng);

struct SampleLoss {
  double loss = 0.0;
  SoftGrad grad;
};

// Summed negative log-likelihood of the labels at the M mask slots of a
// training plan, with its soft-parameter gradient.
SampleLoss sar_loss(const TrainSample& sample, const ModelWeights& weights,
                    const SoftParams& soft);

struct BatchGradient {
  double mean_loss = 0.0;
  SoftGrad grad;  // batch mean, reduced in batch order
};

BatchGradient sar_gradient(std::span<const TrainSample> batch, const ModelWeights& weights,
                           const SoftParams& soft);

struct SarStepResult {
  double mean_loss = 0.0;
  SoftParams soft;
};

// One gradient-descent step on the batch-mean loss. Per-sample gradients are
// reduced in batch order; weights are only read.
SarStepResult sar_step(std::span<const TrainSample> batch, const ModelWeights& weights,
                       const SoftParams& soft, double lr);

// lr0 * 0.5 * (1 + cos(pi * step / total_steps))
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0 = 3e-2);

// All trainable arrays i.i.d. N(0, 0.02^2).
SoftParams init_soft(const ModelConfig& config, int prompt_len, int n_masks,
                     std::uint64_t seed, PromptingMode mode);

enum class TuneOptimizer { sgd, adam };

const char* to_string(TuneOptimizer opt);
TuneOptimizer tune_optimizer_from_string(std::string_view name);

struct TuneConfig {
  int epochs = 4;
  int batch_size = 16;
  double lr0 = 3e-2;
  std::uint64_t seed = 1;
  PromptingMode mode = PromptingMode::deep;
  int prompt_len = 16;
  int n_masks = 3;
  TuneOptimizer optimizer = TuneOptimizer::sgd;
};

struct TuneLogRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TuneResult {
  SoftParams soft;
  std::vector<TuneLogRow> log;
};

// Epochs over `samples` (reshuffled per epoch from the seed) with a cosine
// schedule over the total step count.
TuneResult tune(const ModelWeights& weights, std::span<const TrainSample> samples,
                const TuneConfig& config);

// Dataset JSONL: {"context": [...], "labels": [...], "source": n, "k": n}.
void write_dataset_jsonl(const std::string& path, std::span<const TrainSample> samples);
std::vector<TrainSample> read_dataset_jsonl(const std::string& path);

// CSV with header "step,lr,loss".
void write_tune_log_csv(const std::string& path, std::span<const TuneLogRow> log);

}  // namespace sardec
