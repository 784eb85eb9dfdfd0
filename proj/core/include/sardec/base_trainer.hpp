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
#include <vector>

#include "sardec/common.hpp"
#include "sardec/toy_lm.hpp"

namespace sardec {

using TokenSequences = std::vector<std::vector<TokenId>>;

struct BaseTrainConfig {
  ModelConfig model;
  int steps = 1500;
  int batch_size = 8;
  double lr = 3e-3;
  int warmup_steps = 50;
  double grad_clip = 1.0;
  double heldout_fraction = 0.1;
  // Held-out cross-entropy (nats/token) the run must reach; <= 0 disables.
  double ce_threshold = 0.0;
  std::uint64_t seed = 1;
  double init_scale = 1.0;
};

struct BaseTrainResult {
  ModelWeights weights;
  double heldout_ce = 0.0;
  double train_ce = 0.0;
  std::vector<double> loss_curve;  // mean per-token loss of each step's batch
};

class ConvergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Fits the frozen base model with Adam on next-token cross-entropy. The last
// heldout_fraction of the sequences is held out; a single-sequence corpus
// holds out the tail of its positions instead. Deterministic given the seed.
// Throws ConfigError (empty corpus, tokens outside the vocabulary),
// NumericError naming the step on divergence, ConvergenceError when the
// held-out cross-entropy misses ce_threshold.
BaseTrainResult train_base_lm(const TokenSequences& corpus, const BaseTrainConfig& config);

// Mean next-token cross-entropy over every position of every sequence,
// optionally starting at position `from` within each sequence.
double mean_cross_entropy(const ModelWeights& weights, const TokenSequences& sequences,
                          std::size_t from = 0);

}  // namespace sardec
