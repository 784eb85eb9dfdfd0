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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sardec/attention_plan.hpp"
#include "sardec/common.hpp"

namespace sardec {

struct ModelConfig {
  int vocab_size = 32;
  int dim = 32;
  int n_layers = 2;
  int n_heads = 4;
  int hidden = 128;  // MLP width
  int max_positions = 4096;

  bool operator==(const ModelConfig&) const = default;
};

// Throws ConfigError on non-positive sizes or dim % n_heads != 0.
void validate_config(const ModelConfig& config);

struct LayerWeights {
  Tensor attn_norm;  // dim
  Tensor wq, wk, wv, wo;  // dim x dim
  Tensor mlp_norm;   // dim
  Tensor w1;         // dim x hidden
  Tensor b1;         // hidden
  Tensor w2;         // hidden x dim
  Tensor b2;         // dim

  bool operator==(const LayerWeights&) const = default;
};

// Frozen parameters of the decoder-only transformer (pre-norm RMSNorm blocks,
// multi-head attention, GELU MLP, sinusoidal absolute positions).
struct ModelWeights {
  ModelConfig config;
  Tensor tok_emb;  // vocab x dim
  std::vector<LayerWeights> layers;
  Tensor final_norm;  // dim
  Tensor head;        // dim x vocab

  static ModelWeights zeros(const ModelConfig& config);

  // Visits every array as (name, tensor) in a fixed order.
  template <class F>
  void for_each_array(F&& f) {
    visit_arrays(*this, f);
  }
  template <class F>
  void for_each_array(F&& f) const {
    visit_arrays(*this, f);
  }

  // Throws ShapeError / NumericError.
  void validate() const;

  bool operator==(const ModelWeights&) const = default;

 private:
  template <class Self, class F>
  static void visit_arrays(Self& self, F& f) {
    f(std::string("tok_emb"), self.tok_emb);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& L = self.layers[l];
      const std::string p = "layers." + std::to_string(l) + ".";
      f(p + "attn_norm", L.attn_norm);
      f(p + "wq", L.wq);
      f(p + "wk", L.wk);
      f(p + "wv", L.wv);
      f(p + "wo", L.wo);
      f(p + "mlp_norm", L.mlp_norm);
      f(p + "w1", L.w1);
      f(p + "b1", L.b1);
      f(p + "w2", L.w2);
      f(p + "b2", L.b2);
    }
    f(std::string("final_norm"), self.final_norm);
    f(std::string("head"), self.head);
  }
};

// Seeded random weights. Linear maps use N(0, scale^2 / fan_in); embeddings
// N(0, scale^2); norm gains start at 1.
ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed,
                          double scale = 1.0);

enum class PromptingMode { mask_only, shallow, deep };

const char* to_string(PromptingMode mode);
PromptingMode prompting_mode_from_string(std::string_view name);

// Trainable parameters: prompt tokens and mask-token embeddings.
//   deep:      prefix holds per-layer key/value rows, n_layers x 2 x p x dim.
//   shallow:   prompt holds p x dim input-level embeddings that run through
//              the frozen blocks as extra leading slots.
//   mask_only: p == 0, both prompt arrays empty.
// Prompt tokens are only visible to rows with prompt_visible set.
struct SoftParams {
  PromptingMode mode = PromptingMode::deep;
  int prompt_len = 0;
  int n_masks = 1;
  Tensor prefix;
  Tensor prompt;
  Tensor masks;  // n_masks x dim

  static SoftParams zeros(const ModelConfig& config, PromptingMode mode,
                          int prompt_len, int n_masks);

  template <class F>
  void for_each_array(F&& f) {
    f(std::string("prefix"), prefix);
    f(std::string("prompt"), prompt);
    f(std::string("masks"), masks);
  }
  template <class F>
  void for_each_array(F&& f) const {
    f(std::string("prefix"), prefix);
    f(std::string("prompt"), prompt);
    f(std::string("masks"), masks);
  }

  void validate(const ModelConfig& config) const;

  bool operator==(const SoftParams&) const = default;
};

using SoftGrad = SoftParams;

// Per-slot logits. Rows are independent: a row depends only on the slots it
// attends to (and the prompt if visible), and keys are reduced in slot order,
// so slots nobody attends to never perturb other rows.
Logits forward(const FlatPlan& plan, const ModelWeights& weights,
               const SoftParams& soft);

using SlotLabels = std::vector<std::optional<TokenId>>;

struct SoftLoss {
  double loss = 0.0;
  SoftGrad grad;
};

// Sum of -log softmax(label) over labeled mask slots and its gradient with
// respect to the soft parameters only.
SoftLoss grad_soft(const FlatPlan& plan, const ModelWeights& weights,
                   const SoftParams& soft, const SlotLabels& labels);

struct LmLoss {
  double loss = 0.0;
  ModelWeights grad;
};

// Same loss over any labeled slots, differentiated with respect to the model
// weights. Used to fit the base model; never called during soft tuning.
LmLoss lm_loss_and_grad(const FlatPlan& plan, const ModelWeights& weights,
                        const SlotLabels& labels);

// Argmax, lowest token id on ties.
TokenId greedy_pick(std::span<const double> row);

// Sinusoidal encoding of `position` into out (size dim).
void positional_encoding(std::size_t position, std::span<double> out);

}  // namespace sardec
