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

#include "sardec/base_trainer.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sardec/attention_plan.hpp"

namespace sardec {

namespace {

struct Example {
  const std::vector<TokenId>* tokens;
  std::size_t label_begin;  // first position whose next token is a label
  std::size_t label_end;
};

std::vector<Tensor*> arrays_of(ModelWeights& w) {
  std::vector<Tensor*> out;
  w.for_each_array([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

double sequence_loss(const ModelWeights& w, const Example& ex, ModelWeights* grad,
                     std::size_t& labeled) {
  const auto& seq = *ex.tokens;
  const std::span<const TokenId> ctx(seq.data(), ex.label_end);
  const FlatPlan plan = build_causal_plan(ctx);
  SlotLabels labels(plan.size());
  for (std::size_t s = ex.label_begin; s < ex.label_end; ++s) labels[s] = seq[s + 1];
  labeled += ex.label_end - ex.label_begin;
  if (!grad) {
    const Logits logits = forward(plan, w, SoftParams::zeros(w.config, PromptingMode::mask_only, 0, 1));
    double loss = 0.0;
    const std::size_t V = w.config.vocab_size;
    for (std::size_t s = ex.label_begin; s < ex.label_end; ++s) {
      const double* r = logits.row(s);
      double mx = r[0];
      for (std::size_t j = 1; j < V; ++j) mx = std::max(mx, r[j]);
      double sum = 0.0;
      for (std::size_t j = 0; j < V; ++j) sum += std::exp(r[j] - mx);
      loss += mx + std::log(sum) - r[seq[s + 1]];
    }
    return loss;
  }
  LmLoss r = lm_loss_and_grad(plan, w, labels);
  auto dst = arrays_of(*grad);
  auto src = arrays_of(r.grad);
  for (std::size_t a = 0; a < dst.size(); ++a) {
    for (std::size_t i = 0; i < dst[a]->data.size(); ++i) dst[a]->data[i] += src[a]->data[i];
  }
  return r.loss;
}

double examples_ce(const ModelWeights& w, const std::vector<Example>& examples) {
  double total = 0.0;
  std::size_t labeled = 0;
  for (const auto& ex : examples) total += sequence_loss(w, ex, nullptr, labeled);
  return labeled ? total / static_cast<double>(labeled) : 0.0;
}

}  // namespace

double mean_cross_entropy(const ModelWeights& weights, const TokenSequences& sequences,
                          std::size_t from) {
  std::vector<Example> ex;
  for (const auto& s : sequences) {
    if (s.size() >= 2 && from < s.size() - 1) ex.push_back({&s, from, s.size() - 1});
  }
  return examples_ce(weights, ex);
}

BaseTrainResult train_base_lm(const TokenSequences& corpus, const BaseTrainConfig& cfg) {
  if (corpus.empty()) throw ConfigError("corpus is empty");
  validate_config(cfg.model);
  if (cfg.steps < 0 || cfg.batch_size < 1 || !(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) {
    throw ConfigError("invalid base training hyperparameters");
  }
  for (const auto& seq : corpus) {
    if (seq.size() < 2) throw ConfigError("corpus sequences need at least two tokens");
    if (seq.size() > static_cast<std::size_t>(cfg.model.max_positions)) {
      throw ConfigError("corpus sequence longer than max_positions");
    }
    for (TokenId t : seq) {
      if (t < 0 || t >= cfg.model.vocab_size) {
        throw ConfigError("corpus token " + std::to_string(t) + " outside the vocabulary");
      }
    }
  }

  std::vector<Example> train, heldout;
  if (corpus.size() == 1) {
    const auto& seq = corpus.front();
    const std::size_t labels = seq.size() - 1;
    std::size_t cut = labels - static_cast<std::size_t>(
                                   std::ceil(cfg.heldout_fraction * static_cast<double>(labels)));
    if (cut == 0 || cut >= labels) throw ConfigError("sequence too short to hold out a tail");
    train.push_back({&seq, 0, cut});
    heldout.push_back({&seq, cut, labels});
  } else {
    std::size_t n_held = static_cast<std::size_t>(
        std::ceil(cfg.heldout_fraction * static_cast<double>(corpus.size())));
    n_held = std::min(std::max<std::size_t>(n_held, 1), corpus.size() - 1);
    const std::size_t n_train = corpus.size() - n_held;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      Example ex{&corpus[i], 0, corpus[i].size() - 1};
      (i < n_train ? train : heldout).push_back(ex);
    }
  }

  BaseTrainResult res;
  res.weights = init_weights(cfg.model, cfg.seed, cfg.init_scale);
  ModelWeights m1 = ModelWeights::zeros(cfg.model);
  ModelWeights m2 = ModelWeights::zeros(cfg.model);
  auto params = arrays_of(res.weights);
  auto mom1 = arrays_of(m1);
  auto mom2 = arrays_of(m2);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  for (int step = 1; step <= cfg.steps; ++step) {
    ModelWeights grad = ModelWeights::zeros(cfg.model);
    double loss = 0.0;
    std::size_t labeled = 0;
    try {
      for (int b = 0; b < cfg.batch_size; ++b) {
        loss += sequence_loss(res.weights, train[pick(rng)], &grad, labeled);
      }
    } catch (const NumericError& e) {
      throw NumericError("base training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    const double mean = loss / static_cast<double>(labeled);
    if (!std::isfinite(mean)) {
      throw NumericError("base training diverged at step " + std::to_string(step));
    }
    res.loss_curve.push_back(mean);

    auto g = arrays_of(grad);
    double norm2 = 0.0;
    for (auto* t : g) {
      for (double& v : t->data) {
        v /= static_cast<double>(labeled);
        norm2 += v * v;
      }
    }
    const double norm = std::sqrt(norm2);
    const double clip = (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) ? cfg.grad_clip / norm : 1.0;

    const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps);
    double lr = cfg.lr * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(M_PI * progress)));
    if (step <= cfg.warmup_steps) lr *= static_cast<double>(step) / cfg.warmup_steps;
    const double bc1 = 1.0 - std::pow(kBeta1, step);
    const double bc2 = 1.0 - std::pow(kBeta2, step);
    for (std::size_t a = 0; a < params.size(); ++a) {
      auto& p = params[a]->data;
      auto& ma = mom1[a]->data;
      auto& va = mom2[a]->data;
      const auto& ga = g[a]->data;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = ga[i] * clip;
        ma[i] = kBeta1 * ma[i] + (1.0 - kBeta1) * gi;
        va[i] = kBeta2 * va[i] + (1.0 - kBeta2) * gi * gi;
        p[i] -= lr * (ma[i] / bc1) / (std::sqrt(va[i] / bc2) + kEps);
      }
    }
  }

  res.train_ce = examples_ce(res.weights, train);
  res.heldout_ce = examples_ce(res.weights, heldout);
  if (!std::isfinite(res.heldout_ce)) throw NumericError("non-finite held-out cross-entropy");
  if (cfg.ce_threshold > 0.0 && res.heldout_ce > cfg.ce_threshold) {
    throw ConvergenceError("held-out cross-entropy " + std::to_string(res.heldout_ce) +
                           " above threshold " + std::to_string(cfg.ce_threshold));
  }
  return res;
}

}  // namespace sardec
