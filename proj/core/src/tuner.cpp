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

#include "sardec/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "sardec/attention_plan.hpp"
#include "sardec/decoder.hpp"

namespace sardec {

namespace {

std::vector<Tensor*> arrays_of(SoftParams& s) {
  std::vector<Tensor*> out;
  s.for_each_array([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

class AdamState {
 public:
  explicit AdamState(const SoftParams& like) : m_(like), v_(like) {
    for (Tensor* t : arrays_of(m_)) std::fill(t->data.begin(), t->data.end(), 0.0);
    for (Tensor* t : arrays_of(v_)) std::fill(t->data.begin(), t->data.end(), 0.0);
  }

  void apply(SoftParams& params, SoftGrad& grad, double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    auto p = arrays_of(params);
    auto g = arrays_of(grad);
    auto m = arrays_of(m_);
    auto v = arrays_of(v_);
    for (std::size_t a = 0; a < p.size(); ++a) {
      for (std::size_t i = 0; i < p[a]->data.size(); ++i) {
        const double gi = g[a]->data[i];
        double& mi = m[a]->data[i];
        double& vi = v[a]->data[i];
        mi = kBeta1 * mi + (1.0 - kBeta1) * gi;
        vi = kBeta2 * vi + (1.0 - kBeta2) * gi * gi;
        p[a]->data[i] -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + kEps);
      }
    }
  }

 private:
  SoftParams m_, v_;
  int t_ = 0;
};

std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

SelfGenResult self_generate(const ModelWeights& weights, const TokenSequences& questions,
                            std::size_t max_new, TokenId eos, int n_masks) {
  SelfGenResult res;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    DecodeResult d = decode_ar(weights, questions[i], max_new, eos);
    if (d.tokens.size() <= static_cast<std::size_t>(n_masks) + 1) {
      ++res.dropped;
      continue;
    }
    res.pairs.push_back({questions[i], std::move(d.tokens), i});
  }
  return res;
}

const char* to_string(TuneOptimizer opt) {
  return opt == TuneOptimizer::sgd ? "sgd" : "adam";
}

TuneOptimizer tune_optimizer_from_string(std::string_view name) {
  if (name == "sgd") return TuneOptimizer::sgd;
  if (name == "adam") return TuneOptimizer::adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

TrainSample make_sample_at(const QaPair& pair, int n_masks, std::size_t k) {
  if (n_masks < 1) throw ConfigError("n_masks must be positive");
  const std::size_t N = pair.answer.size();
  const std::size_t M = static_cast<std::size_t>(n_masks);
  if (N <= M + 1) throw ConfigError("answer too short to slice: need |Y| > M + 1");
  if (k > N - M - 1) throw ConfigError("slice index k out of range");
  if (pair.question.empty()) throw ConfigError("question must be non-empty");
  TrainSample s;
  s.context = pair.question;
  s.context.insert(s.context.end(), pair.answer.begin(), pair.answer.begin() + k + 1);
  s.labels.assign(pair.answer.begin() + k + 1, pair.answer.begin() + k + 1 + M);
  s.source = pair.source;
  s.k = k;
  return s;
}

TrainSample make_sample(const QaPair& pair, int n_masks, std::mt19937_64& rng) {
  const std::size_t N = pair.answer.size();
  const std::size_t M = static_cast<std::size_t>(std::max(n_masks, 1));
  if (N <= M + 1) throw ConfigError("answer too short to slice: need |Y| > M + 1");
  std::uniform_int_distribution<std::size_t> pick(0, N - M - 1);
  return make_sample_at(pair, n_masks, pick(rng));
}

SampleLoss sar_loss(const TrainSample& sample, const ModelWeights& weights,
                    const SoftParams& soft) {
  if (sample.labels.size() != static_cast<std::size_t>(soft.n_masks)) {
    throw ShapeError("sample label count differs from the mask count");
  }
  const FlatPlan plan = build_training_plan(sample.context, soft.n_masks);
  SlotLabels labels(plan.size());
  for (std::size_t j = 0; j < sample.labels.size(); ++j) {
    labels[plan.mask_slot(0, j)] = sample.labels[j];
  }
  SoftLoss r = grad_soft(plan, weights, soft, labels);
  return {r.loss, std::move(r.grad)};
}

BatchGradient sar_gradient(std::span<const TrainSample> batch, const ModelWeights& weights,
                           const SoftParams& soft) {
  if (batch.empty()) throw ConfigError("batch must be non-empty");
  BatchGradient res;
  res.grad = SoftParams::zeros(weights.config, soft.mode, soft.prompt_len, soft.n_masks);
  auto acc = arrays_of(res.grad);
  double loss = 0.0;
  for (const auto& sample : batch) {
    SampleLoss r = sar_loss(sample, weights, soft);
    loss += r.loss;
    auto g = arrays_of(r.grad);
    for (std::size_t a = 0; a < acc.size(); ++a) {
      for (std::size_t i = 0; i < acc[a]->data.size(); ++i) acc[a]->data[i] += g[a]->data[i];
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  res.mean_loss = loss * scale;
  if (!std::isfinite(res.mean_loss)) throw NumericError("non-finite SAR loss");
  for (Tensor* t : acc) {
    for (double& v : t->data) v *= scale;
  }
  return res;
}

SarStepResult sar_step(std::span<const TrainSample> batch, const ModelWeights& weights,
                       const SoftParams& soft, double lr) {
  BatchGradient g = sar_gradient(batch, weights, soft);
  SarStepResult res{g.mean_loss, soft};
  auto dst = arrays_of(res.soft);
  auto src = arrays_of(g.grad);
  for (std::size_t a = 0; a < dst.size(); ++a) {
    for (std::size_t i = 0; i < dst[a]->data.size(); ++i) dst[a]->data[i] -= lr * src[a]->data[i];
  }
  return res;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0 || step > total_steps) throw ConfigError("cosine_lr step out of range");
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

SoftParams init_soft(const ModelConfig& config, int prompt_len, int n_masks,
                     std::uint64_t seed, PromptingMode mode) {
  SoftParams s = SoftParams::zeros(config, mode, prompt_len, n_masks);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (Tensor* t : arrays_of(s)) {
    for (double& v : t->data) v = normal(rng);
  }
  return s;
}

TuneResult tune(const ModelWeights& weights, std::span<const TrainSample> samples,
                const TuneConfig& cfg) {
  if (samples.empty()) throw ConfigError("no training samples");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("epochs and batch_size must be positive");
  if (!(cfg.lr0 > 0.0)) throw ConfigError("initial learning rate must be positive");
  const int prompt_len = cfg.mode == PromptingMode::mask_only ? 0 : cfg.prompt_len;
  TuneResult res;
  res.soft = init_soft(weights.config, prompt_len, cfg.n_masks, cfg.seed, cfg.mode);

  const std::size_t per_epoch =
      (samples.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * static_cast<std::size_t>(cfg.epochs);
  std::vector<std::size_t> order(samples.size());
  std::mt19937_64 rng(cfg.seed + 1);
  std::size_t step = 0;
  std::vector<TrainSample> batch;
  AdamState adam(res.soft);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i) {
        batch.push_back(samples[order[i]]);
      }
      const double lr = cosine_lr(step, total, cfg.lr0);
      double loss = 0.0;
      if (cfg.optimizer == TuneOptimizer::sgd) {
        SarStepResult r = sar_step(batch, weights, res.soft, lr);
        res.soft = std::move(r.soft);
        loss = r.mean_loss;
      } else {
        BatchGradient g = sar_gradient(batch, weights, res.soft);
        loss = g.mean_loss;
        adam.apply(res.soft, g.grad, lr);
      }
      res.log.push_back({step, lr, loss});
      ++step;
    }
  }
  return res;
}

void write_dataset_jsonl(const std::string& path, std::span<const TrainSample> samples) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["context"] = s.context;
    j["labels"] = s.labels;
    j["source"] = s.source;
    j["k"] = s.k;
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("failed writing " + path);
}

std::vector<TrainSample> read_dataset_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  std::vector<TrainSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TrainSample s;
      s.context = j.at("context").get<std::vector<TokenId>>();
      s.labels = j.at("labels").get<std::vector<TokenId>>();
      s.source = j.value("source", std::size_t{0});
      s.k = j.value("k", std::size_t{0});
      if (s.context.empty()) throw ConfigError("empty context");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_tune_log_csv(const std::string& path, std::span<const TuneLogRow> log) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "step,lr,loss\n";
  for (const auto& r : log) os << r.step << ',' << fmt_real(r.lr) << ',' << fmt_real(r.loss) << '\n';
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace sardec
