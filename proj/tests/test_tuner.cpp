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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "sardec/decoder.hpp"
#include "sardec/soft_store.hpp"
#include "sardec/tuner.hpp"
#include "test_util.hpp"

namespace sardec {
namespace {

QaPair pair_of_length(std::size_t n) {
  QaPair p;
  p.question = {0, 9, 9};
  for (std::size_t i = 0; i < n; ++i) p.answer.push_back(static_cast<TokenId>(10 + i));
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("sardec_tuner_" + name)).string();
}

TEST(MakeSample, SlicesAtTheGivenIndex) {
  const QaPair p = pair_of_length(10);
  const TrainSample s = make_sample_at(p, 3, 4);
  const std::vector<TokenId> ctx = {0, 9, 9, 10, 11, 12, 13, 14};
  EXPECT_EQ(s.context, ctx);
  EXPECT_EQ(s.labels, (std::vector<TokenId>{15, 16, 17}));
  EXPECT_EQ(s.k, 4u);
}

TEST(MakeSample, BoundaryRangeHasTwoSlicings) {
  const QaPair p = pair_of_length(5);
  std::mt19937_64 rng(1);
  std::set<std::size_t> seen;
  for (int i = 0; i < 200; ++i) seen.insert(make_sample(p, 3, rng).k);
  EXPECT_EQ(seen, (std::set<std::size_t>{0, 1}));
  EXPECT_EQ(make_sample_at(p, 3, 1).labels, (std::vector<TokenId>{12, 13, 14}));
  EXPECT_THROW(make_sample_at(p, 3, 2), ConfigError);
}

TEST(MakeSample, TooShortAnswersAreAnError) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(make_sample(pair_of_length(4), 3, rng), ConfigError);
  EXPECT_THROW(make_sample(pair_of_length(2), 3, rng), ConfigError);
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100), 3e-2);
  EXPECT_NEAR(cosine_lr(100, 100), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(50, 100, 0.4), 0.2, 1e-15);
  EXPECT_NEAR(cosine_lr(25, 100, 1.0), 0.5 * (1.0 + std::cos(std::numbers::pi / 4.0)), 1e-15);
}

TEST(InitSoft, ShapesAndDeterminism) {
  const ModelConfig c = testing::tiny_config();
  const SoftParams a = init_soft(c, 16, 3, 7, PromptingMode::deep);
  EXPECT_EQ(a.prefix.shape, (std::vector<std::size_t>{2, 2, 16, 8}));
  EXPECT_EQ(a.masks.shape, (std::vector<std::size_t>{3, 8}));
  EXPECT_EQ(a, init_soft(c, 16, 3, 7, PromptingMode::deep));
  EXPECT_NE(a, init_soft(c, 16, 3, 8, PromptingMode::deep));
  double sum = 0.0, sq = 0.0;
  for (double v : a.prefix.data) {
    sum += v;
    sq += v * v;
  }
  const double count = static_cast<double>(a.prefix.size());
  EXPECT_NEAR(std::sqrt(sq / count - (sum / count) * (sum / count)), 0.02, 0.003);
  const SoftParams none = init_soft(c, 0, 3, 7, PromptingMode::mask_only);
  EXPECT_TRUE(none.prefix.empty());
  EXPECT_TRUE(none.prompt.empty());
}

class TunerModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    weights_ = new ModelWeights(init_weights(testing::tiny_config(12, 16, 2, 4, 32), 31));
  }
  static void TearDownTestSuite() { delete weights_; }
  static const ModelWeights& w() { return *weights_; }

  std::vector<TrainSample> batch(std::size_t count, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<TrainSample> out;
    for (std::size_t i = 0; i < count; ++i) {
      TrainSample s;
      s.context = testing::random_tokens(rng, 4, 12);
      s.labels = testing::random_tokens(rng, 3, 12);
      out.push_back(s);
    }
    return out;
  }

  static ModelWeights* weights_;
};

ModelWeights* TunerModel::weights_ = nullptr;

TEST_F(TunerModel, SarLossIsTheSumOverMaskSlots) {
  const SoftParams soft = init_soft(w().config, 4, 3, 2, PromptingMode::deep);
  const TrainSample s = batch(1, 5)[0];
  const FlatPlan plan = build_training_plan(s.context, 3);
  const Logits logits = forward(plan, w(), soft);
  double want = 0.0;
  for (int j = 0; j < 3; ++j) {
    SlotLabels single(plan.size());
    single[s.context.size() + j] = s.labels[j];
    want += testing::reference_loss(logits, single);
  }
  EXPECT_NEAR(sar_loss(s, w(), soft).loss, want, 1e-12);
}

TEST_F(TunerModel, ZeroLearningRateLeavesParamsUnchanged) {
  const SoftParams soft = init_soft(w().config, 4, 3, 2, PromptingMode::deep);
  const auto b = batch(1, 6);
  const SarStepResult r = sar_step(b, w(), soft, 0.0);
  EXPECT_EQ(r.soft, soft);
  EXPECT_NEAR(r.mean_loss, sar_loss(b[0], w(), soft).loss, 1e-12);
}

TEST_F(TunerModel, FiftyStepsLowerTheLoss) {
  SoftParams soft = init_soft(w().config, 4, 3, 2, PromptingMode::deep);
  const auto b = batch(4, 7);
  const double first = sar_step(b, w(), soft, 0.0).mean_loss;
  double last = first;
  for (int i = 0; i < 50; ++i) {
    SarStepResult r = sar_step(b, w(), soft, 1e-2);
    soft = std::move(r.soft);
    last = r.mean_loss;
  }
  EXPECT_LT(last, first);
}

TEST_F(TunerModel, StepIsPlainGradientDescentOnTheBatchMean) {
  const SoftParams soft = init_soft(w().config, 2, 3, 4, PromptingMode::shallow);
  const auto b = batch(3, 8);
  const SarStepResult r = sar_step(b, w(), soft, 0.5);
  SoftParams want = soft;
  std::vector<Tensor*> dst;
  want.for_each_array([&](const std::string&, Tensor& t) { dst.push_back(&t); });
  for (const auto& s : b) {
    const SampleLoss g = sar_loss(s, w(), soft);
    std::vector<const Tensor*> src;
    g.grad.for_each_array([&](const std::string&, const Tensor& t) { src.push_back(&t); });
    for (std::size_t a = 0; a < dst.size(); ++a) {
      for (std::size_t i = 0; i < dst[a]->data.size(); ++i) dst[a]->data[i] -= 0.5 * src[a]->data[i] / 3.0;
    }
  }
  EXPECT_LE(testing::max_relative_error(r.soft, want, 1e-8), 1e-10);
}

TEST_F(TunerModel, EmptyBatchIsAnError) {
  const SoftParams soft = init_soft(w().config, 4, 3, 2, PromptingMode::deep);
  EXPECT_THROW(sar_step({}, w(), soft, 0.1), ConfigError);
}

TEST_F(TunerModel, TuningKeepsWeightsFrozen) {
  const std::string before = weights_checksum(w());
  const std::string bytes = serialize(to_checkpoint(w()));
  TuneConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.prompt_len = 2;
  const auto samples = batch(4, 9);
  const TuneResult r = tune(w(), samples, cfg);
  EXPECT_EQ(r.log.size(), 4u);
  EXPECT_EQ(weights_checksum(w()), before);
  EXPECT_EQ(serialize(to_checkpoint(w())), bytes);
}

TEST_F(TunerModel, TunedParamsStayLossless) {
  TuneConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.prompt_len = 3;
  cfg.lr0 = 0.5;
  const TuneResult r = tune(w(), batch(6, 10), cfg);
  std::mt19937_64 rng(3);
  for (int q = 0; q < 10; ++q) {
    const auto query = testing::random_tokens(rng, 3, 12);
    StreamConfig sc;
    sc.max_new = 12;
    sc.n = 3;
    sc.k = 2;
    EXPECT_EQ(decode_streamlined(w(), r.soft, query, sc).tokens, decode_ar(w(), query, 12, 1).tokens);
  }
}

TEST_F(TunerModel, TuneLogFollowsTheSchedule) {
  TuneConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.prompt_len = 2;
  cfg.lr0 = 0.1;
  const TuneResult r = tune(w(), batch(6, 11), cfg);
  ASSERT_EQ(r.log.size(), 4u);
  for (const auto& row : r.log) EXPECT_DOUBLE_EQ(row.lr, cosine_lr(row.step, 4, 0.1));
  const std::string path = temp_path("log.csv");
  write_tune_log_csv(path, r.log);
  EXPECT_EQ(read_file(path).rfind("step,lr,loss\n0,", 0), 0u);
  std::filesystem::remove(path);
}

TEST_F(TunerModel, AdamOptionAlsoLowersTheLoss) {
  TuneConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 4;
  cfg.prompt_len = 2;
  cfg.lr0 = 1e-2;
  cfg.optimizer = TuneOptimizer::adam;
  const TuneResult r = tune(w(), batch(4, 12), cfg);
  EXPECT_LT(r.log.back().loss, r.log.front().loss);
  EXPECT_EQ(tune_optimizer_from_string("adam"), TuneOptimizer::adam);
  EXPECT_THROW(tune_optimizer_from_string("lbfgs"), ConfigError);
}

TEST(SelfGenerate, EarlyEosAnswersAreDropped) {
  // All-zero weights give uniform logits, so the greedy pick is always id 0.
  const ModelWeights w = ModelWeights::zeros(testing::tiny_config(4, 8, 1, 2, 8));
  const SelfGenResult r = self_generate(w, {{2, 2}, {3}}, 10, 0, 3);
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.dropped, 2u);
}

TEST(SelfGenerate, ContinuesTheRepeatingCorpus) {
  const BaseTrainResult base = train_base_lm(testing::abc_corpus(60), testing::abc_train_config());
  const SelfGenResult r = self_generate(base.weights, {{1}}, 7, 0, 3);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].answer, (std::vector<TokenId>{2, 3, 1, 2, 3, 1, 2}));
  EXPECT_EQ(r.pairs[0].answer, decode_ar(base.weights, std::vector<TokenId>{1}, 7, 0).tokens);
}

TEST(Dataset, RoundTripAndDeterminism) {
  QaPair p = pair_of_length(9);
  std::vector<TrainSample> samples;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 5; ++i) samples.push_back(make_sample(p, 3, rng));
  const std::string a = temp_path("a.jsonl"), b = temp_path("b.jsonl");
  write_dataset_jsonl(a, samples);
  write_dataset_jsonl(b, samples);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(read_dataset_jsonl(a), samples);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

// Chi-square goodness of fit for the sampled k against the uniform law.
TEST(MakeSample, IndexIsUniform) {
  const QaPair p = pair_of_length(13);
  constexpr int kBins = 13 - 3;
  std::vector<int> counts(kBins, 0);
  std::mt19937_64 rng(2024);
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) ++counts[make_sample(p, 3, rng).k];
  double chi2 = 0.0;
  const double expected = static_cast<double>(kDraws) / kBins;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // Upper 1% point of chi-square with 9 degrees of freedom.
  EXPECT_LT(chi2, 21.666);
}

}  // namespace
}  // namespace sardec
