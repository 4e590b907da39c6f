// Copyright 2026  The narctc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "narctc/synthetic.hpp"
#include "narctc/training.hpp"

namespace narctc {
namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.split_factor = 2;
  c.vocab_size = 7;
  c.max_source_len = 16;
  c.seed = 5;
  return c;
}

Batch batch_of(const std::vector<std::vector<TokenId>>& sources,
               const std::vector<LabelSequence>& targets) {
  Batch b;
  for (const auto& s : sources) b.max_length = std::max(b.max_length, s.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto row = sources[i];
    row.resize(b.max_length, Vocabulary::kPad);
    b.source.insert(b.source.end(), row.begin(), row.end());
    b.source_lengths.push_back(sources[i].size());
    b.targets.push_back(targets[i]);
    b.lines.push_back(i + 1);
  }
  return b;
}

TEST(LrSchedule, ReferenceValues) {
  EXPECT_EQ(lr_schedule(4000, 1e-4, 8000), 5e-5);
  EXPECT_EQ(lr_schedule(8000, 1e-4, 8000), 1e-4);
  EXPECT_EQ(lr_schedule(32000, 1e-4, 8000), 5e-5);
  EXPECT_EQ(lr_schedule(1, 1e-4, 8000), 1e-4 / 8000);
  EXPECT_THROW(lr_schedule(0, 1e-4, 8000), ContractError);
}

TEST(LrSchedule, ContinuousAtWarmupAndDecaying) {
  const double at = lr_schedule(8000, 1e-4, 8000);
  EXPECT_NEAR(lr_schedule(7999, 1e-4, 8000), at, 1.3e-8);
  EXPECT_NEAR(lr_schedule(8001, 1e-4, 8000), at, 1.3e-8);
  for (std::size_t s = 8000; s < 9000; ++s)
    EXPECT_GT(lr_schedule(s, 1e-4, 8000), lr_schedule(s + 1, 1e-4, 8000));
  for (std::size_t s = 1; s < 8000; s += 37)
    EXPECT_LT(lr_schedule(s, 1e-4, 8000), lr_schedule(s + 1, 1e-4, 8000));
}

TEST(TrainingConfig, Validation) {
  TrainingConfig c;
  c.base_lr = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainingConfig{};
  c.clip_norm = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainStep, LossIsCtcPerTargetToken) {
  Model<double> m(small_model());
  const std::vector<TokenId> src{3, 4, 5};
  const LabelSequence y{5, 4, 3, 3};
  const double expected = ctc_loss(m.forward(src), y) / 4.0;
  auto opt = OptimizerState<double>::for_model(m);
  const auto metrics = train_step(m, batch_of({src}, {y}), opt, TrainingConfig{});
  EXPECT_NEAR(metrics.loss, expected, 1e-12);
  EXPECT_EQ(metrics.step, 1u);
  EXPECT_EQ(metrics.sentences, 1u);
  EXPECT_EQ(metrics.target_tokens, 4u);
}

TEST(TrainStep, AdamUpdateMatchesHandComputation) {
  Model<double> m(small_model());
  TrainingConfig cfg;
  cfg.clip_norm.reset();
  cfg.base_lr = 1e-3;
  cfg.warmup_steps = 2;
  auto opt = OptimizerState<double>::for_model(m);
  const Batch batch = batch_of({{3, 4, 5}, {6, 7}}, {{4, 5}, {7}});

  std::vector<Tensor<double>> m1, m2;
  for (const auto& p : m.parameters()) {
    m1.emplace_back(p.value.shape());
    m2.emplace_back(p.value.shape());
  }
  for (std::size_t t = 1; t <= 3; ++t) {
    std::vector<Tensor<double>> before;
    for (const auto& p : m.parameters()) before.push_back(p.value);
    const auto metrics = train_step(m, batch, opt, cfg);
    const double lr = lr_schedule(t, cfg.base_lr, cfg.warmup_steps);
    EXPECT_EQ(metrics.lr, lr);
    const double c1 = 1 - std::pow(0.9, double(t)), c2 = 1 - std::pow(0.98, double(t));
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      const auto& p = m.parameters()[i];
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad[j];
        m1[i][j] = 0.9 * m1[i][j] + 0.1 * g;
        m2[i][j] = 0.98 * m2[i][j] + 0.02 * g * g;
        const double expected = before[i][j] - lr * (m1[i][j] / c1) / (std::sqrt(m2[i][j] / c2) + 1e-9);
        ASSERT_NEAR(p.value[j], expected, 1e-12) << p.name << "[" << j << "] step " << t;
      }
    }
  }
}

TEST(TrainStep, ClippingBoundsGradientNorm) {
  Model<double> m(small_model());
  TrainingConfig cfg;
  cfg.clip_norm = 1e-3;
  auto opt = OptimizerState<double>::for_model(m);
  const auto metrics = train_step(m, batch_of({{3, 4, 5, 6}}, {{6, 5, 4, 3}}), opt, cfg);
  EXPECT_GT(metrics.grad_norm, 1e-3);
  EXPECT_LE(gradient_norm(m), 1e-3 * (1 + 1e-12));
}

TEST(TrainStep, SkipsInfeasibleRowsAndCountsSteps) {
  Model<float> m(small_model());
  auto opt = OptimizerState<float>::for_model(m);
  const Batch batch = batch_of({{3}, {4, 5}}, {{3, 4, 5}, {5}});
  const auto first = train_step(m, batch, opt, TrainingConfig{});
  EXPECT_EQ(first.skipped, 1u);
  EXPECT_EQ(first.sentences, 1u);
  EXPECT_EQ(opt.step_count, 1u);
  train_step(m, batch, opt, TrainingConfig{});
  EXPECT_EQ(opt.step_count, 2u);
}

TEST(TrainStep, StepJsonHasFixedKeyOrder) {
  StepMetrics m;
  m.step = 3;
  EXPECT_EQ(to_json(m).dump(),
            R"({"step":3,"loss":0.0,"lr":0.0,"grad_norm":0.0,"skipped":0,"wall_ms":0.0})");
}

ParallelCorpus toy_corpus(std::size_t pairs, ToyTask task = ToyTask::kReverse) {
  ToyTaskConfig cfg;
  cfg.task = task;
  cfg.symbols = 6;
  cfg.min_length = 2;
  cfg.max_length = 5;
  const ToyData d = generate_toy_data(cfg, pairs, 0);
  return make_corpus(d.train.sources, d.train.targets, toy_vocabulary(6));
}

TrainingConfig quick_config() {
  TrainingConfig cfg;
  cfg.base_lr = 3e-3;
  cfg.warmup_steps = 10;
  cfg.batch_token_budget = 64;
  cfg.seed = 2;
  return cfg;
}

double mean_loss(const std::vector<double>& losses, std::size_t from, std::size_t to) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += losses[i];
  return s / static_cast<double>(to - from);
}

TEST(Trainer, LossDecreasesOnCopyTask) {
  const ParallelCorpus corpus = toy_corpus(200, ToyTask::kCopy);
  ModelConfig mc = small_model();
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.vocab_size = 6 + Vocabulary::kReserved - 1;
  Model<float> m(mc);
  auto opt = OptimizerState<float>::for_model(m);
  Trainer<float> trainer(m, opt, corpus, quick_config());
  std::vector<double> losses;
  trainer.run(2000, [&](const StepMetrics& s) { losses.push_back(s.loss); });
  ASSERT_EQ(losses.size(), 2000u);
  EXPECT_LT(mean_loss(losses, 1950, 2000), mean_loss(losses, 0, 50));
}

TEST(Trainer, DoublePrecisionRunsAreBitIdentical) {
  const ParallelCorpus corpus = toy_corpus(60);
  ModelConfig mc = small_model();
  mc.vocab_size = 6 + Vocabulary::kReserved - 1;
  auto run = [&] {
    Model<double> m(mc);
    auto opt = OptimizerState<double>::for_model(m);
    Trainer<double> trainer(m, opt, corpus, quick_config());
    std::vector<double> losses;
    trainer.run(100, [&](const StepMetrics& s) { losses.push_back(s.loss); });
    return std::pair{losses, m.parameters()[0].value};
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, EmptyCorpusIsConfigError) {
  Model<float> m(small_model());
  auto opt = OptimizerState<float>::for_model(m);
  const ParallelCorpus empty;
  EXPECT_THROW(Trainer<float>(m, opt, empty, TrainingConfig{}), ConfigError);
}

}  // namespace
}  // namespace narctc
