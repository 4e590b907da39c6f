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

#include "narctc/ctc.hpp"
#include "narctc/model.hpp"
#include "narctc/numerics.hpp"

namespace narctc {
namespace {

ModelConfig tiny(std::size_t k = 2, std::size_t layers = 1) {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 12;
  c.enc_layers = layers;
  c.dec_layers = layers;
  c.split_factor = k;
  c.vocab_size = 6;
  c.max_source_len = 64;
  c.seed = 3;
  return c;
}

std::vector<TokenId> random_sentence(std::size_t length, std::size_t vocab, std::mt19937_64& rng) {
  std::vector<TokenId> s(length);
  for (auto& id : s) id = static_cast<TokenId>(1 + rng() % vocab);
  return s;
}

TEST(ModelConfig, LargeHasHandCountedParameters) {
  const ModelConfig c = ModelConfig::large(32000);
  EXPECT_EQ(c.d_model, 1024u);
  EXPECT_EQ(c.n_heads, 16u);
  EXPECT_EQ(c.d_ff, 4096u);
  EXPECT_EQ(c.enc_layers, 6u);
  EXPECT_EQ(c.dec_layers, 6u);
  EXPECT_EQ(c.split_factor, 3u);
  EXPECT_EQ(parameter_count(c), 245061889u);
}

TEST(ModelConfig, CountMatchesConstructedModel) {
  ModelConfig c = tiny();
  c.d_model = 4;
  c.d_ff = 6;
  c.vocab_size = 5;
  EXPECT_EQ(parameter_count(c), 494u);
  for (const ModelConfig& cfg : {c, tiny(3, 2), tiny(1, 0)}) {
    const Model<float> m(cfg);
    std::size_t total = 0;
    for (const auto& p : m.parameters()) total += p.value.size();
    EXPECT_EQ(total, parameter_count(cfg));
  }
}

TEST(ModelConfig, Validation) {
  ModelConfig c = tiny();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.split_factor = 0;
  EXPECT_THROW(Model<float>{c}, ConfigError);
}

TEST(Model, OutputFramesAreKTimesSourceLength) {
  std::mt19937_64 rng(1);
  for (std::size_t k : {1, 2, 3}) {
    Model<float> m(tiny(k));
    for (std::size_t tx = 1; tx <= 64; ++tx) {
      const auto lp = m.forward(random_sentence(tx, 6, rng));
      ASSERT_EQ(lp.rows(), k * tx);
      ASSERT_EQ(lp.cols(), 7u);
    }
  }
  Model<float> m3(tiny(3));
  EXPECT_EQ(m3.forward(random_sentence(5, 6, rng)).rows(), 15u);
}

TEST(Model, RowsAreLogDistributions) {
  std::mt19937_64 rng(2);
  Model<double> m(tiny(1));
  const auto lp = m.forward(random_sentence(1, 6, rng));
  ASSERT_EQ(lp.rows(), 1u);
  double total = 0;
  for (double v : lp.row(0)) total += std::exp(v);
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Model, InputErrors) {
  Model<float> m(tiny());
  EXPECT_THROW(m.forward(std::vector<TokenId>{}), EmptyInputError);
  EXPECT_THROW(m.forward(std::vector<TokenId>(65, 3)), LengthError);
  EXPECT_THROW(m.forward(std::vector<TokenId>{3, 7}), VocabularyError);
}

TEST(Model, ForwardIsDeterministicAndSeeded) {
  std::mt19937_64 rng(3);
  const auto s = random_sentence(7, 6, rng);
  Model<float> a(tiny()), b(tiny());
  EXPECT_EQ(a.forward(s), a.forward(s));
  EXPECT_EQ(a.forward(s), b.forward(s));
  ModelConfig other = tiny();
  other.seed = 4;
  Model<float> c(other);
  EXPECT_NE(a.parameter("split.w").value, c.parameter("split.w").value);
}

TEST(Model, BatchedRowsEqualSingleSentenceRows) {
  std::mt19937_64 rng(4);
  Model<float> m(tiny(3, 2));
  std::vector<std::vector<TokenId>> batch;
  for (std::size_t len : {5, 1, 9, 3, 9, 2}) batch.push_back(random_sentence(len, 6, rng));
  const auto out = m.forward_batch(batch);
  ASSERT_EQ(out.batch_size(), batch.size());
  EXPECT_EQ(out.frames_per_sentence, 27u);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_EQ(out.sentence(i), m.forward(batch[i])) << "sentence " << i;
    for (std::size_t t = out.valid_frames[i]; t < out.frames_per_sentence; ++t) {
      const float* row = out.log_probs.data() + (i * out.frames_per_sentence + t) * 7;
      EXPECT_EQ(row[kBlankId], 0.0f);
      for (std::size_t v = 1; v < 7; ++v) EXPECT_EQ(row[v], log_zero<float>());
    }
  }
}

TEST(Model, EncoderIgnoresPadPositions) {
  std::mt19937_64 rng(5);
  Model<double> m(tiny(2, 2));
  const auto s = random_sentence(6, 6, rng);
  Graph<double> g(false);
  const auto plain = m.encode(g, m.embed(g, s));
  std::vector<TokenId> padded = s;
  padded.insert(padded.end(), 4, 1);
  std::vector<std::uint8_t> mask(10, 1);
  std::fill(mask.begin() + 6, mask.end(), 0);
  const auto with_pad = m.encode(g, m.embed(g, padded, mask));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      EXPECT_NEAR(plain.states.value()(i, j), with_pad.states.value()(i, j), 1e-5);
}

TEST(Model, EmbedAddsPositionsToScaledLookup) {
  Model<double> m(tiny());
  auto& table = m.parameter("embed.table").value;
  for (std::size_t j = 0; j < 8; ++j) table(3, j) = 0;
  Graph<double> g(false);
  const auto e = m.embed(g, std::vector<TokenId>{3, 3});
  const auto pe = sinusoidal_positions<double>(2, 8);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(e.states.value()(0, j), pe(0, j), 1e-15);
  const auto e4 = m.embed(g, std::vector<TokenId>{4, 4});
  EXPECT_NE(e4.states.value().row(0)[0], e4.states.value().row(1)[0]);
  EXPECT_NEAR(e4.states.value()(0, 1) - pe(0, 1), table(4, 1) * std::sqrt(8.0), 1e-12);
}

TEST(Model, ZeroLayersAreIdentity) {
  std::mt19937_64 rng(6);
  Model<double> m(tiny(2, 0));
  Graph<double> g(false);
  const auto e = m.embed(g, random_sentence(4, 6, rng));
  EXPECT_EQ(m.encode(g, e).states.value(), e.states.value());
  const auto s = m.split_states(g, e);
  EXPECT_EQ(m.decode_states(g, s).value(), s.states.value());
}

TEST(Model, SplitWithZeroWeightsRepeatsBiasBlocks) {
  ModelConfig c = tiny(3, 0);
  c.d_model = 4;
  c.split_positions = false;
  Model<double> m(c);
  m.parameter("split.w").value.fill(0);
  auto& b = m.parameter("split.b").value;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<double>(i) + 0.5;
  Graph<double> g(false);
  const auto s = m.split_states(g, m.embed(g, std::vector<TokenId>{3, 5}));
  ASSERT_EQ(s.states.shape(), (Shape{6, 4}));
  ASSERT_EQ(s.mask.size(), 6u);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(s.states.value()(r, j), b[(r % 3) * 4 + j]);
}

TEST(Model, SplitWithUnitKAndIdentityIsIdentity) {
  ModelConfig c = tiny(1, 0);
  c.split_positions = false;
  Model<double> m(c);
  auto& w = m.parameter("split.w").value;
  w.fill(0);
  for (std::size_t i = 0; i < 8; ++i) w(i, i) = 1;
  Graph<double> g(false);
  std::mt19937_64 rng(7);
  const auto e = m.embed(g, random_sentence(5, 6, rng));
  EXPECT_EQ(m.split_states(g, e).states.value(), e.states.value());
}

TEST(Model, BlankBiasDecodesToEmpty) {
  Model<float> m(tiny());
  m.parameter("output.w").value.fill(0);
  m.parameter("output.b").value[kBlankId] = 5;
  std::mt19937_64 rng(8);
  EXPECT_TRUE(greedy_decode(m.forward(random_sentence(6, 6, rng))).empty());
}

TEST(Model, DecoderIsNotCausal) {
  std::mt19937_64 rng(9);
  Model<double> m(tiny(2, 2));
  Graph<double> g(false);
  const auto s = m.split_states(g, m.encode(g, m.embed(g, random_sentence(4, 6, rng))));
  const auto base = m.decode_states(g, s).value();
  Tensor<double> bumped = s.states.value();
  const std::size_t last = bumped.rows() - 1;
  for (std::size_t j = 0; j < bumped.cols(); ++j) bumped(last, j) += 1.0;
  const SplitStates<double> probe{g.constant(bumped), s.mask, s.sequences};
  const auto moved = m.decode_states(g, probe).value();
  double change = 0;
  for (std::size_t j = 0; j < base.cols(); ++j) change += std::abs(moved(0, j) - base(0, j));
  EXPECT_GT(change, 1e-6);
}

TEST(Model, EveryParameterReceivesGradient) {
  std::mt19937_64 rng(10);
  Model<double> m(tiny(2, 2));
  std::vector<std::vector<TokenId>> sources{random_sentence(5, 6, rng), random_sentence(3, 6, rng)};
  const std::vector<LabelSequence> targets{{3, 4, 4, 5}, {6, 1}};
  m.zero_grad();
  Graph<double> g;
  std::vector<FrameRange> frames;
  const auto logits = m.logits(g, sources, &frames);
  g.backward(ctc_loss(logits, std::span<const LabelSequence>(targets), frames));
  for (const auto& p : m.parameters()) {
    double norm = 0;
    for (double v : p.grad.values()) norm += v * v;
    EXPECT_GT(norm, 0.0) << p.name;
  }
}

}  // namespace
}  // namespace narctc
