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

#include <benchmark/benchmark.h>

#include <random>

#include "narctc/ctc.hpp"
#include "narctc/model.hpp"
#include "narctc/numerics.hpp"
#include "narctc/verify.hpp"

namespace narctc {
namespace {

void BM_Matmul(benchmark::State& state) {
  const std::size_t m = state.range(0), k = 256, n = 256;
  std::mt19937_64 rng(1);
  std::normal_distribution<float> normal(0, 1);
  std::vector<float> x(m * k), w(k * n), b(n), out(m * n);
  for (auto* v : {&x, &w, &b})
    for (auto& e : *v) e = normal(rng);
  for (auto _ : state) {
    kernels::matmul(x.data(), w.data(), b.data(), out.data(), m, k, n, false);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * m * k * n, benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Matmul)->Arg(1)->Arg(4)->Arg(64)->Arg(512);

void BM_CtcLoss(benchmark::State& state) {
  const std::size_t frames = state.range(0), width = 1000;
  const Tensor<double> lp64 = random_log_probs(frames, width, 3);
  Tensor<float> lp({frames, width});
  for (std::size_t i = 0; i < lp.size(); ++i) lp[i] = static_cast<float>(lp64[i]);
  std::mt19937_64 rng(4);
  LabelSequence y(frames / 3);
  for (auto& t : y) t = static_cast<TokenId>(1 + rng() % (width - 1));
  for (auto _ : state) benchmark::DoNotOptimize(ctc_loss(lp, y));
}
BENCHMARK(BM_CtcLoss)->Arg(30)->Arg(90)->Arg(300);

ModelConfig bench_model() {
  ModelConfig c;
  c.d_model = 64;
  c.n_heads = 4;
  c.d_ff = 256;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.split_factor = 2;
  c.vocab_size = 32;
  c.max_source_len = 64;
  return c;
}

std::vector<std::vector<TokenId>> sentences(std::size_t count) {
  std::mt19937_64 rng(5);
  std::vector<std::vector<TokenId>> out(count);
  for (auto& s : out) {
    s.resize(5 + rng() % 16);
    for (auto& id : s) id = static_cast<TokenId>(3 + rng() % 30);
  }
  return out;
}

// 64 sentences per iteration, forwarded one at a time or in groups.
void BM_Forward(benchmark::State& state) {
  const std::size_t batch = state.range(0);
  Model<float> model(bench_model());
  const auto input = sentences(64);
  for (auto _ : state) {
    for (std::size_t i = 0; i < input.size(); i += batch) {
      const std::size_t n = std::min(batch, input.size() - i);
      benchmark::DoNotOptimize(model.forward_batch(std::span(input).subspan(i, n)));
    }
  }
  state.counters["sent/s"] =
      benchmark::Counter(static_cast<double>(input.size()), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace narctc

BENCHMARK_MAIN();
