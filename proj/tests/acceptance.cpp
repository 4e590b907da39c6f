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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "narctc/checkpoint.hpp"
#include "narctc/evalbench.hpp"
#include "narctc/synthetic.hpp"
#include "narctc/training.hpp"
#include "narctc/verify.hpp"

namespace narctc {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome from_check(const CheckResult& r, double limit_seconds = 0) {
  Outcome o{r.passed, r.detail};
  if (limit_seconds > 0 && r.seconds >= limit_seconds) {
    o.passed = false;
    o.detail += fmt(" (took %.1fs, limit %.0fs)", r.seconds, limit_seconds);
  }
  return o;
}

Outcome gradients(std::uint64_t seed) {
  const auto ctc = check_ctc_gradient(seed, 20, 1e-4);
  const auto model = check_model_gradient(seed + 1, 20, 1e-4);
  const double secs = ctc.seconds + model.seconds;
  Outcome o{ctc.passed && model.passed && secs < 300,
            fmt("ctc_grad %zu instances max rel %.2e; model %zu instances max rel %.2e; %.1fs",
                ctc.instances, ctc.worst, model.instances, model.worst, secs)};
  return o;
}

Outcome lr_values() {
  const std::size_t steps[] = {4000, 8000, 32000};
  const double want[] = {5e-5, 1e-4, 5e-5};
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    const double got = lr_schedule(steps[i], 1e-4, 8000);
    ok = ok && got == want[i];
    detail += fmt("%s%zu -> %.17g", i ? ", " : "", steps[i], got);
  }
  return {ok, detail};
}

Outcome bleu_examples() {
  using Lines = std::vector<std::string>;
  const double perfect = bleu(Lines{"a b c d e f"}, Lines{"a b c d e f"});
  const double brevity = bleu(Lines{"a b c d"}, Lines{"a b c d e"});
  const double zero = bleu(Lines{"x y z w"}, Lines{"a b c d"});

  std::mt19937_64 rng(17);
  Lines hyp, ref;
  for (int i = 0; i < 100; ++i) {
    std::string h, r;
    const std::size_t len = 4 + rng() % 12;
    for (std::size_t j = 0; j < len; ++j) {
      const std::string w = "w" + std::to_string(rng() % 20);
      r += (j ? " " : "") + w;
      h += (j ? " " : "") + (rng() % 4 ? w : "w" + std::to_string(rng() % 20));
    }
    hyp.push_back(h);
    ref.push_back(r);
  }
  const double base = bleu(hyp, ref);
  std::vector<std::size_t> order(100);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Lines sh, sr;
  for (auto i : order) {
    sh.push_back(hyp[i]);
    sr.push_back(ref[i]);
  }
  const double shuffled = bleu(sh, sr);
  const bool ok = perfect == 100.0 && std::abs(brevity - 77.88) <= 0.01 && zero == 0.0 &&
                  shuffled == base;
  return {ok, fmt("%.4f / %.4f / %.4f; 100-pair corpus %.10f vs shuffled %.10f", perfect, brevity,
                  zero, base, shuffled)};
}

// Training, benchmarking and round-trip checks share one toy model.
class ToyPipeline {
 public:
  explicit ToyPipeline(fs::path workdir) : dir_(std::move(workdir)) {
    fs::create_directories(dir_);
    ToyTaskConfig cfg;
    cfg.task = ToyTask::kReverse;
    cfg.symbols = 16;
    cfg.min_length = 3;
    cfg.max_length = 10;
    cfg.seed = 1;
    data_ = generate_toy_data(cfg, 5000, 1500);
    vocab_ = toy_vocabulary(cfg.symbols);
    vocab_.save(dir_ / "vocab.txt");
  }

  Outcome train() {
    ModelConfig mc;
    mc.d_model = 64;
    mc.n_heads = 4;
    mc.d_ff = 256;
    mc.enc_layers = 2;
    mc.dec_layers = 2;
    mc.split_factor = 2;
    mc.vocab_size = vocab_.size() - 1;
    mc.max_source_len = 32;
    mc.seed = 1;
    TrainingConfig tc;
    tc.base_lr = 1e-3;
    tc.warmup_steps = 300;
    tc.total_steps = 3000;
    tc.batch_token_budget = 1024;
    tc.seed = 1;

    const ParallelCorpus corpus = make_corpus(data_.train.sources, data_.train.targets, vocab_);
    Model<float> model(mc);
    auto opt = OptimizerState<float>::for_model(model);
    Trainer<float> trainer(model, opt, corpus, tc);
    const auto start = Clock::now();
    double accuracy = 0;
    double last_loss = 0;
    while (opt.step_count < tc.total_steps) {
      trainer.run(std::min(opt.step_count + 250, tc.total_steps),
                  [&](const StepMetrics& m) { last_loss = m.loss; });
      accuracy = heldout_accuracy(model);
      std::cout << fmt("  step %zu loss %.4f held-out exact match %.4f (%.0fs)\n", opt.step_count,
                       last_loss, accuracy, seconds_since(start))
                << std::flush;
      if (accuracy >= 0.95) break;
    }
    const double secs = seconds_since(start);
    checkpoint_ = dir_ / "toy.ckpt";
    save_checkpoint(checkpoint_, model, &opt,
                    CheckpointInfo{model.config(), vocab_.hash(), "", opt.step_count});
    trained_ = true;
    return {accuracy >= 0.95 && opt.step_count <= 3000 && secs < 900,
            fmt("%.2f%% exact match on 500 held-out pairs after %zu steps in %.0fs",
                100 * accuracy, opt.step_count, secs)};
  }

  Outcome batching_speedup() {
    if (!trained_) return {false, "no toy checkpoint"};
    Translator t = load_translator(checkpoint_, dir_ / "vocab.txt");
    const auto& lines = data_.heldout.sources;
    const auto latency = run_bench(t, lines, DecodeMode::kLatency, 1, 16);
    const auto batched = run_bench(t, lines, DecodeMode::kBatched, 32, 16);
    const double ratio =
        batched.report.sentences_per_second / latency.report.sentences_per_second;
    const bool same = latency.translations == batched.translations;
    return {ratio >= 1.5 && same && latency.report.sentence_count >= 1000,
            fmt("%zu sentences: latency %.1f sent/s, batched(32) %.1f sent/s, speedup %.2fx, "
                "translations %s",
                latency.report.sentence_count, latency.report.sentences_per_second,
                batched.report.sentences_per_second, ratio, same ? "identical" : "DIFFER")};
  }

  Outcome mode_equivalence() {
    if (!trained_) return {false, "no toy checkpoint"};
    Translator t = load_translator(checkpoint_, dir_ / "vocab.txt");
    std::vector<std::string> corpus = data_.heldout.sources;
    corpus.insert(corpus.end(), data_.train.sources.begin(), data_.train.sources.begin() + 500);
    corpus.push_back("");
    write(dir_ / "latency.txt", run_job(t, corpus, DecodeMode::kLatency, 1).outputs);
    write(dir_ / "batched.txt", run_job(t, corpus, DecodeMode::kBatched, 32).outputs);
    const std::string a = slurp(dir_ / "latency.txt"), b = slurp(dir_ / "batched.txt");
    return {a == b, fmt("%zu lines, %zu bytes, files %s", corpus.size(), a.size(),
                        a == b ? "byte-identical" : "DIFFER")};
  }

  Outcome checkpoint_round_trip() {
    if (!trained_) return {false, "no toy checkpoint"};
    auto first = load_checkpoint<float>(checkpoint_);
    const fs::path copy = dir_ / "roundtrip.ckpt";
    save_checkpoint(copy, first.model, &first.optimizer, first.info);
    auto second = load_checkpoint<float>(copy);
    std::mt19937_64 rng(99);
    std::size_t identical = 0;
    for (int i = 0; i < 100; ++i) {
      std::vector<TokenId> s(1 + rng() % 20);
      for (auto& id : s) id = static_cast<TokenId>(Vocabulary::kReserved + rng() % 16);
      identical += first.model.forward(s) == second.model.forward(s);
    }
    return {identical == 100, fmt("%zu/100 random inputs bit-identical after save/load", identical)};
  }

 private:
  double heldout_accuracy(Model<float>& model) {
    Translator t(model, vocab_);
    const std::vector<std::string> sources(data_.heldout.sources.begin(),
                                           data_.heldout.sources.begin() + 500);
    const std::vector<std::string> targets(data_.heldout.targets.begin(),
                                           data_.heldout.targets.begin() + 500);
    return exact_match_accuracy(run_job(t, sources, DecodeMode::kBatched, 64).outputs, targets);
  }

  static void write(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p, std::ios::binary);
    for (const auto& l : lines) out << l << '\n';
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
  ToyData data_;
  Vocabulary vocab_;
  fs::path checkpoint_;
  bool trained_ = false;
};

}  // namespace
}  // namespace narctc

int main(int argc, char** argv) {
  using namespace narctc;
  CLI::App app{"narctc acceptance suite"};
  std::string workdir = "acceptance_work";
  std::uint64_t seed = 2024;
  app.add_option("--workdir", workdir, "Scratch directory for the toy corpus and checkpoints");
  app.add_option("--seed", seed, "Seed for the randomized checks");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.passed;
    std::cout << (o.passed ? "PASS" : "FAIL") << " " << id << " " << name << ": " << o.detail
              << fmt(" [%.2fs]", seconds_since(start)) << std::endl;
  };

  report(1, "ctc oracle", [&] { return from_check(check_ctc_oracle(seed, 1e-6), 60); });
  report(2, "ctc normalization", [&] { return from_check(check_ctc_normalization(seed, 1e-6)); });
  report(3, "gradients", [&] { return gradients(seed); });
  report(4, "shape law", [&] { return from_check(check_shape_law(64)); });
  ToyPipeline toy(workdir);
  report(5, "toy convergence", [&] { return toy.train(); });
  report(6, "lr schedule", [&] { return lr_values(); });
  report(7, "batching speedup", [&] { return toy.batching_speedup(); });
  report(8, "mode equivalence", [&] { return toy.mode_equivalence(); });
  report(9, "bleu", [&] { return bleu_examples(); });
  report(10, "checkpoint round trip", [&] { return toy.checkpoint_round_trip(); });

  std::cout << (failures ? "FAILED " : "ALL PASSED ") << 10 - failures << "/10" << std::endl;
  return failures ? 1 : 0;
}
