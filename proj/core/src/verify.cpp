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

#include "narctc/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "narctc/ctc.hpp"
#include "narctc/numerics.hpp"

namespace narctc {
namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), format, a, b);
  return buf;
}

// Every label sequence of length <= max_length over symbols 1..symbols.
std::vector<LabelSequence> all_targets(std::size_t symbols, std::size_t max_length) {
  std::vector<LabelSequence> out{{}};
  std::vector<LabelSequence> frontier{{}};
  for (std::size_t len = 1; len <= max_length; ++len) {
    std::vector<LabelSequence> next;
    for (const auto& y : frontier) {
      for (TokenId s = 1; s <= symbols; ++s) {
        LabelSequence z = y;
        z.push_back(s);
        next.push_back(z);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

double model_loss(Model<double>& model, const std::vector<std::vector<TokenId>>& sources,
                  const std::vector<LabelSequence>& targets, bool backward) {
  Graph<double> g(backward);
  std::vector<FrameRange> frames;
  Var<double> logits = model.logits(g, sources, &frames);
  Var<double> loss = ctc_loss(logits, std::span<const LabelSequence>(targets),
                              std::span<const FrameRange>(frames));
  if (backward) g.backward(loss);
  return loss.value()[0];
}

}  // namespace

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("relative_error: size mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0 ? 0 : std::sqrt(diff) / denom;
}

Tensor<double> random_log_probs(std::size_t frames, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.5);
  Tensor<double> logits({frames, width});
  for (auto& v : logits.values()) v = normal(rng);
  return log_softmax_rows(logits);
}

CheckResult check_ctc_oracle(std::uint64_t seed, double tolerance) {
  Stopwatch clock;
  CheckResult r{"ctc oracle equivalence"};
  std::uint64_t draw = seed;
  std::size_t infeasible = 0;
  for (std::size_t symbols = 1; symbols <= 3; ++symbols) {
    const auto targets = all_targets(symbols, 3);
    for (std::size_t frames = 1; frames <= 6; ++frames) {
      const Tensor<double> lp = random_log_probs(frames, symbols + 1, draw++);
      for (const auto& y : targets) {
        if (!feasible(y, frames)) {
          ++infeasible;
          continue;
        }
        const double fast = ctc_loss(lp, y);
        const double slow = brute_force_loss(lp, y);
        r.worst = std::max(r.worst, std::abs(fast - slow));
        ++r.instances;
      }
    }
  }
  r.passed = r.worst <= tolerance;
  r.detail = std::to_string(r.instances) + " (V, T, y) cases, " + std::to_string(infeasible) +
             " infeasible skipped, " + fmt("max |diff| %.3g (tol %.0e)", r.worst, tolerance);
  r.seconds = clock.seconds();
  return r;
}

CheckResult check_ctc_normalization(std::uint64_t seed, double tolerance) {
  Stopwatch clock;
  CheckResult r{"ctc normalization"};
  constexpr std::size_t kFrames = 4, kWidth = 3;
  const Tensor<double> lp = random_log_probs(kFrames, kWidth, seed);
  std::set<LabelSequence> outputs;
  std::vector<TokenId> path(kFrames, 0);
  for (std::size_t n = 0; n < 81; ++n) {
    outputs.insert(collapse(path));
    for (std::size_t t = kFrames; t-- > 0;) {
      if (++path[t] < kWidth) break;
      path[t] = 0;
    }
  }
  double total = 0;
  for (const auto& y : outputs) total += std::exp(-brute_force_loss(lp, y));
  r.instances = outputs.size();
  r.worst = std::abs(total - 1.0);
  r.passed = r.worst <= tolerance;
  r.detail = std::to_string(outputs.size()) + " distinct outputs, " +
             fmt("sum %.12f (tol %.0e)", total, tolerance);
  r.seconds = clock.seconds();
  return r;
}

CheckResult check_ctc_gradient(std::uint64_t seed, std::size_t instances, double tolerance) {
  Stopwatch clock;
  CheckResult r{"ctc gradient"};
  std::mt19937_64 rng(seed);
  constexpr double h = 1e-5;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t frames = 3 + rng() % 6;
    const std::size_t symbols = 2 + rng() % 4;
    LabelSequence y;
    const std::size_t length = rng() % (frames / 2 + 1);
    for (std::size_t j = 0; j < length; ++j) y.push_back(1 + static_cast<TokenId>(rng() % symbols));
    if (!feasible(y, frames)) y.clear();

    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor<double> logits({frames, symbols + 1});
    for (auto& v : logits.values()) v = normal(rng);

    const Tensor<double> analytic = ctc_grad(log_softmax_rows(logits), y);
    std::vector<double> a(analytic.values().begin(), analytic.values().end());
    std::vector<double> n(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      Tensor<double> up = logits, down = logits;
      up.values()[j] += h;
      down.values()[j] -= h;
      n[j] = (ctc_loss(log_softmax_rows(up), y) - ctc_loss(log_softmax_rows(down), y)) / (2 * h);
    }
    r.worst = std::max(r.worst, relative_error(a, n));
    ++r.instances;
  }
  r.passed = r.worst <= tolerance;
  r.detail = std::to_string(r.instances) + " instances, " +
             fmt("max relative error %.3g (tol %.0e)", r.worst, tolerance);
  r.seconds = clock.seconds();
  return r;
}

CheckResult check_model_gradient(std::uint64_t seed, std::size_t instances, double tolerance) {
  Stopwatch clock;
  CheckResult r{"model gradient"};
  std::mt19937_64 rng(seed);
  constexpr double h = 1e-5;
  for (std::size_t i = 0; i < instances; ++i) {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 12;
    cfg.enc_layers = 1;
    cfg.dec_layers = 1;
    cfg.split_factor = 1 + rng() % 3;
    cfg.vocab_size = 4 + rng() % 3;
    cfg.max_source_len = 8;
    cfg.seed = rng();
    Model<double> model(cfg);

    const std::size_t batch = 1 + rng() % 3;
    std::vector<std::vector<TokenId>> sources(batch);
    std::vector<LabelSequence> targets(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = 1 + rng() % 4;
      for (std::size_t j = 0; j < len; ++j)
        sources[b].push_back(static_cast<TokenId>(3 + rng() % (cfg.vocab_size - 2)));
      const std::size_t tlen = rng() % (cfg.split_factor * len / 2 + 1);
      for (std::size_t j = 0; j < tlen; ++j)
        targets[b].push_back(static_cast<TokenId>(3 + rng() % (cfg.vocab_size - 2)));
      if (!feasible(targets[b], cfg.split_factor * len)) targets[b].clear();
    }

    model.zero_grad();
    model_loss(model, sources, targets, true);
    std::vector<double> a, n;
    for (auto& p : model.parameters()) {
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        a.push_back(p.grad.values()[j]);
        double& w = p.value.values()[j];
        const double saved = w;
        w = saved + h;
        const double up = model_loss(model, sources, targets, false);
        w = saved - h;
        const double down = model_loss(model, sources, targets, false);
        w = saved;
        n.push_back((up - down) / (2 * h));
      }
    }
    r.worst = std::max(r.worst, relative_error(a, n));
    ++r.instances;
  }
  r.passed = r.worst <= tolerance;
  r.detail = std::to_string(r.instances) + " models, " +
             fmt("max relative error %.3g (tol %.0e)", r.worst, tolerance);
  r.seconds = clock.seconds();
  return r;
}

CheckResult check_shape_law(std::size_t max_length) {
  Stopwatch clock;
  CheckResult r{"output length k*T_x"};
  std::size_t failures = 0;
  for (std::size_t k = 1; k <= 3; ++k) {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 8;
    cfg.enc_layers = 1;
    cfg.dec_layers = 1;
    cfg.split_factor = k;
    cfg.vocab_size = 6;
    cfg.max_source_len = max_length;
    Model<float> model(cfg);
    for (std::size_t len = 1; len <= max_length; ++len) {
      std::vector<TokenId> tokens(len);
      for (std::size_t j = 0; j < len; ++j) tokens[j] = static_cast<TokenId>(3 + j % 4);
      const Tensor<float> out = model.forward(tokens);
      if (out.rows() != k * len || out.cols() != cfg.output_width()) ++failures;
      ++r.instances;
    }
  }
  r.worst = static_cast<double>(failures);
  r.passed = failures == 0;
  r.detail = std::to_string(r.instances) + " (k, T_x) pairs, " + std::to_string(failures) +
             " mismatches";
  r.seconds = clock.seconds();
  return r;
}

std::vector<CheckResult> run_selfcheck(std::uint64_t seed,
                                       const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> out;
  auto record = [&](CheckResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  record(check_ctc_oracle(seed));
  record(check_ctc_normalization(seed));
  record(check_ctc_gradient(seed));
  record(check_model_gradient(seed));
  record(check_shape_law());
  return out;
}

std::string format_result(const CheckResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), " [%.2fs]", r.seconds);
  return std::string(r.passed ? "PASS " : "FAIL ") + r.name + ": " + r.detail + buf;
}

}  // namespace narctc
