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

#include "narctc/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "narctc/ctc.hpp"

namespace narctc {

void TrainingConfig::validate() const {
  if (!(base_lr > 0)) throw ConfigError("train.base_lr must be positive");
  if (warmup_steps < 1) throw ConfigError("train.warmup_steps must be at least 1");
  if (batch_token_budget < 1) throw ConfigError("train.batch_tokens must be positive");
  if (clip_norm && !(*clip_norm > 0)) throw ConfigError("train.clip_norm must be positive");
}

double lr_schedule(std::size_t step, double base_lr, std::size_t warmup) {
  if (step < 1) throw ContractError("lr_schedule step must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  if (step <= warmup) return base_lr * (s / w);
  return base_lr * std::sqrt(w / s);
}

template <class T>
OptimizerState<T> OptimizerState<T>::for_model(const Model<T>& model) {
  OptimizerState state;
  for (const auto& p : model.parameters()) {
    state.first_moment.emplace_back(p.value.shape());
    state.second_moment.emplace_back(p.value.shape());
  }
  return state;
}

nlohmann::ordered_json to_json(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["loss"] = m.loss;
  j["lr"] = m.lr;
  j["grad_norm"] = m.grad_norm;
  j["skipped"] = m.skipped;
  j["wall_ms"] = m.wall_ms;
  return j;
}

template <class T>
double gradient_norm(const Model<T>& model) {
  double total = 0;
  for (const auto& p : model.parameters())
    for (T g : p.grad.values()) total += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(total);
}

template <class T>
void clip_gradients(Model<T>& model, double max_norm) {
  const double norm = gradient_norm(model);
  if (norm <= max_norm || norm == 0) return;
  const T factor = static_cast<T>(max_norm / norm);
  for (auto& p : model.parameters())
    for (T& g : p.grad.values()) g *= factor;
}

template <class T>
StepMetrics train_step(Model<T>& model, const Batch& batch, OptimizerState<T>& opt,
                       const TrainingConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (opt.first_moment.size() != model.parameters().size()) {
    throw ContractError("optimizer state does not belong to this model");
  }
  StepMetrics m;
  std::vector<std::vector<TokenId>> sources;
  std::vector<LabelSequence> targets;
  std::vector<std::size_t> lines;
  const std::size_t k = model.config().split_factor;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = batch.source_row(i);
    if (!feasible(batch.targets[i], k * row.size())) {
      ++m.skipped;
      continue;
    }
    sources.emplace_back(row.begin(), row.end());
    targets.push_back(batch.targets[i]);
    lines.push_back(batch.lines[i]);
    m.target_tokens += batch.targets[i].size();
  }
  m.sentences = sources.size();

  model.zero_grad();
  opt.step_count += 1;
  m.step = opt.step_count;
  m.lr = lr_schedule(opt.step_count, cfg.base_lr, cfg.warmup_steps);
  if (sources.empty()) return m;

  Graph<T> g;
  std::vector<FrameRange> frames;
  Var<T> logits = model.logits(g, sources, &frames);
  Var<T> total = ctc_loss(logits, std::span<const LabelSequence>(targets),
                          std::span<const FrameRange>(frames));
  // An all-empty target batch still has a well-defined (sum) loss.
  const T denom = static_cast<T>(std::max<std::size_t>(m.target_tokens, 1));
  Var<T> loss = scale(total, T{1} / denom);
  m.loss = static_cast<double>(loss.value()[0]);
  if (!std::isfinite(m.loss)) {
    std::ostringstream os;
    os << "non-finite training loss at step " << m.step << "; batch lines:";
    for (auto l : lines) os << ' ' << l;
    throw NonFiniteLossError(os.str());
  }
  g.backward(loss);

  m.grad_norm = gradient_norm(model);
  if (cfg.clip_norm) clip_gradients(model, *cfg.clip_norm);

  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double t = static_cast<double>(opt.step_count);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const T step_size = static_cast<T>(m.lr / correction1);
  const T inv_c2 = static_cast<T>(1.0 / correction2);
  const T eps = static_cast<T>(cfg.adam_eps);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value.values();
    auto grad = params[i].grad.values();
    auto m1 = opt.first_moment[i].values();
    auto m2 = opt.second_moment[i].values();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m1[j] = tb1 * m1[j] + (T{1} - tb1) * grad[j];
      m2[j] = tb2 * m2[j] + (T{1} - tb2) * grad[j] * grad[j];
      value[j] -= step_size * m1[j] / (std::sqrt(m2[j] * inv_c2) + eps);
    }
  }
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                  .count();
  return m;
}

template <class T>
Trainer<T>::Trainer(Model<T>& model, OptimizerState<T>& opt, const ParallelCorpus& corpus,
                    TrainingConfig cfg)
    : model_(model), opt_(opt), corpus_(corpus), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (corpus_.pairs.empty()) throw ConfigError("training corpus is empty");
}

template <class T>
void Trainer<T>::next_epoch() {
  BatchPlan plan = make_batches(corpus_, cfg_.batch_token_budget, model_.config().split_factor,
                                cfg_.seed + epoch_);
  if (epoch_ == 0) skipped_pairs_ = plan.skipped;
  ++epoch_;
  batches_ = std::move(plan.batches);
  cursor_ = 0;
  if (batches_.empty()) throw ConfigError("no trainable sentence pairs after batching");
}

template <class T>
void Trainer<T>::run(std::optional<std::size_t> until_step, const StepCallback& on_step) {
  const std::size_t last = until_step.value_or(cfg_.total_steps);
  while (opt_.step_count < last) {
    if (cursor_ >= batches_.size()) next_epoch();
    const StepMetrics m = train_step(model_, batches_[cursor_++], opt_, cfg_);
    if (on_step) on_step(m);
  }
}

#define NARCTC_INSTANTIATE(T)                                                            \
  template struct OptimizerState<T>;                                                     \
  template StepMetrics train_step<T>(Model<T>&, const Batch&, OptimizerState<T>&,        \
                                     const TrainingConfig&);                             \
  template double gradient_norm<T>(const Model<T>&);                                     \
  template void clip_gradients<T>(Model<T>&, double);                                    \
  template class Trainer<T>;

NARCTC_INSTANTIATE(float)
NARCTC_INSTANTIATE(double)

#undef NARCTC_INSTANTIATE

}  // namespace narctc
