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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "narctc/data.hpp"
#include "narctc/model.hpp"

namespace narctc {

struct TrainingConfig {
  double base_lr = 1e-4;
  std::size_t warmup_steps = 8000;
  std::size_t total_steps = 100000;
  std::size_t batch_token_budget = 4096;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  std::optional<double> clip_norm = 1.0;
  std::size_t checkpoint_every = 1000;  // 0 disables periodic checkpoints
  std::uint64_t seed = 1;

  void validate() const;
};

// Linear warm-up to base_lr at `warmup`, then base_lr·sqrt(warmup/step).
double lr_schedule(std::size_t step, double base_lr, std::size_t warmup);

// Adam moments, one pair per model parameter in parameter order.
template <class T>
struct OptimizerState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::size_t step_count = 0;

  static OptimizerState for_model(const Model<T>& model);
};

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0;  // per target token
  double lr = 0;
  double grad_norm = 0;  // before clipping
  std::size_t skipped = 0;
  double wall_ms = 0;
  std::size_t sentences = 0;
  std::size_t target_tokens = 0;
};

// One structured log record (JSON object, fixed key order).
nlohmann::ordered_json to_json(const StepMetrics& m);

// Forward, per-token CTC loss, backward, optional clipping, Adam update.
template <class T>
StepMetrics train_step(Model<T>& model, const Batch& batch, OptimizerState<T>& opt,
                       const TrainingConfig& cfg);

// Global L2 norm of all parameter gradients.
template <class T>
double gradient_norm(const Model<T>& model);

// Rescales gradients so their global norm is at most max_norm.
template <class T>
void clip_gradients(Model<T>& model, double max_norm);

// Epoch-looping driver around train_step. Batches are rebuilt every epoch
// with seed + epoch.
template <class T>
class Trainer {
 public:
  using StepCallback = std::function<void(const StepMetrics&)>;

  Trainer(Model<T>& model, OptimizerState<T>& opt, const ParallelCorpus& corpus,
          TrainingConfig cfg);

  // Runs until the optimizer reaches `until_step` (or cfg.total_steps).
  void run(std::optional<std::size_t> until_step, const StepCallback& on_step);

  std::size_t skipped_pairs() const { return skipped_pairs_; }

 private:
  void next_epoch();

  Model<T>& model_;
  OptimizerState<T>& opt_;
  const ParallelCorpus& corpus_;
  TrainingConfig cfg_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::size_t skipped_pairs_ = 0;
  std::vector<Batch> batches_;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace narctc
