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
#include <string>
#include <vector>

#include "narctc/model.hpp"

namespace narctc {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
  std::size_t instances = 0;
  double worst = 0;  // largest observed error (absolute or relative, per check)
};

// ‖a − b‖ / max(‖a‖, ‖b‖), 0 when both are zero.
double relative_error(const std::vector<double>& a, const std::vector<double>& b);

// Row-normalized random log-probabilities [frames × width].
Tensor<double> random_log_probs(std::size_t frames, std::size_t width, std::uint64_t seed);

// ctc_loss against brute_force_loss over every target |y| <= 3 drawn from
// V <= 3 symbols and every T <= 6, with random distributions (64-bit).
CheckResult check_ctc_oracle(std::uint64_t seed, double tolerance = 1e-6);

// Σ over distinct collapsed outputs of exp(−loss) on one random T=4, V=2
// distribution.
CheckResult check_ctc_normalization(std::uint64_t seed, double tolerance = 1e-6);

// ctc_grad against central differences through log_softmax.
CheckResult check_ctc_gradient(std::uint64_t seed, std::size_t instances = 20,
                               double tolerance = 1e-4);

// Full-model parameter gradients against central differences on small random
// models and batches.
CheckResult check_model_gradient(std::uint64_t seed, std::size_t instances = 20,
                                 double tolerance = 1e-4);

// Output frame count equals k·T_x for T_x in [1, max_length] and k in {1,2,3}.
CheckResult check_shape_law(std::size_t max_length = 64);

// All of the above, in order.
std::vector<CheckResult> run_selfcheck(std::uint64_t seed,
                                       const std::function<void(const CheckResult&)>& on_result = {});

std::string format_result(const CheckResult& r);

}  // namespace narctc
