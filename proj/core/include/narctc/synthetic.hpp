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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "narctc/data.hpp"

namespace narctc {

enum class ToyTask { kCopy, kReverse };

std::string to_string(ToyTask task);
ToyTask parse_toy_task(std::string_view text);

struct ToyTaskConfig {
  ToyTask task = ToyTask::kReverse;
  std::size_t symbols = 16;
  std::size_t min_length = 3;
  std::size_t max_length = 10;
  std::uint64_t seed = 1;
};

struct ToySplit {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
};

struct ToyData {
  ToySplit train;
  ToySplit heldout;  // no source occurs in train
};

// Random symbol strings and their copy or reversal.
ToyData generate_toy_data(const ToyTaskConfig& config, std::size_t train_pairs,
                          std::size_t heldout_pairs);

// Symbols "s0".."s{n-1}" after the reserved ids.
Vocabulary toy_vocabulary(std::size_t symbols);

// In-memory counterpart of load_parallel_corpus.
ParallelCorpus make_corpus(std::span<const std::string> sources,
                           std::span<const std::string> targets, const Vocabulary& vocab);

// Fraction of positions where hypothesis and reference match exactly.
double exact_match_accuracy(std::span<const std::string> hypotheses,
                            std::span<const std::string> references);

}  // namespace narctc
