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
#include <vector>

#include "narctc/graph.hpp"
#include "narctc/tensor.hpp"

namespace narctc {

using TokenId = std::uint32_t;

// The null symbol. Column 0 of every output distribution.
inline constexpr TokenId kBlankId = 0;

// Output tokens with blanks removed. Never contains kBlankId.
using LabelSequence = std::vector<TokenId>;

// [∅, y1, ∅, y2, …, ∅], length 2|y|+1.
using ExtendedLabels = std::vector<TokenId>;

// How a frame-level sequence maps to a sentence. Everything in this module
// (loss lattice, oracle, decoding) assumes kMergeRepeats; kDropBlanksOnly is
// available to collapse() for analysis only.
enum class CollapseRule { kMergeRepeats, kDropBlanksOnly };

inline constexpr CollapseRule kDefaultCollapse = CollapseRule::kMergeRepeats;

// Log-space lattice over the extended labels. alpha includes the emission at
// frame t, beta covers frames t+1..T-1, so alpha[t,s] + beta[t,s] is the log
// mass of all alignments passing through state s at frame t.
template <class T>
struct ForwardTable {
  Tensor<T> alpha;  // [T × (2|y|+1)]
  Tensor<T> beta;   // [T × (2|y|+1)]
  T total_log_prob = 0;
};

ExtendedLabels extend_labels(const LabelSequence& y);

LabelSequence collapse(std::span<const TokenId> frames,
                       CollapseRule rule = kDefaultCollapse);

// True iff some frame sequence of length `frames` collapses to y.
bool feasible(const LabelSequence& y, std::size_t frames);

// Throws FeasibilityError / ContractError as ctc_loss does.
template <class T>
ForwardTable<T> forward_backward(const Tensor<T>& log_probs, const LabelSequence& y);

// -log p(y | x) for row-normalized log-probabilities [T × (V+1)].
template <class T>
T ctc_loss(const Tensor<T>& log_probs, const LabelSequence& y);

// d ctc_loss / d logits, where log_probs = log_softmax(logits).
template <class T>
Tensor<T> ctc_grad(const Tensor<T>& log_probs, const LabelSequence& y);

// Per-frame argmax (ties to the lowest id), then collapse.
template <class T>
LabelSequence greedy_decode(const Tensor<T>& log_probs);

// Enumerates all (V+1)^T frame sequences. Test oracle; refuses more than
// kBruteForceLimit sequences.
inline constexpr std::size_t kBruteForceLimit = 1'000'000;

template <class T>
T brute_force_loss(const Tensor<T>& log_probs, const LabelSequence& y);

// Rows [begin, begin+length) of a packed frame matrix.
struct FrameRange {
  std::size_t begin = 0;
  std::size_t length = 0;
};

// Differentiable sum of per-sentence CTC losses over packed logits (NOT
// log-probabilities). Sentence i owns rows frames[i] and target targets[i].
// Per-sentence losses are written to `losses` when given.
template <class T>
Var<T> ctc_loss(Var<T> logits, std::span<const LabelSequence> targets,
                std::span<const FrameRange> frames, std::vector<T>* losses = nullptr);

}  // namespace narctc
