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

#include "narctc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "narctc/numerics.hpp"
#include "narctc/parallel.hpp"

namespace narctc {

ExtendedLabels extend_labels(const LabelSequence& y) {
  ExtendedLabels out;
  out.reserve(2 * y.size() + 1);
  out.push_back(kBlankId);
  for (TokenId id : y) {
    if (id == kBlankId) throw InvalidLabelError("blank id inside a label sequence");
    out.push_back(id);
    out.push_back(kBlankId);
  }
  return out;
}

LabelSequence collapse(std::span<const TokenId> frames, CollapseRule rule) {
  LabelSequence out;
  bool have_prev = false;
  TokenId prev = 0;
  for (TokenId id : frames) {
    const bool repeat = rule == CollapseRule::kMergeRepeats && have_prev && id == prev;
    if (id != kBlankId && !repeat) out.push_back(id);
    prev = id;
    have_prev = true;
  }
  return out;
}

bool feasible(const LabelSequence& y, std::size_t frames) {
  std::size_t needed = y.size();
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] == y[i - 1]) ++needed;
  return frames >= needed;
}

namespace {

template <class T>
void check_log_probs(const Tensor<T>& log_probs) {
  if (log_probs.rank() != 2 || log_probs.cols() < 1) {
    throw DimensionError("CTC expects [T x (V+1)] log-probabilities, got " +
                         shape_string(log_probs.shape()));
  }
  const T tolerance = T(1e-5) + static_cast<T>(log_probs.cols()) *
                                    std::numeric_limits<T>::epsilon();
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    T total = 0;
    for (T v : log_probs.row(t)) total += std::exp(v);
    if (!(std::abs(total - T{1}) <= tolerance)) {
      throw ContractError("CTC frame " + std::to_string(t) +
                          " is not a normalized log-distribution (sums to " +
                          std::to_string(total) + ")");
    }
  }
}

void check_labels(const LabelSequence& y, std::size_t width) {
  for (TokenId id : y) {
    if (id == kBlankId) throw InvalidLabelError("blank id inside a label sequence");
    if (id >= width) {
      throw InvalidLabelError("label " + std::to_string(id) +
                              " outside output width " + std::to_string(width));
    }
  }
}

// Skip transition s-2 -> s is allowed onto a label that differs from the
// previous label.
inline bool can_skip(const ExtendedLabels& ext, std::size_t s) {
  return s >= 2 && ext[s] != kBlankId && ext[s] != ext[s - 2];
}

}  // namespace

template <class T>
ForwardTable<T> forward_backward(const Tensor<T>& log_probs, const LabelSequence& y) {
  check_log_probs(log_probs);
  check_labels(y, log_probs.cols());
  const std::size_t frames = log_probs.rows();
  if (!feasible(y, frames)) throw FeasibilityError(y.size(), frames);

  const ExtendedLabels ext = extend_labels(y);
  const std::size_t states = ext.size();
  ForwardTable<T> table{Tensor<T>({frames, states}, log_zero<T>()),
                        Tensor<T>({frames, states}, log_zero<T>()), T{0}};
  if (frames == 0) return table;

  Tensor<T>& alpha = table.alpha;
  alpha(0, 0) = log_probs(0, ext[0]);
  if (states > 1) alpha(0, 1) = log_probs(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      T acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(ext, s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != log_zero<T>()) alpha(t, s) = acc + log_probs(t, ext[s]);
    }
  }

  Tensor<T>& beta = table.beta;
  beta(frames - 1, states - 1) = 0;
  if (states > 1) beta(frames - 1, states - 2) = 0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      T acc = beta(t + 1, s) + log_probs(t + 1, ext[s]);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1) + log_probs(t + 1, ext[s + 1]));
      if (s + 2 < states && can_skip(ext, s + 2))
        acc = log_add(acc, beta(t + 1, s + 2) + log_probs(t + 1, ext[s + 2]));
      beta(t, s) = acc;
    }
  }

  T total = alpha(frames - 1, states - 1);
  if (states > 1) total = log_add(total, alpha(frames - 1, states - 2));
  table.total_log_prob = total;
  return table;
}

template <class T>
T ctc_loss(const Tensor<T>& log_probs, const LabelSequence& y) {
  const T loss = -forward_backward(log_probs, y).total_log_prob;
  // -0.0 and tiny negative rounding both mean "certain".
  return std::max(loss, T{0});
}

template <class T>
Tensor<T> ctc_grad(const Tensor<T>& log_probs, const LabelSequence& y) {
  const ForwardTable<T> table = forward_backward(log_probs, y);
  const ExtendedLabels ext = extend_labels(y);
  Tensor<T> grad(log_probs.shape());
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    for (std::size_t v = 0; v < log_probs.cols(); ++v) grad(t, v) = std::exp(log_probs(t, v));
    for (std::size_t s = 0; s < ext.size(); ++s) {
      const T occupancy = table.alpha(t, s) + table.beta(t, s);
      if (occupancy == log_zero<T>()) continue;
      grad(t, ext[s]) -= std::exp(occupancy - table.total_log_prob);
    }
  }
  return grad;
}

template <class T>
LabelSequence greedy_decode(const Tensor<T>& log_probs) {
  std::vector<TokenId> frames(log_probs.rows());
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    auto row = log_probs.row(t);
    // max_element returns the first maximum: lowest id wins ties.
    frames[t] = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return collapse(frames);
}

template <class T>
T brute_force_loss(const Tensor<T>& log_probs, const LabelSequence& y) {
  const std::size_t frames = log_probs.rows();
  const std::size_t width = log_probs.cols();
  std::size_t count = 1;
  for (std::size_t t = 0; t < frames; ++t) {
    if (count > kBruteForceLimit / width) {
      throw OracleTooLargeError("brute-force oracle would enumerate more than " +
                                std::to_string(kBruteForceLimit) + " sequences");
    }
    count *= width;
  }
  if (!feasible(y, frames)) throw FeasibilityError(y.size(), frames);

  std::vector<TokenId> path(frames, 0);
  long double total = 0;
  for (std::size_t n = 0; n < count; ++n) {
    if (collapse(path) == y) {
      long double log_p = 0;
      for (std::size_t t = 0; t < frames; ++t) log_p += log_probs(t, path[t]);
      total += std::exp(log_p);
    }
    for (std::size_t t = frames; t-- > 0;) {
      if (++path[t] < width) break;
      path[t] = 0;
    }
  }
  if (total <= 0) return std::numeric_limits<T>::infinity();
  return std::max(static_cast<T>(-std::log(total)), T{0});
}

template <class T>
Var<T> ctc_loss(Var<T> logits, std::span<const LabelSequence> targets,
                std::span<const FrameRange> frames, std::vector<T>* losses) {
  const Tensor<T>& lv = logits.value();
  if (targets.size() != frames.size()) {
    throw ContractError("ctc_loss: " + std::to_string(targets.size()) +
                        " targets for " + std::to_string(frames.size()) + " frame ranges");
  }
  const std::size_t width = lv.cols();
  const std::size_t n = targets.size();
  std::vector<T> per_sentence(n);
  auto grads = std::make_shared<std::vector<Tensor<T>>>(n);
  const bool keep = logits.graph->recording();
  parallel_for(n, [&](std::size_t i) {
    const FrameRange r = frames[i];
    if (r.begin + r.length > lv.rows()) throw DimensionError("ctc_loss frame range out of bounds");
    Tensor<T> slice({r.length, width},
                    std::vector<T>(lv.data() + r.begin * width,
                                   lv.data() + (r.begin + r.length) * width));
    const Tensor<T> log_probs = log_softmax_rows(slice);
    per_sentence[i] = ctc_loss(log_probs, targets[i]);
    if (keep) (*grads)[i] = ctc_grad(log_probs, targets[i]);
  });
  T total = 0;
  for (T v : per_sentence) total += v;
  if (losses) *losses = per_sentence;
  std::vector<FrameRange> ranges(frames.begin(), frames.end());
  return logits.graph->push(
      Tensor<T>({1}, std::vector<T>{total}), {logits},
      [logits, grads, ranges = std::move(ranges)](Graph<T>& g, const Tensor<T>&,
                                                  const Tensor<T>& gy) {
        Tensor<T>& gl = g.grad_buffer(logits);
        const std::size_t width = gl.cols();
        for (std::size_t i = 0; i < ranges.size(); ++i) {
          const Tensor<T>& gi = (*grads)[i];
          T* dst = gl.data() + ranges[i].begin * width;
          for (std::size_t j = 0; j < gi.size(); ++j) dst[j] += gy[0] * gi[j];
        }
      });
}

#define NARCTC_INSTANTIATE(T)                                                       \
  template ForwardTable<T> forward_backward<T>(const Tensor<T>&, const LabelSequence&); \
  template T ctc_loss<T>(const Tensor<T>&, const LabelSequence&);                  \
  template Tensor<T> ctc_grad<T>(const Tensor<T>&, const LabelSequence&);          \
  template LabelSequence greedy_decode<T>(const Tensor<T>&);                        \
  template T brute_force_loss<T>(const Tensor<T>&, const LabelSequence&);          \
  template Var<T> ctc_loss<T>(Var<T>, std::span<const LabelSequence>,               \
                              std::span<const FrameRange>, std::vector<T>*);

NARCTC_INSTANTIATE(float)
NARCTC_INSTANTIATE(double)

#undef NARCTC_INSTANTIATE

}  // namespace narctc
