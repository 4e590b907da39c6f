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

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "narctc/tensor.hpp"

namespace narctc {

// Scalar precision of a network instance. Float32 is the working precision;
// Float64 exists for finite-difference verification.
enum class Precision { kFloat32, kFloat64 };

template <class T>
constexpr T log_zero() {
  return -std::numeric_limits<T>::infinity();
}

// log(exp(a) + exp(b)); exact when either side is log_zero.
template <class T>
T log_add(T a, T b) {
  if (a < b) std::swap(a, b);
  if (b == log_zero<T>()) return a;
  return a + std::log1p(std::exp(b - a));
}

// log Σ exp(v_i), max-shifted. Throws ContractError on an empty list.
template <class T>
T log_sum_exp(std::span<const T> values);

// Stable row-wise softmax / log-softmax over a rank-2 (or rank-1) tensor.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x);
template <class T>
Tensor<T> log_softmax_rows(const Tensor<T>& x);

// Standard sinusoidal position table [positions × width].
template <class T>
Tensor<T> sinusoidal_positions(std::size_t positions, std::size_t width);

namespace kernels {

// out[m×n] (+)= x[m×k] · w[k×n] (+ bias[n]).
//
// Every output element is accumulated in the same order (p = 0..k-1, then the
// bias) whatever m is and wherever the row lands in a register tile, so a row
// computed alone is bit-identical to the same row computed inside a batch.
template <class T>
void matmul(const T* x, const T* w, const T* bias, T* out, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate);

template <class T>
void transpose(const T* in, T* out, std::size_t rows, std::size_t cols);

}  // namespace kernels

}  // namespace narctc
