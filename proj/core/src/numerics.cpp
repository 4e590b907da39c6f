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

#include "narctc/numerics.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace narctc {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class T>
T log_sum_exp(std::span<const T> values) {
  if (values.empty()) throw ContractError("log_sum_exp of an empty list");
  const T max = *std::max_element(values.begin(), values.end());
  if (max == log_zero<T>()) return max;
  if (std::isinf(max)) return max;
  T sum = 0;
  for (T v : values) sum += std::exp(v - max);
  return max + std::log(sum);
}

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    auto o = out.row(i);
    const T max = *std::max_element(in.begin(), in.end());
    T sum = 0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - max);
      sum += o[j];
    }
    for (T& v : o) v /= sum;
  }
  return out;
}

template <class T>
Tensor<T> log_softmax_rows(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    auto o = out.row(i);
    const T max = *std::max_element(in.begin(), in.end());
    T sum = 0;
    for (T v : in) sum += std::exp(v - max);
    const T norm = max + std::log(sum);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] - norm;
  }
  return out;
}

template <class T>
Tensor<T> sinusoidal_positions(std::size_t positions, std::size_t width) {
  Tensor<T> table({positions, width});
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t i = 0; i < width; i += 2) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * rate;
      table(pos, i) = static_cast<T>(std::sin(angle));
      if (i + 1 < width) table(pos, i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return table;
}

namespace kernels {
namespace {

constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 16;

// One register tile of kTileCols lanes. Each lane sees the same sequence of
// multiplies and adds whatever the tile height, so a row's result does not
// depend on which rows share its tile.
template <class T>
struct Lanes;
template <>
struct Lanes<float> {
  typedef float type __attribute__((vector_size(kTileCols * sizeof(float))));
};
template <>
struct Lanes<double> {
  typedef double type __attribute__((vector_size(kTileCols * sizeof(double))));
};

template <class T, std::size_t Rows>
inline void matmul_block(const T* x, const T* w, const T* bias, T* out,
                         std::size_t k, std::size_t n, std::size_t j0,
                         std::size_t width, bool accumulate) {
  using V = typename Lanes<T>::type;
  V acc[Rows];
  for (std::size_t r = 0; r < Rows; ++r) acc[r] = V{};
  if (width == kTileCols) {
    for (std::size_t p = 0; p < k; ++p) {
      V wv;
      std::memcpy(&wv, w + p * n + j0, sizeof(V));
      for (std::size_t r = 0; r < Rows; ++r) acc[r] += x[r * k + p] * wv;
    }
  } else {
    for (std::size_t p = 0; p < k; ++p) {
      V wv{};
      std::memcpy(&wv, w + p * n + j0, width * sizeof(T));
      for (std::size_t r = 0; r < Rows; ++r) acc[r] += x[r * k + p] * wv;
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    T lanes[kTileCols];
    std::memcpy(lanes, &acc[r], sizeof(V));
    T* o = out + r * n + j0;
    for (std::size_t j = 0; j < width; ++j) {
      T v = lanes[j];
      if (bias) v += bias[j0 + j];
      o[j] = accumulate ? o[j] + v : v;
    }
  }
}

}  // namespace

template <class T>
void matmul(const T* x, const T* w, const T* bias, T* out, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  std::size_t i = 0;
  for (; i + kTileRows <= m; i += kTileRows) {
    for (std::size_t j0 = 0; j0 < n; j0 += kTileCols) {
      matmul_block<T, kTileRows>(x + i * k, w, bias, out + i * n, k, n, j0,
                                 std::min(kTileCols, n - j0), accumulate);
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j0 = 0; j0 < n; j0 += kTileCols) {
      matmul_block<T, 1>(x + i * k, w, bias, out + i * n, k, n, j0,
                         std::min(kTileCols, n - j0), accumulate);
    }
  }
}

template <class T>
void transpose(const T* in, T* out, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

template void matmul<float>(const float*, const float*, const float*, float*,
                            std::size_t, std::size_t, std::size_t, bool);
template void matmul<double>(const double*, const double*, const double*,
                             double*, std::size_t, std::size_t, std::size_t,
                             bool);
template void transpose<float>(const float*, float*, std::size_t, std::size_t);
template void transpose<double>(const double*, double*, std::size_t,
                                std::size_t);

}  // namespace kernels

template float log_sum_exp<float>(std::span<const float>);
template double log_sum_exp<double>(std::span<const double>);
template Tensor<float> softmax_rows<float>(const Tensor<float>&);
template Tensor<double> softmax_rows<double>(const Tensor<double>&);
template Tensor<float> log_softmax_rows<float>(const Tensor<float>&);
template Tensor<double> log_softmax_rows<double>(const Tensor<double>&);
template Tensor<float> sinusoidal_positions<float>(std::size_t, std::size_t);
template Tensor<double> sinusoidal_positions<double>(std::size_t, std::size_t);

}  // namespace narctc
