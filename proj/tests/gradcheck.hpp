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

#include <functional>
#include <random>
#include <vector>

#include "narctc/graph.hpp"
#include "narctc/verify.hpp"

namespace narctc::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

// Builds a scalar loss from parameters on a fresh graph.
using LossBuilder =
    std::function<Var<double>(Graph<double>&, std::vector<Parameter<double>>&)>;

// Relative error between backward() and central differences over every
// parameter element.
inline double gradient_error(std::vector<Parameter<double>>& params, const LossBuilder& build,
                             double h = 1e-3) {
  for (auto& p : params) p.zero_grad();
  {
    Graph<double> g;
    g.backward(build(g, params));
  }
  std::vector<double> analytic, numeric;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      analytic.push_back(p.grad[i]);
      const double saved = p.value[i];
      p.value[i] = saved + h;
      Graph<double> up(false);
      const double fu = build(up, params).value()[0];
      p.value[i] = saved - h;
      Graph<double> down(false);
      const double fd = build(down, params).value()[0];
      p.value[i] = saved;
      numeric.push_back((fu - fd) / (2 * h));
    }
  }
  return relative_error(analytic, numeric);
}

}  // namespace narctc::testing
