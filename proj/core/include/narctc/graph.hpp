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
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "narctc/tensor.hpp"

namespace narctc {

// A learned tensor together with its accumulated gradient.
template <class T>
struct Parameter {
  Parameter(std::string name, Tensor<T> value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <class T>
class Graph;

// Handle to a node recorded on a Graph. Cheap to copy; valid as long as the
// graph is alive.
template <class T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order and replayed in
// reverse by backward(). A graph built with record=false keeps values only and
// is what inference uses.
template <class T>
class Graph {
 public:
  // Receives the node's value and the gradient flowing into it.
  using BackwardFn =
      std::function<void(Graph&, const Tensor<T>& value, const Tensor<T>& grad)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> value);
  // The parameter must outlive the graph; its value is referenced, not copied.
  Var<T> parameter(Parameter<T>& p);

  const Tensor<T>& value(Var<T> v) const;
  bool needs_grad(Var<T> v) const { return nodes_.at(v.id).needs_grad; }
  // Gradient of the last backward() with respect to v (zeros if untouched).
  Tensor<T> grad(Var<T> v) const;

  // Accumulates d(loss)/d(param) into every reachable Parameter::grad. Throws
  // ContractError when called a second time on the same graph.
  void backward(Var<T> loss);

  // Op authoring interface.
  Var<T> push(Tensor<T> value, std::initializer_list<Var<T>> inputs,
              BackwardFn fn);
  // Gradient buffer for an input, allocated (zeroed) on first use. Only valid
  // for nodes where needs_grad() is true.
  Tensor<T>& grad_buffer(Var<T> v);

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
    std::optional<Tensor<T>> grad;
    BackwardFn backward;
  };

  const Tensor<T>& node_value(const Node& n) const {
    return n.external ? *n.external : n.value;
  }

  bool record_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
  return graph->value(*this);
}

// One attention block: queries [query_begin, +query_length) attend to keys
// [key_begin, +key_length) of the key/value matrices.
struct AttentionSegment {
  std::size_t query_begin = 0;
  std::size_t query_length = 0;
  std::size_t key_begin = 0;
  std::size_t key_length = 0;
};

struct AttentionLayout {
  std::vector<AttentionSegment> segments;
  // Per key row; 0 marks padding that no query may attend to. Empty means
  // every key is valid.
  std::vector<std::uint8_t> key_mask;
};

// Differentiable operations. All tensors are rank 2 [rows × cols] unless
// noted; bias/gain vectors are rank 1.

// x·W + b. Dimension errors name both shapes.
template <class T>
Var<T> affine(Var<T> x, Var<T> w, std::optional<Var<T>> b);

template <class T>
Var<T> add(Var<T> a, Var<T> b);

template <class T>
Var<T> scale(Var<T> a, T factor);

template <class T>
Var<T> relu(Var<T> a);

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-6));

template <class T>
Var<T> softmax_rows(Var<T> x);

template <class T>
Var<T> log_softmax_rows(Var<T> x);

// Rows of `table` selected by ids, e.g. an embedding lookup.
template <class T>
Var<T> gather_rows(Var<T> table, std::vector<std::size_t> ids);

template <class T>
Var<T> reshape(Var<T> x, Shape shape);

// Sum of all elements, shape [1].
template <class T>
Var<T> sum(Var<T> x);

// Scaled dot-product multi-head attention (no projections). Each segment is
// an independent attention problem.
template <class T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, AttentionLayout layout,
                 std::size_t heads);

}  // namespace narctc
