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

#include "narctc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "narctc/numerics.hpp"
#include "narctc/parallel.hpp"

namespace narctc {

template <class T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return {this, nodes_.size() - 1};
}

template <class T>
Var<T> Graph<T>::parameter(Parameter<T>& p) {
  Node& n = nodes_.emplace_back();
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = record_;
  return {this, nodes_.size() - 1};
}

template <class T>
const Tensor<T>& Graph<T>::value(Var<T> v) const {
  return node_value(nodes_.at(v.id));
}

template <class T>
Tensor<T> Graph<T>::grad(Var<T> v) const {
  const Node& n = nodes_.at(v.id);
  return n.grad ? *n.grad : Tensor<T>(node_value(n).shape());
}

template <class T>
Var<T> Graph<T>::push(Tensor<T> value, std::initializer_list<Var<T>> inputs,
                      BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const auto& in : inputs) needs = needs || nodes_.at(in.id).needs_grad;
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  return {this, nodes_.size() - 1};
}

template <class T>
Tensor<T>& Graph<T>::grad_buffer(Var<T> v) {
  Node& n = nodes_.at(v.id);
  if (!n.grad) n.grad.emplace(node_value(n).shape());
  return *n.grad;
}

template <class T>
void Graph<T>::backward(Var<T> loss) {
  if (!record_) throw ContractError("backward on a graph that records no gradients");
  if (backward_done_) {
    throw ContractError("backward called twice on the same graph; re-run forward");
  }
  if (value(loss).size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_string(value(loss).shape()));
  }
  backward_done_ = true;
  if (!nodes_.at(loss.id).needs_grad) return;
  grad_buffer(loss).fill(T{1});
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad) continue;
    if (n.backward) n.backward(*this, node_value(n), *n.grad);
    if (n.param) {
      auto dst = n.param->grad.values();
      auto src = n.grad->values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

namespace {

template <class T>
void require_rank2(const Tensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a matrix, got " +
                         shape_string(t.shape()));
  }
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

template <class T>
Var<T> affine(Var<T> x, Var<T> w, std::optional<Var<T>> b) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  require_rank2(xv, "affine input");
  require_rank2(wv, "affine weight");
  const std::size_t n = xv.rows(), din = xv.cols(), dout = wv.cols();
  if (wv.rows() != din) {
    throw DimensionError("affine: input " + shape_string(xv.shape()) +
                         " does not match weight " + shape_string(wv.shape()));
  }
  const T* bias = nullptr;
  if (b) {
    const Tensor<T>& bv = b->value();
    if (bv.size() != dout) {
      throw DimensionError("affine: bias " + shape_string(bv.shape()) +
                           " does not match weight " + shape_string(wv.shape()));
    }
    bias = bv.data();
  }
  Tensor<T> out({n, dout});
  kernels::matmul(xv.data(), wv.data(), bias, out.data(), n, din, dout, false);
  auto backward = [x, w, b](Graph<T>& g, const Tensor<T>&, const Tensor<T>& gy) {
    const Tensor<T>& xv = x.value();
    const Tensor<T>& wv = w.value();
    const std::size_t n = xv.rows(), din = xv.cols(), dout = wv.cols();
    const T* no_bias = nullptr;
    if (g.needs_grad(x)) {
      std::vector<T> wt(din * dout);
      kernels::transpose(wv.data(), wt.data(), din, dout);
      kernels::matmul(gy.data(), wt.data(), no_bias, g.grad_buffer(x).data(), n,
                      dout, din, true);
    }
    if (g.needs_grad(w)) {
      std::vector<T> xt(n * din);
      kernels::transpose(xv.data(), xt.data(), n, din);
      kernels::matmul(xt.data(), gy.data(), no_bias, g.grad_buffer(w).data(), din,
                      n, dout, true);
    }
    if (b && g.needs_grad(*b)) {
      Tensor<T>& gb = g.grad_buffer(*b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dout; ++j) gb[j] += gy(i, j);
    }
  };
  return b ? g.push(std::move(out), {x, w, *b}, std::move(backward))
           : g.push(std::move(out), {x, w}, std::move(backward));
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor<T> out = av;
  add_into(out, bv);
  return a.graph->push(std::move(out), {a, b},
                       [a, b](Graph<T>& g, const Tensor<T>&, const Tensor<T>& gy) {
                         if (g.needs_grad(a)) add_into(g.grad_buffer(a), gy);
                         if (g.needs_grad(b)) add_into(g.grad_buffer(b), gy);
                       });
}

template <class T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) v *= factor;
  return a.graph->push(std::move(out), {a},
                       [a, factor](Graph<T>& g, const Tensor<T>&, const Tensor<T>& gy) {
                         auto ga = g.grad_buffer(a).values();
                         auto s = gy.values();
                         for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * s[i];
                       });
}

template <class T>
Var<T> relu(Var<T> a) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return a.graph->push(std::move(out), {a},
                       [a](Graph<T>& g, const Tensor<T>& y, const Tensor<T>& gy) {
                         auto ga = g.grad_buffer(a).values();
                         auto yv = y.values();
                         auto s = gy.values();
                         for (std::size_t i = 0; i < ga.size(); ++i)
                           if (yv[i] > T{0}) ga[i] += s[i];
                       });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: input " + shape_string(xv.shape()) +
                         " vs gain " + shape_string(gain.value().shape()));
  }
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& bv = bias.value();
  Tensor<T> out(xv.shape());
  auto normalized = std::make_shared<Tensor<T>>(xv.shape());
  auto inv_std = std::make_shared<std::vector<T>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = xv.row(i);
    T mean = 0;
    for (T v : row) mean += v;
    mean /= static_cast<T>(d);
    T var = 0;
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = (row[j] - mean) * inv;
      (*normalized)(i, j) = xh;
      out(i, j) = gv[j] * xh + bv[j];
    }
  }
  return x.graph->push(
      std::move(out), {x, gain, bias},
      [x, gain, bias, normalized, inv_std](Graph<T>& g, const Tensor<T>&,
                                           const Tensor<T>& gy) {
        const std::size_t n = gy.rows(), d = gy.cols();
        const Tensor<T>& gv = gain.value();
        if (g.needs_grad(gain) || g.needs_grad(bias)) {
          Tensor<T>& gg = g.grad_buffer(gain);
          Tensor<T>& gb = g.grad_buffer(bias);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              gg[j] += gy(i, j) * (*normalized)(i, j);
              gb[j] += gy(i, j);
            }
        }
        if (g.needs_grad(x)) {
          Tensor<T>& gx = g.grad_buffer(x);
          std::vector<T> gxh(d);
          for (std::size_t i = 0; i < n; ++i) {
            T mean_g = 0, mean_gx = 0;
            for (std::size_t j = 0; j < d; ++j) {
              gxh[j] = gy(i, j) * gv[j];
              mean_g += gxh[j];
              mean_gx += gxh[j] * (*normalized)(i, j);
            }
            mean_g /= static_cast<T>(d);
            mean_gx /= static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j) {
              gx(i, j) += (*inv_std)[i] *
                          (gxh[j] - mean_g - (*normalized)(i, j) * mean_gx);
            }
          }
        }
      });
}

template <class T>
Var<T> softmax_rows(Var<T> x) {
  Tensor<T> out = softmax_rows(x.value());
  return x.graph->push(std::move(out), {x},
                       [x](Graph<T>& g, const Tensor<T>& y, const Tensor<T>& gy) {
                         Tensor<T>& gx = g.grad_buffer(x);
                         for (std::size_t i = 0; i < y.rows(); ++i) {
                           T dot = 0;
                           for (std::size_t j = 0; j < y.cols(); ++j)
                             dot += gy(i, j) * y(i, j);
                           for (std::size_t j = 0; j < y.cols(); ++j)
                             gx(i, j) += y(i, j) * (gy(i, j) - dot);
                         }
                       });
}

template <class T>
Var<T> log_softmax_rows(Var<T> x) {
  Tensor<T> out = log_softmax_rows(x.value());
  return x.graph->push(std::move(out), {x},
                       [x](Graph<T>& g, const Tensor<T>& y, const Tensor<T>& gy) {
                         Tensor<T>& gx = g.grad_buffer(x);
                         for (std::size_t i = 0; i < y.rows(); ++i) {
                           T total = 0;
                           for (std::size_t j = 0; j < y.cols(); ++j) total += gy(i, j);
                           for (std::size_t j = 0; j < y.cols(); ++j)
                             gx(i, j) += gy(i, j) - std::exp(y(i, j)) * total;
                         }
                       });
}

template <class T>
Var<T> gather_rows(Var<T> table, std::vector<std::size_t> ids) {
  const Tensor<T>& tv = table.value();
  require_rank2(tv, "gather_rows table");
  const std::size_t d = tv.cols();
  Tensor<T> out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(ids[i]) +
                           " outside table " + shape_string(tv.shape()));
    }
    std::copy_n(tv.row(ids[i]).data(), d, out.row(i).data());
  }
  return table.graph->push(
      std::move(out), {table},
      [table, ids = std::move(ids)](Graph<T>& g, const Tensor<T>&, const Tensor<T>& gy) {
        Tensor<T>& gt = g.grad_buffer(table);
        const std::size_t d = gy.cols();
        for (std::size_t i = 0; i < ids.size(); ++i) {
          auto dst = gt.row(ids[i]);
          auto src = gy.row(i);
          for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
      });
}

template <class T>
Var<T> reshape(Var<T> x, Shape shape) {
  const Tensor<T>& xv = x.value();
  if (shape_size(shape) != xv.size()) {
    throw DimensionError("reshape " + shape_string(xv.shape()) + " to " +
                         shape_string(shape));
  }
  Tensor<T> out = xv.reshaped(std::move(shape));
  return x.graph->push(std::move(out), {x},
                       [x](Graph<T>& g, const Tensor<T>&, const Tensor<T>& gy) {
                         auto gx = g.grad_buffer(x).values();
                         auto s = gy.values();
                         for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s[i];
                       });
}

template <class T>
Var<T> sum(Var<T> x) {
  T total = 0;
  for (T v : x.value().values()) total += v;
  return x.graph->push(Tensor<T>({1}, std::vector<T>{total}), {x},
                       [x](Graph<T>& g, const Tensor<T>&, const Tensor<T>& gy) {
                         for (T& v : g.grad_buffer(x).values()) v += gy[0];
                       });
}

namespace {

// Attention probabilities of one (segment, head) block, [queries × keys],
// restricted to unmasked keys listed in `keys`.
template <class T>
struct AttentionBlock {
  std::vector<std::size_t> keys;
  std::vector<T> probs;
};

}  // namespace

template <class T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, AttentionLayout layout,
                 std::size_t heads) {
  const Tensor<T>& qv = q.value();
  const Tensor<T>& kv = k.value();
  const Tensor<T>& vv = v.value();
  require_rank2(qv, "attention queries");
  require_rank2(kv, "attention keys");
  require_same_shape(kv, vv, "attention keys/values");
  const std::size_t d = qv.cols();
  if (kv.cols() != d) {
    throw DimensionError("attention: queries " + shape_string(qv.shape()) +
                         " vs keys " + shape_string(kv.shape()));
  }
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) +
                         " not divisible into " + std::to_string(heads) + " heads");
  }
  for (const auto& s : layout.segments) {
    if (s.query_begin + s.query_length > qv.rows() ||
        s.key_begin + s.key_length > kv.rows()) {
      throw DimensionError("attention segment outside its matrices");
    }
  }
  if (!layout.key_mask.empty() && layout.key_mask.size() != kv.rows()) {
    throw DimensionError("attention key mask length mismatch");
  }

  const std::size_t dh = d / heads;
  const T inv_scale = T{1} / std::sqrt(static_cast<T>(dh));
  const bool keep = q.graph->recording();
  const std::size_t nseg = layout.segments.size();
  auto blocks = std::make_shared<std::vector<AttentionBlock<T>>>(keep ? nseg * heads : 0);

  Tensor<T> out({qv.rows(), d});
  parallel_for(nseg, [&](std::size_t si) {
    const AttentionSegment& seg = layout.segments[si];
    std::vector<std::size_t> keys;
    keys.reserve(seg.key_length);
    for (std::size_t j = seg.key_begin; j < seg.key_begin + seg.key_length; ++j)
      if (layout.key_mask.empty() || layout.key_mask[j]) keys.push_back(j);
    const std::size_t nk = keys.size();
    std::vector<T> probs(seg.query_length * nk);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * dh;
      for (std::size_t qi = 0; qi < seg.query_length; ++qi) {
        const T* qrow = qv.row(seg.query_begin + qi).data() + c0;
        T* p = probs.data() + qi * nk;
        T max = -std::numeric_limits<T>::infinity();
        for (std::size_t kj = 0; kj < nk; ++kj) {
          const T* krow = kv.row(keys[kj]).data() + c0;
          T dot = 0;
          for (std::size_t c = 0; c < dh; ++c) dot += qrow[c] * krow[c];
          p[kj] = dot * inv_scale;
          max = std::max(max, p[kj]);
        }
        T total = 0;
        for (std::size_t kj = 0; kj < nk; ++kj) {
          p[kj] = std::exp(p[kj] - max);
          total += p[kj];
        }
        T* o = out.row(seg.query_begin + qi).data() + c0;
        for (std::size_t kj = 0; kj < nk; ++kj) {
          p[kj] /= total;
          const T* vrow = vv.row(keys[kj]).data() + c0;
          for (std::size_t c = 0; c < dh; ++c) o[c] += p[kj] * vrow[c];
        }
      }
      if (keep) (*blocks)[si * heads + h] = {keys, probs};
    }
  });

  return q.graph->push(
      std::move(out), {q, k, v},
      [q, k, v, layout = std::move(layout), heads, blocks, inv_scale](
          Graph<T>& g, const Tensor<T>&, const Tensor<T>& gy) {
        const Tensor<T>& qv = q.value();
        const Tensor<T>& kv = k.value();
        const Tensor<T>& vv = v.value();
        const std::size_t dh = qv.cols() / heads;
        const bool want_q = g.needs_grad(q), want_k = g.needs_grad(k),
                   want_v = g.needs_grad(v);
        Tensor<T>* gq = want_q ? &g.grad_buffer(q) : nullptr;
        Tensor<T>* gk = want_k ? &g.grad_buffer(k) : nullptr;
        Tensor<T>* gv = want_v ? &g.grad_buffer(v) : nullptr;
        parallel_for(layout.segments.size(), [&](std::size_t si) {
          const AttentionSegment& seg = layout.segments[si];
          for (std::size_t h = 0; h < heads; ++h) {
            const auto& block = (*blocks)[si * heads + h];
            const std::size_t nk = block.keys.size();
            const std::size_t c0 = h * dh;
            std::vector<T> gp(nk);
            for (std::size_t qi = 0; qi < seg.query_length; ++qi) {
              const std::size_t row = seg.query_begin + qi;
              const T* go = gy.row(row).data() + c0;
              const T* p = block.probs.data() + qi * nk;
              T dot = 0;
              for (std::size_t kj = 0; kj < nk; ++kj) {
                const std::size_t key = block.keys[kj];
                const T* vrow = vv.row(key).data() + c0;
                T s = 0;
                for (std::size_t c = 0; c < dh; ++c) s += go[c] * vrow[c];
                gp[kj] = s;
                dot += p[kj] * s;
                if (gv) {
                  T* dv = gv->row(key).data() + c0;
                  for (std::size_t c = 0; c < dh; ++c) dv[c] += p[kj] * go[c];
                }
              }
              const T* qrow = qv.row(row).data() + c0;
              for (std::size_t kj = 0; kj < nk; ++kj) {
                const T gs = p[kj] * (gp[kj] - dot) * inv_scale;
                const std::size_t key = block.keys[kj];
                if (gq) {
                  const T* krow = kv.row(key).data() + c0;
                  T* dq = gq->row(row).data() + c0;
                  for (std::size_t c = 0; c < dh; ++c) dq[c] += gs * krow[c];
                }
                if (gk) {
                  T* dk = gk->row(key).data() + c0;
                  for (std::size_t c = 0; c < dh; ++c) dk[c] += gs * qrow[c];
                }
              }
            }
          }
        });
      });
}

#define NARCTC_INSTANTIATE(T)                                                  \
  template class Graph<T>;                                                     \
  template Var<T> affine<T>(Var<T>, Var<T>, std::optional<Var<T>>);            \
  template Var<T> add<T>(Var<T>, Var<T>);                                      \
  template Var<T> scale<T>(Var<T>, T);                                         \
  template Var<T> relu<T>(Var<T>);                                             \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, T);                    \
  template Var<T> softmax_rows<T>(Var<T>);                                     \
  template Var<T> log_softmax_rows<T>(Var<T>);                                 \
  template Var<T> gather_rows<T>(Var<T>, std::vector<std::size_t>);            \
  template Var<T> reshape<T>(Var<T>, Shape);                                   \
  template Var<T> sum<T>(Var<T>);                                              \
  template Var<T> attention<T>(Var<T>, Var<T>, Var<T>, AttentionLayout, std::size_t);

NARCTC_INSTANTIATE(float)
NARCTC_INSTANTIATE(double)

#undef NARCTC_INSTANTIATE

}  // namespace narctc
