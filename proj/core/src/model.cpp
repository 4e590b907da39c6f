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

#include "narctc/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "narctc/numerics.hpp"

namespace narctc {

ModelConfig ModelConfig::large(std::size_t vocab_size) {
  ModelConfig c;
  c.d_model = 1024;
  c.n_heads = 16;
  c.d_ff = 4096;
  c.enc_layers = 6;
  c.dec_layers = 6;
  c.split_factor = 3;
  c.vocab_size = vocab_size;
  c.max_source_len = 256;
  return c;
}

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) +
                      ") must be a positive multiple of model.n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (split_factor < 1) throw ConfigError("model.k must be at least 1");
  if (d_ff == 0) throw ConfigError("model.d_ff must be positive");
  if (vocab_size == 0) throw ConfigError("model.vocab_size must be positive");
  if (max_source_len == 0) throw ConfigError("model.max_source_len must be positive");
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model, out = c.output_width();
  const std::size_t layer_norm = 2 * d;
  const std::size_t attention = 4 * d * d + 3 * d;  // wq,wk,wv,wo + bq,bv,bo
  const std::size_t ffn = 2 * d * c.d_ff + c.d_ff + d;
  std::size_t n = out * d;  // embedding
  n += c.enc_layers * (2 * layer_norm + attention + ffn);
  if (c.enc_layers > 0) n += layer_norm;
  n += d * c.split_factor * d + c.split_factor * d;
  n += c.dec_layers * (3 * layer_norm + 2 * attention + ffn);
  if (c.dec_layers > 0) n += layer_norm;
  n += d * out + out;
  return n;
}

template <class T>
Tensor<T> BatchLogProbs<T>::sentence(std::size_t i) const {
  const std::size_t width = log_probs.cols();
  const T* begin = log_probs.data() + i * frames_per_sentence * width;
  return Tensor<T>({valid_frames.at(i), width},
                   std::vector<T>(begin, begin + valid_frames[i] * width));
}

// Xavier-uniform matrices, zero biases, unit gains; draws come from one
// seeded stream in creation order, in double precision, so float and double
// models built from the same config agree up to rounding.
template <class T>
class Model<T>::Initializer {
 public:
  Initializer(Model& m, std::uint64_t seed) : m_(m), rng_(seed) {}

  std::size_t matrix(const std::string& name, std::size_t rows, std::size_t cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> value({rows, cols});
    for (T& v : value.values()) v = static_cast<T>(dist(rng_));
    return add(name, std::move(value));
  }

  std::size_t vector(const std::string& name, std::size_t size, T fill) {
    return add(name, Tensor<T>({size}, fill));
  }

  LayerNorm layer_norm(const std::string& prefix) {
    return {vector(prefix + ".gain", m_.config_.d_model, T{1}),
            vector(prefix + ".bias", m_.config_.d_model, T{0})};
  }

  // Keys carry no bias: a per-query constant shift of the scores cancels in
  // the softmax, so such a bias could never receive gradient.
  Attention attention(const std::string& prefix) {
    const std::size_t d = m_.config_.d_model;
    Attention a{};
    a.wq = matrix(prefix + ".wq", d, d);
    a.bq = vector(prefix + ".bq", d, T{0});
    a.wk = matrix(prefix + ".wk", d, d);
    a.wv = matrix(prefix + ".wv", d, d);
    a.bv = vector(prefix + ".bv", d, T{0});
    a.wo = matrix(prefix + ".wo", d, d);
    a.bo = vector(prefix + ".bo", d, T{0});
    return a;
  }

  FeedForward feed_forward(const std::string& prefix) {
    const std::size_t d = m_.config_.d_model, ff = m_.config_.d_ff;
    FeedForward f{};
    f.w1 = matrix(prefix + ".w1", d, ff);
    f.b1 = vector(prefix + ".b1", ff, T{0});
    f.w2 = matrix(prefix + ".w2", ff, d);
    f.b2 = vector(prefix + ".b2", d, T{0});
    return f;
  }

 private:
  std::size_t add(const std::string& name, Tensor<T> value) {
    m_.params_.emplace_back(name, std::move(value));
    return m_.params_.size() - 1;
  }

  Model& m_;
  std::mt19937_64 rng_;
};

template <class T>
Model<T>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  Initializer init(*this, config_.seed);
  embedding_ = init.matrix("embed.table", config_.output_width(), d);
  for (std::size_t i = 0; i < config_.enc_layers; ++i) {
    const std::string prefix = "encoder.layer" + std::to_string(i);
    EncoderLayer layer{};
    layer.ln_attn = init.layer_norm(prefix + ".ln_attn");
    layer.attn = init.attention(prefix + ".attn");
    layer.ln_ffn = init.layer_norm(prefix + ".ln_ffn");
    layer.ffn = init.feed_forward(prefix + ".ffn");
    encoder_.push_back(layer);
  }
  if (config_.enc_layers > 0) encoder_norm_ = init.layer_norm("encoder.ln_final");
  split_w_ = init.matrix("split.w", d, config_.split_factor * d);
  split_b_ = init.vector("split.b", config_.split_factor * d, T{0});
  for (std::size_t i = 0; i < config_.dec_layers; ++i) {
    const std::string prefix = "decoder.layer" + std::to_string(i);
    DecoderLayer layer{};
    layer.ln_self = init.layer_norm(prefix + ".ln_self");
    layer.self_attn = init.attention(prefix + ".self_attn");
    layer.ln_cross = init.layer_norm(prefix + ".ln_cross");
    layer.cross_attn = init.attention(prefix + ".cross_attn");
    layer.ln_ffn = init.layer_norm(prefix + ".ln_ffn");
    layer.ffn = init.feed_forward(prefix + ".ffn");
    decoder_.push_back(layer);
  }
  if (config_.dec_layers > 0) decoder_norm_ = init.layer_norm("decoder.ln_final");
  out_w_ = init.matrix("output.w", d, config_.output_width());
  out_b_ = init.vector("output.b", config_.output_width(), T{0});
  position_table_ =
      sinusoidal_positions<T>(config_.max_source_len * config_.split_factor, d);
}

template <class T>
Parameter<T>& Model<T>::parameter(std::string_view name) {
  for (auto& prm : params_)
    if (prm.name == name) return prm;
  throw ContractError("no parameter named " + std::string(name));
}

template <class T>
void Model<T>::zero_grad() {
  for (auto& prm : params_) prm.zero_grad();
}

template <class T>
void Model<T>::check_tokens(std::span<const TokenId> tokens) const {
  if (tokens.empty()) throw EmptyInputError("empty source sentence");
  if (tokens.size() > config_.max_source_len) {
    throw LengthError("source sentence has " + std::to_string(tokens.size()) +
                      " tokens, above max_source_len " +
                      std::to_string(config_.max_source_len));
  }
  for (TokenId id : tokens) {
    if (id >= config_.output_width()) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(config_.output_width()));
    }
  }
}

template <class T>
Tensor<T> Model<T>::positions_for(std::span<const FrameRange> sequences) const {
  std::size_t rows = 0;
  for (const auto& s : sequences) rows = std::max(rows, s.begin + s.length);
  const std::size_t d = config_.d_model;
  Tensor<T> pe({rows, d});
  for (const auto& s : sequences) {
    if (s.length > position_table_.rows()) throw LengthError("sequence longer than the position table");
    std::copy_n(position_table_.data(), s.length * d, pe.data() + s.begin * d);
  }
  return pe;
}

template <class T>
EncoderStates<T> Model<T>::embed(Graph<T>& g,
                                 std::span<const std::vector<TokenId>> sentences) {
  EncoderStates<T> out;
  std::vector<std::size_t> ids;
  for (const auto& s : sentences) {
    check_tokens(s);
    out.sequences.push_back({ids.size(), s.size()});
    ids.insert(ids.end(), s.begin(), s.end());
  }
  out.mask.assign(ids.size(), 1);
  Var<T> x = gather_rows(p(g, embedding_), std::move(ids));
  x = scale(x, static_cast<T>(std::sqrt(static_cast<double>(config_.d_model))));
  out.states = add(x, g.constant(positions_for(out.sequences)));
  return out;
}

template <class T>
EncoderStates<T> Model<T>::embed(Graph<T>& g, std::span<const TokenId> tokens,
                                 std::span<const std::uint8_t> mask) {
  check_tokens(tokens);
  if (!mask.empty() && mask.size() != tokens.size()) {
    throw DimensionError("mask length " + std::to_string(mask.size()) + " for " +
                         std::to_string(tokens.size()) + " tokens");
  }
  EncoderStates<T> out;
  out.sequences.push_back({0, tokens.size()});
  out.mask = mask.empty() ? std::vector<std::uint8_t>(tokens.size(), 1)
                          : std::vector<std::uint8_t>(mask.begin(), mask.end());
  Var<T> x = gather_rows(p(g, embedding_), std::vector<std::size_t>(tokens.begin(), tokens.end()));
  x = scale(x, static_cast<T>(std::sqrt(static_cast<double>(config_.d_model))));
  out.states = add(x, g.constant(positions_for(out.sequences)));
  return out;
}

template <class T>
Var<T> Model<T>::apply(Graph<T>& g, const LayerNorm& ln, Var<T> x) {
  return layer_norm(x, p(g, ln.gain), p(g, ln.bias));
}

template <class T>
Var<T> Model<T>::apply(Graph<T>& g, const Attention& a, Var<T> queries, Var<T> memory,
                       const AttentionLayout& layout) {
  Var<T> q = affine(queries, p(g, a.wq), std::optional<Var<T>>(p(g, a.bq)));
  Var<T> k = affine(memory, p(g, a.wk), std::optional<Var<T>>());
  Var<T> v = affine(memory, p(g, a.wv), std::optional<Var<T>>(p(g, a.bv)));
  Var<T> ctx = attention(q, k, v, layout, config_.n_heads);
  return affine(ctx, p(g, a.wo), std::optional<Var<T>>(p(g, a.bo)));
}

template <class T>
Var<T> Model<T>::apply(Graph<T>& g, const FeedForward& f, Var<T> x) {
  Var<T> h = relu(affine(x, p(g, f.w1), std::optional<Var<T>>(p(g, f.b1))));
  return affine(h, p(g, f.w2), std::optional<Var<T>>(p(g, f.b2)));
}

namespace {

AttentionLayout self_layout(std::span<const FrameRange> sequences,
                            const std::vector<std::uint8_t>& mask) {
  AttentionLayout layout;
  for (const auto& s : sequences) layout.segments.push_back({s.begin, s.length, s.begin, s.length});
  if (std::find(mask.begin(), mask.end(), 0) != mask.end()) layout.key_mask = mask;
  return layout;
}

}  // namespace

template <class T>
EncoderStates<T> Model<T>::encode(Graph<T>& g, const EncoderStates<T>& e) {
  if (e.mask.size() != e.states.value().rows()) {
    throw DimensionError("encoder mask does not match states");
  }
  const AttentionLayout layout = self_layout(e.sequences, e.mask);
  Var<T> x = e.states;
  for (const auto& layer : encoder_) {
    Var<T> h = apply(g, layer.ln_attn, x);
    x = add(x, apply(g, layer.attn, h, h, layout));
    x = add(x, apply(g, layer.ffn, apply(g, layer.ln_ffn, x)));
  }
  if (!encoder_.empty()) x = apply(g, encoder_norm_, x);
  return {x, e.mask, e.sequences};
}

template <class T>
SplitStates<T> Model<T>::split_states(Graph<T>& g, const EncoderStates<T>& h) {
  const std::size_t k = config_.split_factor, d = config_.d_model;
  Var<T> wide = affine(h.states, p(g, split_w_), std::optional<Var<T>>(p(g, split_b_)));
  // Row-major [N × k·d] is already k consecutive d-wide rows per source row.
  Var<T> states = reshape(wide, Shape{h.states.value().rows() * k, d});
  SplitStates<T> out;
  out.mask.reserve(h.mask.size() * k);
  for (auto m : h.mask) out.mask.insert(out.mask.end(), k, m);
  for (const auto& s : h.sequences) out.sequences.push_back({s.begin * k, s.length * k});
  if (config_.split_positions) states = add(states, g.constant(positions_for(out.sequences)));
  out.states = states;
  return out;
}

template <class T>
Var<T> Model<T>::decode_states(Graph<T>& g, const SplitStates<T>& s) {
  const AttentionLayout layout = self_layout(s.sequences, s.mask);
  Var<T> x = s.states;
  for (const auto& layer : decoder_) {
    Var<T> h = apply(g, layer.ln_self, x);
    x = add(x, apply(g, layer.self_attn, h, h, layout));
    x = add(x, apply(g, layer.cross_attn, apply(g, layer.ln_cross, x), s.states, layout));
    x = add(x, apply(g, layer.ffn, apply(g, layer.ln_ffn, x)));
  }
  if (!decoder_.empty()) x = apply(g, decoder_norm_, x);
  return x;
}

template <class T>
Var<T> Model<T>::project_logits(Graph<T>& g, Var<T> decoded) {
  return affine(decoded, p(g, out_w_), std::optional<Var<T>>(p(g, out_b_)));
}

template <class T>
Var<T> Model<T>::logits(Graph<T>& g, std::span<const std::vector<TokenId>> sentences,
                        std::vector<FrameRange>* frames) {
  if (sentences.empty()) throw EmptyInputError("no sentences to run");
  const SplitStates<T> split = split_states(g, encode(g, embed(g, sentences)));
  if (frames) *frames = split.sequences;
  return project_logits(g, decode_states(g, split));
}

template <class T>
BatchLogProbs<T> Model<T>::forward_batch(std::span<const std::vector<TokenId>> sentences) {
  Graph<T> g(/*record=*/false);
  std::vector<FrameRange> frames;
  const Tensor<T> log_probs = log_softmax_rows(logits(g, sentences, &frames).value());
  const std::size_t width = config_.output_width();

  BatchLogProbs<T> out;
  for (const auto& f : frames) {
    out.frames_per_sentence = std::max(out.frames_per_sentence, f.length);
    out.valid_frames.push_back(f.length);
  }
  out.log_probs = Tensor<T>({sentences.size() * out.frames_per_sentence, width}, log_zero<T>());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    T* dst = out.log_probs.data() + i * out.frames_per_sentence * width;
    std::copy_n(log_probs.data() + frames[i].begin * width, frames[i].length * width, dst);
    for (std::size_t t = frames[i].length; t < out.frames_per_sentence; ++t)
      dst[t * width + kBlankId] = T{0};
  }
  return out;
}

template <class T>
Tensor<T> Model<T>::forward(std::span<const TokenId> tokens) {
  const std::vector<TokenId> sentence(tokens.begin(), tokens.end());
  return forward_batch(std::span(&sentence, 1)).sentence(0);
}

template struct BatchLogProbs<float>;
template struct BatchLogProbs<double>;
template class Model<float>;
template class Model<double>;

}  // namespace narctc
