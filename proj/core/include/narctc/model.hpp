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

#include "narctc/ctc.hpp"
#include "narctc/graph.hpp"

namespace narctc {

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t split_factor = 2;
  std::size_t vocab_size = 0;  // excluding the blank; output width is vocab_size + 1
  std::size_t max_source_len = 128;
  std::uint64_t seed = 1;
  // Sinusoidal positions added to the k·T_x sequence after splitting.
  bool split_positions = true;

  // 1,024-wide, 16 heads, 4,096 feed-forward, 6+6 layers, k = 3.
  static ModelConfig large(std::size_t vocab_size);

  std::size_t output_width() const { return vocab_size + 1; }
  // Throws ConfigError.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

std::size_t parameter_count(const ModelConfig& config);

// A packed set of sequences: row block `sequences[i]` of `states` belongs to
// sentence i. mask marks valid rows (0 = padding).
template <class T>
struct EncoderStates {
  Var<T> states;
  std::vector<std::uint8_t> mask;
  std::vector<FrameRange> sequences;
};

// Same layout after splitting; every source row became split_factor rows.
template <class T>
struct SplitStates {
  Var<T> states;
  std::vector<std::uint8_t> mask;
  std::vector<FrameRange> sequences;
};

// Batched model output padded to k·T_max frames per sentence. Frames past a
// sentence's own k·T_x are certain-blank rows, so decoding them emits nothing.
template <class T>
struct BatchLogProbs {
  Tensor<T> log_probs;  // [B·frames_per_sentence × (V+1)]
  std::size_t frames_per_sentence = 0;
  std::vector<std::size_t> valid_frames;

  std::size_t batch_size() const { return valid_frames.size(); }
  Tensor<T> sentence(std::size_t i) const;  // the valid frames of sentence i
};

// Encoder → state splitting → non-causal decoder → vocabulary+blank logits.
template <class T>
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  Parameter<T>& parameter(std::string_view name);
  void zero_grad();

  // Stages. The list form packs sentences without padding; the single form
  // accepts an explicit validity mask (pad rows are never attended to).
  EncoderStates<T> embed(Graph<T>& g, std::span<const std::vector<TokenId>> sentences);
  EncoderStates<T> embed(Graph<T>& g, std::span<const TokenId> tokens,
                         std::span<const std::uint8_t> mask = {});
  EncoderStates<T> encode(Graph<T>& g, const EncoderStates<T>& e);
  SplitStates<T> split_states(Graph<T>& g, const EncoderStates<T>& h);
  Var<T> decode_states(Graph<T>& g, const SplitStates<T>& s);
  Var<T> project_logits(Graph<T>& g, Var<T> decoded);

  // Full pipeline up to logits; `frames` receives each sentence's output rows.
  Var<T> logits(Graph<T>& g, std::span<const std::vector<TokenId>> sentences,
                std::vector<FrameRange>* frames = nullptr);

  // [(k·T_x) × (V+1)] log-probabilities for one sentence.
  Tensor<T> forward(std::span<const TokenId> tokens);
  // One model invocation for the whole batch.
  BatchLogProbs<T> forward_batch(std::span<const std::vector<TokenId>> sentences);

 private:
  struct LayerNorm {
    std::size_t gain, bias;
  };
  struct Attention {
    std::size_t wq, bq, wk, wv, bv, wo, bo;
  };
  struct FeedForward {
    std::size_t w1, b1, w2, b2;
  };
  struct EncoderLayer {
    LayerNorm ln_attn;
    Attention attn;
    LayerNorm ln_ffn;
    FeedForward ffn;
  };
  struct DecoderLayer {
    LayerNorm ln_self;
    Attention self_attn;
    LayerNorm ln_cross;
    Attention cross_attn;
    LayerNorm ln_ffn;
    FeedForward ffn;
  };

  class Initializer;

  Var<T> p(Graph<T>& g, std::size_t index) { return g.parameter(params_[index]); }
  Var<T> apply(Graph<T>& g, const LayerNorm& ln, Var<T> x);
  Var<T> apply(Graph<T>& g, const Attention& a, Var<T> queries, Var<T> memory,
               const AttentionLayout& layout);
  Var<T> apply(Graph<T>& g, const FeedForward& f, Var<T> x);
  Tensor<T> positions_for(std::span<const FrameRange> sequences) const;
  void check_tokens(std::span<const TokenId> tokens) const;

  ModelConfig config_;
  std::vector<Parameter<T>> params_;
  std::size_t embedding_ = 0;
  std::vector<EncoderLayer> encoder_;
  LayerNorm encoder_norm_{};
  std::size_t split_w_ = 0, split_b_ = 0;
  std::vector<DecoderLayer> decoder_;
  LayerNorm decoder_norm_{};
  std::size_t out_w_ = 0, out_b_ = 0;
  Tensor<T> position_table_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace narctc
