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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "narctc/data.hpp"
#include "narctc/model.hpp"

namespace narctc {

enum class DecodeMode { kLatency, kBatched };

std::string to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view text);

struct DecodeJob {
  std::vector<std::string> lines;
  DecodeMode mode = DecodeMode::kBatched;
  std::size_t batch_size = 32;  // ignored in latency mode
  std::filesystem::path checkpoint;
  std::filesystem::path vocabulary;
};

struct TimingTrace {
  double load_seconds = 0;
  double translate_seconds = 0;
  std::vector<double> call_ms;               // one entry per model invocation
  std::vector<std::size_t> call_sentences;   // non-empty sentences per call
  std::vector<std::size_t> call_frames;      // k·T_max of each call
  std::size_t output_tokens = 0;
};

// Greedy non-autoregressive translation: every output frame of a sentence is
// decided in the same forward pass.
class Translator {
 public:
  Translator(Model<float> model, Vocabulary vocab);

  // Empty lines map to empty outputs and are not sent to the model; the rest
  // go through exactly one forward_batch call. `first_line` numbers the input
  // for error messages (1-based).
  std::vector<std::string> translate_batch(std::span<const std::string> lines,
                                           std::size_t first_line = 1,
                                           TimingTrace* trace = nullptr);

  const Model<float>& model() const { return model_; }
  const Vocabulary& vocabulary() const { return vocab_; }

 private:
  Model<float> model_;
  Vocabulary vocab_;
};

// Loads the checkpoint and vocabulary (checking they belong together).
Translator load_translator(const std::filesystem::path& checkpoint,
                           const std::filesystem::path& vocabulary);

struct JobResult {
  std::vector<std::string> outputs;
  TimingTrace trace;
};

// Latency mode: one sentence per model call, strictly sequential. Batched
// mode: consecutive groups of batch_size lines, in input order.
JobResult run_job(const DecodeJob& job);

// Decodes with an already loaded translator; load_seconds is left at 0.
JobResult run_job(Translator& translator, std::span<const std::string> lines, DecodeMode mode,
                  std::size_t batch_size, std::size_t first_line = 1);

}  // namespace narctc
