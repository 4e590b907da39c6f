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

#include "narctc/inference.hpp"

#include <chrono>
#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "narctc/checkpoint.hpp"
#include "narctc/hash.hpp"

namespace narctc {
namespace {

void keep_freed_memory() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

}  // namespace

std::string to_string(DecodeMode mode) {
  return mode == DecodeMode::kLatency ? "latency" : "batched";
}

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "latency") return DecodeMode::kLatency;
  if (text == "batched") return DecodeMode::kBatched;
  throw ConfigError("decode mode must be 'latency' or 'batched', got '" + std::string(text) + "'");
}

Translator::Translator(Model<float> model, Vocabulary vocab)
    : model_(std::move(model)), vocab_(std::move(vocab)) {
  keep_freed_memory();
  if (vocab_.size() != model_.config().output_width()) {
    throw VocabularyError("vocabulary has " + std::to_string(vocab_.size()) +
                          " entries, model expects " +
                          std::to_string(model_.config().output_width()));
  }
}

std::vector<std::string> Translator::translate_batch(std::span<const std::string> lines,
                                                     std::size_t first_line,
                                                     TimingTrace* trace) {
  std::vector<std::string> out(lines.size());
  std::vector<std::vector<TokenId>> sources;
  std::vector<std::size_t> slots;
  const std::size_t limit = model_.config().max_source_len;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto ids = tokenize(lines[i], vocab_);
    if (ids.empty()) continue;
    if (ids.size() > limit) {
      throw LengthError("line " + std::to_string(first_line + i) + " has " +
                        std::to_string(ids.size()) + " tokens, above max_source_len " +
                        std::to_string(limit));
    }
    sources.push_back(std::move(ids));
    slots.push_back(i);
  }
  if (sources.empty()) return out;

  const auto start = std::chrono::steady_clock::now();
  const BatchLogProbs<float> result = model_.forward_batch(sources);
  std::size_t tokens = 0;
  for (std::size_t b = 0; b < sources.size(); ++b) {
    const LabelSequence hyp = greedy_decode(result.sentence(b));
    tokens += hyp.size();
    out[slots[b]] = detokenize(hyp, vocab_);
  }
  if (trace) {
    trace->call_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    trace->call_sentences.push_back(sources.size());
    trace->call_frames.push_back(result.frames_per_sentence);
    trace->output_tokens += tokens;
  }
  return out;
}

Translator load_translator(const std::filesystem::path& checkpoint,
                           const std::filesystem::path& vocabulary) {
  auto loaded = load_checkpoint<float>(checkpoint);
  Vocabulary vocab = Vocabulary::load(vocabulary);
  if (vocab.hash() != loaded.info.vocab_hash) {
    throw CheckpointError("vocabulary " + vocabulary.string() + " (hash " +
                          hex_digest(vocab.hash()) + ") does not match checkpoint " +
                          checkpoint.string() + " (hash " +
                          hex_digest(loaded.info.vocab_hash) + ")");
  }
  return Translator(std::move(loaded.model), std::move(vocab));
}

JobResult run_job(Translator& translator, std::span<const std::string> lines, DecodeMode mode,
                  std::size_t batch_size, std::size_t first_line) {
  if (mode == DecodeMode::kBatched && batch_size == 0) {
    throw ConfigError("batched decoding needs a positive batch size");
  }
  const std::size_t group = mode == DecodeMode::kLatency ? 1 : batch_size;
  JobResult result;
  result.outputs.reserve(lines.size());
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < lines.size(); i += group) {
    const std::size_t n = std::min(group, lines.size() - i);
    auto outs = translator.translate_batch(lines.subspan(i, n), first_line + i, &result.trace);
    for (auto& o : outs) result.outputs.push_back(std::move(o));
  }
  result.trace.translate_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

JobResult run_job(const DecodeJob& job) {
  const auto start = std::chrono::steady_clock::now();
  Translator translator = load_translator(job.checkpoint, job.vocabulary);
  const double load_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  JobResult result = run_job(translator, job.lines, job.mode, job.batch_size);
  result.trace.load_seconds = load_seconds;
  return result;
}

}  // namespace narctc
