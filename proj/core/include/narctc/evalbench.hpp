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

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "narctc/inference.hpp"

namespace narctc {

struct BenchReport {
  std::string mode;
  std::size_t batch_size = 1;
  std::size_t sentence_count = 0;
  double load_seconds = 0;
  double translate_seconds = 0;
  double sentences_per_second = 0;
  double tokens_per_second = 0;
  double p50_ms = 0;
  double p90_ms = 0;
  double p99_ms = 0;
  std::string hardware;
  std::string config_hash;
};

// Stable key order: mode, batch_size, sentence_count, load_seconds,
// translate_seconds, sentences_per_second, tokens_per_second, p50_ms, p90_ms,
// p99_ms, hardware, config_hash.
nlohmann::ordered_json to_json(const BenchReport& r);
BenchReport report_from_json(const nlohmann::json& j);
void save_report(const std::filesystem::path& path, const BenchReport& r);
BenchReport load_report(const std::filesystem::path& path);

// Nearest-rank percentile, q in (0, 1].
double percentile(std::vector<double> values, double q);

// Builds the report from a finished job's trace. Throws ContractError when
// the timed region is empty or has zero duration.
BenchReport make_report(DecodeMode mode, std::size_t batch_size, std::size_t sentence_count,
                        const TimingTrace& trace, std::string hardware, std::string config_hash);

struct BenchResult {
  BenchReport report;
  std::vector<std::string> translations;  // all input lines, warm-up included
};

// Translates the first warmup_sentences lines untimed, then times the rest
// with a monotonic clock.
BenchResult run_bench(const DecodeJob& job, std::size_t warmup_sentences,
                      std::string hardware = {}, std::string config_hash = {});
BenchResult run_bench(Translator& translator, std::span<const std::string> lines, DecodeMode mode,
                      std::size_t batch_size, std::size_t warmup_sentences,
                      std::string hardware = {}, std::string config_hash = {});

// CPU model and core count as reported by the OS, for the hardware field.
std::string describe_host();

struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;

  double brevity_penalty() const;
  double score() const;  // 0..100
};

// Corpus statistics over whitespace tokens, single reference per sentence.
BleuStats bleu_stats(std::span<const std::string> hypotheses,
                     std::span<const std::string> references);

// Corpus BLEU-4, no smoothing.
double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references);

struct ComparisonRow {
  std::string mode;
  std::size_t batch_size = 0;
  double sentences_per_second = 0;
  double tokens_per_second = 0;
  double p50_ms = 0, p90_ms = 0, p99_ms = 0;
  double speedup = 0;  // sentences_per_second relative to the first report
};

std::vector<ComparisonRow> compare_runs(std::span<const BenchReport> reports);
std::string format_comparison(std::span<const ComparisonRow> rows);

}  // namespace narctc
