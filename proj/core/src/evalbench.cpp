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

#include "narctc/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

namespace narctc {

nlohmann::ordered_json to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["batch_size"] = r.batch_size;
  j["sentence_count"] = r.sentence_count;
  j["load_seconds"] = r.load_seconds;
  j["translate_seconds"] = r.translate_seconds;
  j["sentences_per_second"] = r.sentences_per_second;
  j["tokens_per_second"] = r.tokens_per_second;
  j["p50_ms"] = r.p50_ms;
  j["p90_ms"] = r.p90_ms;
  j["p99_ms"] = r.p99_ms;
  j["hardware"] = r.hardware;
  j["config_hash"] = r.config_hash;
  return j;
}

BenchReport report_from_json(const nlohmann::json& j) {
  BenchReport r;
  try {
    r.mode = j.at("mode").get<std::string>();
    r.batch_size = j.at("batch_size").get<std::size_t>();
    r.sentence_count = j.at("sentence_count").get<std::size_t>();
    r.load_seconds = j.at("load_seconds").get<double>();
    r.translate_seconds = j.at("translate_seconds").get<double>();
    r.sentences_per_second = j.at("sentences_per_second").get<double>();
    r.tokens_per_second = j.at("tokens_per_second").get<double>();
    r.p50_ms = j.at("p50_ms").get<double>();
    r.p90_ms = j.at("p90_ms").get<double>();
    r.p99_ms = j.at("p99_ms").get<double>();
    r.hardware = j.at("hardware").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed bench report: ") + e.what());
  }
  return r;
}

void save_report(const std::filesystem::path& path, const BenchReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << to_json(r).dump(2) << "\n";
}

BenchReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("report " + path.string() + " is not valid JSON: " + e.what());
  }
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

BenchReport make_report(DecodeMode mode, std::size_t batch_size, std::size_t sentence_count,
                        const TimingTrace& trace, std::string hardware, std::string config_hash) {
  if (sentence_count == 0) throw ContractError("benchmark timed no sentences");
  if (!(trace.translate_seconds > 0)) throw ContractError("benchmark timed region has zero length");
  BenchReport r;
  r.mode = to_string(mode);
  r.batch_size = mode == DecodeMode::kLatency ? 1 : batch_size;
  r.sentence_count = sentence_count;
  r.load_seconds = trace.load_seconds;
  r.translate_seconds = trace.translate_seconds;
  r.sentences_per_second = static_cast<double>(sentence_count) / trace.translate_seconds;
  r.tokens_per_second = static_cast<double>(trace.output_tokens) / trace.translate_seconds;
  r.p50_ms = percentile(trace.call_ms, 0.50);
  r.p90_ms = percentile(trace.call_ms, 0.90);
  r.p99_ms = percentile(trace.call_ms, 0.99);
  r.hardware = std::move(hardware);
  r.config_hash = std::move(config_hash);
  return r;
}

std::string describe_host() {
  std::string cpu = "unknown CPU";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    if (line.starts_with("model name")) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(line.find_first_not_of(' ', colon + 1));
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

BenchResult run_bench(Translator& translator, std::span<const std::string> lines, DecodeMode mode,
                      std::size_t batch_size, std::size_t warmup_sentences, std::string hardware,
                      std::string config_hash) {
  if (lines.size() < warmup_sentences + 1) {
    throw ContractError("benchmark input has " + std::to_string(lines.size()) +
                        " lines; need more than the " + std::to_string(warmup_sentences) +
                        " warm-up sentences");
  }
  BenchResult result;
  JobResult warm = run_job(translator, lines.first(warmup_sentences), mode, batch_size, 1);
  JobResult timed = run_job(translator, lines.subspan(warmup_sentences), mode, batch_size,
                            warmup_sentences + 1);
  result.translations = std::move(warm.outputs);
  for (auto& o : timed.outputs) result.translations.push_back(std::move(o));
  result.report = make_report(mode, batch_size, lines.size() - warmup_sentences, timed.trace,
                              std::move(hardware), std::move(config_hash));
  return result;
}

BenchResult run_bench(const DecodeJob& job, std::size_t warmup_sentences, std::string hardware,
                      std::string config_hash) {
  const auto start = std::chrono::steady_clock::now();
  Translator translator = load_translator(job.checkpoint, job.vocabulary);
  const double load_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  BenchResult result = run_bench(translator, job.lines, job.mode, job.batch_size, warmup_sentences,
                                 std::move(hardware), std::move(config_hash));
  result.report.load_seconds = load_seconds;
  return result;
}

namespace {

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string_view>& tokens, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string_view>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

double BleuStats::brevity_penalty() const {
  if (hypothesis_length == 0) return 0;
  if (hypothesis_length >= reference_length) return 1;
  return std::exp(1.0 - static_cast<double>(reference_length) /
                            static_cast<double>(hypothesis_length));
}

double BleuStats::score() const {
  double log_precision = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (matches[n] == 0 || totals[n] == 0) return 0;
    log_precision += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  return 100.0 * brevity_penalty() * std::exp(log_precision / 4.0);
}

BleuStats bleu_stats(std::span<const std::string> hypotheses,
                     std::span<const std::string> references) {
  if (hypotheses.size() != references.size()) {
    throw ContractError("BLEU needs one reference per hypothesis: " +
                        std::to_string(hypotheses.size()) + " vs " +
                        std::to_string(references.size()));
  }
  BleuStats stats;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = split_whitespace(hypotheses[i]);
    const auto ref = split_whitespace(references[i]);
    stats.hypothesis_length += hyp.size();
    stats.reference_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts h = count_ngrams(hyp, n);
      const NgramCounts r = count_ngrams(ref, n);
      for (const auto& [gram, count] : h) {
        auto it = r.find(gram);
        if (it != r.end()) stats.matches[n - 1] += std::min(count, it->second);
      }
      if (hyp.size() >= n) stats.totals[n - 1] += hyp.size() - n + 1;
    }
  }
  return stats;
}

double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references) {
  const BleuStats stats = bleu_stats(hypotheses, references);
  if (stats.reference_length == 0) throw ContractError("BLEU needs at least one non-empty reference");
  return stats.score();
}

std::vector<ComparisonRow> compare_runs(std::span<const BenchReport> reports) {
  if (reports.size() < 2) throw ContractError("comparison needs at least two reports");
  std::vector<ComparisonRow> rows;
  const double base = reports.front().sentences_per_second;
  for (const auto& r : reports) {
    ComparisonRow row;
    row.mode = r.mode;
    row.batch_size = r.batch_size;
    row.sentences_per_second = r.sentences_per_second;
    row.tokens_per_second = r.tokens_per_second;
    row.p50_ms = r.p50_ms;
    row.p90_ms = r.p90_ms;
    row.p99_ms = r.p99_ms;
    row.speedup = base > 0 ? r.sentences_per_second / base : 0;
    rows.push_back(row);
  }
  return rows;
}

std::string format_comparison(std::span<const ComparisonRow> rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-8s %6s %12s %12s %9s %9s %9s %8s\n", "mode", "batch",
                "sent/s", "tok/s", "p50_ms", "p90_ms", "p99_ms", "speedup");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %6zu %12.2f %12.2f %9.3f %9.3f %9.3f %8.3f\n",
                  r.mode.c_str(), r.batch_size, r.sentences_per_second, r.tokens_per_second,
                  r.p50_ms, r.p90_ms, r.p99_ms, r.speedup);
    out += buf;
  }
  return out;
}

}  // namespace narctc
