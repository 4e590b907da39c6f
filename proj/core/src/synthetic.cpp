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

#include "narctc/synthetic.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

namespace narctc {

std::string to_string(ToyTask task) { return task == ToyTask::kCopy ? "copy" : "reverse"; }

ToyTask parse_toy_task(std::string_view text) {
  if (text == "copy") return ToyTask::kCopy;
  if (text == "reverse") return ToyTask::kReverse;
  throw ConfigError("toy task must be 'copy' or 'reverse', got '" + std::string(text) + "'");
}

ToyData generate_toy_data(const ToyTaskConfig& config, std::size_t train_pairs,
                          std::size_t heldout_pairs) {
  if (config.symbols < 1) throw ConfigError("toy task needs at least one symbol");
  if (config.min_length < 1 || config.min_length > config.max_length) {
    throw ConfigError("toy task lengths must satisfy 1 <= min_length <= max_length");
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> length(config.min_length, config.max_length);
  std::uniform_int_distribution<std::size_t> symbol(0, config.symbols - 1);

  auto draw = [&](std::vector<std::string>& src, std::vector<std::string>& tgt) {
    std::vector<std::string> words(length(rng));
    for (auto& w : words) w = "s" + std::to_string(symbol(rng));
    std::vector<std::string> out = words;
    if (config.task == ToyTask::kReverse) std::reverse(out.begin(), out.end());
    auto join = [](const std::vector<std::string>& ws) {
      std::string s;
      for (const auto& w : ws) {
        if (!s.empty()) s += ' ';
        s += w;
      }
      return s;
    };
    src.push_back(join(words));
    tgt.push_back(join(out));
  };

  ToyData data;
  for (std::size_t i = 0; i < train_pairs; ++i) draw(data.train.sources, data.train.targets);
  std::unordered_set<std::string> seen(data.train.sources.begin(), data.train.sources.end());
  std::size_t attempts = 0;
  while (data.heldout.sources.size() < heldout_pairs) {
    if (++attempts > 100 * (heldout_pairs + 1)) {
      throw ConfigError("toy task space too small for the requested held-out set");
    }
    draw(data.heldout.sources, data.heldout.targets);
    if (!seen.insert(data.heldout.sources.back()).second) {
      data.heldout.sources.pop_back();
      data.heldout.targets.pop_back();
    }
  }
  return data;
}

Vocabulary toy_vocabulary(std::size_t symbols) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < symbols; ++i) tokens.push_back("s" + std::to_string(i));
  return Vocabulary(std::move(tokens));
}

ParallelCorpus make_corpus(std::span<const std::string> sources,
                           std::span<const std::string> targets, const Vocabulary& vocab) {
  if (sources.size() != targets.size()) {
    throw IoError("source has " + std::to_string(sources.size()) + " lines, target has " +
                  std::to_string(targets.size()));
  }
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    SentencePair pair{tokenize(sources[i], vocab), tokenize(targets[i], vocab), i + 1};
    if (pair.source.empty()) {
      ++corpus.dropped_empty_source;
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  corpus.provenance.push_back("memory (" + std::to_string(sources.size()) + " lines)");
  return corpus;
}

double exact_match_accuracy(std::span<const std::string> hypotheses,
                            std::span<const std::string> references) {
  if (hypotheses.size() != references.size()) {
    throw ContractError("accuracy needs one reference per hypothesis");
  }
  if (hypotheses.empty()) return 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) hits += hypotheses[i] == references[i];
  return static_cast<double>(hits) / static_cast<double>(hypotheses.size());
}

}  // namespace narctc
