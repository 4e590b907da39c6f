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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "narctc/ctc.hpp"

namespace narctc {

// Token inventory shared by source and target. Ids 0..2 are reserved; the
// blank doubles as output column 0 of the model.
class Vocabulary {
 public:
  static constexpr TokenId kBlank = kBlankId;
  static constexpr TokenId kPad = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr std::size_t kReserved = 3;

  Vocabulary();
  // Non-reserved tokens in id order, starting at id kReserved.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  // Unknown strings (and the reserved marker strings) map to kUnk.
  TokenId id_of(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token_of(TokenId id) const;
  static bool is_reserved(TokenId id) { return id < kReserved; }

  // Stable digest of the id→token table.
  std::uint64_t hash() const;

  // Plain text: a header of reserved ids, then one token per line in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Counts whitespace tokens over all files and keeps the most frequent ones
// (ties broken lexicographically). max_size includes the reserved ids.
Vocabulary build_vocab(std::span<const std::filesystem::path> files,
                       std::size_t max_size, std::size_t min_freq = 1);

std::vector<std::string_view> split_whitespace(std::string_view line);

// Whitespace tokenization. Pluggable: anything with this signature can
// replace it in the corpus loader.
std::vector<TokenId> tokenize(std::string_view line, const Vocabulary& vocab);

// Space-joined tokens; blank and pad ids are dropped.
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

struct SentencePair {
  std::vector<TokenId> source;
  LabelSequence target;
  std::size_t line = 0;  // 1-based line in the source file
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::vector<std::string> provenance;  // "path (N lines)" per input file
  std::size_t dropped_empty_source = 0;
};

// Reads line-aligned source/target files. Mismatched line counts are an
// IoError; lines with an empty source side are dropped and counted.
ParallelCorpus load_parallel_corpus(const std::filesystem::path& source,
                                    const std::filesystem::path& target,
                                    const Vocabulary& vocab);

std::vector<std::string> read_lines(const std::filesystem::path& path);

struct Batch {
  std::size_t max_length = 0;
  std::vector<TokenId> source;  // size() × max_length, padded with kPad
  std::vector<std::size_t> source_lengths;
  std::vector<LabelSequence> targets;
  std::vector<std::size_t> lines;

  std::size_t size() const { return source_lengths.size(); }
  std::span<const TokenId> source_row(std::size_t i) const {
    return {source.data() + i * max_length, source_lengths[i]};
  }
  std::vector<std::vector<TokenId>> sources() const;
  std::size_t target_tokens() const;
};

struct BatchPlan {
  std::vector<Batch> batches;
  std::size_t skipped = 0;  // pairs whose target cannot fit k·|source| frames
  std::vector<std::size_t> skipped_lines;
};

// Shuffles (seeded), buckets by source length and greedily fills batches whose
// padded source size stays within max_tokens.
BatchPlan make_batches(const ParallelCorpus& corpus, std::size_t max_tokens,
                       std::size_t split_factor, std::uint64_t seed);

}  // namespace narctc
