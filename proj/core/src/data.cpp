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

#include "narctc/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "narctc/hash.hpp"

namespace narctc {
namespace {

constexpr std::string_view kReservedTokens[] = {"<blank>", "<pad>", "<unk>"};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  tokens_.reserve(kReserved + tokens.size());
  for (auto t : kReservedTokens) tokens_.emplace_back(t);
  for (auto& t : tokens) {
    if (t.empty() || std::any_of(t.begin(), t.end(), is_space)) {
      throw VocabularyError("vocabulary token '" + t + "' is empty or contains whitespace");
    }
    if (std::find(std::begin(kReservedTokens), std::end(kReservedTokens), t) !=
        std::end(kReservedTokens)) {
      throw VocabularyError("vocabulary token '" + t + "' collides with a reserved marker");
    }
    tokens_.push_back(std::move(t));
  }
  for (std::size_t i = kReserved; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw VocabularyError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

TokenId Vocabulary::id_of(std::string_view token) const {
  return find(token).value_or(kUnk);
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id >= tokens_.size()) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  out << "# narctc vocabulary\n"
      << "reserved.blank = " << kBlank << "\n"
      << "reserved.pad = " << kPad << "\n"
      << "reserved.unk = " << kUnk << "\n"
      << "size = " << tokens_.size() << "\n";
  for (const auto& t : tokens_) out << t << "\n";
  if (!out) throw IoError("failed writing vocabulary " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  std::map<std::string, std::string> header;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw VocabularyError("malformed vocabulary header line: " + line);
    header[line.substr(0, eq)] = line.substr(eq + 3);
    if (line.starts_with("size = ")) break;
  }
  if (header["reserved.blank"] != std::to_string(kBlank) ||
      header["reserved.pad"] != std::to_string(kPad) ||
      header["reserved.unk"] != std::to_string(kUnk)) {
    throw VocabularyError("vocabulary " + path.string() + " uses different reserved ids");
  }
  const std::size_t size = std::stoul(header.at("size"));
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::getline(in, line)) throw VocabularyError("vocabulary " + path.string() + " is truncated");
    if (i < kReserved) {
      if (line != kReservedTokens[i]) throw VocabularyError("unexpected reserved token " + line);
      continue;
    }
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Vocabulary build_vocab(std::span<const std::filesystem::path> files, std::size_t max_size,
                       std::size_t min_freq) {
  if (max_size < Vocabulary::kReserved + 1) {
    throw ConfigError("vocabulary max_size must be at least " +
                      std::to_string(Vocabulary::kReserved + 1));
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& file : files) {
    for (const auto& line : read_lines(file)) {
      for (auto tok : split_whitespace(line)) ++counts[std::string(tok)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    const bool reserved = std::find(std::begin(kReservedTokens), std::end(kReservedTokens),
                                    tok) != std::end(kReservedTokens);
    if (n >= min_freq && !reserved) ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocabulary::kReserved);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocabulary(std::move(tokens));
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<TokenId> tokenize(std::string_view line, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (auto tok : split_whitespace(line)) ids.push_back(vocab.id_of(tok));
  return ids;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == Vocabulary::kBlank || id == Vocabulary::kPad) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token_of(id);
  }
  return out;
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& source,
                                    const std::filesystem::path& target,
                                    const Vocabulary& vocab) {
  const auto src = read_lines(source);
  const auto tgt = read_lines(target);
  if (src.size() != tgt.size()) {
    throw IoError("parallel files differ in length: " + source.string() + " has " +
                  std::to_string(src.size()) + " lines, " + target.string() + " has " +
                  std::to_string(tgt.size()));
  }
  ParallelCorpus corpus;
  corpus.provenance = {source.string() + " (" + std::to_string(src.size()) + " lines)",
                       target.string() + " (" + std::to_string(tgt.size()) + " lines)"};
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair pair{tokenize(src[i], vocab), tokenize(tgt[i], vocab), i + 1};
    if (pair.source.empty()) {
      ++corpus.dropped_empty_source;
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

std::vector<std::vector<TokenId>> Batch::sources() const {
  std::vector<std::vector<TokenId>> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    auto row = source_row(i);
    out.emplace_back(row.begin(), row.end());
  }
  return out;
}

std::size_t Batch::target_tokens() const {
  std::size_t n = 0;
  for (const auto& t : targets) n += t.size();
  return n;
}

BatchPlan make_batches(const ParallelCorpus& corpus, std::size_t max_tokens,
                       std::size_t split_factor, std::uint64_t seed) {
  BatchPlan plan;
  std::vector<std::size_t> order;
  order.reserve(corpus.pairs.size());
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& p = corpus.pairs[i];
    if (p.source.size() > max_tokens) {
      throw ConfigError("sentence on line " + std::to_string(p.line) + " has " +
                        std::to_string(p.source.size()) +
                        " source tokens, above the batch budget of " +
                        std::to_string(max_tokens));
    }
    if (!feasible(p.target, split_factor * p.source.size())) {
      ++plan.skipped;
      plan.skipped_lines.push_back(p.line);
      continue;
    }
    order.push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return corpus.pairs[a].source.size() < corpus.pairs[b].source.size();
  });

  std::vector<std::vector<std::size_t>> groups;
  std::size_t longest = 0;
  for (std::size_t idx : order) {
    const std::size_t len = corpus.pairs[idx].source.size();
    const std::size_t new_longest = std::max(longest, len);
    if (groups.empty() || (groups.back().size() + 1) * new_longest > max_tokens) {
      groups.emplace_back();
      longest = len;
    } else {
      longest = new_longest;
    }
    groups.back().push_back(idx);
  }
  std::shuffle(groups.begin(), groups.end(), rng);

  for (const auto& group : groups) {
    Batch b;
    for (std::size_t idx : group) b.max_length = std::max(b.max_length, corpus.pairs[idx].source.size());
    b.source.assign(group.size() * b.max_length, Vocabulary::kPad);
    for (std::size_t r = 0; r < group.size(); ++r) {
      const auto& p = corpus.pairs[group[r]];
      std::copy(p.source.begin(), p.source.end(), b.source.begin() + r * b.max_length);
      b.source_lengths.push_back(p.source.size());
      b.targets.push_back(p.target);
      b.lines.push_back(p.line);
    }
    plan.batches.push_back(std::move(b));
  }
  return plan;
}

}  // namespace narctc
