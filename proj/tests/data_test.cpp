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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "narctc/data.hpp"
#include "narctc/synthetic.hpp"

namespace narctc {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("narctc_data_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

using VocabTest = TempDir;
using CorpusTest = TempDir;

TEST_F(VocabTest, FrequencyThenLexicographicOrder) {
  const std::vector<fs::path> files{write("a.txt", "a b a\n")};
  const Vocabulary v = build_vocab(files, 10);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id_of("a"), 3u);
  EXPECT_EQ(v.id_of("b"), 4u);

  const std::vector<fs::path> ties{write("t.txt", "zeta alpha mid\nalpha zeta\n")};
  const Vocabulary t = build_vocab(ties, 10);
  EXPECT_EQ(t.token_of(3), "alpha");
  EXPECT_EQ(t.token_of(4), "zeta");
  EXPECT_EQ(t.token_of(5), "mid");
}

TEST_F(VocabTest, MaxSizeAndMinFreq) {
  const std::vector<fs::path> files{write("a.txt", "a a a b b c\n")};
  EXPECT_EQ(build_vocab(files, 4).size(), 4u);
  EXPECT_EQ(build_vocab(files, 100, 2).size(), 5u);
  EXPECT_THROW(build_vocab(files, 3), ConfigError);
}

TEST_F(VocabTest, EmptyCorpusHasOnlyReservedIds) {
  const std::vector<fs::path> files{write("e.txt", "")};
  const Vocabulary v = build_vocab(files, 10);
  EXPECT_EQ(v.size(), Vocabulary::kReserved);
  EXPECT_EQ(v.token_of(Vocabulary::kBlank), "<blank>");
  EXPECT_EQ(v.token_of(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.token_of(Vocabulary::kUnk), "<unk>");
}

TEST_F(VocabTest, UnreadableFileIsIoError) {
  const std::vector<fs::path> files{dir_ / "missing.txt"};
  EXPECT_THROW(build_vocab(files, 10), IoError);
}

TEST_F(VocabTest, Deterministic) {
  const std::vector<fs::path> files{write("a.txt", "x y z y x q\nr s x\n")};
  EXPECT_EQ(build_vocab(files, 50), build_vocab(files, 50));
  EXPECT_EQ(build_vocab(files, 50).hash(), build_vocab(files, 50).hash());
}

TEST_F(VocabTest, SaveLoadRoundTripKeepsIdsAndHash) {
  const Vocabulary v({"hello", "world", "ünïcode"});
  v.save(dir_ / "v.txt");
  const Vocabulary w = Vocabulary::load(dir_ / "v.txt");
  EXPECT_EQ(v, w);
  EXPECT_EQ(v.hash(), w.hash());
  EXPECT_EQ(w.id_of("ünïcode"), 5u);
}

TEST_F(VocabTest, CorruptFileIsRejected) {
  write("bad.txt", "# narctc vocabulary\nreserved.blank = 1\nreserved.pad = 0\nreserved.unk = 2\nsize = 3\n<blank>\n<pad>\n<unk>\n");
  EXPECT_THROW(Vocabulary::load(dir_ / "bad.txt"), VocabularyError);
  write("short.txt", "# narctc vocabulary\nreserved.blank = 0\nreserved.pad = 1\nreserved.unk = 2\nsize = 5\n<blank>\n<pad>\n<unk>\n");
  EXPECT_THROW(Vocabulary::load(dir_ / "short.txt"), VocabularyError);
}

TEST(Vocabulary, HashDependsOnOrder) {
  EXPECT_NE(Vocabulary({"a", "b"}).hash(), Vocabulary({"b", "a"}).hash());
}

TEST(Vocabulary, RejectsDuplicatesAndReservedMarkers) {
  EXPECT_THROW(Vocabulary({"a", "a"}), VocabularyError);
  EXPECT_THROW(Vocabulary({"<pad>"}), VocabularyError);
  EXPECT_THROW(Vocabulary({"two words"}), VocabularyError);
}

TEST(Tokenize, Examples) {
  const Vocabulary v({"a", "b"});
  EXPECT_TRUE(tokenize("", v).empty());
  EXPECT_EQ(tokenize("a a", v), (std::vector<TokenId>{3, 3}));
  EXPECT_EQ(tokenize("a zzz", v), (std::vector<TokenId>{3, Vocabulary::kUnk}));
  EXPECT_EQ(tokenize("<pad> <blank>", v), (std::vector<TokenId>{Vocabulary::kUnk, Vocabulary::kUnk}));
}

TEST(Tokenize, RoundTripNormalizesWhitespace) {
  const Vocabulary v({"the", "cat", "sat"});
  const std::string line = "  the\tcat   sat ";
  EXPECT_EQ(detokenize(tokenize(line, v), v), "the cat sat");
}

TEST(Detokenize, DropsBlankAndPad) {
  const Vocabulary v({"a", "b"});
  const std::vector<TokenId> ids{0, 3, 1, 4, 0, 2};
  EXPECT_EQ(detokenize(ids, v), "a b <unk>");
}

TEST_F(CorpusTest, LoadsPairsAndDropsEmptySources) {
  const Vocabulary v({"a", "b", "c"});
  const auto src = write("s.txt", "a b\n\nc\n");
  const auto tgt = write("t.txt", "b\nc\n\n");
  const ParallelCorpus c = load_parallel_corpus(src, tgt, v);
  ASSERT_EQ(c.pairs.size(), 2u);
  EXPECT_EQ(c.dropped_empty_source, 1u);
  EXPECT_EQ(c.pairs[0].line, 1u);
  EXPECT_EQ(c.pairs[1].line, 3u);
  EXPECT_TRUE(c.pairs[1].target.empty());
  EXPECT_EQ(c.provenance.size(), 2u);
}

TEST_F(CorpusTest, LineCountMismatchIsIoError) {
  const Vocabulary v({"a"});
  EXPECT_THROW(load_parallel_corpus(write("s.txt", "a\na\n"), write("t.txt", "a\n"), v), IoError);
}

TEST_F(CorpusTest, MissingFileNamesPath) {
  const Vocabulary v({"a"});
  try {
    load_parallel_corpus(dir_ / "nope.src", write("t.txt", "a\n"), v);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.src"), std::string::npos);
  }
}

TEST_F(CorpusTest, CarriageReturnsAreStripped) {
  const auto lines = read_lines(write("crlf.txt", "a b\r\nc\r\n"));
  EXPECT_EQ(lines, (std::vector<std::string>{"a b", "c"}));
}

ParallelCorpus corpus_of(std::vector<std::size_t> source_lengths, std::size_t target_length = 1) {
  ParallelCorpus c;
  for (std::size_t i = 0; i < source_lengths.size(); ++i) {
    c.pairs.push_back({std::vector<TokenId>(source_lengths[i], 3),
                       LabelSequence(target_length, 4), i + 1});
  }
  return c;
}

TEST(MakeBatches, GreedyFillWithinBudget) {
  const BatchPlan plan = make_batches(corpus_of({4, 4, 4}), 8, 2, 1);
  ASSERT_EQ(plan.batches.size(), 2u);
  std::vector<std::size_t> sizes{plan.batches[0].size(), plan.batches[1].size()};
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{1, 2}));
}

TEST(MakeBatches, OverBudgetSentenceNamesLine) {
  try {
    make_batches(corpus_of({2, 9, 3}), 8, 2, 1);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(MakeBatches, InfeasiblePairsAreSkippedAndCounted) {
  ParallelCorpus c = corpus_of({2, 2, 3});
  c.pairs[1].target = LabelSequence(5, 4);  // 5 > 2·2
  const BatchPlan plan = make_batches(c, 16, 2, 1);
  EXPECT_EQ(plan.skipped, 1u);
  EXPECT_EQ(plan.skipped_lines, (std::vector<std::size_t>{2}));
  std::size_t total = 0;
  for (const auto& b : plan.batches) {
    total += b.size();
    for (std::size_t line : b.lines) EXPECT_NE(line, 2u);
  }
  EXPECT_EQ(total + plan.skipped, c.pairs.size());
}

TEST(MakeBatches, SeededAndInvariantsHold) {
  std::vector<std::size_t> lengths;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) lengths.push_back(1 + rng() % 20);
  const ParallelCorpus c = corpus_of(lengths, 3);
  const BatchPlan a = make_batches(c, 64, 3, 42);
  const BatchPlan b = make_batches(c, 64, 3, 42);
  const BatchPlan other = make_batches(c, 64, 3, 43);
  ASSERT_EQ(a.batches.size(), b.batches.size());
  for (std::size_t i = 0; i < a.batches.size(); ++i) EXPECT_EQ(a.batches[i].lines, b.batches[i].lines);
  bool differs = other.batches.size() != a.batches.size();
  for (std::size_t i = 0; !differs && i < a.batches.size(); ++i)
    differs = a.batches[i].lines != other.batches[i].lines;
  EXPECT_TRUE(differs);

  std::size_t total = 0;
  for (const auto& batch : a.batches) {
    EXPECT_LE(batch.size() * batch.max_length, 64u);
    total += batch.size();
    for (std::size_t r = 0; r < batch.size(); ++r) {
      EXPECT_TRUE(feasible(batch.targets[r], 3 * batch.source_lengths[r]));
      for (std::size_t j = batch.source_lengths[r]; j < batch.max_length; ++j)
        EXPECT_EQ(batch.source[r * batch.max_length + j], Vocabulary::kPad);
    }
  }
  EXPECT_EQ(total + a.skipped, c.pairs.size());
}

TEST(Synthetic, ReversalPairsAndDisjointHeldout) {
  ToyTaskConfig cfg;
  cfg.task = ToyTask::kReverse;
  cfg.symbols = 4;
  cfg.min_length = 2;
  cfg.max_length = 6;
  const ToyData d = generate_toy_data(cfg, 200, 50);
  ASSERT_EQ(d.train.sources.size(), 200u);
  ASSERT_EQ(d.heldout.sources.size(), 50u);
  const std::set<std::string> train(d.train.sources.begin(), d.train.sources.end());
  for (const auto& s : d.heldout.sources) EXPECT_EQ(train.count(s), 0u);
  const auto src = split_whitespace(d.train.sources[0]);
  const auto tgt = split_whitespace(d.train.targets[0]);
  EXPECT_TRUE(std::equal(src.begin(), src.end(), tgt.rbegin(), tgt.rend()));
  const Vocabulary v = toy_vocabulary(4);
  const ParallelCorpus c = make_corpus(d.train.sources, d.train.targets, v);
  EXPECT_EQ(c.pairs.size(), 200u);
  for (const auto& p : c.pairs)
    for (TokenId id : p.source) EXPECT_NE(id, Vocabulary::kUnk);
}

TEST(Synthetic, ExactMatchAccuracy) {
  const std::vector<std::string> h{"a b", "c", "d"}, r{"a b", "c d", "d"};
  EXPECT_NEAR(exact_match_accuracy(h, r), 2.0 / 3.0, 1e-15);
}

}  // namespace
}  // namespace narctc
