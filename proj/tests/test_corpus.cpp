// tests/test_corpus.cpp

// Copyright 2026  isonmt authors

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "isonmt/corpus.hpp"
#include "testutil.hpp"

using namespace isonmt;

TEST_CASE("load_parallel pairs lines and drops blank pairs") {
  testutil::TempDir dir;
  write_text_file(dir.file("a.src"), "x1 x2\n\nx3\n");
  write_text_file(dir.file("a.tgt"), "y1 y2\n\ny3\n");
  const LoadResult result = load_parallel(dir.file("a.src"), dir.file("a.tgt"), "sl", "tl");
  CHECK(result.corpus.size() == 2);
  CHECK(result.dropped_blank_pairs == 1);
  CHECK(result.corpus.src_language == "sl");
  CHECK(result.corpus.pairs[0].source == std::vector<std::string>{"x1", "x2"});
  CHECK(result.corpus.pairs[1].target_text() == "y3");
  CHECK(result.corpus.pairs[0].origin == Origin::kReference);
}

TEST_CASE("load_parallel rejects line-count mismatches with both counts") {
  testutil::TempDir dir;
  write_text_file(dir.file("a.src"), "one\ntwo\n");
  write_text_file(dir.file("a.tgt"), "uno\n");
  CHECK_THROWS_WITH_AS(load_parallel(dir.file("a.src"), dir.file("a.tgt")),
                       doctest::Contains("2"), DataError);
}

TEST_CASE("vocabulary: reserved first, then by frequency desc, ties lexicographic") {
  // Frequencies: b:2, a:2, c:1 -> reserved, a, b, c by the tie rule.
  const ParallelCorpus corpus =
      testutil::make_corpus({{"b a", "b a"}, {"a b c", "a b c"}});
  const Vocabulary vocab = Vocabulary::build(corpus, Side::kSource);
  REQUIRE(vocab.size() == 7);
  CHECK(vocab.token_at(Vocabulary::kPad) == "<pad>");
  CHECK(vocab.token_at(Vocabulary::kBos) == "<bos>");
  CHECK(vocab.token_at(Vocabulary::kEos) == "<eos>");
  CHECK(vocab.token_at(Vocabulary::kUnk) == "<unk>");
  CHECK(vocab.token_at(4) == "a");
  CHECK(vocab.token_at(5) == "b");
  CHECK(vocab.token_at(6) == "c");
}

TEST_CASE("encode appends EOS and maps unknown tokens to UNK; decode strips reserved") {
  const ParallelCorpus corpus = testutil::make_corpus({{"a b", "a b"}});
  const Vocabulary vocab = Vocabulary::build(corpus, Side::kSource);
  const std::vector<int> ids = vocab.encode(std::vector<std::string>{"a", "zz", "b"});
  REQUIRE(ids.size() == 4);
  CHECK(ids[0] == vocab.index_of("a"));
  CHECK(ids[1] == Vocabulary::kUnk);
  CHECK(ids[3] == Vocabulary::kEos);
  CHECK(vocab.decode(ids) == "a b");  // reserved indices (UNK, EOS) are stripped
  const std::vector<int> empty_ids = vocab.encode(std::vector<std::string>{});
  REQUIRE(empty_ids.size() == 1);
  CHECK(empty_ids[0] == Vocabulary::kEos);
}

TEST_CASE("vocabulary round-trips through save and load") {
  testutil::TempDir dir;
  const ParallelCorpus corpus = testutil::make_corpus({{"a b c", "p q"}});
  const Vocabulary vocab = Vocabulary::build(corpus, Side::kSource);
  vocab.save(dir.file("v.txt"));
  const Vocabulary loaded = Vocabulary::load(dir.file("v.txt"));
  CHECK(loaded == vocab);
  CHECK_THROWS_AS(Vocabulary::load(dir.file("missing.txt")), Error);
}

TEST_CASE("from_tokens validates the reserved prefix") {
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>", "<bos>"}), CodecError);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b", "c", "d"}), CodecError);
  const Vocabulary v = Vocabulary::from_tokens({"<pad>", "<bos>", "<eos>", "<unk>", "a"});
  CHECK(v.size() == 5);
}

TEST_CASE("synthetic corpus is deterministic and respects its spec") {
  SynthSpec spec;
  spec.n_symbols = 12;
  spec.seed = 5;
  const SynthCorpus one = generate_synthetic_corpus(spec, 40, 12);
  const SynthCorpus two = generate_synthetic_corpus(spec, 40, 12);
  REQUIRE(one.train.size() == 40);
  REQUIRE(one.test.size() == 12);
  for (size_t i = 0; i < one.train.pairs.size(); ++i) {
    CHECK(one.train.pairs[i].source == two.train.pairs[i].source);
    CHECK(one.train.pairs[i].target == two.train.pairs[i].target);
  }

  SUBCASE("source lengths stay inside [len_min, len_max]") {
    for (const SentencePair& pair : one.train.pairs) {
      CHECK(pair.source.size() >= static_cast<size_t>(spec.len_min));
      CHECK(pair.source.size() <= static_cast<size_t>(spec.len_max));
      CHECK(pair.source.size() == pair.target.size());
    }
  }

  SUBCASE("test sources never appear among train sources") {
    std::set<std::string> train_sources;
    for (const SentencePair& pair : one.train.pairs) {
      train_sources.insert(pair.source_text());
    }
    for (const SentencePair& pair : one.test.pairs) {
      CHECK(train_sources.count(pair.source_text()) == 0);
    }
  }

  SUBCASE("phoneme tables cover every rendered token with counts in range") {
    REQUIRE(one.tables.src_token.size() == static_cast<size_t>(spec.n_symbols));
    for (int k = 0; k < spec.n_symbols; ++k) {
      const int s = one.tables.src_count[k];
      CHECK(s >= spec.src_count_min);
      CHECK(s <= spec.src_count_max);
      CHECK(one.tables.short_count[k] >= 1);
      CHECK(one.tables.long_count[k] >= one.tables.short_count[k]);
      CHECK(one.src_counter.count_token(one.tables.src_token[k]) == s);
      CHECK(one.tables.long_prob[k] >= 0.0);
      CHECK(one.tables.long_prob[k] <= 1.0);
    }
  }

  SUBCASE("different seeds give different corpora") {
    SynthSpec other = spec;
    other.seed = 6;
    const SynthCorpus three = generate_synthetic_corpus(other, 40, 12);
    bool any_difference = false;
    for (size_t i = 0; i < three.train.pairs.size() && !any_difference; ++i) {
      any_difference = three.train.pairs[i].source != one.train.pairs[i].source;
    }
    CHECK(any_difference);
  }
}

TEST_CASE("synthetic spec validation") {
  SynthSpec spec;
  spec.len_min = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.p_long = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.src_count_min = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_NOTHROW(SynthSpec{}.validate());
}

TEST_CASE("an impossible disjoint test set raises a data error") {
  SynthSpec spec;
  spec.n_symbols = 1;
  spec.len_min = 1;
  spec.len_max = 1;
  // Only one possible source sentence; train uses it, test cannot avoid it.
  CHECK_THROWS_AS(generate_synthetic_corpus(spec, 1, 1), DataError);
}
