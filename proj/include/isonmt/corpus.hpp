// isonmt/corpus.hpp

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
//
// Parallel-corpus ingestion, vocabulary construction, token codecs, and the
// deterministic synthetic corpus generator. Tokenization is whitespace only;
// corpora are immutable after load or generation.

#ifndef ISONMT_CORPUS_HPP_
#define ISONMT_CORPUS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "isonmt/common.hpp"
#include "isonmt/phonology.hpp"

namespace isonmt {

enum class Origin { kReference, kGenerated };

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
  Origin origin = Origin::kReference;

  std::string source_text() const { return join_tokens(source); }
  std::string target_text() const { return join_tokens(target); }
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::string src_language;
  std::string tgt_language;

  size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

struct LoadResult {
  ParallelCorpus corpus;
  long dropped_blank_pairs = 0;
};

/// Loads two aligned one-sentence-per-line files. Pairs where either side is
/// blank after whitespace normalization are dropped and counted.
/// Throws DataError on a line-count mismatch or unreadable file.
LoadResult load_parallel(const std::string& src_path, const std::string& tgt_path,
                         const std::string& src_language = "src",
                         const std::string& tgt_language = "tgt");

enum class Side { kSource, kTarget };

// Token <-> index bijection with reserved entries at fixed indices.
// Surface tokens are ordered by (frequency desc, lexicographic asc) for
// deterministic construction.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary();

  static Vocabulary build(const ParallelCorpus& corpus, Side side);

  /// Rebuilds a vocabulary from a full token list (reserved entries first).
  /// Throws CodecError when the reserved prefix is wrong or tokens repeat.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }

  /// Index for a surface token, kUnk when absent.
  int index_of(const std::string& token) const;

  const std::string& token_at(int index) const;

  /// Maps tokens to indices (unknown -> UNK) and appends EOS.
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<int> encode(const std::string& text) const;

  /// Joins the surface forms of non-reserved indices.
  /// Throws CodecError on an out-of-range index.
  std::string decode(const std::vector<int>& indices) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  void rebuild_index();
};

// Desk-scale synthetic language: every symbol has one source rendering and
// two target renderings, a SHORT one with roughly the source phoneme count
// and a LONG one with roughly 1.6-2.0x of it. References pick the LONG
// rendering of symbol k with probability p_long + p_spread * u_k (u_k fixed
// per symbol), so a quality-optimal translator and a length-compliant one
// disagree on part of the vocabulary.
struct SynthSpec {
  int n_symbols = 50;
  int len_min = 3;
  int len_max = 10;
  double p_long = 0.5;
  double p_spread = 0.25;
  int src_count_min = 2;
  int src_count_max = 6;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthTables {
  std::vector<std::string> src_token, short_token, long_token;
  std::vector<int> src_count, short_count, long_count;
  std::vector<double> long_prob;  // per-symbol probability of the LONG rendering
};

struct SynthCorpus {
  ParallelCorpus train;
  ParallelCorpus test;
  PhonemeCounter src_counter;
  PhonemeCounter tgt_counter;
  SynthTables tables;
};

/// Deterministic in (spec, n_train, n_test); test sources never collide with
/// train sources. Throws ConfigError on an invalid spec.
SynthCorpus generate_synthetic_corpus(const SynthSpec& spec, int n_train, int n_test);

}  // namespace isonmt

#endif  // ISONMT_CORPUS_HPP_
