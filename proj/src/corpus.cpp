// src/corpus.cpp

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

#include "isonmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "isonmt/rng.hpp"

namespace isonmt {

namespace {

const char* const kReservedSurfaces[Vocabulary::kNumReserved] = {"<pad>", "<bos>",
                                                                 "<eos>", "<unk>"};

}  // namespace

LoadResult load_parallel(const std::string& src_path, const std::string& tgt_path,
                         const std::string& src_language,
                         const std::string& tgt_language) {
  const std::vector<std::string> src_lines = read_lines(src_path);
  const std::vector<std::string> tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw DataError("alignment mismatch: " + src_path + " has " +
                    std::to_string(src_lines.size()) + " lines, " + tgt_path + " has " +
                    std::to_string(tgt_lines.size()));
  }
  LoadResult result;
  result.corpus.src_language = src_language;
  result.corpus.tgt_language = tgt_language;
  for (size_t i = 0; i < src_lines.size(); ++i) {
    SentencePair pair;
    pair.source = tokenize(src_lines[i]);
    pair.target = tokenize(tgt_lines[i]);
    pair.origin = Origin::kReference;
    if (pair.source.empty() || pair.target.empty()) {
      ++result.dropped_blank_pairs;
      continue;
    }
    result.corpus.pairs.push_back(std::move(pair));
  }
  return result;
}

Vocabulary::Vocabulary() {
  for (const char* surface : kReservedSurfaces) tokens_.emplace_back(surface);
  rebuild_index();
}

void Vocabulary::rebuild_index() {
  index_.clear();
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) index_[tokens_[i]] = i;
}

Vocabulary Vocabulary::build(const ParallelCorpus& corpus, Side side) {
  std::unordered_map<std::string, long> freq;
  for (const SentencePair& pair : corpus.pairs) {
    const std::vector<std::string>& tokens =
        side == Side::kSource ? pair.source : pair.target;
    for (const std::string& token : tokens) ++freq[token];
  }
  std::vector<std::pair<std::string, long>> ordered(freq.begin(), freq.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [token, count] : ordered) {
    (void)count;
    vocab.tokens_.push_back(token);
  }
  vocab.rebuild_index();
  return vocab;
}

int Vocabulary::index_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_at(int index) const {
  if (index < 0 || index >= size()) {
    throw CodecError("token index " + std::to_string(index) +
                     " out of range for vocabulary of size " + std::to_string(size()));
  }
  return tokens_[static_cast<size_t>(index)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size() + 1);
  for (const std::string& token : tokens) out.push_back(index_of(token));
  out.push_back(kEos);
  return out;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  return encode(tokenize(text));
}

std::string Vocabulary::decode(const std::vector<int>& indices) const {
  std::vector<std::string> tokens;
  tokens.reserve(indices.size());
  for (int index : indices) {
    const std::string& token = token_at(index);
    if (index < kNumReserved) continue;
    tokens.push_back(token);
  }
  return join_tokens(tokens);
}

void Vocabulary::save(const std::string& path) const {
  std::string content;
  for (const std::string& token : tokens_) {
    content += token;
    content += '\n';
  }
  write_text_file(path, content);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kNumReserved) throw CodecError("vocabulary token list is truncated");
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens[static_cast<size_t>(i)] != kReservedSurfaces[i]) {
      throw CodecError("vocabulary token list lacks reserved token " +
                       std::string(kReservedSurfaces[i]) + " at index " + std::to_string(i));
    }
  }
  Vocabulary vocab;
  std::unordered_set<std::string> seen(vocab.tokens_.begin(), vocab.tokens_.end());
  for (size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (tokens[i].empty() || tokens[i] != trim(tokens[i])) {
      throw CodecError("vocabulary token list has a blank or padded entry");
    }
    if (!seen.insert(tokens[i]).second) {
      throw CodecError("vocabulary token list repeats token " + tokens[i]);
    }
    vocab.tokens_.push_back(tokens[i]);
  }
  vocab.rebuild_index();
  return vocab;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  for (std::string& line : lines) line = trim(line);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  try {
    return from_tokens(lines);
  } catch (const CodecError& err) {
    throw CodecError(std::string(err.what()) + " (file " + path + ")");
  }
}

void SynthSpec::validate() const {
  if (n_symbols < 1) throw ConfigError("synthetic spec: n_symbols must be positive");
  if (len_min < 1 || len_max < len_min) {
    throw ConfigError("synthetic spec: need 1 <= len_min <= len_max");
  }
  if (p_long < 0.0 || p_long > 1.0) {
    throw ConfigError("synthetic spec: p_long must lie in [0, 1]");
  }
  if (p_spread < 0.0) throw ConfigError("synthetic spec: p_spread must be >= 0");
  if (src_count_min < 1 || src_count_max < src_count_min) {
    throw ConfigError("synthetic spec: need 1 <= src_count_min <= src_count_max");
  }
}

namespace {

SentencePair sample_pair(const SynthSpec& spec, const SynthTables& tables, Rng& rng) {
  const long length = rng.uniform_int(spec.len_min, spec.len_max);
  SentencePair pair;
  pair.origin = Origin::kReference;
  pair.source.reserve(static_cast<size_t>(length));
  pair.target.reserve(static_cast<size_t>(length));
  for (long i = 0; i < length; ++i) {
    const size_t symbol = static_cast<size_t>(rng.uniform_int(0, spec.n_symbols - 1));
    pair.source.push_back(tables.src_token[symbol]);
    pair.target.push_back(rng.bernoulli(tables.long_prob[symbol])
                              ? tables.long_token[symbol]
                              : tables.short_token[symbol]);
  }
  return pair;
}

}  // namespace

SynthCorpus generate_synthetic_corpus(const SynthSpec& spec, int n_train, int n_test) {
  spec.validate();
  if (n_train < 0 || n_test < 0) {
    throw ConfigError("synthetic corpus sizes must be non-negative");
  }
  Rng rng(spec.seed);
  SynthCorpus out;
  SynthTables& tables = out.tables;
  std::unordered_map<std::string, int> src_lexicon, tgt_lexicon;
  for (int k = 0; k < spec.n_symbols; ++k) {
    const std::string id = std::to_string(k);
    tables.src_token.push_back("x" + id);
    // The long rendering extends the short one so the two share a character
    // prefix without sharing a token.
    tables.short_token.push_back("y" + id);
    tables.long_token.push_back("y" + id + "qq");
    const long src_count = rng.uniform_int(spec.src_count_min, spec.src_count_max);
    const long short_count = std::max(1l, src_count + rng.uniform_int(-1, 1));
    const long long_count = std::lround(static_cast<double>(src_count) *
                                        rng.uniform_real(1.6, 2.0));
    tables.src_count.push_back(static_cast<int>(src_count));
    tables.short_count.push_back(static_cast<int>(short_count));
    tables.long_count.push_back(static_cast<int>(long_count));
    // Spreading the long-rendering probability across symbols separates the
    // most likely translation from the length-compliant one on part of the
    // vocabulary, so length-filtered fine-tuning has room to move.
    const double prob =
        std::clamp(spec.p_long + spec.p_spread * rng.uniform_real(-1.0, 1.0), 0.0, 1.0);
    tables.long_prob.push_back(prob);
    src_lexicon[tables.src_token.back()] = tables.src_count.back();
    tgt_lexicon[tables.short_token.back()] = tables.short_count.back();
    tgt_lexicon[tables.long_token.back()] = tables.long_count.back();
  }
  out.src_counter = PhonemeCounter("synth-src", src_lexicon);
  out.tgt_counter = PhonemeCounter("synth-tgt", tgt_lexicon);
  out.train.src_language = out.test.src_language = "synth-src";
  out.train.tgt_language = out.test.tgt_language = "synth-tgt";

  std::unordered_set<std::string> train_sources;
  out.train.pairs.reserve(static_cast<size_t>(n_train));
  for (int i = 0; i < n_train; ++i) {
    SentencePair pair = sample_pair(spec, tables, rng);
    train_sources.insert(pair.source_text());
    out.train.pairs.push_back(std::move(pair));
  }

  // Test sources must not repeat a train source (or each other); rejection
  // sampling terminates fast because the sentence space dwarfs the corpus.
  std::unordered_set<std::string> test_sources;
  out.test.pairs.reserve(static_cast<size_t>(n_test));
  long attempts = 0;
  const long max_attempts = 1000l + 100l * (static_cast<long>(n_train) + n_test);
  while (static_cast<int>(out.test.pairs.size()) < n_test) {
    if (++attempts > max_attempts) {
      throw DataError("could not sample a disjoint test set; the symbol space is "
                      "too small for the requested corpus sizes");
    }
    SentencePair pair = sample_pair(spec, tables, rng);
    const std::string key = pair.source_text();
    if (train_sources.count(key) != 0 || !test_sources.insert(key).second) continue;
    out.test.pairs.push_back(std::move(pair));
  }
  return out;
}

}  // namespace isonmt
