// isonmt/phonology.cpp

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

#include "isonmt/phonology.hpp"

#include <algorithm>
#include <cctype>

namespace isonmt {

namespace {

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

bool is_digraph(char a, char b) {
  // th, sh, ch, ph, ng, ck, wh
  switch (a) {
    case 't': return b == 'h';
    case 's': return b == 'h';
    case 'c': return b == 'h' || b == 'k';
    case 'p': return b == 'h';
    case 'n': return b == 'g';
    case 'w': return b == 'h';
    default: return false;
  }
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

int fallback_phoneme_count(const std::string& token) {
  std::string t;
  t.reserve(token.size());
  for (char c : token) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  int count = 0;
  size_t i = 0;
  while (i < t.size()) {
    if (is_vowel(t[i])) {
      ++count;  // one per maximal vowel cluster
      while (i < t.size() && is_vowel(t[i])) ++i;
    } else if (i + 1 < t.size() && !is_vowel(t[i + 1]) && is_digraph(t[i], t[i + 1])) {
      ++count;
      i += 2;
    } else {
      ++count;
      ++i;
    }
  }
  return count;
}

PhonemeCounter::PhonemeCounter(std::string language_id,
                               std::unordered_map<std::string, int> lexicon)
    : language_id_(std::move(language_id)) {
  lexicon_.reserve(lexicon.size());
  for (auto& [tok, c] : lexicon) {
    if (c < 0) throw DataError("negative phoneme count for token: " + tok);
    lexicon_[lowercase(tok)] = c;
  }
}

PhonemeCounter PhonemeCounter::from_table_file(const std::string& path,
                                               const std::string& language_id) {
  std::unordered_map<std::string, int> lex;
  int lineno = 0;
  for (const std::string& raw : read_lines(path)) {
    ++lineno;
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected `token<TAB>count`");
    }
    std::string token = trim(line.substr(0, tab));
    std::string count_str = trim(line.substr(tab + 1));
    if (token.empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": empty token");
    }
    char* end = nullptr;
    long c = std::strtol(count_str.c_str(), &end, 10);
    if (end == count_str.c_str() || *end != '\0' || c < 0) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": bad count: " + count_str);
    }
    lex[token] = static_cast<int>(c);
  }
  return PhonemeCounter(language_id, std::move(lex));
}

int PhonemeCounter::count_token(const std::string& token) const {
  auto it = lexicon_.find(lowercase(token));
  if (it != lexicon_.end()) return it->second;
  return fallback_phoneme_count(token);
}

long PhonemeCounter::count(const std::string& text) const {
  long total = 0;
  for (const std::string& tok : tokenize(text)) total += count_token(tok);
  return total;
}

double pcr(long source_count, long target_count) {
  if (source_count <= 0 || target_count <= 0) {
    throw DataError("undefined phoneme count ratio: counts " +
                    std::to_string(source_count) + "/" + std::to_string(target_count));
  }
  return static_cast<double>(source_count) / static_cast<double>(target_count);
}

int reward(const std::string& source, const std::string& candidate, double delta,
           const PhonemeCounter& source_counter, const PhonemeCounter& target_counter) {
  long s = source_counter.count(source);
  long t = target_counter.count(candidate);
  if (s <= 0 || t <= 0) return 0;  // strict rejection of undefined ratios
  return band_contains(pcr(s, t), delta) ? 1 : 0;
}

double pcc_score(const std::vector<std::pair<std::string, std::string>>& pairs,
                 double delta, const PhonemeCounter& source_counter,
                 const PhonemeCounter& target_counter) {
  if (pairs.empty()) throw DataError("pcc_score: empty pair list");
  long compliant = 0;
  for (const auto& [src, hyp] : pairs) {
    compliant += reward(src, hyp, delta, source_counter, target_counter);
  }
  return 100.0 * static_cast<double>(compliant) / static_cast<double>(pairs.size());
}

}  // namespace isonmt
