// isonmt/phonology.hpp

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
// Phoneme counting, the phoneme-count ratio between a source sentence and a
// candidate translation, the binary in-band reward derived from it, and the
// compliance percentage used as an evaluation metric. A translation earns
// reward 1 exactly when its ratio lies in the closed band [1-delta, 1+delta];
// pairs where either side counts to zero phonemes are always rejected.

#ifndef ISONMT_PHONOLOGY_HPP_
#define ISONMT_PHONOLOGY_HPP_

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "isonmt/common.hpp"

namespace isonmt {

/// Rule-based phoneme count for a token with no lexicon entry: one phoneme
/// per maximal vowel-letter cluster (a,e,i,o,u) plus one per consonant
/// letter, where the digraphs th, sh, ch, ph, ng, ck, wh count as a single
/// consonant. Case-insensitive; non-letter characters are ignored.
int fallback_phoneme_count(const std::string& token);

// Token -> phoneme count for one language. Lookup is case-insensitive;
// out-of-lexicon tokens fall back to the letter rule above. Counting is a
// pure function: no state, no randomness.
class PhonemeCounter {
 public:
  PhonemeCounter() = default;
  PhonemeCounter(std::string language_id,
                 std::unordered_map<std::string, int> lexicon);

  /// Loads a UTF-8 tab-separated `token<TAB>count` file; `#` comments and
  /// blank lines are ignored.
  static PhonemeCounter from_table_file(const std::string& path,
                                        const std::string& language_id);

  const std::string& language_id() const { return language_id_; }
  size_t lexicon_size() const { return lexicon_.size(); }

  int count_token(const std::string& token) const;

  /// Sum of per-token counts over whitespace tokens; empty text counts 0.
  long count(const std::string& text) const;

 private:
  std::string language_id_;
  std::unordered_map<std::string, int> lexicon_;
};

/// Phoneme count ratio source_count / target_count.
/// Throws DataError when either count is zero (undefined ratio); callers in
/// the reward path treat such pairs as zero-reward instead of calling this.
double pcr(long source_count, long target_count);

/// Closed-interval band membership test shared by reward, filtering and the
/// compliance score: pcr in [1-delta, 1+delta].
inline bool band_contains(double pcr_value, double delta) {
  return pcr_value >= 1.0 - delta && pcr_value <= 1.0 + delta;
}

// Per-pair annotation under a fixed delta.
struct RewardRecord {
  long pair_id = 0;
  double pcr = 0.0;  // meaningful only when reward could be computed
  int reward = 0;    // 1 iff pcr in [1-delta, 1+delta]
  double delta = 0.0;
};

/// Binary terminal reward: 1 iff the phoneme count ratio between source and
/// candidate lies in the closed band. Degenerate zero counts give reward 0.
int reward(const std::string& source, const std::string& candidate, double delta,
           const PhonemeCounter& source_counter, const PhonemeCounter& target_counter);

/// Percentage in [0,100] of pairs whose ratio lies in the closed band.
/// Pairs with a zero phoneme count on either side are non-compliant.
/// Throws DataError on an empty input.
double pcc_score(const std::vector<std::pair<std::string, std::string>>& pairs,
                 double delta, const PhonemeCounter& source_counter,
                 const PhonemeCounter& target_counter);

}  // namespace isonmt

#endif  // ISONMT_PHONOLOGY_HPP_
