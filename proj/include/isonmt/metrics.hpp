// isonmt/metrics.hpp

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
// Corpus-level translation quality metrics and evaluation-report assembly.
// BLEU is the 4-gram corpus score with modified precision clipping, brevity
// penalty, and exponential smoothing by default. chrF uses character
// n-grams of order 1..6 with beta=2, whitespace removed, averaging
// precision and recall over the orders observed in the corpus. Compliance
// percentages are always computed between SOURCE and HYPOTHESIS.

#ifndef ISONMT_METRICS_HPP_
#define ISONMT_METRICS_HPP_

#include <string>
#include <vector>

#include "isonmt/corpus.hpp"
#include "isonmt/phonology.hpp"
#include "isonmt/policy.hpp"

namespace isonmt {

enum class BleuSmoothing { kExp, kNone };

/// Corpus BLEU in [0,100]. Throws DataError on length mismatch or empty input.
double bleu(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references,
            BleuSmoothing smoothing = BleuSmoothing::kExp);

/// Corpus chrF in [0,100]. Throws DataError on length mismatch or empty input.
double chrf(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references);

struct EvaluationReport {
  std::string model_id;
  std::string test_set_id;
  double bleu = 0.0;
  double chrf = 0.0;
  double pcc_02 = 0.0;
  double pcc_01 = 0.0;
  long n_sentences = 0;
};

/// Decodes every source of the test set and scores the hypotheses. When
/// hypotheses_out is given it receives the decoded sentences in corpus
/// order. Throws DataError on an empty test set.
EvaluationReport evaluate(const Policy& policy, const ParallelCorpus& test_set,
                          const PhonemeCounter& src_counter,
                          const PhonemeCounter& tgt_counter, const DecodeConfig& decode,
                          const std::string& model_id, const std::string& test_set_id,
                          std::vector<std::string>* hypotheses_out = nullptr);

/// One JSON object per report; null placeholders mark score columns that
/// only external tooling can fill.
std::string report_json(const EvaluationReport& report);

/// Fixed-width table over any number of reports.
std::string report_table(const std::vector<EvaluationReport>& reports);

}  // namespace isonmt

#endif  // ISONMT_METRICS_HPP_
