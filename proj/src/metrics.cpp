// src/metrics.cpp

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

#include "isonmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

namespace isonmt {

namespace {

constexpr int kBleuOrder = 4;
constexpr int kChrfOrder = 6;
constexpr double kChrfBeta = 2.0;

void check_corpus_shape(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references) {
  if (hypotheses.size() != references.size()) {
    throw DataError("metric inputs differ in length: " + std::to_string(hypotheses.size()) +
                    " hypotheses vs " + std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw DataError("metric inputs are empty");
}

std::map<std::vector<std::string>, long> word_ngrams(const std::vector<std::string>& tokens,
                                                     int n) {
  std::map<std::vector<std::string>, long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                      tokens.begin() + static_cast<long>(i) + n)];
  }
  return counts;
}

}  // namespace

double bleu(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references, BleuSmoothing smoothing) {
  check_corpus_shape(hypotheses, references);
  long correct[kBleuOrder] = {0, 0, 0, 0};
  long total[kBleuOrder] = {0, 0, 0, 0};
  long hyp_len = 0;
  long ref_len = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    const std::vector<std::string> hyp = tokenize(hypotheses[i]);
    const std::vector<std::string> ref = tokenize(references[i]);
    hyp_len += static_cast<long>(hyp.size());
    ref_len += static_cast<long>(ref.size());
    for (int n = 1; n <= kBleuOrder; ++n) {
      const auto hyp_counts = word_ngrams(hyp, n);
      if (hyp_counts.empty()) continue;
      const auto ref_counts = word_ngrams(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) correct[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_sum = 0.0;
  double smooth = 1.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    if (total[n] == 0) return 0.0;
    double precision = 0.0;
    if (correct[n] > 0) {
      precision = 100.0 * static_cast<double>(correct[n]) / static_cast<double>(total[n]);
    } else if (smoothing == BleuSmoothing::kExp) {
      smooth *= 2.0;
      precision = 100.0 / (smooth * static_cast<double>(total[n]));
    } else {
      return 0.0;
    }
    log_sum += std::log(precision);
  }
  const double brevity =
      hyp_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return brevity * std::exp(log_sum / kBleuOrder);
}

namespace {

std::string squash_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\f' && c != '\v') {
      out.push_back(c);
    }
  }
  return out;
}

std::map<std::string, long> char_ngrams(const std::string& chars, int n) {
  std::map<std::string, long> counts;
  if (static_cast<int>(chars.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= chars.size(); ++i) {
    ++counts[chars.substr(i, static_cast<size_t>(n))];
  }
  return counts;
}

}  // namespace

double chrf(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references) {
  check_corpus_shape(hypotheses, references);
  long n_hyp[kChrfOrder] = {0};
  long n_ref[kChrfOrder] = {0};
  long n_match[kChrfOrder] = {0};
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    const std::string hyp = squash_whitespace(hypotheses[i]);
    const std::string ref = squash_whitespace(references[i]);
    for (int n = 1; n <= kChrfOrder; ++n) {
      const auto hyp_counts = char_ngrams(hyp, n);
      const auto ref_counts = char_ngrams(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        n_hyp[n - 1] += count;
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) n_match[n - 1] += std::min(count, it->second);
      }
      for (const auto& [gram, count] : ref_counts) n_ref[n - 1] += count;
    }
  }

  // Orders with n-grams on both sides are averaged; the rest carry no signal
  // (corpora shorter than the maximum order must still be able to reach 100).
  double prec_sum = 0.0;
  double rec_sum = 0.0;
  int active = 0;
  for (int n = 0; n < kChrfOrder; ++n) {
    if (n_hyp[n] == 0 || n_ref[n] == 0) continue;
    prec_sum += static_cast<double>(n_match[n]) / static_cast<double>(n_hyp[n]);
    rec_sum += static_cast<double>(n_match[n]) / static_cast<double>(n_ref[n]);
    ++active;
  }
  if (active == 0) return 0.0;
  const double precision = prec_sum / active;
  const double recall = rec_sum / active;
  const double beta2 = kChrfBeta * kChrfBeta;
  const double denom = beta2 * precision + recall;
  if (denom <= 0.0) return 0.0;
  return 100.0 * (1.0 + beta2) * precision * recall / denom;
}

EvaluationReport evaluate(const Policy& policy, const ParallelCorpus& test_set,
                          const PhonemeCounter& src_counter,
                          const PhonemeCounter& tgt_counter, const DecodeConfig& decode,
                          const std::string& model_id, const std::string& test_set_id,
                          std::vector<std::string>* hypotheses_out) {
  if (test_set.empty()) throw DataError("evaluate: empty test set");
  std::vector<std::string> hypotheses;
  std::vector<std::string> references;
  std::vector<std::pair<std::string, std::string>> source_vs_hyp;
  hypotheses.reserve(test_set.size());
  references.reserve(test_set.size());
  source_vs_hyp.reserve(test_set.size());
  for (const SentencePair& pair : test_set.pairs) {
    const GenerationResult gen = policy.generate(pair.source, decode);
    hypotheses.push_back(join_tokens(gen.tokens));
    references.push_back(pair.target_text());
    source_vs_hyp.emplace_back(pair.source_text(), hypotheses.back());
  }
  EvaluationReport report;
  report.model_id = model_id;
  report.test_set_id = test_set_id;
  report.bleu = bleu(hypotheses, references, BleuSmoothing::kExp);
  report.chrf = chrf(hypotheses, references);
  report.pcc_02 = pcc_score(source_vs_hyp, 0.2, src_counter, tgt_counter);
  report.pcc_01 = pcc_score(source_vs_hyp, 0.1, src_counter, tgt_counter);
  report.n_sentences = static_cast<long>(test_set.size());
  if (hypotheses_out != nullptr) *hypotheses_out = std::move(hypotheses);
  return report;
}

std::string report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["model_id"] = report.model_id;
  j["test_set_id"] = report.test_set_id;
  j["bleu"] = report.bleu;
  j["chrf"] = report.chrf;
  j["pcc_02"] = report.pcc_02;
  j["pcc_01"] = report.pcc_01;
  j["n_sentences"] = report.n_sentences;
  j["bleurt"] = nullptr;  // reserved for externally computed scores
  j["comet"] = nullptr;
  return j.dump();
}

std::string report_table(const std::vector<EvaluationReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "model" << std::setw(16) << "test_set"
      << std::right << std::setw(8) << "BLEU" << std::setw(8) << "chrF" << std::setw(9)
      << "PCC_0.2" << std::setw(9) << "PCC_0.1" << std::setw(7) << "n" << '\n';
  out << std::string(81, '-') << '\n';
  out << std::fixed << std::setprecision(2);
  for (const EvaluationReport& r : reports) {
    out << std::left << std::setw(24) << r.model_id << std::setw(16) << r.test_set_id
        << std::right << std::setw(8) << r.bleu << std::setw(8) << r.chrf << std::setw(9)
        << r.pcc_02 << std::setw(9) << r.pcc_01 << std::setw(7) << r.n_sentences << '\n';
  }
  return out.str();
}

}  // namespace isonmt
