// isonmt/training.hpp

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
// Loss functions and the mini-batch trainer. The cross-entropy objective is
// the mean negative log-likelihood per target token. Distillation adds the
// per-token-mean KL(student || teacher) scaled by alpha; the teacher is
// frozen and its distributions come from teacher-forcing the same batch.
// Gradients flow through a per-batch tape in the configured precision.

#ifndef ISONMT_TRAINING_HPP_
#define ISONMT_TRAINING_HPP_

#include <cstdint>
#include <vector>

#include "isonmt/corpus.hpp"
#include "isonmt/mat.hpp"
#include "isonmt/policy.hpp"

namespace isonmt {

enum class Precision { kFloat64, kFloat32 };
enum class Optimizer { kSgd, kAdam };

Precision parse_precision(const std::string& name);
Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 1;
  int batch_size = 32;
  double alpha = 1.0;
  std::uint64_t seed = 1;
  Precision precision = Precision::kFloat64;
  Optimizer optimizer = Optimizer::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct LossReport {
  double ce = 0.0;
  double kl = 0.0;
  double total = 0.0;  // ce + alpha * kl by construction
  long token_count = 0;
};

/// Which term(s) the gradient covers; reported values are unaffected.
enum class LossTerms { kCeOnly, kKlOnly, kCeAndKl };

struct LossGradients {
  LossReport report;
  std::vector<double> grad;
};

/// Mean per-token cross-entropy of the references under the policy, no
/// gradient. Throws TrainingError on an empty corpus.
LossReport cross_entropy_loss(const Policy& policy, const ParallelCorpus& batch);

/// Mean per-token KL(policy || teacher) under teacher forcing, no gradient.
double kl_distill_loss(const Policy& policy, const Policy& teacher,
                       const ParallelCorpus& batch);

/// Sum over rows of KL(student row || teacher row) for explicit probability
/// matrices; teacher entries are floored at 1e-9 before the log ratio. When
/// grad_wrt_student is given it receives d/d p_s = ln(p_s/p_t) + 1 per entry.
/// Throws TrainingError on a shape mismatch.
double kl_consistency_loss(const Mat& student, const Mat& teacher,
                           Mat* grad_wrt_student = nullptr);

double combined_loss(double ce, double kl, double alpha);

/// One differentiated pass over a batch. The gradient is of the selected
/// objective: CE mean, KL mean, or CE + alpha * KL. A teacher is required
/// for the KL terms and must share the target vocabulary.
LossGradients loss_with_gradients(const Policy& policy,
                                  const std::vector<const SentencePair*>& batch,
                                  double alpha, const Policy* teacher,
                                  Precision precision, LossTerms terms);

/// Mini-batch gradient descent over the corpus; with a teacher, optimizes
/// the combined objective. Batch order reshuffles each epoch from the
/// config seed. Returns one mean-loss report per epoch. Throws
/// TrainingError when the loss stops being finite.
std::vector<LossReport> train(Policy* policy, const ParallelCorpus& corpus,
                              const TrainConfig& config,
                              const Policy* teacher = nullptr);

}  // namespace isonmt

#endif  // ISONMT_TRAINING_HPP_
