// src/training.cpp

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

#include "isonmt/training.hpp"

#include <cmath>

#include "isonmt/rng.hpp"
#include "isonmt/tape.hpp"

namespace isonmt {

Precision parse_precision(const std::string& name) {
  if (name == "f64") return Precision::kFloat64;
  if (name == "f32") return Precision::kFloat32;
  throw ConfigError("unknown precision: " + name + " (expected f64 or f32)");
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  throw ConfigError("unknown optimizer: " + name + " (expected sgd or adam)");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
  if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0 ||
      adam_eps <= 0.0) {
    throw ConfigError("adam parameters out of range");
  }
}

namespace {

struct EncodedPair {
  std::vector<int> src;
  std::vector<int> tgt_in;
  std::vector<int> targets;
};

EncodedPair encode_pair(const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                        const SentencePair& pair) {
  EncodedPair enc;
  enc.src = src_vocab.encode(pair.source);
  enc.targets = tgt_vocab.encode(pair.target);
  enc.tgt_in.reserve(enc.targets.size());
  enc.tgt_in.push_back(Vocabulary::kBos);
  enc.tgt_in.insert(enc.tgt_in.end(), enc.targets.begin(), enc.targets.end() - 1);
  return enc;
}

/// Teacher-forced next-token probabilities [len(tgt_in), V], plain path.
Mat forced_probs(const Policy& policy, const std::vector<int>& src,
                 const std::vector<int>& tgt_in) {
  const Mat enc = encode_sequence(policy.dims(), policy.layout(), policy.params(), src);
  Mat logits = decoder_logits(policy.dims(), policy.layout(), policy.params(), enc, tgt_in);
  for (int r = 0; r < logits.rows; ++r) {
    double* row = logits.row(r);
    double zmax = row[0];
    for (int c = 1; c < logits.cols; ++c) zmax = std::max(zmax, row[c]);
    double total = 0.0;
    for (int c = 0; c < logits.cols; ++c) {
      row[c] = std::exp(row[c] - zmax);
      total += row[c];
    }
    for (int c = 0; c < logits.cols; ++c) row[c] /= total;
  }
  return logits;
}

void require_teacher_compatible(const Policy& policy, const Policy* teacher) {
  if (teacher == nullptr) {
    throw TrainingError("the KL objective needs a teacher policy");
  }
  if (!(teacher->tgt_vocab() == policy.tgt_vocab())) {
    throw TrainingError("teacher must share the student's target vocabulary");
  }
}

template <typename S>
LossGradients loss_with_gradients_impl(const Policy& policy,
                                       const std::vector<const SentencePair*>& batch,
                                       double alpha, const Policy* teacher,
                                       LossTerms terms) {
  if (batch.empty()) throw TrainingError("empty batch");
  if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
  const bool with_kl = terms != LossTerms::kCeOnly;
  if (with_kl) require_teacher_compatible(policy, teacher);

  TapeT<S> tape;
  TapeTransformer<S> net(policy.dims(), policy.layout(), policy.params(), &tape);
  double ce_sum = 0.0;
  double kl_sum = 0.0;
  long tokens = 0;
  std::vector<int> ce_nodes;
  std::vector<int> kl_nodes;
  for (const SentencePair* pair : batch) {
    const EncodedPair enc = encode_pair(policy.src_vocab(), policy.tgt_vocab(), *pair);
    const int enc_out = net.encode(enc.src);
    const int logits = net.decoder_logits(enc_out, enc.tgt_in);
    const int ce_node = tape.cross_entropy_sum(logits, enc.targets);
    ce_sum += static_cast<double>(tape.value(ce_node).at(0, 0));
    ce_nodes.push_back(ce_node);
    tokens += static_cast<long>(enc.targets.size());
    if (with_kl) {
      const EncodedPair tenc =
          encode_pair(teacher->src_vocab(), teacher->tgt_vocab(), *pair);
      const Mat teacher_probs = forced_probs(*teacher, tenc.src, tenc.tgt_in);
      const int kl_node = tape.kl_sum_vs_const(logits, cast_mat<S>(teacher_probs));
      kl_sum += static_cast<double>(tape.value(kl_node).at(0, 0));
      kl_nodes.push_back(kl_node);
    }
  }

  LossGradients out;
  out.report.ce = ce_sum / static_cast<double>(tokens);
  out.report.kl = with_kl ? kl_sum / static_cast<double>(tokens) : 0.0;
  out.report.total = combined_loss(out.report.ce, out.report.kl, alpha);
  out.report.token_count = tokens;

  std::vector<std::pair<int, S>> roots;
  const S inv_tokens = static_cast<S>(1.0 / static_cast<double>(tokens));
  if (terms != LossTerms::kKlOnly) {
    for (int node : ce_nodes) roots.emplace_back(node, inv_tokens);
  }
  if (with_kl) {
    const S kl_seed = terms == LossTerms::kKlOnly
                          ? inv_tokens
                          : static_cast<S>(alpha) * inv_tokens;
    for (int node : kl_nodes) roots.emplace_back(node, kl_seed);
  }
  tape.backward(roots);
  out.grad.assign(policy.params().size(), 0.0);
  net.accumulate_param_grads(&out.grad);
  return out;
}

}  // namespace

LossReport cross_entropy_loss(const Policy& policy, const ParallelCorpus& batch) {
  if (batch.empty()) throw TrainingError("cross_entropy_loss: empty corpus");
  double ce_sum = 0.0;
  long tokens = 0;
  for (const SentencePair& pair : batch.pairs) {
    const EncodedPair enc = encode_pair(policy.src_vocab(), policy.tgt_vocab(), pair);
    const Mat enc_out =
        encode_sequence(policy.dims(), policy.layout(), policy.params(), enc.src);
    const Mat logits =
        decoder_logits(policy.dims(), policy.layout(), policy.params(), enc_out, enc.tgt_in);
    for (int r = 0; r < logits.rows; ++r) {
      const double* row = logits.row(r);
      double zmax = row[0];
      for (int c = 1; c < logits.cols; ++c) zmax = std::max(zmax, row[c]);
      double total = 0.0;
      for (int c = 0; c < logits.cols; ++c) total += std::exp(row[c] - zmax);
      const int t = enc.targets[static_cast<size_t>(r)];
      ce_sum += std::log(total) + zmax - row[t];
    }
    tokens += static_cast<long>(enc.targets.size());
  }
  LossReport report;
  report.ce = ce_sum / static_cast<double>(tokens);
  report.kl = 0.0;
  report.total = report.ce;
  report.token_count = tokens;
  return report;
}

double kl_distill_loss(const Policy& policy, const Policy& teacher,
                       const ParallelCorpus& batch) {
  if (batch.empty()) throw TrainingError("kl_distill_loss: empty corpus");
  require_teacher_compatible(policy, &teacher);
  double kl_sum = 0.0;
  long tokens = 0;
  for (const SentencePair& pair : batch.pairs) {
    const EncodedPair enc = encode_pair(policy.src_vocab(), policy.tgt_vocab(), pair);
    const EncodedPair tenc = encode_pair(teacher.src_vocab(), teacher.tgt_vocab(), pair);
    const Mat student = forced_probs(policy, enc.src, enc.tgt_in);
    const Mat teacher_probs = forced_probs(teacher, tenc.src, tenc.tgt_in);
    kl_sum += kl_consistency_loss(student, teacher_probs);
    tokens += static_cast<long>(enc.targets.size());
  }
  return kl_sum / static_cast<double>(tokens);
}

double kl_consistency_loss(const Mat& student, const Mat& teacher, Mat* grad_wrt_student) {
  if (!student.same_shape(teacher)) {
    throw TrainingError("kl_consistency_loss: distribution shapes differ");
  }
  const double floor = 1e-9;
  if (grad_wrt_student != nullptr) *grad_wrt_student = Mat(student.rows, student.cols);
  double total = 0.0;
  for (int r = 0; r < student.rows; ++r) {
    for (int c = 0; c < student.cols; ++c) {
      const double p = student.at(r, c);
      const double q = std::max(teacher.at(r, c), floor);
      if (p > 0.0) {
        const double log_ratio = std::log(p / q);
        total += p * log_ratio;
        if (grad_wrt_student != nullptr) grad_wrt_student->at(r, c) = log_ratio + 1.0;
      }
    }
  }
  return total;
}

double combined_loss(double ce, double kl, double alpha) {
  if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
  return ce + alpha * kl;
}

LossGradients loss_with_gradients(const Policy& policy,
                                  const std::vector<const SentencePair*>& batch,
                                  double alpha, const Policy* teacher,
                                  Precision precision, LossTerms terms) {
  if (precision == Precision::kFloat64) {
    return loss_with_gradients_impl<double>(policy, batch, alpha, teacher, terms);
  }
  return loss_with_gradients_impl<float>(policy, batch, alpha, teacher, terms);
}

std::vector<LossReport> train(Policy* policy, const ParallelCorpus& corpus,
                              const TrainConfig& config, const Policy* teacher) {
  config.validate();
  if (corpus.empty()) throw TrainingError("train: empty corpus");
  if (teacher != nullptr) require_teacher_compatible(*policy, teacher);

  const LossTerms terms = teacher != nullptr ? LossTerms::kCeAndKl : LossTerms::kCeOnly;
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(config.seed);

  std::vector<double>& params = policy->params();
  std::vector<double> adam_m, adam_v;
  long adam_step = 0;
  if (config.optimizer == Optimizer::kAdam) {
    adam_m.assign(params.size(), 0.0);
    adam_v.assign(params.size(), 0.0);
  }

  std::vector<LossReport> reports;
  reports.reserve(static_cast<size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double ce_weighted = 0.0;
    double kl_weighted = 0.0;
    long tokens = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      std::vector<const SentencePair*> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(&corpus.pairs[order[i]]);

      const LossGradients lg =
          loss_with_gradients(*policy, batch, config.alpha, teacher, config.precision, terms);
      if (!std::isfinite(lg.report.total)) {
        throw TrainingError("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch + 1));
      }
      if (config.optimizer == Optimizer::kSgd) {
        for (size_t i = 0; i < params.size(); ++i) {
          params[i] -= config.learning_rate * lg.grad[i];
        }
      } else {
        ++adam_step;
        const double correction1 = 1.0 - std::pow(config.adam_beta1, adam_step);
        const double correction2 = 1.0 - std::pow(config.adam_beta2, adam_step);
        for (size_t i = 0; i < params.size(); ++i) {
          adam_m[i] = config.adam_beta1 * adam_m[i] + (1.0 - config.adam_beta1) * lg.grad[i];
          adam_v[i] =
              config.adam_beta2 * adam_v[i] + (1.0 - config.adam_beta2) * lg.grad[i] * lg.grad[i];
          params[i] -= config.learning_rate * (adam_m[i] / correction1) /
                       (std::sqrt(adam_v[i] / correction2) + config.adam_eps);
        }
      }
      ce_weighted += lg.report.ce * static_cast<double>(lg.report.token_count);
      kl_weighted += lg.report.kl * static_cast<double>(lg.report.token_count);
      tokens += lg.report.token_count;
    }
    LossReport report;
    report.ce = ce_weighted / static_cast<double>(tokens);
    report.kl = kl_weighted / static_cast<double>(tokens);
    report.total = combined_loss(report.ce, report.kl, config.alpha);
    report.token_count = tokens;
    reports.push_back(report);
  }
  return reports;
}

}  // namespace isonmt
