// tests/test_training.cpp

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

#include <cmath>

#include "isonmt/rng.hpp"
#include "isonmt/training.hpp"
#include "testutil.hpp"

using namespace isonmt;

namespace {

std::vector<const SentencePair*> pair_pointers(const ParallelCorpus& corpus) {
  std::vector<const SentencePair*> out;
  for (const SentencePair& pair : corpus.pairs) out.push_back(&pair);
  return out;
}

}  // namespace

TEST_CASE("cross entropy of a zero-parameter policy is ln(V)") {
  Hyper hyper;
  hyper.layers = 1;
  hyper.d_model = 8;
  hyper.heads = 2;
  hyper.d_ff = 8;
  hyper.max_len = 8;
  const std::vector<std::string> reserved = {"<pad>", "<bos>", "<eos>", "<unk>"};
  const Policy policy(hyper, Vocabulary::from_tokens(reserved),
                      Vocabulary::from_tokens(reserved));
  const ParallelCorpus corpus = testutil::make_corpus({{"<unk> <unk>", "<unk>"}});
  const LossReport report = cross_entropy_loss(policy, corpus);
  // Uniform over 4 tokens at every position.
  CHECK(report.ce == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(report.kl == 0.0);
  CHECK(report.total == doctest::Approx(report.ce));
  CHECK(report.token_count == 2);  // target token + EOS
}

TEST_CASE("kl_consistency_loss: hand value, zero at equality, non-negative") {
  Mat student(1, 2), teacher(1, 2);
  student.at(0, 0) = 0.5;
  student.at(0, 1) = 0.5;
  teacher.at(0, 0) = 0.9;
  teacher.at(0, 1) = 0.1;
  const double kl = kl_consistency_loss(student, teacher);
  // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1) = 0.51083.
  CHECK(kl == doctest::Approx(0.5108).epsilon(1e-3));
  CHECK(kl == doctest::Approx(0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1))
                  .epsilon(1e-12));

  CHECK(kl_consistency_loss(teacher, teacher) == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Mat s(2, 4), t(2, 4);
    for (int r = 0; r < 2; ++r) {
      double szum = 0.0, tzum = 0.0;
      for (int c = 0; c < 4; ++c) {
        s.at(r, c) = 0.01 + rng.uniform_real();
        t.at(r, c) = 0.01 + rng.uniform_real();
        szum += s.at(r, c);
        tzum += t.at(r, c);
      }
      for (int c = 0; c < 4; ++c) {
        s.at(r, c) /= szum;
        t.at(r, c) /= tzum;
      }
    }
    CHECK(kl_consistency_loss(s, t) >= 0.0);
  }

  Mat wrong(2, 2);
  CHECK_THROWS_AS(kl_consistency_loss(student, wrong), TrainingError);
}

TEST_CASE("kl gradient matches ln(p/q) + 1") {
  Mat student(1, 3), teacher(1, 3);
  student.at(0, 0) = 0.2;
  student.at(0, 1) = 0.3;
  student.at(0, 2) = 0.5;
  teacher.at(0, 0) = 0.6;
  teacher.at(0, 1) = 0.3;
  teacher.at(0, 2) = 0.1;
  Mat grad(1, 3);
  kl_consistency_loss(student, teacher, &grad);
  for (int c = 0; c < 3; ++c) {
    CHECK(grad.at(0, c) ==
          doctest::Approx(std::log(student.at(0, c) / teacher.at(0, c)) + 1.0));
  }
}

TEST_CASE("combined loss is exactly ce + alpha * kl") {
  CHECK(combined_loss(1.25, 0.5, 1.0) == 1.75);
  CHECK(combined_loss(1.25, 0.5, 0.0) == 1.25);
  CHECK(combined_loss(2.0, 0.25, 4.0) == 3.0);
}

TEST_CASE("kl distill loss vanishes for an identical teacher and not otherwise") {
  const Policy policy = testutil::micro_policy({"a", "b", "c"}, 31);
  const Policy same = policy;
  const Policy other = testutil::micro_policy({"a", "b", "c"}, 32);
  const ParallelCorpus corpus = testutil::make_corpus({{"a b", "c a"}, {"c", "b"}});
  CHECK(kl_distill_loss(policy, same, corpus) <= 1e-9);
  CHECK(kl_distill_loss(policy, other, corpus) > 1e-6);
}

TEST_CASE("analytic gradients match central finite differences") {
  // Micro model, 64-bit arithmetic, step 1e-5, sampled coordinates.
  Policy policy = testutil::micro_policy({"a", "b", "c"}, 33);
  const Policy teacher = testutil::micro_policy({"a", "b", "c"}, 34);
  const ParallelCorpus corpus =
      testutil::make_corpus({{"a b c", "c b"}, {"b", "a a"}});
  const std::vector<const SentencePair*> batch = pair_pointers(corpus);

  struct Objective {
    LossTerms terms;
    const Policy* teacher;
    double alpha;
  };
  const std::vector<Objective> objectives = {
      {LossTerms::kCeOnly, nullptr, 0.0},
      {LossTerms::kKlOnly, &teacher, 1.0},
      {LossTerms::kCeAndKl, &teacher, 0.7},
  };
  Rng rng(35);
  for (const Objective& objective : objectives) {
    const LossGradients lg =
        loss_with_gradients(policy, batch, objective.alpha, objective.teacher,
                            Precision::kFloat64, objective.terms);
    auto objective_value = [&]() {
      const LossGradients probe =
          loss_with_gradients(policy, batch, objective.alpha, objective.teacher,
                              Precision::kFloat64, objective.terms);
      switch (objective.terms) {
        case LossTerms::kCeOnly:
          return probe.report.ce;
        case LossTerms::kKlOnly:
          return probe.report.kl;
        case LossTerms::kCeAndKl:
          return probe.report.total;
      }
      return 0.0;
    };
    int checked = 0;
    while (checked < 25) {
      const size_t i =
          static_cast<size_t>(rng.uniform_int(0, static_cast<long>(policy.params().size()) - 1));
      const double analytic = lg.grad[i];
      const double numeric =
          testutil::central_difference(&policy.params(), i, objective_value, 1e-5);
      if (std::abs(analytic) < 1e-10 && std::abs(numeric) < 1e-10) continue;
      CHECK(testutil::relative_error(analytic, numeric) <= 1e-3);
      ++checked;
    }
  }
}

TEST_CASE("train reduces cross entropy on a small corpus") {
  Policy policy = testutil::micro_policy({"a", "b", "c"}, 36);
  const ParallelCorpus corpus =
      testutil::make_corpus({{"a b", "a b"}, {"b c", "b c"}, {"c", "c"}, {"a", "a"}});
  const double before = cross_entropy_loss(policy, corpus).ce;
  TrainConfig config;
  config.epochs = 30;
  config.learning_rate = 0.1;
  config.batch_size = 2;
  const std::vector<LossReport> reports = train(&policy, corpus, config);
  REQUIRE(reports.size() == 30);
  const double after = cross_entropy_loss(policy, corpus).ce;
  CHECK(after < before * 0.8);
  CHECK(reports.back().ce < reports.front().ce);
}

TEST_CASE("adam also reduces the loss") {
  Policy policy = testutil::micro_policy({"a", "b"}, 37);
  const ParallelCorpus corpus = testutil::make_corpus({{"a b", "b a"}, {"b", "a"}});
  const double before = cross_entropy_loss(policy, corpus).ce;
  TrainConfig config;
  config.epochs = 20;
  config.learning_rate = 0.01;
  config.optimizer = Optimizer::kAdam;
  train(&policy, corpus, config);
  CHECK(cross_entropy_loss(policy, corpus).ce < before);
}

TEST_CASE("training is deterministic in the seed") {
  const ParallelCorpus corpus =
      testutil::make_corpus({{"a b", "b"}, {"b", "a"}, {"a", "a b"}});
  TrainConfig config;
  config.epochs = 3;
  auto run_once = [&]() {
    Policy policy = testutil::micro_policy({"a", "b"}, 38);
    train(&policy, corpus, config);
    return policy.param_checksum();
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("float32 training stays close to float64 over one step") {
  const ParallelCorpus corpus = testutil::make_corpus({{"a b", "b a"}});
  TrainConfig config;
  config.epochs = 1;
  config.batch_size = 1;
  Policy p64 = testutil::micro_policy({"a", "b"}, 39);
  Policy p32 = testutil::micro_policy({"a", "b"}, 39);
  TrainConfig c32 = config;
  c32.precision = Precision::kFloat32;
  train(&p64, corpus, config);
  train(&p32, corpus, c32);
  double max_diff = 0.0;
  for (size_t i = 0; i < p64.params().size(); ++i) {
    max_diff = std::max(max_diff, std::abs(p64.params()[i] - p32.params()[i]));
  }
  CHECK(max_diff < 1e-4);
  CHECK(max_diff > 0.0);  // the paths really are different arithmetic
}

TEST_CASE("teacher params are untouched by distillation training") {
  Policy student = testutil::micro_policy({"a", "b"}, 40);
  const Policy teacher = testutil::micro_policy({"a", "b"}, 41);
  const std::uint64_t checksum = teacher.param_checksum();
  const ParallelCorpus corpus = testutil::make_corpus({{"a b", "b"}, {"b", "a"}});
  TrainConfig config;
  config.epochs = 2;
  config.alpha = 1.0;
  train(&student, corpus, config, &teacher);
  CHECK(teacher.param_checksum() == checksum);
}

TEST_CASE("distillation requires a compatible teacher") {
  Policy student = testutil::micro_policy({"a", "b"}, 42);
  const Policy mismatched = testutil::micro_policy({"a", "b", "c"}, 42);
  const ParallelCorpus corpus = testutil::make_corpus({{"a", "b"}});
  TrainConfig config;
  CHECK_THROWS_AS(train(&student, corpus, config, &mismatched), TrainingError);
}

TEST_CASE("zero epochs is a no-op; empty corpus and bad config are errors") {
  Policy policy = testutil::micro_policy({"a"}, 43);
  const std::uint64_t checksum = policy.param_checksum();
  const ParallelCorpus corpus = testutil::make_corpus({{"a", "a"}});
  TrainConfig config;
  config.epochs = 0;
  CHECK(train(&policy, corpus, config).empty());
  CHECK(policy.param_checksum() == checksum);

  config.epochs = 1;
  CHECK_THROWS_AS(train(&policy, ParallelCorpus{}, config), TrainingError);
  config.learning_rate = -1.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = TrainConfig{};
  config.batch_size = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("divergence is reported, not silently propagated") {
  Policy policy = testutil::micro_policy({"a", "b"}, 44);
  const ParallelCorpus corpus = testutil::make_corpus({{"a b", "b a"}, {"b", "a"}});
  TrainConfig config;
  config.epochs = 50;
  config.learning_rate = 1e6;  // guaranteed blow-up
  CHECK_THROWS_AS(train(&policy, corpus, config), TrainingError);
}

TEST_CASE("precision and optimizer parsing") {
  CHECK(parse_precision("f64") == Precision::kFloat64);
  CHECK(parse_precision("f32") == Precision::kFloat32);
  CHECK_THROWS_AS(parse_precision("f16"), ConfigError);
  CHECK(parse_optimizer("sgd") == Optimizer::kSgd);
  CHECK(parse_optimizer("adam") == Optimizer::kAdam);
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), ConfigError);
}
