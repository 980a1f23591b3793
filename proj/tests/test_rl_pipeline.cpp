// tests/test_rl_pipeline.cpp

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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "isonmt/rl_pipeline.hpp"
#include "isonmt/rng.hpp"
#include "testutil.hpp"

using namespace isonmt;

namespace {

/// PhonemeCounter whose count is the token count (every token maps to 1).
PhonemeCounter unit_counter(const std::vector<std::string>& tokens) {
  std::unordered_map<std::string, int> lexicon;
  for (const std::string& token : tokens) lexicon[token] = 1;
  return PhonemeCounter("unit", lexicon);
}

/// Corpus of single-token-source pairs with the given per-pair annotations
/// forced through integer-count lexicons: source counts 100, target count
/// round(100/ratio) approximates poorly, so instead targets carry exact
/// integer counts and the ratio is count_src / count_tgt.
struct AnnotatedCorpus {
  ParallelCorpus dg;
  std::vector<std::optional<double>> pcrs;
};

AnnotatedCorpus synth_annotations(int n, Rng* rng) {
  AnnotatedCorpus out;
  for (int i = 0; i < n; ++i) {
    SentencePair pair;
    pair.source = {"s" + std::to_string(i)};
    pair.target = {"t" + std::to_string(i)};
    pair.origin = Origin::kGenerated;
    out.dg.pairs.push_back(pair);
    if (rng->uniform_real() < 0.15) {
      out.pcrs.push_back(std::nullopt);
    } else {
      out.pcrs.push_back(rng->uniform_real(0.4, 1.8));
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("delta schedule validation") {
  auto schedule = [](std::vector<double> values) {
    DeltaSchedule s;
    s.values = std::move(values);
    return s;
  };
  CHECK_NOTHROW(schedule({0.3, 0.2, 0.1}).validate());
  CHECK_NOTHROW(schedule({0.5}).validate());
  CHECK_THROWS_AS(schedule({}).validate(), ConfigError);
  CHECK_THROWS_AS(schedule({0.3, 0.3}).validate(), ConfigError);   // not strict
  CHECK_THROWS_AS(schedule({0.2, 0.3}).validate(), ConfigError);   // increasing
  CHECK_THROWS_AS(schedule({1.0, 0.5}).validate(), ConfigError);   // 1 excluded
  CHECK_THROWS_AS(schedule({0.5, 0.0}).validate(), ConfigError);   // 0 excluded
  CHECK_THROWS_AS(schedule({0.5, -0.1}).validate(), ConfigError);
}

TEST_CASE("rl config validation") {
  RlConfig config;
  config.eval_set = testutil::make_corpus({{"a", "a"}});
  CHECK_NOTHROW(config.validate());
  RlConfig bad = config;
  bad.generation_steps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.min_filtered = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.deltas.values = {0.2, 0.3};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("annotate: ratio per pair, nullopt for zero counts") {
  ParallelCorpus dg = testutil::make_corpus({
      {"s10", "t8"},   // 10 / 8 = 1.25
      {"s10", "t10"},  // 1.0
      {"s10", "zero"}, // target count 0 -> undefined
      {"s10", ""},     // empty target -> undefined
  });
  std::unordered_map<std::string, int> src_lex = {{"s10", 10}};
  std::unordered_map<std::string, int> tgt_lex = {{"t8", 8}, {"t10", 10}, {"zero", 0}};
  const PhonemeCounter sc("src", src_lex);
  const PhonemeCounter tc("tgt", tgt_lex);
  const std::vector<std::optional<double>> pcrs = annotate(dg, sc, tc);
  REQUIRE(pcrs.size() == 4);
  CHECK(pcrs[0].value() == doctest::Approx(1.25));
  CHECK(pcrs[1].value() == doctest::Approx(1.0));
  CHECK_FALSE(pcrs[2].has_value());
  CHECK_FALSE(pcrs[3].has_value());
}

TEST_CASE("filter: every retained pair is in band, none undefined, order kept") {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const AnnotatedCorpus ac = synth_annotations(60, &rng);
    for (const double delta : {0.3, 0.2, 0.1, 0.05}) {
      const ParallelCorpus kept = filter(ac.dg, ac.pcrs, delta);
      // Independent scan: recompute membership for every retained pair.
      std::set<std::string> kept_sources;
      for (const SentencePair& pair : kept.pairs) kept_sources.insert(pair.source_text());
      long expected = 0;
      for (size_t i = 0; i < ac.dg.pairs.size(); ++i) {
        const bool in_band = ac.pcrs[i].has_value() &&
                             ac.pcrs[i].value() >= 1.0 - delta &&
                             ac.pcrs[i].value() <= 1.0 + delta;
        if (in_band) ++expected;
        CHECK(kept_sources.count(ac.dg.pairs[i].source_text()) == (in_band ? 1u : 0u));
      }
      CHECK(static_cast<long>(kept.size()) == expected);
      // Order preservation: retained sources appear in original order.
      std::vector<std::string> original_order, kept_order;
      for (const SentencePair& pair : ac.dg.pairs) {
        if (kept_sources.count(pair.source_text())) original_order.push_back(pair.source_text());
      }
      for (const SentencePair& pair : kept.pairs) kept_order.push_back(pair.source_text());
      CHECK(original_order == kept_order);
    }
  }
}

TEST_CASE("filter: tighter bands are nested subsets on the same annotations") {
  Rng rng(72);
  const AnnotatedCorpus ac = synth_annotations(120, &rng);
  const ParallelCorpus wide = filter(ac.dg, ac.pcrs, 0.3);
  const ParallelCorpus mid = filter(ac.dg, ac.pcrs, 0.2);
  const ParallelCorpus tight = filter(ac.dg, ac.pcrs, 0.1);
  CHECK(tight.size() <= mid.size());
  CHECK(mid.size() <= wide.size());
  auto sources = [](const ParallelCorpus& corpus) {
    std::set<std::string> out;
    for (const SentencePair& pair : corpus.pairs) out.insert(pair.source_text());
    return out;
  };
  const std::set<std::string> w = sources(wide), m = sources(mid), t = sources(tight);
  CHECK(std::includes(w.begin(), w.end(), m.begin(), m.end()));
  CHECK(std::includes(m.begin(), m.end(), t.begin(), t.end()));
}

TEST_CASE("filter: band boundaries are inclusive") {
  ParallelCorpus dg = testutil::make_corpus({{"lo", "x"}, {"hi", "x"}, {"out", "x"}});
  const std::vector<std::optional<double>> pcrs = {0.8, 1.2, 1.2000001};
  const ParallelCorpus kept = filter(dg, pcrs, 0.2);
  REQUIRE(kept.size() == 2);
  CHECK(kept.pairs[0].source_text() == "lo");
  CHECK(kept.pairs[1].source_text() == "hi");
}

TEST_CASE("filter: argument validation") {
  ParallelCorpus dg = testutil::make_corpus({{"a", "b"}});
  const std::vector<std::optional<double>> one = {1.0};
  CHECK_THROWS_AS(filter(dg, one, 0.0), ConfigError);
  CHECK_THROWS_AS(filter(dg, one, 1.0), ConfigError);
  CHECK_THROWS_AS(filter(dg, one, -0.2), ConfigError);
  const std::vector<std::optional<double>> two = {1.0, 1.0};
  CHECK_THROWS_AS(filter(dg, two, 0.2), DataError);
}

TEST_CASE("generation_step: one hypothesis per source, generated origin") {
  const Policy policy = testutil::micro_policy({"a", "b", "c"}, 73);
  const ParallelCorpus corpus =
      testutil::make_corpus({{"a b", "b a"}, {"c", "c c"}, {"b c a", "a"}});
  DecodeConfig decode;
  long dropped = -1;
  const ParallelCorpus dg = generation_step(policy, corpus, decode, &dropped);
  CHECK(static_cast<long>(dg.size()) + dropped == static_cast<long>(corpus.size()));
  CHECK(dropped >= 0);
  for (size_t i = 0; i < dg.size(); ++i) {
    CHECK(dg.pairs[i].origin == Origin::kGenerated);
    CHECK_FALSE(dg.pairs[i].target.empty());
  }
  // Sources of the surviving pairs come from the corpus in order.
  std::vector<std::string> corpus_sources;
  for (const SentencePair& pair : corpus.pairs) corpus_sources.push_back(pair.source_text());
  size_t cursor = 0;
  for (const SentencePair& pair : dg.pairs) {
    while (cursor < corpus_sources.size() && corpus_sources[cursor] != pair.source_text()) {
      ++cursor;
    }
    CHECK(cursor < corpus_sources.size());
    ++cursor;
  }
}

TEST_CASE("run dir: lock is exclusive and released on destruction") {
  testutil::TempDir tmp;
  const std::string dir = tmp.file("run");
  {
    RunDir first(dir);
    CHECK(std::filesystem::exists(dir + "/lock"));
    CHECK_THROWS_AS(RunDir{dir}, Error);
    CHECK(first.checkpoint_path(0) == dir + "/checkpoints/step_0.ckpt");
    CHECK(first.checkpoint_path(10) == dir + "/checkpoints/step_10.ckpt");
    CHECK(first.trace_path() == dir + "/trace.jsonl");
    CHECK(first.manifest_path() == dir + "/manifest.json");
  }
  CHECK_FALSE(std::filesystem::exists(dir + "/lock"));
  CHECK_NOTHROW(RunDir{dir});  // relockable once released
}

TEST_CASE("trace record renders one deterministic json line") {
  TraceRecord record;
  record.step = 0;
  record.phase = "base";
  record.delta = std::nullopt;
  record.dg_size = 0;
  record.df_size = 0;
  record.bleu = 21.5;
  record.chrf = 44.25;
  record.pcc_02 = 23.0;
  record.pcc_01 = 11.5;
  record.skipped = false;
  CHECK(record.to_json() ==
        "{\"step\":0,\"phase\":\"base\",\"delta\":null,\"dg_size\":0,\"df_size\":0,"
        "\"bleu\":21.5,\"chrf\":44.25,\"pcc_02\":23.0,\"pcc_01\":11.5,\"skipped\":false}");

  record.step = 4;
  record.phase = "rl";
  record.delta = 0.2;
  record.dg_size = 600;
  record.df_size = 41;
  record.skipped = true;
  const std::string line = record.to_json();
  CHECK(line.find("\"delta\":0.2") != std::string::npos);
  CHECK(line.find("\"skipped\":true") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("pipeline: record layout, checkpoints, and teacher freezing") {
  // Tiny but real end-to-end run. Unit counters make every PCR exactly
  // len(src)/len(hyp), so generated pairs are frequently in band.
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  ParallelCorpus corpus;
  Rng rng(74);
  for (int i = 0; i < 12; ++i) {
    const int len = static_cast<int>(rng.uniform_int(2, 4));
    SentencePair pair;
    for (int k = 0; k < len; ++k) {
      const std::string tok = vocab[static_cast<size_t>(rng.uniform_int(0, 3))];
      pair.source.push_back(tok);
      pair.target.push_back(tok);
    }
    pair.origin = Origin::kReference;
    corpus.pairs.push_back(pair);
  }

  RlConfig config;
  config.hyper.layers = 1;
  config.hyper.d_model = 8;
  config.hyper.heads = 2;
  config.hyper.d_ff = 8;
  config.hyper.max_len = 8;
  config.generation_steps = 2;
  config.deltas.values = {0.3, 0.2};
  config.st_flag = true;
  config.min_filtered = 1;
  config.init_seed = 5;
  config.base_train.epochs = 2;
  config.base_train.learning_rate = 0.05;
  config.finetune_train.epochs = 1;
  config.distill_train.epochs = 1;
  config.eval_set = corpus;
  config.src_counter = unit_counter(vocab);
  config.tgt_counter = unit_counter(vocab);

  testutil::TempDir tmp;
  std::ostringstream log;
  {
    RunDir run_dir(tmp.file("run"));
    const RlResult result = run(config, corpus, &run_dir, &log);

    // 1 base + G*F rl + 1 distill records.
    REQUIRE(result.trace.records.size() == 1 + 2 * 2 + 1);
    CHECK(result.trace.records[0].phase == "base");
    CHECK(result.trace.records[0].step == 0);
    CHECK_FALSE(result.trace.records[0].delta.has_value());
    for (int i = 1; i <= 4; ++i) {
      CHECK(result.trace.records[static_cast<size_t>(i)].phase == "rl");
      CHECK(result.trace.records[static_cast<size_t>(i)].step == i);
    }
    CHECK(result.trace.records[1].delta.value() == 0.3);
    CHECK(result.trace.records[2].delta.value() == 0.2);
    CHECK(result.trace.records[3].delta.value() == 0.3);
    CHECK(result.trace.records[4].delta.value() == 0.2);
    CHECK(result.trace.records[5].phase == "distill");
    CHECK(result.trace.records[5].step == 5);
    CHECK(result.trace.records[5].delta.value() == 0.2);

    // A checkpoint exists for every record and loads back bit-exact.
    for (const TraceRecord& record : result.trace.records) {
      const std::string path = run_dir.checkpoint_path(record.step);
      REQUIRE(std::filesystem::exists(path));
    }
    const Policy last = Policy::load_checkpoint(run_dir.checkpoint_path(5));
    CHECK(last.param_checksum() == result.policy.param_checksum());

    // Trace file has one json line per record, matching to_json().
    std::ifstream trace_in(run_dir.trace_path());
    std::string line;
    size_t i = 0;
    while (std::getline(trace_in, line)) {
      REQUIRE(i < result.trace.records.size());
      CHECK(line == result.trace.records[i].to_json());
      ++i;
    }
    CHECK(i == result.trace.records.size());

    // D_G dumps exist for both generations.
    CHECK(std::filesystem::exists(tmp.file("run") + "/dg/step_1.tsv"));
    CHECK(std::filesystem::exists(tmp.file("run") + "/dg/step_2.tsv"));

    // Whenever any post-base step trained, the policy moved away from the
    // frozen teacher; when all starved it must still equal the teacher.
    bool any_trained = false;
    for (size_t i = 1; i < result.trace.records.size(); ++i) {
      if (!result.trace.records[i].skipped) any_trained = true;
    }
    const bool moved = result.teacher.param_checksum() != result.policy.param_checksum();
    CHECK(moved == any_trained);
  }

  // Determinism: the same config and corpus reproduce the trace byte for byte.
  {
    RunDir run_a(tmp.file("rerun_a"));
    RunDir run_b(tmp.file("rerun_b"));
    run(config, corpus, &run_a, nullptr);
    run(config, corpus, &run_b, nullptr);
    CHECK(read_file(run_a.trace_path()) == read_file(run_b.trace_path()));
    CHECK(read_file(run_a.trace_path()).size() > 0);
  }
}

TEST_CASE("pipeline: teacher equals the base checkpoint") {
  ParallelCorpus corpus = testutil::make_corpus(
      {{"a b", "a b"}, {"b a", "b a"}, {"a", "a"}, {"b", "b"}});
  RlConfig config;
  config.hyper.layers = 1;
  config.hyper.d_model = 8;
  config.hyper.heads = 2;
  config.hyper.d_ff = 8;
  config.hyper.max_len = 8;
  config.generation_steps = 1;
  config.deltas.values = {0.3};
  config.st_flag = false;
  config.min_filtered = 1;
  config.base_train.epochs = 1;
  config.finetune_train.epochs = 1;
  config.eval_set = corpus;
  config.src_counter = unit_counter({"a", "b"});
  config.tgt_counter = unit_counter({"a", "b"});

  testutil::TempDir tmp;
  RunDir run_dir(tmp.file("run"));
  const RlResult result = run(config, corpus, &run_dir, nullptr);
  const Policy base = Policy::load_checkpoint(run_dir.checkpoint_path(0));
  CHECK(base.param_checksum() == result.teacher.param_checksum());
  // st_flag off: no distill record.
  CHECK(result.trace.records.size() == 2);
  CHECK(result.trace.records.back().phase == "rl");
}

TEST_CASE("pipeline: starvation skips training but never a record") {
  ParallelCorpus corpus = testutil::make_corpus(
      {{"a b", "a b"}, {"b a", "b a"}, {"a", "a"}, {"b", "b"}});
  RlConfig config;
  config.hyper.layers = 1;
  config.hyper.d_model = 8;
  config.hyper.heads = 2;
  config.hyper.d_ff = 8;
  config.hyper.max_len = 8;
  config.generation_steps = 2;
  config.deltas.values = {0.3, 0.2};
  config.st_flag = true;
  config.min_filtered = 1000000;  // nothing can satisfy this floor
  config.base_train.epochs = 1;
  config.finetune_train.epochs = 1;
  config.distill_train.epochs = 1;
  config.eval_set = corpus;
  config.src_counter = unit_counter({"a", "b"});
  config.tgt_counter = unit_counter({"a", "b"});

  const RlResult result = run(config, corpus, nullptr, nullptr);
  REQUIRE(result.trace.records.size() == 1 + 4 + 1);
  const std::uint64_t base_checksum = result.teacher.param_checksum();
  CHECK(result.policy.param_checksum() == base_checksum);  // nothing ever trained
  for (size_t i = 1; i < result.trace.records.size(); ++i) {
    CHECK(result.trace.records[i].skipped);
    // Metrics equal the base metrics since parameters never moved.
    CHECK(result.trace.records[i].bleu == result.trace.records[0].bleu);
    CHECK(result.trace.records[i].pcc_02 == result.trace.records[0].pcc_02);
  }
}

TEST_CASE("pipeline: validation rejects an empty eval set and bad schedules") {
  RlConfig config;
  CHECK_THROWS_AS(config.validate(), ConfigError);  // empty eval set
  config.eval_set = testutil::make_corpus({{"a", "a"}});
  config.deltas.values = {};
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.deltas.values = {0.3};
  CHECK_NOTHROW(config.validate());
  const ParallelCorpus empty;
  CHECK_THROWS_AS(run(config, empty, nullptr, nullptr), DataError);
}
