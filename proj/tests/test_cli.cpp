// tests/test_cli.cpp

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

// Drives the installed binary as a subprocess. The binary path arrives via
// the ISONMT_BINARY compile definition.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "isonmt/common.hpp"
#include "json.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out += "'";
  return out;
}

CliResult run_cli(const std::vector<std::string>& args, const std::string& stdin_text,
                  const isonmt::testutil::TempDir& tmp) {
  static int counter = 0;
  const std::string stdin_path = tmp.file("cli_stdin_" + std::to_string(counter));
  const std::string out_path = tmp.file("cli_out_" + std::to_string(counter));
  ++counter;
  {
    std::ofstream in(stdin_path, std::ios::binary);
    in << stdin_text;
  }
  std::string cmd = shell_quote(ISONMT_BINARY);
  for (const std::string& arg : args) cmd += " " + shell_quote(arg);
  cmd += " < " + shell_quote(stdin_path) + " > " + shell_quote(out_path) + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  std::ifstream out(out_path, std::ios::binary);
  std::ostringstream buf;
  buf << out.rdbuf();
  result.output = buf.str();
  return result;
}

/// Micro config: small model, tiny synthetic corpus, one-epoch phases.
std::string write_tiny_config(const isonmt::testutil::TempDir& tmp) {
  const std::string path = tmp.file("tiny.kv");
  std::ofstream out(path);
  out << "seed = 7\n"
      << "model.layers = 1\n"
      << "model.d_model = 8\n"
      << "model.heads = 2\n"
      << "model.d_ff = 16\n"
      << "model.max_len = 16\n"
      << "corpus.synthetic = true\n"
      << "corpus.n_train = 24\n"
      << "corpus.n_test = 6\n"
      << "corpus.n_symbols = 8\n"
      << "corpus.len_min = 2\n"
      << "corpus.len_max = 5\n"
      << "base.epochs = 1\n"
      << "finetune.epochs = 1\n"
      << "distill.epochs = 1\n"
      << "rl.generation_steps = 1\n"
      << "rl.deltas = 0.3\n"
      << "rl.min_filtered = 1\n"
      << "rl.st_flag = true\n";
  return path;
}

}  // namespace

TEST_CASE("help exits 0 and documents the config keys") {
  isonmt::testutil::TempDir tmp;
  const CliResult r = run_cli({"--help"}, "", tmp);
  CHECK(r.exit_code == 0);
  for (const char* needle : {"make-corpus", "train-base", "rl-run", "distill",
                             "evaluate", "translate", "rl.deltas", "train.lr",
                             "corpus.n_train", "decode.method"}) {
    CAPTURE(needle);
    CHECK(r.output.find(needle) != std::string::npos);
  }
}

TEST_CASE("usage errors exit 2") {
  isonmt::testutil::TempDir tmp;
  CHECK(run_cli({"no-such-command"}, "", tmp).exit_code == 2);
  CHECK(run_cli({"rl-run", "--no-such-flag", "--out", tmp.file("x")}, "", tmp).exit_code ==
        2);
  CHECK(run_cli({"rl-run"}, "", tmp).exit_code == 2);  // missing required --out
  CHECK(run_cli({}, "", tmp).exit_code == 2);          // missing subcommand
}

TEST_CASE("config errors exit 3") {
  isonmt::testutil::TempDir tmp;
  CHECK(run_cli({"rl-run", "--config", tmp.file("missing.kv"), "--out", tmp.file("r")},
                "", tmp)
            .exit_code == 3);

  const std::string bad = tmp.file("bad.kv");
  {
    std::ofstream out(bad);
    out << "train.optimizer = warp\n";
  }
  const CliResult r =
      run_cli({"train-base", "--config", bad, "--out", tmp.file("r2")}, "", tmp);
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("config error") != std::string::npos);
}

TEST_CASE("pipeline commands produce their artifacts end to end") {
  isonmt::testutil::TempDir tmp;
  const std::string config = write_tiny_config(tmp);

  // make-corpus
  const std::string corpus_dir = tmp.file("corpus");
  CliResult r = run_cli({"make-corpus", "--config", config, "--out", corpus_dir}, "", tmp);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  for (const char* name : {"train.src", "train.tgt", "test.src", "test.tgt",
                           "src_phonemes.tsv", "tgt_phonemes.tsv", "config.kv",
                           "manifest.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(fs::path(corpus_dir) / name));
  }
  CHECK(isonmt::read_lines((fs::path(corpus_dir) / "train.src").string()).size() == 24);
  CHECK(isonmt::read_lines((fs::path(corpus_dir) / "test.src").string()).size() == 6);

  // train-base
  const std::string base_dir = tmp.file("base");
  r = run_cli({"train-base", "--config", config, "--out", base_dir}, "", tmp);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  const std::string ckpt = (fs::path(base_dir) / "checkpoints" / "step_0.ckpt").string();
  REQUIRE(fs::exists(ckpt));
  CHECK_FALSE(fs::exists(fs::path(base_dir) / "lock"));  // released on exit

  // The manifest is completed in place: finished_at is a string, not null.
  {
    std::ifstream in((fs::path(base_dir) / "manifest.json").string());
    const nlohmann::json manifest = nlohmann::json::parse(in);
    CHECK(manifest.at("command") == "train-base");
    CHECK(manifest.at("seed").get<long>() == 7);
    CHECK(manifest.at("finished_at").is_string());
    CHECK(manifest.at("config").is_object());
  }

  // translate: one hypothesis line per stdin line, in order.
  r = run_cli({"translate", "--config", config, "--checkpoint", ckpt},
              "sym1 sym2\n\nsym3\n", tmp);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(std::count(r.output.begin(), r.output.end(), '\n') == 3);

  // evaluate with explicit test files writes report.json.
  const std::string eval_dir = tmp.file("eval");
  r = run_cli({"evaluate", "--config", config, "--checkpoint", ckpt, "--src",
               (fs::path(corpus_dir) / "test.src").string(), "--tgt",
               (fs::path(corpus_dir) / "test.tgt").string(), "--out", eval_dir},
              "", tmp);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(fs::path(eval_dir) / "report.json"));
  {
    std::ifstream in((fs::path(eval_dir) / "report.json").string());
    const nlohmann::json report = nlohmann::json::parse(in);
    CHECK(report.at("n_sentences").get<long>() == 6);
    CHECK(report.at("bleu").is_number());
  }

  // rl-run writes the full trace; record count is 1 + G*F + 1.
  const std::string rl_dir = tmp.file("rl");
  r = run_cli({"rl-run", "--config", config, "--out", rl_dir}, "", tmp);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> trace =
      isonmt::read_lines((fs::path(rl_dir) / "trace.jsonl").string());
  CHECK(trace.size() == 3);
  CHECK(fs::exists(fs::path(rl_dir) / "checkpoints" / "step_2.ckpt"));
  CHECK(fs::exists(fs::path(rl_dir) / "dg" / "step_1.tsv"));

  // --seed overrides the config: the resolved config in the run dir changes.
  const std::string rl_dir2 = tmp.file("rl_seeded");
  r = run_cli({"rl-run", "--config", config, "--out", rl_dir2, "--seed", "9"}, "", tmp);
  REQUIRE(r.exit_code == 0);
  const std::string kv =
      [&] {
        std::ifstream in((fs::path(rl_dir2) / "config.kv").string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
      }();
  CHECK(kv.find("seed = 9") != std::string::npos);
}

TEST_CASE("a held lock makes a second run fail without clobbering") {
  isonmt::testutil::TempDir tmp;
  const std::string config = write_tiny_config(tmp);
  const std::string dir = tmp.file("locked");
  fs::create_directories(dir);
  {
    std::ofstream lock(fs::path(dir) / "lock");
    lock << "99999\n";
  }
  const CliResult r = run_cli({"train-base", "--config", config, "--out", dir}, "", tmp);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("lock") != std::string::npos);
  CHECK(fs::exists(fs::path(dir) / "lock"));  // the foreign lock survives
}
