// tools/isonmt_main.cpp

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
// Single-binary command line driver. One `seed` config key feeds corpus
// generation, parameter init and training; replaying a run directory's
// config.kv reproduces its trace byte for byte (timestamps live only in the
// manifest). Exit codes: 0 success, 2 usage, 3 invalid config, 1 any other
// failure.

#include <charconv>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "isonmt/common.hpp"
#include "isonmt/config.hpp"
#include "isonmt/corpus.hpp"
#include "isonmt/metrics.hpp"
#include "isonmt/phonology.hpp"
#include "isonmt/policy.hpp"
#include "isonmt/rl_pipeline.hpp"
#include "isonmt/training.hpp"

namespace fs = std::filesystem;

namespace {

using namespace isonmt;

std::string fmt_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) return std::to_string(x);
  return std::string(buf, end);
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return std::string(buf);
}

// Every config key resolved once up front; missing keys take these defaults.
struct Settings {
  std::uint64_t seed = 1;
  Hyper hyper;
  bool synthetic = true;
  SynthSpec synth;
  int n_train = 600;
  int n_test = 200;
  std::string src_file, tgt_file, test_src_file, test_tgt_file;
  std::string src_language = "src", tgt_language = "tgt";
  std::string src_table, tgt_table;
  TrainConfig base_train, finetune_train, distill_train;
  int generation_steps = 3;
  std::vector<double> deltas{0.3, 0.2, 0.1};
  bool st_flag = true;
  int min_filtered = 16;
  DecodeConfig decode;
  std::string eval_set_id = "test";
};

Settings resolve_settings(const KeyValueConfig& c) {
  Settings s;
  const long seed = c.get_int("seed", 1);
  if (seed < 0) throw ConfigError("seed must be >= 0, got " + std::to_string(seed));
  s.seed = static_cast<std::uint64_t>(seed);

  s.hyper.layers = static_cast<int>(c.get_int("model.layers", 2));
  s.hyper.d_model = static_cast<int>(c.get_int("model.d_model", 64));
  s.hyper.heads = static_cast<int>(c.get_int("model.heads", 2));
  s.hyper.d_ff = static_cast<int>(c.get_int("model.d_ff", 128));
  s.hyper.max_len = static_cast<int>(c.get_int("model.max_len", 32));

  s.src_file = c.get_string("corpus.src_file", "");
  s.tgt_file = c.get_string("corpus.tgt_file", "");
  s.test_src_file = c.get_string("corpus.test_src_file", "");
  s.test_tgt_file = c.get_string("corpus.test_tgt_file", "");
  s.synthetic = c.get_bool("corpus.synthetic", s.src_file.empty());
  s.synth.n_symbols = static_cast<int>(c.get_int("corpus.n_symbols", 50));
  s.synth.len_min = static_cast<int>(c.get_int("corpus.len_min", 3));
  s.synth.len_max = static_cast<int>(c.get_int("corpus.len_max", 10));
  s.synth.p_long = c.get_double("corpus.p_long", 0.5);
  s.synth.p_spread = c.get_double("corpus.p_spread", 0.25);
  s.synth.src_count_min = static_cast<int>(c.get_int("corpus.src_count_min", 2));
  s.synth.src_count_max = static_cast<int>(c.get_int("corpus.src_count_max", 6));
  s.synth.seed = s.seed;
  s.n_train = static_cast<int>(c.get_int("corpus.n_train", 600));
  s.n_test = static_cast<int>(c.get_int("corpus.n_test", 200));
  s.src_language = c.get_string("corpus.src_language", "src");
  s.tgt_language = c.get_string("corpus.tgt_language", "tgt");
  s.src_table = c.get_string("phoneme.src_table", "");
  s.tgt_table = c.get_string("phoneme.tgt_table", "");

  const Optimizer opt = parse_optimizer(c.get_string("train.optimizer", "sgd"));
  const Precision prec = parse_precision(c.get_string("train.precision", "f64"));
  const double lr = c.get_double("train.lr", 0.05);
  const int batch = static_cast<int>(c.get_int("train.batch_size", 32));
  const double b1 = c.get_double("train.adam_beta1", 0.9);
  const double b2 = c.get_double("train.adam_beta2", 0.999);
  const double eps = c.get_double("train.adam_eps", 1e-8);
  auto phase = [&](const std::string& prefix, int default_epochs, double alpha) {
    TrainConfig t;
    t.learning_rate = c.get_double(prefix + ".lr", lr);
    t.epochs = static_cast<int>(c.get_int(prefix + ".epochs", default_epochs));
    t.batch_size = static_cast<int>(c.get_int(prefix + ".batch_size", batch));
    t.alpha = alpha;
    t.seed = s.seed;
    t.precision = prec;
    t.optimizer = opt;
    t.adam_beta1 = b1;
    t.adam_beta2 = b2;
    t.adam_eps = eps;
    return t;
  };
  s.base_train = phase("base", 12, 1.0);
  s.finetune_train = phase("finetune", 1, 1.0);
  s.distill_train = phase("distill", 2, c.get_double("distill.alpha", 1.0));

  s.generation_steps = static_cast<int>(c.get_int("rl.generation_steps", 3));
  s.deltas = c.get_double_list("rl.deltas", {0.3, 0.2, 0.1});
  s.st_flag = c.get_bool("rl.st_flag", true);
  s.min_filtered = static_cast<int>(c.get_int("rl.min_filtered", 16));

  s.decode.method = parse_decode_method(c.get_string("decode.method", "greedy"));
  s.decode.beam_size = static_cast<int>(c.get_int("decode.beam_size", 4));
  s.decode.max_len = static_cast<int>(c.get_int("decode.max_len", 0));
  s.eval_set_id = c.get_string("eval.set_id", "test");
  return s;
}

// Fully pinned key=value rendering; feeding it back replays the run even if
// compiled-in defaults change later.
KeyValueConfig render_settings(const Settings& s) {
  KeyValueConfig r;
  r.set("seed", std::to_string(s.seed));
  r.set("model.layers", std::to_string(s.hyper.layers));
  r.set("model.d_model", std::to_string(s.hyper.d_model));
  r.set("model.heads", std::to_string(s.hyper.heads));
  r.set("model.d_ff", std::to_string(s.hyper.d_ff));
  r.set("model.max_len", std::to_string(s.hyper.max_len));
  r.set("corpus.synthetic", s.synthetic ? "true" : "false");
  r.set("corpus.n_train", std::to_string(s.n_train));
  r.set("corpus.n_test", std::to_string(s.n_test));
  r.set("corpus.n_symbols", std::to_string(s.synth.n_symbols));
  r.set("corpus.len_min", std::to_string(s.synth.len_min));
  r.set("corpus.len_max", std::to_string(s.synth.len_max));
  r.set("corpus.p_long", fmt_double(s.synth.p_long));
  r.set("corpus.p_spread", fmt_double(s.synth.p_spread));
  r.set("corpus.src_count_min", std::to_string(s.synth.src_count_min));
  r.set("corpus.src_count_max", std::to_string(s.synth.src_count_max));
  if (!s.src_file.empty()) r.set("corpus.src_file", s.src_file);
  if (!s.tgt_file.empty()) r.set("corpus.tgt_file", s.tgt_file);
  if (!s.test_src_file.empty()) r.set("corpus.test_src_file", s.test_src_file);
  if (!s.test_tgt_file.empty()) r.set("corpus.test_tgt_file", s.test_tgt_file);
  r.set("corpus.src_language", s.src_language);
  r.set("corpus.tgt_language", s.tgt_language);
  if (!s.src_table.empty()) r.set("phoneme.src_table", s.src_table);
  if (!s.tgt_table.empty()) r.set("phoneme.tgt_table", s.tgt_table);
  r.set("train.optimizer", s.base_train.optimizer == Optimizer::kAdam ? "adam" : "sgd");
  r.set("train.precision",
        s.base_train.precision == Precision::kFloat32 ? "f32" : "f64");
  r.set("train.lr", fmt_double(s.base_train.learning_rate));
  r.set("train.batch_size", std::to_string(s.base_train.batch_size));
  r.set("train.adam_beta1", fmt_double(s.base_train.adam_beta1));
  r.set("train.adam_beta2", fmt_double(s.base_train.adam_beta2));
  r.set("train.adam_eps", fmt_double(s.base_train.adam_eps));
  r.set("base.epochs", std::to_string(s.base_train.epochs));
  r.set("base.lr", fmt_double(s.base_train.learning_rate));
  r.set("base.batch_size", std::to_string(s.base_train.batch_size));
  r.set("finetune.epochs", std::to_string(s.finetune_train.epochs));
  r.set("finetune.lr", fmt_double(s.finetune_train.learning_rate));
  r.set("finetune.batch_size", std::to_string(s.finetune_train.batch_size));
  r.set("distill.epochs", std::to_string(s.distill_train.epochs));
  r.set("distill.lr", fmt_double(s.distill_train.learning_rate));
  r.set("distill.batch_size", std::to_string(s.distill_train.batch_size));
  r.set("distill.alpha", fmt_double(s.distill_train.alpha));
  r.set("rl.generation_steps", std::to_string(s.generation_steps));
  std::string deltas;
  for (size_t i = 0; i < s.deltas.size(); ++i) {
    if (i > 0) deltas += ",";
    deltas += fmt_double(s.deltas[i]);
  }
  r.set("rl.deltas", deltas);
  r.set("rl.st_flag", s.st_flag ? "true" : "false");
  r.set("rl.min_filtered", std::to_string(s.min_filtered));
  r.set("decode.method",
        s.decode.method == DecodeConfig::Method::kBeam ? "beam" : "greedy");
  r.set("decode.beam_size", std::to_string(s.decode.beam_size));
  r.set("decode.max_len", std::to_string(s.decode.max_len));
  r.set("eval.set_id", s.eval_set_id);
  return r;
}

const char* kConfigHelp = R"(Config file: `key = value` lines, `#` comments. Keys and defaults:

  seed = 1                   master seed; corpus, init and training draw from it
  model.layers = 2           encoder and decoder layer count
  model.d_model = 64         model width (heads must divide it)
  model.heads = 2            attention heads
  model.d_ff = 128           feed-forward width
  model.max_len = 32         maximum sequence length including EOS
  corpus.synthetic = true    generate the synthetic corpus (false: load files)
  corpus.n_train = 600       synthetic training pairs
  corpus.n_test = 200        synthetic held-out pairs
  corpus.n_symbols = 50      synthetic vocabulary size
  corpus.len_min = 3         shortest synthetic source sentence
  corpus.len_max = 10        longest synthetic source sentence
  corpus.p_long = 0.5        center of the per-symbol LONG-rendering probability
  corpus.p_spread = 0.25     half-width of the per-symbol LONG probability
  corpus.src_count_min = 2   fewest phonemes per source symbol
  corpus.src_count_max = 6   most phonemes per source symbol
  corpus.src_file =          training source file, one tokenized sentence per line
  corpus.tgt_file =          training target file, line-aligned with the source
  corpus.test_src_file =     held-out source file
  corpus.test_tgt_file =     held-out target file
  corpus.src_language = src  language id for the source phoneme counter
  corpus.tgt_language = tgt  language id for the target phoneme counter
  phoneme.src_table =        source lexicon TSV (token<TAB>count)
  phoneme.tgt_table =        target lexicon TSV
  train.optimizer = sgd      sgd | adam
  train.precision = f64      f64 | f32 gradient arithmetic
  train.lr = 0.05            learning rate; per-phase base.lr, finetune.lr,
                             distill.lr override it
  train.batch_size = 32      batch size; base.batch_size, finetune.batch_size,
                             distill.batch_size override it
  train.adam_beta1 = 0.9
  train.adam_beta2 = 0.999
  train.adam_eps = 1e-8
  base.epochs = 12           base training epochs
  finetune.epochs = 1        epochs per filtered fine-tune step
  distill.epochs = 2         student-teacher fine-tune epochs
  distill.alpha = 1          weight of the KL term in the distillation loss
  rl.generation_steps = 3    decode-the-corpus steps
  rl.deltas = 0.3,0.2,0.1    strictly tightening band schedule, one fine-tune per entry
  rl.st_flag = true          run the student-teacher step after the last fine-tune
  rl.min_filtered = 16       skip fine-tunes whose filtered set is smaller
  decode.method = greedy     greedy | beam
  decode.beam_size = 4
  decode.max_len = 0         generation cap in tokens; 0 means model.max_len - 1
  eval.set_id = test         test-set label used in reports
)";

struct CorpusBundle {
  ParallelCorpus train;
  ParallelCorpus test;
  PhonemeCounter src_counter;
  PhonemeCounter tgt_counter;
  const SynthTables* tables = nullptr;  // set only for synthetic corpora
};

// Owns the synthetic corpus storage so `tables` stays valid.
struct BundleHolder {
  SynthCorpus synth;
  CorpusBundle bundle;
};

BundleHolder build_corpus(const Settings& s, const std::string& test_src_override,
                          const std::string& test_tgt_override) {
  if (test_src_override.empty() != test_tgt_override.empty()) {
    throw ConfigError("--src and --tgt must be given together");
  }
  BundleHolder h;
  CorpusBundle& b = h.bundle;
  if (s.synthetic) {
    h.synth = generate_synthetic_corpus(s.synth, s.n_train, s.n_test);
    b.train = h.synth.train;
    b.test = h.synth.test;
    b.tables = &h.synth.tables;
  } else {
    if (!s.src_file.empty()) {
      if (s.tgt_file.empty()) {
        throw ConfigError("corpus.src_file requires corpus.tgt_file");
      }
      b.train = load_parallel(s.src_file, s.tgt_file, s.src_language, s.tgt_language).corpus;
    }
    if (!s.test_src_file.empty()) {
      if (s.test_tgt_file.empty()) {
        throw ConfigError("corpus.test_src_file requires corpus.test_tgt_file");
      }
      b.test = load_parallel(s.test_src_file, s.test_tgt_file, s.src_language,
                             s.tgt_language)
                   .corpus;
    }
  }
  if (!test_src_override.empty()) {
    b.test = load_parallel(test_src_override, test_tgt_override, s.src_language,
                           s.tgt_language)
                 .corpus;
  }
  if (!s.src_table.empty()) {
    b.src_counter = PhonemeCounter::from_table_file(s.src_table, s.src_language);
  } else if (s.synthetic) {
    b.src_counter = h.synth.src_counter;
  } else {
    b.src_counter = PhonemeCounter(s.src_language, {});
  }
  if (!s.tgt_table.empty()) {
    b.tgt_counter = PhonemeCounter::from_table_file(s.tgt_table, s.tgt_language);
  } else if (s.synthetic) {
    b.tgt_counter = h.synth.tgt_counter;
  } else {
    b.tgt_counter = PhonemeCounter(s.tgt_language, {});
  }
  return h;
}

nlohmann::ordered_json make_manifest(const std::string& command,
                                     const std::string& config_path,
                                     const KeyValueConfig& resolved, std::uint64_t seed,
                                     const nlohmann::ordered_json& artifacts,
                                     const std::string& started_at) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["seed"] = seed;
  nlohmann::ordered_json cfg;
  for (const auto& [key, value] : resolved.values()) cfg[key] = value;
  j["config"] = cfg;
  j["artifacts"] = artifacts;
  j["started_at"] = started_at;
  j["finished_at"] = nullptr;
  return j;
}

void write_manifest_file(const std::string& path, const nlohmann::ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<EvaluationReport> trace_to_reports(const RlRunTrace& trace,
                                               const std::string& test_set_id,
                                               long n_sentences) {
  std::vector<EvaluationReport> reports;
  reports.reserve(trace.records.size());
  for (const TraceRecord& r : trace.records) {
    EvaluationReport rep;
    rep.model_id = "step" + std::to_string(r.step) + "_" + r.phase;
    rep.test_set_id = test_set_id;
    rep.bleu = r.bleu;
    rep.chrf = r.chrf;
    rep.pcc_02 = r.pcc_02;
    rep.pcc_01 = r.pcc_01;
    rep.n_sentences = n_sentences;
    reports.push_back(rep);
  }
  return reports;
}

RlConfig make_rl_config(const Settings& s, CorpusBundle& bundle) {
  RlConfig rl;
  rl.hyper = s.hyper;
  rl.generation_steps = s.generation_steps;
  rl.deltas.values = s.deltas;
  rl.st_flag = s.st_flag;
  rl.min_filtered = s.min_filtered;
  rl.init_seed = s.seed;
  rl.decode = s.decode;
  rl.base_train = s.base_train;
  rl.finetune_train = s.finetune_train;
  rl.distill_train = s.distill_train;
  rl.eval_set = bundle.test;
  rl.src_counter = bundle.src_counter;
  rl.tgt_counter = bundle.tgt_counter;
  rl.eval_set_id = s.eval_set_id;
  return rl;
}

std::string corpus_side_text(const ParallelCorpus& corpus, Side side) {
  std::ostringstream out;
  for (const SentencePair& pair : corpus.pairs) {
    out << (side == Side::kSource ? pair.source_text() : pair.target_text()) << "\n";
  }
  return out.str();
}

int cmd_make_corpus(const Settings& s, const std::string& config_path,
                    const std::string& out_dir) {
  if (!s.synthetic) {
    throw ConfigError("make-corpus requires corpus.synthetic = true");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir + ": " + ec.message());

  const std::string p_train_src = (fs::path(out_dir) / "train.src").string();
  const std::string p_train_tgt = (fs::path(out_dir) / "train.tgt").string();
  const std::string p_test_src = (fs::path(out_dir) / "test.src").string();
  const std::string p_test_tgt = (fs::path(out_dir) / "test.tgt").string();
  const std::string p_src_tab = (fs::path(out_dir) / "src_phonemes.tsv").string();
  const std::string p_tgt_tab = (fs::path(out_dir) / "tgt_phonemes.tsv").string();
  const std::string p_config = (fs::path(out_dir) / "config.kv").string();

  const std::string started = iso8601_utc_now();
  nlohmann::ordered_json artifacts;
  artifacts["train_src"] = p_train_src;
  artifacts["train_tgt"] = p_train_tgt;
  artifacts["test_src"] = p_test_src;
  artifacts["test_tgt"] = p_test_tgt;
  artifacts["src_phonemes"] = p_src_tab;
  artifacts["tgt_phonemes"] = p_tgt_tab;
  artifacts["config"] = p_config;
  nlohmann::ordered_json manifest = make_manifest("make-corpus", config_path,
                                                  render_settings(s), s.seed, artifacts,
                                                  started);
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  write_manifest_file(manifest_path, manifest);

  BundleHolder h = build_corpus(s, "", "");
  write_text_file(p_train_src, corpus_side_text(h.bundle.train, Side::kSource));
  write_text_file(p_train_tgt, corpus_side_text(h.bundle.train, Side::kTarget));
  write_text_file(p_test_src, corpus_side_text(h.bundle.test, Side::kSource));
  write_text_file(p_test_tgt, corpus_side_text(h.bundle.test, Side::kTarget));

  const SynthTables& t = *h.bundle.tables;
  std::ostringstream src_tsv, tgt_tsv;
  src_tsv << "# token<TAB>phoneme count\n";
  tgt_tsv << "# token<TAB>phoneme count\n";
  for (size_t k = 0; k < t.src_token.size(); ++k) {
    src_tsv << t.src_token[k] << "\t" << t.src_count[k] << "\n";
    tgt_tsv << t.short_token[k] << "\t" << t.short_count[k] << "\n";
    tgt_tsv << t.long_token[k] << "\t" << t.long_count[k] << "\n";
  }
  write_text_file(p_src_tab, src_tsv.str());
  write_text_file(p_tgt_tab, tgt_tsv.str());
  write_text_file(p_config, render_settings(s).to_string());

  manifest["finished_at"] = iso8601_utc_now();
  write_manifest_file(manifest_path, manifest);
  std::cout << "wrote " << h.bundle.train.size() << " training pairs and "
            << h.bundle.test.size() << " held-out pairs to " << out_dir << "\n";
  return 0;
}

int cmd_train_base(const Settings& s, const std::string& config_path,
                   const std::string& out_dir) {
  RunDir rd(out_dir);
  const std::string started = iso8601_utc_now();
  nlohmann::ordered_json artifacts;
  artifacts["checkpoint"] = rd.checkpoint_path(0);
  artifacts["trace"] = rd.trace_path();
  artifacts["config"] = (fs::path(out_dir) / "config.kv").string();
  nlohmann::ordered_json manifest = make_manifest("train-base", config_path,
                                                  render_settings(s), s.seed, artifacts,
                                                  started);
  write_manifest_file(rd.manifest_path(), manifest);
  rd.write_config(render_settings(s));

  BundleHolder h = build_corpus(s, "", "");
  if (h.bundle.train.empty()) {
    throw ConfigError("no training corpus: set corpus.synthetic or corpus.src_file");
  }
  Policy policy(s.hyper, Vocabulary::build(h.bundle.train, Side::kSource),
                Vocabulary::build(h.bundle.train, Side::kTarget));
  policy.init_params(s.seed);
  const std::vector<LossReport> losses = train(&policy, h.bundle.train, s.base_train);
  for (size_t e = 0; e < losses.size(); ++e) {
    std::cout << "epoch " << (e + 1) << ": ce " << losses[e].ce << "\n";
  }
  policy.save_checkpoint(rd.checkpoint_path(0));

  if (!h.bundle.test.empty()) {
    const EvaluationReport report =
        evaluate(policy, h.bundle.test, h.bundle.src_counter, h.bundle.tgt_counter,
                 s.decode, "base", s.eval_set_id);
    TraceRecord rec;
    rec.step = 0;
    rec.phase = "base";
    rec.bleu = report.bleu;
    rec.chrf = report.chrf;
    rec.pcc_02 = report.pcc_02;
    rec.pcc_01 = report.pcc_01;
    rd.append_trace(rec);
    std::cout << report_table({report});
  }
  manifest["finished_at"] = iso8601_utc_now();
  write_manifest_file(rd.manifest_path(), manifest);
  return 0;
}

int cmd_rl_run(const Settings& s, const std::string& config_path,
               const std::string& out_dir) {
  RunDir rd(out_dir);
  const std::string started = iso8601_utc_now();
  nlohmann::ordered_json artifacts;
  artifacts["trace"] = rd.trace_path();
  artifacts["checkpoints"] = (fs::path(out_dir) / "checkpoints").string();
  artifacts["generated"] = (fs::path(out_dir) / "dg").string();
  artifacts["config"] = (fs::path(out_dir) / "config.kv").string();
  nlohmann::ordered_json manifest =
      make_manifest("rl-run", config_path, render_settings(s), s.seed, artifacts, started);
  write_manifest_file(rd.manifest_path(), manifest);
  rd.write_config(render_settings(s));

  BundleHolder h = build_corpus(s, "", "");
  if (h.bundle.train.empty()) {
    throw ConfigError("no training corpus: set corpus.synthetic or corpus.src_file");
  }
  if (h.bundle.test.empty()) {
    throw ConfigError("no held-out set: set corpus.n_test or corpus.test_src_file");
  }
  const RlConfig rl = make_rl_config(s, h.bundle);
  const RlResult result = run(rl, h.bundle.train, &rd, &std::cout);
  std::cout << report_table(
      trace_to_reports(result.trace, s.eval_set_id, static_cast<long>(h.bundle.test.size())));

  manifest["finished_at"] = iso8601_utc_now();
  write_manifest_file(rd.manifest_path(), manifest);
  return 0;
}

int cmd_distill(const Settings& s, const std::string& config_path,
                const std::string& out_dir, const std::string& checkpoint,
                const std::string& teacher_path) {
  RunDir rd(out_dir);
  const std::string started = iso8601_utc_now();
  const std::string p_out_ckpt = (fs::path(out_dir) / "distilled.ckpt").string();
  nlohmann::ordered_json artifacts;
  artifacts["checkpoint"] = p_out_ckpt;
  artifacts["trace"] = rd.trace_path();
  artifacts["config"] = (fs::path(out_dir) / "config.kv").string();
  nlohmann::ordered_json manifest = make_manifest("distill", config_path,
                                                  render_settings(s), s.seed, artifacts,
                                                  started);
  write_manifest_file(rd.manifest_path(), manifest);
  rd.write_config(render_settings(s));

  Policy student = Policy::load_checkpoint(checkpoint);
  // Default teacher is the loaded checkpoint itself, frozen before training.
  Policy teacher =
      teacher_path.empty() ? student : Policy::load_checkpoint(teacher_path);

  BundleHolder h = build_corpus(s, "", "");
  if (h.bundle.train.empty()) {
    throw ConfigError("no training corpus: set corpus.synthetic or corpus.src_file");
  }
  train(&student, h.bundle.train, s.distill_train, &teacher);
  student.save_checkpoint(p_out_ckpt);

  if (!h.bundle.test.empty()) {
    const EvaluationReport report =
        evaluate(student, h.bundle.test, h.bundle.src_counter, h.bundle.tgt_counter,
                 s.decode, "distill", s.eval_set_id);
    TraceRecord rec;
    rec.step = 1;
    rec.phase = "distill";
    rec.df_size = static_cast<long>(h.bundle.train.size());
    rec.bleu = report.bleu;
    rec.chrf = report.chrf;
    rec.pcc_02 = report.pcc_02;
    rec.pcc_01 = report.pcc_01;
    rd.append_trace(rec);
    std::cout << report_table({report});
  }
  manifest["finished_at"] = iso8601_utc_now();
  write_manifest_file(rd.manifest_path(), manifest);
  return 0;
}

int cmd_evaluate(const Settings& s, const std::string& config_path,
                 const std::string& out_dir, const std::string& checkpoint,
                 const std::string& src_path, const std::string& tgt_path) {
  const Policy policy = Policy::load_checkpoint(checkpoint);
  BundleHolder h = build_corpus(s, src_path, tgt_path);
  if (h.bundle.test.empty()) {
    throw ConfigError(
        "no test set: give --src/--tgt, corpus.test_* keys, or a synthetic config");
  }
  const std::string model_id = fs::path(checkpoint).stem().string();
  const EvaluationReport report =
      evaluate(policy, h.bundle.test, h.bundle.src_counter, h.bundle.tgt_counter,
               s.decode, model_id, s.eval_set_id);
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create output directory " + out_dir + ": " + ec.message());
    const std::string p_report = (fs::path(out_dir) / "report.json").string();
    nlohmann::ordered_json artifacts;
    artifacts["report"] = p_report;
    nlohmann::ordered_json manifest = make_manifest("evaluate", config_path,
                                                    render_settings(s), s.seed, artifacts,
                                                    iso8601_utc_now());
    manifest["finished_at"] = iso8601_utc_now();
    write_manifest_file((fs::path(out_dir) / "manifest.json").string(), manifest);
    write_text_file(p_report, report_json(report) + "\n");
  }
  std::cout << report_table({report});
  return 0;
}

int cmd_translate(const Settings& s, const std::string& checkpoint) {
  const Policy policy = Policy::load_checkpoint(checkpoint);
  std::string line;
  while (std::getline(std::cin, line)) {
    const std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) {
      std::cout << "\n";
      continue;
    }
    const GenerationResult gen = policy.generate(tokens, s.decode);
    std::cout << join_tokens(gen.tokens) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isonmt: reward-filtered self-training for isometric translation"};
  app.require_subcommand(1);
  app.footer(kConfigHelp);

  std::string config_path, out_dir, checkpoint, teacher, src_path, tgt_path;
  long long seed_flag = -1;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seed", seed_flag, "override the config seed")
        ->check(CLI::NonNegativeNumber);
  };
  auto add_out = [&](CLI::App* sub, bool required) {
    CLI::Option* o = sub->add_option("--out", out_dir, "output directory");
    if (required) o->required();
  };
  auto add_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint, "model checkpoint path")->required();
  };

  CLI::App* c_make =
      app.add_subcommand("make-corpus", "Generate the synthetic corpus and phoneme tables");
  add_config(c_make);
  add_out(c_make, true);

  CLI::App* c_base = app.add_subcommand(
      "train-base", "Train the base model and write checkpoints/step_0.ckpt");
  add_config(c_base);
  add_out(c_base, true);

  CLI::App* c_rl = app.add_subcommand(
      "rl-run", "Full pipeline: base training, filtered fine-tunes, optional distillation");
  add_config(c_rl);
  add_out(c_rl, true);

  CLI::App* c_distill = app.add_subcommand(
      "distill", "Fine-tune a checkpoint against a frozen teacher on the training corpus");
  add_config(c_distill);
  add_out(c_distill, true);
  add_checkpoint(c_distill);
  c_distill->add_option("--teacher", teacher,
                        "teacher checkpoint (default: the --checkpoint model itself)");

  CLI::App* c_eval =
      app.add_subcommand("evaluate", "Score a checkpoint on a test set and write report.json");
  add_config(c_eval);
  add_out(c_eval, false);
  add_checkpoint(c_eval);
  c_eval->add_option("--src", src_path, "test source file");
  c_eval->add_option("--tgt", tgt_path, "test reference file");

  CLI::App* c_translate = app.add_subcommand(
      "translate", "Read sentences from standard input, write one hypothesis per line");
  add_config(c_translate);
  add_checkpoint(c_translate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    KeyValueConfig cfg;
    if (!config_path.empty()) cfg = isonmt::KeyValueConfig::parse_file(config_path);
    if (seed_flag >= 0) cfg.set("seed", std::to_string(seed_flag));
    const Settings s = resolve_settings(cfg);

    if (app.got_subcommand(c_make)) return cmd_make_corpus(s, config_path, out_dir);
    if (app.got_subcommand(c_base)) return cmd_train_base(s, config_path, out_dir);
    if (app.got_subcommand(c_rl)) return cmd_rl_run(s, config_path, out_dir);
    if (app.got_subcommand(c_distill)) {
      return cmd_distill(s, config_path, out_dir, checkpoint, teacher);
    }
    if (app.got_subcommand(c_eval)) {
      return cmd_evaluate(s, config_path, out_dir, checkpoint, src_path, tgt_path);
    }
    if (app.got_subcommand(c_translate)) return cmd_translate(s, checkpoint);
    return 2;
  } catch (const isonmt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
