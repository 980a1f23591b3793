// src/rl_pipeline.cpp

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

#include "isonmt/rl_pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace isonmt {

namespace fs = std::filesystem;

void DeltaSchedule::validate() const {
  if (values.empty()) {
    throw ConfigError("delta schedule must contain at least one value");
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0 && values[i] < 1.0)) {
      throw ConfigError("delta schedule entry " + std::to_string(i + 1) + " is " +
                        std::to_string(values[i]) + ", must lie strictly inside (0, 1)");
    }
    if (i > 0 && !(values[i] < values[i - 1])) {
      throw ConfigError("delta schedule must be strictly decreasing, entry " +
                        std::to_string(i + 1) + " does not tighten the band");
    }
  }
}

void RlConfig::validate() const {
  if (generation_steps < 1) {
    throw ConfigError("generation_steps must be >= 1, got " +
                      std::to_string(generation_steps));
  }
  deltas.validate();
  if (min_filtered < 0) {
    throw ConfigError("min_filtered must be >= 0, got " + std::to_string(min_filtered));
  }
  base_train.validate();
  finetune_train.validate();
  distill_train.validate();
  if (eval_set.empty()) {
    throw ConfigError("eval_set must not be empty");
  }
}

std::string TraceRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["phase"] = phase;
  if (delta.has_value()) {
    j["delta"] = *delta;
  } else {
    j["delta"] = nullptr;
  }
  j["dg_size"] = dg_size;
  j["df_size"] = df_size;
  j["bleu"] = bleu;
  j["chrf"] = chrf;
  j["pcc_02"] = pcc_02;
  j["pcc_01"] = pcc_01;
  j["skipped"] = skipped;
  return j.dump();
}

RunDir::RunDir(const std::string& path) : path_(path) {
  std::error_code ec;
  fs::create_directories(fs::path(path_) / "checkpoints", ec);
  if (!ec) {
    fs::create_directories(fs::path(path_) / "dg", ec);
  }
  if (ec) {
    throw Error("cannot create run directory " + path_ + ": " + ec.message());
  }
  const std::string lock_path = (fs::path(path_) / "lock").string();
  lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (lock_fd_ < 0) {
    throw Error("run directory " + path_ +
                " is locked by another run (remove the 'lock' file if it is stale)");
  }
  const std::string pid_line = std::to_string(::getpid()) + "\n";
  // The pid is advisory only; a failed write does not invalidate the lock.
  const ssize_t written = ::write(lock_fd_, pid_line.data(), pid_line.size());
  (void)written;
}

RunDir::~RunDir() {
  if (lock_fd_ >= 0) {
    ::close(lock_fd_);
    std::error_code ec;
    fs::remove(fs::path(path_) / "lock", ec);
  }
}

std::string RunDir::checkpoint_path(int step) const {
  return (fs::path(path_) / "checkpoints" / ("step_" + std::to_string(step) + ".ckpt"))
      .string();
}

std::string RunDir::trace_path() const {
  return (fs::path(path_) / "trace.jsonl").string();
}

std::string RunDir::manifest_path() const {
  return (fs::path(path_) / "manifest.json").string();
}

void RunDir::write_config(const KeyValueConfig& config) {
  write_text_file((fs::path(path_) / "config.kv").string(), config.to_string());
}

void RunDir::write_manifest(const std::string& json) {
  std::string body = json;
  if (body.empty() || body.back() != '\n') {
    body.push_back('\n');
  }
  write_text_file(manifest_path(), body);
}

void RunDir::append_trace(const TraceRecord& record) {
  std::ofstream out(trace_path(), std::ios::app | std::ios::binary);
  if (!out) {
    throw Error("cannot open trace file for appending: " + trace_path());
  }
  out << record.to_json() << "\n";
  if (!out) {
    throw Error("failed writing trace record to " + trace_path());
  }
}

void RunDir::write_dg(int generation, const ParallelCorpus& dg,
                      const std::vector<std::optional<double>>& pcrs) {
  if (pcrs.size() != dg.pairs.size()) {
    throw DataError("annotation count " + std::to_string(pcrs.size()) +
                    " does not match corpus size " + std::to_string(dg.pairs.size()));
  }
  std::ostringstream out;
  for (size_t i = 0; i < dg.pairs.size(); ++i) {
    out << dg.pairs[i].source_text() << "\t" << dg.pairs[i].target_text() << "\t";
    if (pcrs[i].has_value()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *pcrs[i]);
      out << buf;
    } else {
      out << "undef";
    }
    out << "\n";
  }
  const std::string name = "step_" + std::to_string(generation) + ".tsv";
  write_text_file((fs::path(path_) / "dg" / name).string(), out.str());
}

ParallelCorpus generation_step(const Policy& policy, const ParallelCorpus& corpus,
                               const DecodeConfig& decode, long* dropped) {
  ParallelCorpus out;
  out.src_language = corpus.src_language;
  out.tgt_language = corpus.tgt_language;
  out.pairs.reserve(corpus.pairs.size());
  long dropped_count = 0;
  for (const SentencePair& pair : corpus.pairs) {
    GenerationResult gen = policy.generate(pair.source, decode);
    if (gen.tokens.empty()) {
      ++dropped_count;
      continue;
    }
    out.pairs.push_back(SentencePair{pair.source, std::move(gen.tokens), Origin::kGenerated});
  }
  if (dropped != nullptr) {
    *dropped = dropped_count;
  }
  return out;
}

std::vector<std::optional<double>> annotate(const ParallelCorpus& dg,
                                            const PhonemeCounter& src_counter,
                                            const PhonemeCounter& tgt_counter) {
  std::vector<std::optional<double>> out;
  out.reserve(dg.pairs.size());
  for (const SentencePair& pair : dg.pairs) {
    const long s = src_counter.count(pair.source_text());
    const long t = tgt_counter.count(pair.target_text());
    if (s <= 0 || t <= 0) {
      out.push_back(std::nullopt);
    } else {
      out.push_back(pcr(s, t));
    }
  }
  return out;
}

ParallelCorpus filter(const ParallelCorpus& dg,
                      const std::vector<std::optional<double>>& pcrs, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("filter delta must lie strictly inside (0, 1), got " +
                      std::to_string(delta));
  }
  if (pcrs.size() != dg.pairs.size()) {
    throw DataError("annotation count " + std::to_string(pcrs.size()) +
                    " does not match corpus size " + std::to_string(dg.pairs.size()));
  }
  ParallelCorpus out;
  out.src_language = dg.src_language;
  out.tgt_language = dg.tgt_language;
  for (size_t i = 0; i < dg.pairs.size(); ++i) {
    if (pcrs[i].has_value() && band_contains(*pcrs[i], delta)) {
      out.pairs.push_back(dg.pairs[i]);
    }
  }
  return out;
}

namespace {

std::string fmt2(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << x;
  return os.str();
}

}  // namespace

RlResult run(const RlConfig& config, const ParallelCorpus& base_corpus, RunDir* run_dir,
             std::ostream* log) {
  config.validate();
  if (base_corpus.empty()) {
    throw DataError("base corpus is empty");
  }
  const int filter_steps = config.deltas.steps();

  auto note = [log](const std::string& line) {
    if (log != nullptr) {
      (*log) << line << "\n";
    }
  };

  Policy policy(config.hyper, Vocabulary::build(base_corpus, Side::kSource),
                Vocabulary::build(base_corpus, Side::kTarget));
  policy.init_params(config.init_seed);

  note("base training: " + std::to_string(base_corpus.size()) + " pairs, " +
       std::to_string(config.base_train.epochs) + " epochs");
  const std::vector<LossReport> base_losses = train(&policy, base_corpus, config.base_train);
  if (!base_losses.empty()) {
    note("base training: final ce " + fmt2(base_losses.back().ce));
  }

  // Frozen teacher snapshot; only the student is updated from here on.
  Policy teacher = policy;

  RlRunTrace trace;
  auto record_step = [&](int step, const std::string& phase, std::optional<double> delta,
                         long dg_size, long df_size, bool skipped,
                         const std::string& model_id) {
    const EvaluationReport report =
        evaluate(policy, config.eval_set, config.src_counter, config.tgt_counter,
                 config.decode, model_id, config.eval_set_id);
    TraceRecord rec;
    rec.step = step;
    rec.phase = phase;
    rec.delta = delta;
    rec.dg_size = dg_size;
    rec.df_size = df_size;
    rec.bleu = report.bleu;
    rec.chrf = report.chrf;
    rec.pcc_02 = report.pcc_02;
    rec.pcc_01 = report.pcc_01;
    rec.skipped = skipped;
    trace.records.push_back(rec);
    if (run_dir != nullptr) {
      run_dir->append_trace(rec);
      policy.save_checkpoint(run_dir->checkpoint_path(step));
    }
    note("step " + std::to_string(step) + " [" + phase + "]" +
         (skipped ? " (skipped)" : "") + ": bleu " + fmt2(rec.bleu) + " chrf " +
         fmt2(rec.chrf) + " pcc@0.2 " + fmt2(rec.pcc_02) + " pcc@0.1 " +
         fmt2(rec.pcc_01));
  };

  record_step(0, "base", std::nullopt, 0, 0, false, "base");

  ParallelCorpus last_df;
  long last_dg_size = 0;
  int step = 0;
  for (int g = 1; g <= config.generation_steps; ++g) {
    long dropped = 0;
    const ParallelCorpus dg = generation_step(policy, base_corpus, config.decode, &dropped);
    const std::vector<std::optional<double>> pcrs =
        annotate(dg, config.src_counter, config.tgt_counter);
    last_dg_size = static_cast<long>(dg.size());
    if (run_dir != nullptr) {
      run_dir->write_dg(g, dg, pcrs);
    }
    note("generation " + std::to_string(g) + ": " + std::to_string(dg.size()) +
         " pairs decoded, " + std::to_string(dropped) + " empty outputs dropped");
    for (int f = 1; f <= filter_steps; ++f) {
      ++step;
      const double delta = config.deltas.values[static_cast<size_t>(f - 1)];
      ParallelCorpus df = filter(dg, pcrs, delta);
      const long df_size = static_cast<long>(df.size());
      // An empty filtered set always starves; training on it is impossible.
      const bool starved = df.empty() || df_size < config.min_filtered;
      if (starved) {
        note("step " + std::to_string(step) + ": filtered set has " +
             std::to_string(df_size) + " pairs, below the floor of " +
             std::to_string(config.min_filtered) + ", fine-tune skipped");
      } else {
        train(&policy, df, config.finetune_train);
      }
      last_df = std::move(df);
      record_step(step, "rl", delta, last_dg_size, df_size, starved,
                  "rl_g" + std::to_string(g) + "_f" + std::to_string(f));
    }
  }

  if (config.st_flag) {
    ++step;
    const long df_size = static_cast<long>(last_df.size());
    const bool starved = last_df.empty() || df_size < config.min_filtered;
    if (starved) {
      note("distill: last filtered set has " + std::to_string(df_size) +
           " pairs, below the floor of " + std::to_string(config.min_filtered) +
           ", distillation skipped");
    } else {
      train(&policy, last_df, config.distill_train, &teacher);
    }
    record_step(step, "distill", config.deltas.values.back(), last_dg_size, df_size,
                starved, "distill");
  }

  return RlResult{std::move(policy), std::move(teacher), std::move(trace)};
}

}  // namespace isonmt
