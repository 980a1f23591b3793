// isonmt/rl_pipeline.hpp

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
// The reward-filtered self-training loop. A base model is trained on the
// reference corpus and frozen as the teacher; each generation step decodes
// the whole corpus into D_G, annotates every pair with its phoneme count
// ratio, and runs one filtered fine-tune per schedule entry with the band
// tightening each time. The optional student-teacher branch fine-tunes once
// more on the last filtered set with the KL consistency term added. The
// reward is terminal: it exists only for completed translations, never per
// token, and pairs with an undefined ratio are always rejected.

#ifndef ISONMT_RL_PIPELINE_HPP_
#define ISONMT_RL_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "isonmt/config.hpp"
#include "isonmt/corpus.hpp"
#include "isonmt/metrics.hpp"
#include "isonmt/phonology.hpp"
#include "isonmt/policy.hpp"
#include "isonmt/training.hpp"

namespace isonmt {

// Band half-widths, one fine-tune per entry, strictly tightening.
struct DeltaSchedule {
  std::vector<double> values;

  int steps() const { return static_cast<int>(values.size()); }
  /// Requires every value in (0,1) and a strictly decreasing sequence.
  void validate() const;
};

struct RlConfig {
  Hyper hyper;
  int generation_steps = 3;
  DeltaSchedule deltas{{0.3, 0.2, 0.1}};
  bool st_flag = true;
  int min_filtered = 16;
  std::uint64_t init_seed = 1;
  DecodeConfig decode;
  TrainConfig base_train;
  TrainConfig finetune_train;
  TrainConfig distill_train;
  ParallelCorpus eval_set;
  PhonemeCounter src_counter;
  PhonemeCounter tgt_counter;
  std::string eval_set_id = "eval";

  void validate() const;
};

struct TraceRecord {
  int step = 0;
  std::string phase;  // base | rl | distill
  std::optional<double> delta;
  long dg_size = 0;
  long df_size = 0;
  double bleu = 0.0;
  double chrf = 0.0;
  double pcc_02 = 0.0;
  double pcc_01 = 0.0;
  bool skipped = false;  // starved or degenerate step, parameters unchanged

  std::string to_json() const;
};

struct RlRunTrace {
  std::vector<TraceRecord> records;
};

// Owns one run directory: config copy, checkpoints/step_<k>.ckpt,
// trace.jsonl, dg/step_<g>.tsv, manifest.json. Creation takes an exclusive
// lock file; a second run in the same directory fails fast.
class RunDir {
 public:
  explicit RunDir(const std::string& path);
  ~RunDir();
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  const std::string& path() const { return path_; }
  std::string checkpoint_path(int step) const;
  std::string trace_path() const;
  std::string manifest_path() const;

  void write_config(const KeyValueConfig& config);
  void write_manifest(const std::string& json);
  void append_trace(const TraceRecord& record);
  void write_dg(int generation, const ParallelCorpus& dg,
                const std::vector<std::optional<double>>& pcrs);

 private:
  std::string path_;
  int lock_fd_ = -1;
};

/// Decodes every source of the corpus with the policy; empty outputs are
/// dropped and counted into *dropped when given. Resulting pairs carry
/// origin=generated.
ParallelCorpus generation_step(const Policy& policy, const ParallelCorpus& corpus,
                               const DecodeConfig& decode, long* dropped = nullptr);

/// Phoneme count ratio per pair; nullopt marks an undefined ratio (zero
/// phonemes on either side), which downstream filtering always rejects.
std::vector<std::optional<double>> annotate(const ParallelCorpus& dg,
                                            const PhonemeCounter& src_counter,
                                            const PhonemeCounter& tgt_counter);

/// Order-preserving subset of dg whose ratio lies in [1-delta, 1+delta].
/// Throws ConfigError for delta outside (0,1), DataError on misaligned
/// annotations. The starvation floor is applied by the caller.
ParallelCorpus filter(const ParallelCorpus& dg,
                      const std::vector<std::optional<double>>& pcrs, double delta);

struct RlResult {
  Policy policy;
  Policy teacher;
  RlRunTrace trace;
};

/// Algorithm: base training, then for each generation step one decode of
/// the corpus plus one filtered fine-tune per schedule entry, then the
/// optional distillation step. Evaluates on config.eval_set after base
/// training and after every fine-tune and distill step; every record is
/// also appended to run_dir (when given) along with a checkpoint. Both
/// run_dir and log may be null.
RlResult run(const RlConfig& config, const ParallelCorpus& base_corpus, RunDir* run_dir,
             std::ostream* log);

}  // namespace isonmt

#endif  // ISONMT_RL_PIPELINE_HPP_
