// isonmt/policy.hpp

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
// The trainable autoregressive translation policy: a flat parameter vector
// plus the two vocabularies, with teacher-forced scoring, greedy and beam
// decoding, and bit-exact checkpoint persistence. A policy is immutable
// while decoding; parameter updates happen only between phases.

#ifndef ISONMT_POLICY_HPP_
#define ISONMT_POLICY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "isonmt/corpus.hpp"
#include "isonmt/model.hpp"

namespace isonmt {

struct Hyper {
  int layers = 2;
  int d_model = 64;
  int heads = 2;
  int d_ff = 128;
  int max_len = 32;

  bool operator==(const Hyper& other) const = default;
};

struct DecodeConfig {
  enum class Method { kGreedy, kBeam };
  Method method = Method::kGreedy;
  int beam_size = 4;
  /// Cap on generated tokens; 0 means the model maximum.
  int max_len = 0;
};

DecodeConfig::Method parse_decode_method(const std::string& name);

struct GenerationResult {
  std::vector<std::string> tokens;
  bool truncated = false;
};

class Policy {
 public:
  Policy(const Hyper& hyper, Vocabulary src_vocab, Vocabulary tgt_vocab);

  /// Weights and embeddings from N(0, 0.08), biases and norm offsets zero,
  /// norm gains one. Deterministic in the seed.
  void init_params(std::uint64_t seed);

  const Hyper& hyper() const { return hyper_; }
  const ModelDims& dims() const { return dims_; }
  const ParamLayout& layout() const { return layout_; }
  const Vocabulary& src_vocab() const { return src_vocab_; }
  const Vocabulary& tgt_vocab() const { return tgt_vocab_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// FNV-1a over the parameter bytes; pins teacher immutability in tests.
  std::uint64_t param_checksum() const;

  /// Distribution over the target vocabulary for the next token after
  /// y_prefix. Throws DataError when a sequence exceeds max_len.
  std::vector<double> next_token_distribution(const std::vector<int>& src_ids,
                                              const std::vector<int>& y_prefix) const;

  /// Sum over positions of log p(y_s | y_<s, x); y must end with EOS.
  double sequence_logprob(const std::vector<int>& src_ids,
                          const std::vector<int>& y) const;

  /// Decodes one source sentence. Deterministic; ties break toward the
  /// lowest token index. Beam results never score below greedy because the
  /// greedy hypothesis stays in the candidate pool. Output is capped at
  /// min(config.max_len, model max_len - 1) tokens; hitting the cap without
  /// EOS sets `truncated`.
  GenerationResult generate(const std::vector<std::string>& src_tokens,
                            const DecodeConfig& config) const;

  void save_checkpoint(const std::string& path) const;

  /// Restores a policy bit-exactly. When `expected` is given, a checkpoint
  /// with different hyperparameters raises CheckpointError.
  static Policy load_checkpoint(const std::string& path,
                                const Hyper* expected = nullptr);

 private:
  Hyper hyper_;
  Vocabulary src_vocab_;
  Vocabulary tgt_vocab_;
  ModelDims dims_;
  ParamLayout layout_;
  std::vector<double> params_;
};

}  // namespace isonmt

#endif  // ISONMT_POLICY_HPP_
