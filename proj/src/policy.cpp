// src/policy.cpp

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

#include "isonmt/policy.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

#include "isonmt/rng.hpp"

namespace isonmt {

namespace {

ModelDims make_dims(const Hyper& hyper, int src_vocab, int tgt_vocab) {
  ModelDims dims;
  dims.src_vocab = src_vocab;
  dims.tgt_vocab = tgt_vocab;
  dims.layers = hyper.layers;
  dims.d_model = hyper.d_model;
  dims.heads = hyper.heads;
  dims.d_ff = hyper.d_ff;
  dims.max_len = hyper.max_len;
  return dims;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  double total = 0.0;
  for (double z : logits) total += std::exp(z - zmax);
  const double lse = zmax + std::log(total);
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

int argmax_lowest(const std::vector<double>& values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<size_t>(i)] > values[static_cast<size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace

DecodeConfig::Method parse_decode_method(const std::string& name) {
  if (name == "greedy") return DecodeConfig::Method::kGreedy;
  if (name == "beam") return DecodeConfig::Method::kBeam;
  throw ConfigError("unknown decode method: " + name + " (expected greedy or beam)");
}

Policy::Policy(const Hyper& hyper, Vocabulary src_vocab, Vocabulary tgt_vocab)
    : hyper_(hyper),
      src_vocab_(std::move(src_vocab)),
      tgt_vocab_(std::move(tgt_vocab)),
      dims_(make_dims(hyper, src_vocab_.size(), tgt_vocab_.size())),
      layout_(dims_),
      params_(layout_.total_params(), 0.0) {}

void Policy::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (const ParamBlock& block : layout_.blocks()) {
    double fill = 0.0;
    const bool random = block.kind == BlockKind::kWeight;
    if (block.kind == BlockKind::kLnGain) fill = 1.0;
    for (size_t i = 0; i < block.count(); ++i) {
      params_[block.offset + i] = random ? rng.normal(0.0, 0.08) : fill;
    }
  }
}

std::uint64_t Policy::param_checksum() const {
  std::uint64_t hash = 1469598103934665603ull;
  for (double value : params_) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      hash ^= (bits >> (8 * b)) & 0xffu;
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

std::vector<double> Policy::next_token_distribution(const std::vector<int>& src_ids,
                                                    const std::vector<int>& y_prefix) const {
  const Mat enc = encode_sequence(dims_, layout_, params_, src_ids);
  std::vector<int> tgt_in;
  tgt_in.reserve(y_prefix.size() + 1);
  tgt_in.push_back(Vocabulary::kBos);
  tgt_in.insert(tgt_in.end(), y_prefix.begin(), y_prefix.end());
  const Mat logits = decoder_logits(dims_, layout_, params_, enc, tgt_in);
  const double* row = logits.row(logits.rows - 1);
  std::vector<double> last(row, row + logits.cols);
  std::vector<double> logp = log_softmax(last);
  for (double& v : logp) v = std::exp(v);
  return logp;
}

double Policy::sequence_logprob(const std::vector<int>& src_ids,
                                const std::vector<int>& y) const {
  if (y.empty() || y.back() != Vocabulary::kEos) {
    throw DataError("sequence_logprob: target must end with EOS");
  }
  const Mat enc = encode_sequence(dims_, layout_, params_, src_ids);
  std::vector<int> tgt_in;
  tgt_in.reserve(y.size());
  tgt_in.push_back(Vocabulary::kBos);
  tgt_in.insert(tgt_in.end(), y.begin(), y.end() - 1);
  const Mat logits = decoder_logits(dims_, layout_, params_, enc, tgt_in);
  double total = 0.0;
  for (int r = 0; r < logits.rows; ++r) {
    const double* row = logits.row(r);
    std::vector<double> z(row, row + logits.cols);
    total += log_softmax(z)[static_cast<size_t>(y[static_cast<size_t>(r)])];
  }
  return total;
}

namespace {

struct DecodeRun {
  std::vector<int> ids;
  bool truncated = false;
};

DecodeRun greedy_decode(const ModelDims& dims, const ParamLayout& layout,
                        const std::vector<double>& params, const std::vector<int>& src_ids,
                        int cap) {
  DecodeRun run;
  DecodeState state(dims, layout, params, src_ids);
  std::vector<double> logits = state.step(Vocabulary::kBos);
  for (;;) {
    const int next = argmax_lowest(logits);
    if (next == Vocabulary::kEos) break;
    run.ids.push_back(next);
    if (static_cast<int>(run.ids.size()) >= cap) {
      run.truncated = true;
      break;
    }
    logits = state.step(next);
  }
  return run;
}

DecodeRun beam_decode(const ModelDims& dims, const ParamLayout& layout,
                      const std::vector<double>& params, const std::vector<int>& src_ids,
                      int cap, int beam_size) {
  struct Beam {
    std::vector<int> ids;
    double logprob = 0.0;
    DecodeState state;
    std::vector<double> logits;
  };
  struct Finished {
    std::vector<int> ids;
    double logprob = 0.0;
  };

  std::vector<Beam> live;
  {
    DecodeState state(dims, layout, params, src_ids);
    std::vector<double> logits = state.step(Vocabulary::kBos);
    live.push_back(Beam{{}, 0.0, std::move(state), std::move(logits)});
  }
  std::vector<Finished> finished;

  for (int t = 0; t < cap && !live.empty(); ++t) {
    struct Cand {
      double logprob;
      int parent;
      int token;
    };
    std::vector<Cand> cands;
    cands.reserve(live.size() * static_cast<size_t>(dims.tgt_vocab));
    for (int b = 0; b < static_cast<int>(live.size()); ++b) {
      const std::vector<double> logp = log_softmax(live[static_cast<size_t>(b)].logits);
      for (int tok = 0; tok < dims.tgt_vocab; ++tok) {
        cands.push_back(Cand{live[static_cast<size_t>(b)].logprob + logp[static_cast<size_t>(tok)],
                             b, tok});
      }
    }
    // Stable sort keeps (parent, token index) order among equal scores, so
    // ties resolve toward the lowest token index deterministically.
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.logprob > b.logprob; });
    std::vector<Beam> next_live;
    const size_t width = std::min(cands.size(), static_cast<size_t>(beam_size));
    for (size_t c = 0; c < width; ++c) {
      const Cand& cand = cands[c];
      const Beam& parent = live[static_cast<size_t>(cand.parent)];
      if (cand.token == Vocabulary::kEos) {
        finished.push_back(Finished{parent.ids, cand.logprob});
        continue;
      }
      Beam child{parent.ids, cand.logprob, parent.state, {}};
      child.ids.push_back(cand.token);
      child.logits = child.state.step(cand.token);
      next_live.push_back(std::move(child));
    }
    live = std::move(next_live);
  }

  DecodeRun run;
  if (!finished.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < finished.size(); ++i) {
      if (finished[i].logprob > finished[best].logprob) best = i;
    }
    run.ids = finished[best].ids;
    run.truncated = false;
    return run;
  }
  size_t best = 0;
  for (size_t i = 1; i < live.size(); ++i) {
    if (live[i].logprob > live[best].logprob) best = i;
  }
  run.ids = live[best].ids;
  run.truncated = true;
  return run;
}

}  // namespace

GenerationResult Policy::generate(const std::vector<std::string>& src_tokens,
                                  const DecodeConfig& config) const {
  if (config.beam_size < 1) throw ConfigError("beam_size must be at least 1");
  const std::vector<int> src_ids = src_vocab_.encode(src_tokens);
  int cap = dims_.max_len - 1;
  if (config.max_len > 0) cap = std::min(cap, config.max_len);

  DecodeRun run = greedy_decode(dims_, layout_, params_, src_ids, cap);
  if (config.method == DecodeConfig::Method::kBeam && config.beam_size > 1) {
    DecodeRun beam = beam_decode(dims_, layout_, params_, src_ids, cap, config.beam_size);
    // The greedy hypothesis stays in the pool: score both with EOS appended
    // and keep the better, so a pruned beam can never fall below greedy.
    std::vector<int> greedy_y = run.ids;
    greedy_y.push_back(Vocabulary::kEos);
    std::vector<int> beam_y = beam.ids;
    beam_y.push_back(Vocabulary::kEos);
    if (sequence_logprob(src_ids, beam_y) >= sequence_logprob(src_ids, greedy_y)) {
      run = std::move(beam);
    }
  }

  GenerationResult result;
  result.truncated = run.truncated;
  result.tokens.reserve(run.ids.size());
  for (int id : run.ids) {
    if (id < Vocabulary::kNumReserved) continue;
    result.tokens.push_back(tgt_vocab_.token_at(id));
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'I', 'S', 'O', 'N', 'M', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

std::uint32_t take_u32(std::istream& in, const std::string& what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw CheckpointError("checkpoint truncated while reading " + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t take_u64(std::istream& in, const std::string& what) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw CheckpointError("checkpoint truncated while reading " + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double take_f64(std::istream& in, const std::string& what) {
  const std::uint64_t bits = take_u64(in, what);
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void put_vocab(std::ostream& out, const Vocabulary& vocab) {
  for (int i = 0; i < vocab.size(); ++i) {
    const std::string& token = vocab.token_at(i);
    put_u32(out, static_cast<std::uint32_t>(token.size()));
    out.write(token.data(), static_cast<std::streamsize>(token.size()));
  }
}

Vocabulary take_vocab(std::istream& in, std::uint32_t count) {
  std::vector<std::string> tokens;
  tokens.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = take_u32(in, "vocabulary entry length");
    std::string token(len, '\0');
    if (!in.read(token.data(), static_cast<std::streamsize>(len))) {
      throw CheckpointError("checkpoint truncated while reading vocabulary entry");
    }
    tokens.push_back(std::move(token));
  }
  return Vocabulary::from_tokens(tokens);
}

}  // namespace

void Policy::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(hyper_.layers));
  put_u32(out, static_cast<std::uint32_t>(hyper_.d_model));
  put_u32(out, static_cast<std::uint32_t>(hyper_.heads));
  put_u32(out, static_cast<std::uint32_t>(hyper_.d_ff));
  put_u32(out, static_cast<std::uint32_t>(hyper_.max_len));
  put_u32(out, static_cast<std::uint32_t>(src_vocab_.size()));
  put_u32(out, static_cast<std::uint32_t>(tgt_vocab_.size()));
  put_vocab(out, src_vocab_);
  put_vocab(out, tgt_vocab_);
  put_u64(out, static_cast<std::uint64_t>(params_.size()));
  for (double value : params_) put_f64(out, value);
  if (!out) throw CheckpointError("write failure on checkpoint: " + path);
}

Policy Policy::load_checkpoint(const std::string& path, const Hyper* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("bad checkpoint magic in " + path);
  }
  const std::uint32_t version = take_u32(in, "format version");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Hyper hyper;
  hyper.layers = static_cast<int>(take_u32(in, "layers"));
  hyper.d_model = static_cast<int>(take_u32(in, "d_model"));
  hyper.heads = static_cast<int>(take_u32(in, "heads"));
  hyper.d_ff = static_cast<int>(take_u32(in, "d_ff"));
  hyper.max_len = static_cast<int>(take_u32(in, "max_len"));
  const std::uint32_t src_size = take_u32(in, "source vocabulary size");
  const std::uint32_t tgt_size = take_u32(in, "target vocabulary size");
  if (expected != nullptr && !(hyper == *expected)) {
    throw CheckpointError("checkpoint hyperparameters do not match the expected model shape");
  }
  Vocabulary src_vocab = take_vocab(in, src_size);
  Vocabulary tgt_vocab = take_vocab(in, tgt_size);
  Policy policy(hyper, std::move(src_vocab), std::move(tgt_vocab));
  const std::uint64_t count = take_u64(in, "parameter count");
  if (count != policy.params_.size()) {
    throw CheckpointError("checkpoint parameter count " + std::to_string(count) +
                          " does not match layout size " +
                          std::to_string(policy.params_.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    policy.params_[static_cast<size_t>(i)] = take_f64(in, "parameters");
  }
  char extra = '\0';
  if (in.read(&extra, 1)) {
    throw CheckpointError("trailing bytes after checkpoint payload in " + path);
  }
  return policy;
}

}  // namespace isonmt
