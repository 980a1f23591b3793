// isonmt/model.hpp

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
// The transformer encoder-decoder over a flat parameter vector. ParamLayout
// fixes the declaration order of every parameter block; checkpoints, the
// initializer, the tape graph and the plain inference path all read the flat
// vector through it. Pre-norm residual blocks with a final layer norm on both
// stacks; embeddings are scaled by sqrt(d_model) and offset by sinusoidal
// position codes.
//
// Two forward paths exist on purpose: a tape path used for training in
// either precision, and a double-only plain path for scoring and decoding
// (full recompute plus an incremental decoder with cached keys and values).
// Tests pin the two paths to each other.

#ifndef ISONMT_MODEL_HPP_
#define ISONMT_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "isonmt/mat.hpp"
#include "isonmt/tape.hpp"

namespace isonmt {

struct ModelDims {
  int src_vocab = 0;
  int tgt_vocab = 0;
  int layers = 2;
  int d_model = 64;
  int heads = 2;
  int d_ff = 128;
  int max_len = 32;

  void validate() const;
  int head_dim() const { return d_model / heads; }
};

enum class BlockKind { kWeight, kBias, kLnGain, kLnBias };

struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  size_t offset = 0;
  BlockKind kind = BlockKind::kWeight;
  size_t count() const { return static_cast<size_t>(rows) * cols; }
};

class ParamLayout {
 public:
  explicit ParamLayout(const ModelDims& dims);

  size_t total_params() const { return total_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(const std::string& name) const;
  size_t index_of(const std::string& name) const;

 private:
  std::vector<ParamBlock> blocks_;
  std::unordered_map<std::string, size_t> by_name_;
  size_t total_ = 0;

  void push(const std::string& name, int rows, int cols, BlockKind kind);
  void push_attention(const std::string& prefix, int d_model);
  void push_layer_norm(const std::string& prefix, int d_model);
  void push_ffn(const std::string& prefix, int d_model, int d_ff);
};

/// Sinusoidal position table [max_len, d_model].
Mat sinusoidal_positions(int max_len, int d_model);

// ---------------------------------------------------------------------------
// Tape path.

template <typename S>
class TapeTransformer {
 public:
  TapeTransformer(const ModelDims& dims, const ParamLayout& layout,
                  const std::vector<double>& params, TapeT<S>* tape)
      : dims_(dims), layout_(&layout), tape_(tape) {
    pe_ = cast_mat<S>(sinusoidal_positions(dims.max_len, dims.d_model));
    leaf_ids_.reserve(layout.blocks().size());
    for (const ParamBlock& b : layout.blocks()) {
      MatT<S> m(b.rows, b.cols);
      for (size_t i = 0; i < b.count(); ++i) {
        m.data[i] = static_cast<S>(params[b.offset + i]);
      }
      leaf_ids_.push_back(tape_->input(std::move(m)));
    }
  }

  /// Encoder output node [len(src_ids), d_model].
  int encode(const std::vector<int>& src_ids) {
    check_length(src_ids.size());
    int x = embed(src_ids, p("src_embed"));
    for (int l = 0; l < dims_.layers; ++l) {
      const std::string prefix = "enc" + std::to_string(l) + ".";
      int h = tape_->layer_norm(x, p(prefix + "ln1.g"), p(prefix + "ln1.b"));
      x = tape_->add(x, attention(h, h, prefix + "attn.", false));
      h = tape_->layer_norm(x, p(prefix + "ln2.g"), p(prefix + "ln2.b"));
      x = tape_->add(x, ffn(h, prefix + "ffn."));
    }
    return tape_->layer_norm(x, p("enc_ln.g"), p("enc_ln.b"));
  }

  /// Logits node [len(tgt_in), tgt_vocab] under causal self-attention.
  int decoder_logits(int enc_out, const std::vector<int>& tgt_in) {
    check_length(tgt_in.size());
    int x = embed(tgt_in, p("tgt_embed"));
    for (int l = 0; l < dims_.layers; ++l) {
      const std::string prefix = "dec" + std::to_string(l) + ".";
      int h = tape_->layer_norm(x, p(prefix + "ln1.g"), p(prefix + "ln1.b"));
      x = tape_->add(x, attention(h, h, prefix + "self.", true));
      h = tape_->layer_norm(x, p(prefix + "ln2.g"), p(prefix + "ln2.b"));
      x = tape_->add(x, attention(h, enc_out, prefix + "cross.", false));
      h = tape_->layer_norm(x, p(prefix + "ln3.g"), p(prefix + "ln3.b"));
      x = tape_->add(x, ffn(h, prefix + "ffn."));
    }
    x = tape_->layer_norm(x, p("dec_ln.g"), p("dec_ln.b"));
    return tape_->add_rowvec(tape_->matmul(x, p("out.w")), p("out.b"));
  }

  /// Adds the tape gradient of every parameter block into a flat vector.
  void accumulate_param_grads(std::vector<double>* grad) const {
    for (size_t i = 0; i < leaf_ids_.size(); ++i) {
      const ParamBlock& b = layout_->blocks()[i];
      const MatT<S>& g = tape_->grad(leaf_ids_[i]);
      for (size_t j = 0; j < b.count(); ++j) {
        (*grad)[b.offset + j] += static_cast<double>(g.data[j]);
      }
    }
  }

 private:
  ModelDims dims_;
  const ParamLayout* layout_;
  TapeT<S>* tape_;
  MatT<S> pe_;
  std::vector<int> leaf_ids_;

  int p(const std::string& name) const {
    return leaf_ids_[layout_->index_of(name)];
  }

  void check_length(size_t len) const {
    if (len == 0 || static_cast<int>(len) > dims_.max_len) {
      throw DataError("sequence length " + std::to_string(len) +
                      " outside model range [1, " + std::to_string(dims_.max_len) + "]");
    }
  }

  int embed(const std::vector<int>& ids, int table) {
    int x = tape_->gather_rows(table, ids);
    x = tape_->scale(x, static_cast<S>(std::sqrt(static_cast<double>(dims_.d_model))));
    MatT<S> pe_slice(static_cast<int>(ids.size()), dims_.d_model);
    for (size_t r = 0; r < ids.size(); ++r) {
      for (int c = 0; c < dims_.d_model; ++c) {
        pe_slice.at(static_cast<int>(r), c) = pe_.at(static_cast<int>(r), c);
      }
    }
    return tape_->add(x, tape_->constant(std::move(pe_slice)));
  }

  int linear(int x, const std::string& w, const std::string& b) {
    return tape_->add_rowvec(tape_->matmul(x, p(w)), p(b));
  }

  int attention(int query_in, int kv_in, const std::string& prefix, bool causal) {
    const int dh = dims_.head_dim();
    const int q = linear(query_in, prefix + "wq", prefix + "bq");
    const int k = linear(kv_in, prefix + "wk", prefix + "bk");
    const int v = linear(kv_in, prefix + "wv", prefix + "bv");
    std::vector<int> heads;
    heads.reserve(static_cast<size_t>(dims_.heads));
    for (int h = 0; h < dims_.heads; ++h) {
      const int qh = tape_->slice_cols(q, h * dh, dh);
      const int kh = tape_->slice_cols(k, h * dh, dh);
      const int vh = tape_->slice_cols(v, h * dh, dh);
      int scores = tape_->matmul_nt(qh, kh);
      scores = tape_->scale(scores, static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh))));
      const int probs = tape_->softmax_rows(scores, causal);
      heads.push_back(tape_->matmul(probs, vh));
    }
    const int merged = tape_->concat_cols(heads);
    return linear(merged, prefix + "wo", prefix + "bo");
  }

  int ffn(int x, const std::string& prefix) {
    const int hidden = tape_->relu(linear(x, prefix + "w1", prefix + "b1"));
    return linear(hidden, prefix + "w2", prefix + "b2");
  }
};

// ---------------------------------------------------------------------------
// Plain double path (no tape): scoring and decoding.

/// Encoder output [len(src_ids), d_model], full recompute.
Mat encode_sequence(const ModelDims& dims, const ParamLayout& layout,
                    const std::vector<double>& params, const std::vector<int>& src_ids);

/// Decoder logits [len(tgt_in), tgt_vocab], full recompute.
Mat decoder_logits(const ModelDims& dims, const ParamLayout& layout,
                   const std::vector<double>& params, const Mat& enc_out,
                   const std::vector<int>& tgt_in);

// Incremental decoder with per-layer key/value caches. step(token) appends
// one target position and returns the logits for the next one; feeding the
// same token sequence reproduces decoder_logits rows exactly. Copyable, so
// beam search can fork states.
class DecodeState {
 public:
  DecodeState(const ModelDims& dims, const ParamLayout& layout,
              const std::vector<double>& params, const std::vector<int>& src_ids);

  /// Number of target positions consumed so far.
  int length() const { return next_pos_; }

  std::vector<double> step(int token);

 private:
  ModelDims dims_;
  const ParamLayout* layout_;
  const std::vector<double>* params_;
  Mat enc_out_;
  std::vector<Mat> cross_k_, cross_v_;  // per layer, fixed after construction
  std::vector<Mat> self_k_, self_v_;    // per layer, one row appended per step
  int next_pos_ = 0;
};

}  // namespace isonmt

#endif  // ISONMT_MODEL_HPP_
