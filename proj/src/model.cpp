// src/model.cpp

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

#include "isonmt/model.hpp"

#include <algorithm>

namespace isonmt {

void ModelDims::validate() const {
  if (src_vocab < 4 || tgt_vocab < 4) {
    throw ConfigError("model dims: vocabularies must include the reserved tokens");
  }
  if (layers < 1 || d_model < 1 || heads < 1 || d_ff < 1) {
    throw ConfigError("model dims: layers, d_model, heads and d_ff must be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("model dims: d_model must be divisible by heads");
  }
  if (max_len < 2) throw ConfigError("model dims: max_len must be at least 2");
}

void ParamLayout::push(const std::string& name, int rows, int cols, BlockKind kind) {
  ParamBlock block;
  block.name = name;
  block.rows = rows;
  block.cols = cols;
  block.offset = total_;
  block.kind = kind;
  by_name_[name] = blocks_.size();
  total_ += block.count();
  blocks_.push_back(std::move(block));
}

void ParamLayout::push_layer_norm(const std::string& prefix, int d_model) {
  push(prefix + ".g", 1, d_model, BlockKind::kLnGain);
  push(prefix + ".b", 1, d_model, BlockKind::kLnBias);
}

void ParamLayout::push_attention(const std::string& prefix, int d_model) {
  for (const char* part : {"q", "k", "v", "o"}) {
    push(prefix + ".w" + part, d_model, d_model, BlockKind::kWeight);
    push(prefix + ".b" + part, 1, d_model, BlockKind::kBias);
  }
}

void ParamLayout::push_ffn(const std::string& prefix, int d_model, int d_ff) {
  push(prefix + ".w1", d_model, d_ff, BlockKind::kWeight);
  push(prefix + ".b1", 1, d_ff, BlockKind::kBias);
  push(prefix + ".w2", d_ff, d_model, BlockKind::kWeight);
  push(prefix + ".b2", 1, d_model, BlockKind::kBias);
}

ParamLayout::ParamLayout(const ModelDims& dims) {
  dims.validate();
  push("src_embed", dims.src_vocab, dims.d_model, BlockKind::kWeight);
  push("tgt_embed", dims.tgt_vocab, dims.d_model, BlockKind::kWeight);
  for (int l = 0; l < dims.layers; ++l) {
    const std::string prefix = "enc" + std::to_string(l) + ".";
    push_layer_norm(prefix + "ln1", dims.d_model);
    push_attention(prefix + "attn", dims.d_model);
    push_layer_norm(prefix + "ln2", dims.d_model);
    push_ffn(prefix + "ffn", dims.d_model, dims.d_ff);
  }
  push_layer_norm("enc_ln", dims.d_model);
  for (int l = 0; l < dims.layers; ++l) {
    const std::string prefix = "dec" + std::to_string(l) + ".";
    push_layer_norm(prefix + "ln1", dims.d_model);
    push_attention(prefix + "self", dims.d_model);
    push_layer_norm(prefix + "ln2", dims.d_model);
    push_attention(prefix + "cross", dims.d_model);
    push_layer_norm(prefix + "ln3", dims.d_model);
    push_ffn(prefix + "ffn", dims.d_model, dims.d_ff);
  }
  push_layer_norm("dec_ln", dims.d_model);
  push("out.w", dims.d_model, dims.tgt_vocab, BlockKind::kWeight);
  push("out.b", 1, dims.tgt_vocab, BlockKind::kBias);
}

const ParamBlock& ParamLayout::block(const std::string& name) const {
  return blocks_[index_of(name)];
}

size_t ParamLayout::index_of(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("unknown parameter block: " + name);
  return it->second;
}

Mat sinusoidal_positions(int max_len, int d_model) {
  Mat pe(max_len, d_model);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int c = 0; c < d_model; ++c) {
      const int pair = c / 2;
      const double rate = std::pow(10000.0, -2.0 * pair / d_model);
      const double angle = pos * rate;
      pe.at(pos, c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

namespace {

// Raw-pointer access to parameter blocks: the plain path runs per decode
// step, so it must not copy weight matrices.
struct PlainModel {
  const ModelDims& dims;
  const ParamLayout& layout;
  const double* params;

  const double* bp(const std::string& name) const {
    return params + layout.block(name).offset;
  }

  void check_length(size_t len) const {
    if (len == 0 || static_cast<int>(len) > dims.max_len) {
      throw DataError("sequence length " + std::to_string(len) +
                      " outside model range [1, " + std::to_string(dims.max_len) + "]");
    }
  }

  /// y = x W + b with W row-major [in_dim, out_dim].
  Mat linear(const Mat& x, const std::string& w_name, const std::string& b_name) const {
    const ParamBlock& wb = layout.block(w_name);
    const double* w = params + wb.offset;
    const double* b = bp(b_name);
    Mat y(x.rows, wb.cols);
    for (int i = 0; i < x.rows; ++i) {
      const double* xrow = x.row(i);
      double* yrow = y.row(i);
      for (int j = 0; j < wb.cols; ++j) yrow[j] = b[j];
      for (int k = 0; k < wb.rows; ++k) {
        const double s = xrow[k];
        const double* wrow = w + static_cast<size_t>(k) * wb.cols;
        for (int j = 0; j < wb.cols; ++j) yrow[j] += s * wrow[j];
      }
    }
    return y;
  }

  Mat layer_norm(const Mat& x, const std::string& prefix) const {
    const double* g = bp(prefix + ".g");
    const double* b = bp(prefix + ".b");
    const int n = x.cols;
    Mat y(x.rows, n);
    for (int r = 0; r < x.rows; ++r) {
      const double* xrow = x.row(r);
      double mean = 0.0;
      for (int c = 0; c < n; ++c) mean += xrow[c];
      mean /= n;
      double var = 0.0;
      for (int c = 0; c < n; ++c) var += (xrow[c] - mean) * (xrow[c] - mean);
      var /= n;
      const double inv = 1.0 / std::sqrt(var + 1e-5);
      double* yrow = y.row(r);
      for (int c = 0; c < n; ++c) yrow[c] = (xrow[c] - mean) * inv * g[c] + b[c];
    }
    return y;
  }

  Mat embed(const std::vector<int>& ids, const std::string& table, int first_pos) const {
    const ParamBlock& tb = layout.block(table);
    const double* t = params + tb.offset;
    const double scale = std::sqrt(static_cast<double>(dims.d_model));
    Mat x(static_cast<int>(ids.size()), dims.d_model);
    for (size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || ids[r] >= tb.rows) {
        throw DataError("token index " + std::to_string(ids[r]) +
                        " out of range for embedding " + table);
      }
      const int pos = first_pos + static_cast<int>(r);
      const double* trow = t + static_cast<size_t>(ids[r]) * dims.d_model;
      double* xrow = x.row(static_cast<int>(r));
      for (int c = 0; c < dims.d_model; ++c) {
        const int pair = c / 2;
        const double angle = pos * std::pow(10000.0, -2.0 * pair / dims.d_model);
        xrow[c] = trow[c] * scale + ((c % 2 == 0) ? std::sin(angle) : std::cos(angle));
      }
    }
    return x;
  }

  static void softmax_rows_inplace(Mat& scores, bool causal) {
    for (int r = 0; r < scores.rows; ++r) {
      const int width = causal ? r + 1 : scores.cols;
      double* row = scores.row(r);
      double zmax = row[0];
      for (int c = 1; c < width; ++c) zmax = std::max(zmax, row[c]);
      double total = 0.0;
      for (int c = 0; c < width; ++c) {
        row[c] = std::exp(row[c] - zmax);
        total += row[c];
      }
      for (int c = 0; c < width; ++c) row[c] /= total;
      for (int c = width; c < scores.cols; ++c) row[c] = 0.0;
    }
  }

  Mat attention(const Mat& query_in, const Mat& kv_in, const std::string& prefix,
                bool causal) const {
    const int dh = dims.head_dim();
    const Mat q = linear(query_in, prefix + ".wq", prefix + ".bq");
    const Mat k = linear(kv_in, prefix + ".wk", prefix + ".bk");
    const Mat v = linear(kv_in, prefix + ".wv", prefix + ".bv");
    Mat merged(q.rows, dims.d_model);
    for (int h = 0; h < dims.heads; ++h) {
      const int base = h * dh;
      Mat scores(q.rows, k.rows);
      for (int i = 0; i < q.rows; ++i) {
        const double* qrow = q.row(i) + base;
        double* srow = scores.row(i);
        for (int j = 0; j < k.rows; ++j) {
          const double* krow = k.row(j) + base;
          double acc = 0.0;
          for (int c = 0; c < dh; ++c) acc += qrow[c] * krow[c];
          srow[j] = acc / std::sqrt(static_cast<double>(dh));
        }
      }
      softmax_rows_inplace(scores, causal);
      for (int i = 0; i < q.rows; ++i) {
        const double* prow = scores.row(i);
        double* mrow = merged.row(i) + base;
        for (int c = 0; c < dh; ++c) mrow[c] = 0.0;
        for (int j = 0; j < k.rows; ++j) {
          const double p = prow[j];
          if (p == 0.0) continue;
          const double* vrow = v.row(j) + base;
          for (int c = 0; c < dh; ++c) mrow[c] += p * vrow[c];
        }
      }
    }
    return linear(merged, prefix + ".wo", prefix + ".bo");
  }

  Mat ffn(const Mat& x, const std::string& prefix) const {
    Mat hidden = linear(x, prefix + ".w1", prefix + ".b1");
    for (double& h : hidden.data) h = h > 0.0 ? h : 0.0;
    return linear(hidden, prefix + ".w2", prefix + ".b2");
  }

  static void add_into(Mat& dst, const Mat& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
  }

  Mat encode(const std::vector<int>& src_ids) const {
    check_length(src_ids.size());
    Mat x = embed(src_ids, "src_embed", 0);
    for (int l = 0; l < dims.layers; ++l) {
      const std::string prefix = "enc" + std::to_string(l) + ".";
      const Mat h = layer_norm(x, prefix + "ln1");
      add_into(x, attention(h, h, prefix + "attn", false));
      add_into(x, ffn(layer_norm(x, prefix + "ln2"), prefix + "ffn"));
    }
    return layer_norm(x, "enc_ln");
  }

  Mat decode_logits(const Mat& enc_out, const std::vector<int>& tgt_in) const {
    check_length(tgt_in.size());
    Mat x = embed(tgt_in, "tgt_embed", 0);
    for (int l = 0; l < dims.layers; ++l) {
      const std::string prefix = "dec" + std::to_string(l) + ".";
      const Mat h1 = layer_norm(x, prefix + "ln1");
      add_into(x, attention(h1, h1, prefix + "self", true));
      add_into(x, attention(layer_norm(x, prefix + "ln2"), enc_out, prefix + "cross", false));
      add_into(x, ffn(layer_norm(x, prefix + "ln3"), prefix + "ffn"));
    }
    return linear(layer_norm(x, "dec_ln"), "out.w", "out.b");
  }
};

}  // namespace

Mat encode_sequence(const ModelDims& dims, const ParamLayout& layout,
                    const std::vector<double>& params, const std::vector<int>& src_ids) {
  return PlainModel{dims, layout, params.data()}.encode(src_ids);
}

Mat decoder_logits(const ModelDims& dims, const ParamLayout& layout,
                   const std::vector<double>& params, const Mat& enc_out,
                   const std::vector<int>& tgt_in) {
  return PlainModel{dims, layout, params.data()}.decode_logits(enc_out, tgt_in);
}

DecodeState::DecodeState(const ModelDims& dims, const ParamLayout& layout,
                         const std::vector<double>& params,
                         const std::vector<int>& src_ids)
    : dims_(dims), layout_(&layout), params_(&params) {
  const PlainModel model{dims_, *layout_, params_->data()};
  enc_out_ = model.encode(src_ids);
  cross_k_.reserve(static_cast<size_t>(dims_.layers));
  cross_v_.reserve(static_cast<size_t>(dims_.layers));
  for (int l = 0; l < dims_.layers; ++l) {
    const std::string prefix = "dec" + std::to_string(l) + ".cross";
    cross_k_.push_back(model.linear(enc_out_, prefix + ".wk", prefix + ".bk"));
    cross_v_.push_back(model.linear(enc_out_, prefix + ".wv", prefix + ".bv"));
    self_k_.emplace_back(0, dims_.d_model);
    self_v_.emplace_back(0, dims_.d_model);
  }
}

std::vector<double> DecodeState::step(int token) {
  if (next_pos_ >= dims_.max_len) {
    throw DataError("decoder ran past the model's maximum length");
  }
  const PlainModel model{dims_, *layout_, params_->data()};
  const int dh = dims_.head_dim();
  Mat x = model.embed({token}, "tgt_embed", next_pos_);
  for (int l = 0; l < dims_.layers; ++l) {
    const std::string prefix = "dec" + std::to_string(l) + ".";
    const size_t lu = static_cast<size_t>(l);

    // Causal self-attention: this position's key/value rows join the cache,
    // then the single query row attends over the whole cache.
    const Mat h1 = model.layer_norm(x, prefix + "ln1");
    const Mat q = model.linear(h1, prefix + "self.wq", prefix + "self.bq");
    const Mat k_new = model.linear(h1, prefix + "self.wk", prefix + "self.bk");
    const Mat v_new = model.linear(h1, prefix + "self.wv", prefix + "self.bv");
    Mat& ck = self_k_[lu];
    Mat& cv = self_v_[lu];
    ck.data.insert(ck.data.end(), k_new.data.begin(), k_new.data.end());
    cv.data.insert(cv.data.end(), v_new.data.begin(), v_new.data.end());
    ck.rows += 1;
    cv.rows += 1;
    Mat merged(1, dims_.d_model);
    for (int h = 0; h < dims_.heads; ++h) {
      const int base = h * dh;
      std::vector<double> scores(static_cast<size_t>(ck.rows));
      double zmax = -1e300;
      for (int j = 0; j < ck.rows; ++j) {
        const double* qrow = q.row(0) + base;
        const double* krow = ck.row(j) + base;
        double acc = 0.0;
        for (int c = 0; c < dh; ++c) acc += qrow[c] * krow[c];
        scores[static_cast<size_t>(j)] = acc / std::sqrt(static_cast<double>(dh));
        zmax = std::max(zmax, scores[static_cast<size_t>(j)]);
      }
      double total = 0.0;
      for (double& s : scores) {
        s = std::exp(s - zmax);
        total += s;
      }
      double* mrow = merged.row(0) + base;
      for (int j = 0; j < ck.rows; ++j) {
        const double p = scores[static_cast<size_t>(j)] / total;
        const double* vrow = cv.row(j) + base;
        for (int c = 0; c < dh; ++c) mrow[c] += p * vrow[c];
      }
    }
    PlainModel::add_into(x, model.linear(merged, prefix + "self.wo", prefix + "self.bo"));

    // Cross-attention over the precomputed encoder keys/values.
    const Mat h2 = model.layer_norm(x, prefix + "ln2");
    const Mat qc = model.linear(h2, prefix + "cross.wq", prefix + "cross.bq");
    const Mat& kk = cross_k_[lu];
    const Mat& vv = cross_v_[lu];
    Mat cross_merged(1, dims_.d_model);
    for (int h = 0; h < dims_.heads; ++h) {
      const int base = h * dh;
      std::vector<double> scores(static_cast<size_t>(kk.rows));
      double zmax = -1e300;
      for (int j = 0; j < kk.rows; ++j) {
        const double* qrow = qc.row(0) + base;
        const double* krow = kk.row(j) + base;
        double acc = 0.0;
        for (int c = 0; c < dh; ++c) acc += qrow[c] * krow[c];
        scores[static_cast<size_t>(j)] = acc / std::sqrt(static_cast<double>(dh));
        zmax = std::max(zmax, scores[static_cast<size_t>(j)]);
      }
      double total = 0.0;
      for (double& s : scores) {
        s = std::exp(s - zmax);
        total += s;
      }
      double* mrow = cross_merged.row(0) + base;
      for (int j = 0; j < kk.rows; ++j) {
        const double p = scores[static_cast<size_t>(j)] / total;
        const double* vrow = vv.row(j) + base;
        for (int c = 0; c < dh; ++c) mrow[c] += p * vrow[c];
      }
    }
    PlainModel::add_into(x, model.linear(cross_merged, prefix + "cross.wo", prefix + "cross.bo"));

    PlainModel::add_into(x, model.ffn(model.layer_norm(x, prefix + "ln3"), prefix + "ffn"));
  }
  const Mat logits = model.linear(model.layer_norm(x, "dec_ln"), "out.w", "out.b");
  ++next_pos_;
  return logits.data;
}

}  // namespace isonmt
