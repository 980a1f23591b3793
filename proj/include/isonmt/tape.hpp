// isonmt/tape.hpp

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
// Reverse-mode automatic differentiation over matrix-valued nodes. A tape
// records the forward computation as an arena of nodes; backward() replays
// the recorded closures in reverse creation order, which is always a valid
// topological order. One tape serves one batch: parameter leaves registered
// once are shared by every example graph so their gradients accumulate.
//
// Closures capture node indices, never node references, because the arena
// vector may reallocate while the graph is still being built.

#ifndef ISONMT_TAPE_HPP_
#define ISONMT_TAPE_HPP_

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "isonmt/mat.hpp"

namespace isonmt {

template <typename S>
class TapeT {
 public:
  using Matrix = MatT<S>;

  /// Differentiable leaf (parameters, embedded inputs).
  int input(Matrix value) { return push(std::move(value)); }

  /// Non-differentiable leaf (positional encodings, masks).
  int constant(Matrix value) { return push(std::move(value)); }

  const Matrix& value(int id) const { return nodes_[static_cast<size_t>(id)].val; }
  const Matrix& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

  /// Elementwise sum of two equal-shape nodes.
  int add(int a, int b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (!va.same_shape(vb)) throw Error("tape add: shape mismatch");
    Matrix out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
    const int id = push(std::move(out));
    nodes_.back().back = [this, a, b, id] {
      const Matrix& g = grad(id);
      accumulate(a, g.data.data(), g.data.size());
      accumulate(b, g.data.data(), g.data.size());
    };
    return id;
  }

  /// Adds a [1,n] row vector to every row of a [m,n] node.
  int add_rowvec(int a, int v) {
    const Matrix& va = value(a);
    const Matrix& vv = value(v);
    if (vv.rows != 1 || vv.cols != va.cols) throw Error("tape add_rowvec: shape mismatch");
    Matrix out = va;
    for (int r = 0; r < out.rows; ++r) {
      S* row = out.row(r);
      const S* vrow = vv.row(0);
      for (int c = 0; c < out.cols; ++c) row[c] += vrow[c];
    }
    const int id = push(std::move(out));
    nodes_.back().back = [this, a, v, id] {
      const Matrix& g = grad(id);
      accumulate(a, g.data.data(), g.data.size());
      Matrix& gv = mutable_grad(v);
      for (int r = 0; r < g.rows; ++r) {
        const S* grow = g.row(r);
        for (int c = 0; c < g.cols; ++c) gv.data[static_cast<size_t>(c)] += grow[c];
      }
    };
    return id;
  }

  int scale(int a, S factor) {
    Matrix out = value(a);
    for (S& x : out.data) x *= factor;
    const int id = push(std::move(out));
    nodes_.back().back = [this, a, factor, id] {
      const Matrix& g = grad(id);
      Matrix& ga = mutable_grad(a);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += factor * g.data[i];
    };
    return id;
  }

  int matmul(int a, int b) {
    const int id = push(isonmt::matmul(value(a), value(b)));
    nodes_.back().back = [this, a, b, id] {
      const Matrix& g = grad(id);
      add_into(mutable_grad(a), isonmt::matmul_nt(g, value(b)));
      add_into(mutable_grad(b), isonmt::matmul_tn(value(a), g));
    };
    return id;
  }

  /// A Bᵗ, the attention-score product.
  int matmul_nt(int a, int b) {
    const int id = push(isonmt::matmul_nt(value(a), value(b)));
    nodes_.back().back = [this, a, b, id] {
      const Matrix& g = grad(id);
      add_into(mutable_grad(a), isonmt::matmul(g, value(b)));
      add_into(mutable_grad(b), isonmt::matmul_tn(g, value(a)));
    };
    return id;
  }

  int relu(int a) {
    Matrix out = value(a);
    for (S& x : out.data) x = x > S(0) ? x : S(0);
    const int id = push(std::move(out));
    nodes_.back().back = [this, a, id] {
      const Matrix& g = grad(id);
      const Matrix& va = value(a);
      Matrix& ga = mutable_grad(a);
      for (size_t i = 0; i < g.data.size(); ++i) {
        if (va.data[i] > S(0)) ga.data[i] += g.data[i];
      }
    };
    return id;
  }

  /// Row-wise layer normalization with learned gain and bias, both [1,n].
  int layer_norm(int a, int gain, int bias) {
    const Matrix& va = value(a);
    const Matrix& vg = value(gain);
    const Matrix& vb = value(bias);
    if (vg.rows != 1 || vb.rows != 1 || vg.cols != va.cols || vb.cols != va.cols) {
      throw Error("tape layer_norm: gain/bias shape mismatch");
    }
    const S eps = S(1e-5);
    const int n = va.cols;
    Matrix normalized(va.rows, n);  // pre-gain values, reused by backward
    std::vector<S> inv_sigma(static_cast<size_t>(va.rows));
    Matrix out(va.rows, n);
    for (int r = 0; r < va.rows; ++r) {
      const S* x = va.row(r);
      S mean = S(0);
      for (int c = 0; c < n; ++c) mean += x[c];
      mean /= S(n);
      S var = S(0);
      for (int c = 0; c < n; ++c) var += (x[c] - mean) * (x[c] - mean);
      var /= S(n);
      const S inv = S(1) / std::sqrt(var + eps);
      inv_sigma[static_cast<size_t>(r)] = inv;
      S* nr = normalized.row(r);
      S* orow = out.row(r);
      for (int c = 0; c < n; ++c) {
        nr[c] = (x[c] - mean) * inv;
        orow[c] = nr[c] * vg.row(0)[c] + vb.row(0)[c];
      }
    }
    const int id = push(std::move(out));
    nodes_.back().back = [this, a, gain, bias, id, normalized = std::move(normalized),
                          inv_sigma = std::move(inv_sigma), n] {
      const Matrix& g = grad(id);
      const Matrix& vg = value(gain);
      Matrix& ga = mutable_grad(a);
      Matrix& ggain = mutable_grad(gain);
      Matrix& gbias = mutable_grad(bias);
      for (int r = 0; r < g.rows; ++r) {
        const S* grow = g.row(r);
        const S* nr = normalized.row(r);
        S mean_h = S(0), mean_hn = S(0);
        for (int c = 0; c < n; ++c) {
          const S h = grow[c] * vg.row(0)[c];
          mean_h += h;
          mean_hn += h * nr[c];
          ggain.row(0)[c] += grow[c] * nr[c];
          gbias.row(0)[c] += grow[c];
        }
        mean_h /= S(n);
        mean_hn /= S(n);
        const S inv = inv_sigma[static_cast<size_t>(r)];
        S* garow = ga.row(r);
        for (int c = 0; c < n; ++c) {
          const S h = grow[c] * vg.row(0)[c];
          garow[c] += (h - mean_h - nr[c] * mean_hn) * inv;
        }
      }
    };
    return id;
  }

  /// Row-wise softmax; with causal=true (square input) row i only attends to
  /// columns 0..i and the rest stay exactly zero.
  int softmax_rows(int a, bool causal) {
    const Matrix& va = value(a);
    if (causal && va.rows != va.cols) throw Error("tape softmax_rows: causal mask needs a square matrix");
    Matrix probs(va.rows, va.cols);
    for (int r = 0; r < va.rows; ++r) {
      const int width = causal ? r + 1 : va.cols;
      const S* zrow = va.row(r);
      S* prow = probs.row(r);
      S zmax = zrow[0];
      for (int c = 1; c < width; ++c) zmax = std::max(zmax, zrow[c]);
      S total = S(0);
      for (int c = 0; c < width; ++c) {
        prow[c] = std::exp(zrow[c] - zmax);
        total += prow[c];
      }
      for (int c = 0; c < width; ++c) prow[c] /= total;
    }
    const int id = push(std::move(probs));
    nodes_.back().back = [this, a, id, causal] {
      const Matrix& g = grad(id);
      const Matrix& p = value(id);
      Matrix& ga = mutable_grad(a);
      for (int r = 0; r < g.rows; ++r) {
        const int width = causal ? r + 1 : g.cols;
        const S* grow = g.row(r);
        const S* prow = p.row(r);
        S dot = S(0);
        for (int c = 0; c < width; ++c) dot += grow[c] * prow[c];
        S* garow = ga.row(r);
        for (int c = 0; c < width; ++c) garow[c] += prow[c] * (grow[c] - dot);
      }
    };
    return id;
  }

  /// Columns [begin, begin+width) of a node; the per-head view of Q, K, V.
  int slice_cols(int a, int begin, int width) {
    const Matrix& va = value(a);
    if (begin < 0 || width < 1 || begin + width > va.cols) {
      throw Error("tape slice_cols: range out of bounds");
    }
    Matrix out(va.rows, width);
    for (int r = 0; r < va.rows; ++r) {
      const S* src = va.row(r) + begin;
      S* dst = out.row(r);
      for (int c = 0; c < width; ++c) dst[c] = src[c];
    }
    const int id = push(std::move(out));
    nodes_.back().back = [this, a, id, begin, width] {
      const Matrix& g = grad(id);
      Matrix& ga = mutable_grad(a);
      for (int r = 0; r < g.rows; ++r) {
        const S* grow = g.row(r);
        S* garow = ga.row(r) + begin;
        for (int c = 0; c < width; ++c) garow[c] += grow[c];
      }
    };
    return id;
  }

  /// Horizontal concatenation of equal-height nodes; merges head outputs.
  int concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw Error("tape concat_cols: no parts");
    const int rows = value(parts[0]).rows;
    int total_cols = 0;
    for (int part : parts) {
      if (value(part).rows != rows) throw Error("tape concat_cols: row mismatch");
      total_cols += value(part).cols;
    }
    Matrix out(rows, total_cols);
    int offset = 0;
    for (int part : parts) {
      const Matrix& vp = value(part);
      for (int r = 0; r < rows; ++r) {
        const S* src = vp.row(r);
        S* dst = out.row(r) + offset;
        for (int c = 0; c < vp.cols; ++c) dst[c] = src[c];
      }
      offset += vp.cols;
    }
    const int id = push(std::move(out));
    nodes_.back().back = [this, parts, id] {
      const Matrix& g = grad(id);
      int off = 0;
      for (int part : parts) {
        Matrix& gp = mutable_grad(part);
        for (int r = 0; r < g.rows; ++r) {
          const S* grow = g.row(r) + off;
          S* gprow = gp.row(r);
          for (int c = 0; c < gp.cols; ++c) gprow[c] += grow[c];
        }
        off += gp.cols;
      }
    };
    return id;
  }

  /// Stacks the given rows of a table node; the embedding lookup.
  int gather_rows(int table, std::vector<int> rows) {
    const Matrix& vt = value(table);
    Matrix out(static_cast<int>(rows.size()), vt.cols);
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= vt.rows) throw Error("tape gather_rows: row out of range");
      const S* src = vt.row(rows[r]);
      S* dst = out.row(static_cast<int>(r));
      for (int c = 0; c < vt.cols; ++c) dst[c] = src[c];
    }
    const int id = push(std::move(out));
    nodes_.back().back = [this, table, id, rows = std::move(rows)] {
      const Matrix& g = grad(id);
      Matrix& gt = mutable_grad(table);
      for (size_t r = 0; r < rows.size(); ++r) {
        const S* grow = g.row(static_cast<int>(r));
        S* gtrow = gt.row(rows[r]);
        for (int c = 0; c < g.cols; ++c) gtrow[c] += grow[c];
      }
    };
    return id;
  }

  /// Scalar node: sum over rows of the negative log softmax probability of
  /// each row's target column. The fused backward is softmax minus one-hot.
  int cross_entropy_sum(int logits, std::vector<int> targets) {
    const Matrix& z = value(logits);
    if (static_cast<int>(targets.size()) != z.rows) {
      throw Error("tape cross_entropy_sum: one target per row required");
    }
    Matrix probs(z.rows, z.cols);
    S loss = S(0);
    for (int r = 0; r < z.rows; ++r) {
      const int t = targets[static_cast<size_t>(r)];
      if (t < 0 || t >= z.cols) throw Error("tape cross_entropy_sum: target out of range");
      const S* zrow = z.row(r);
      S zmax = zrow[0];
      for (int c = 1; c < z.cols; ++c) zmax = std::max(zmax, zrow[c]);
      S total = S(0);
      S* prow = probs.row(r);
      for (int c = 0; c < z.cols; ++c) {
        prow[c] = std::exp(zrow[c] - zmax);
        total += prow[c];
      }
      for (int c = 0; c < z.cols; ++c) prow[c] /= total;
      loss += std::log(total) + zmax - zrow[t];
    }
    Matrix out(1, 1);
    out.at(0, 0) = loss;
    const int id = push(std::move(out));
    nodes_.back().back = [this, logits, id, probs = std::move(probs),
                          targets = std::move(targets)] {
      const S seed = grad(id).at(0, 0);
      if (seed == S(0)) return;
      Matrix& gz = mutable_grad(logits);
      for (int r = 0; r < probs.rows; ++r) {
        const S* prow = probs.row(r);
        S* grow = gz.row(r);
        for (int c = 0; c < probs.cols; ++c) grow[c] += seed * prow[c];
        grow[targets[static_cast<size_t>(r)]] -= seed;
      }
    };
    return id;
  }

  /// Scalar node: sum over rows of KL(softmax(logits row) || teacher row).
  /// The teacher matrix is a constant; its entries are floored at 1e-9
  /// before the log ratio so zero teacher mass stays finite.
  int kl_sum_vs_const(int logits, Matrix teacher) {
    const Matrix& z = value(logits);
    if (!z.same_shape(teacher)) throw Error("tape kl_sum_vs_const: shape mismatch");
    const S floor = S(1e-9);
    Matrix probs(z.rows, z.cols);
    std::vector<S> row_kl(static_cast<size_t>(z.rows), S(0));
    S loss = S(0);
    for (int r = 0; r < z.rows; ++r) {
      const S* zrow = z.row(r);
      S zmax = zrow[0];
      for (int c = 1; c < z.cols; ++c) zmax = std::max(zmax, zrow[c]);
      S total = S(0);
      S* prow = probs.row(r);
      for (int c = 0; c < z.cols; ++c) {
        prow[c] = std::exp(zrow[c] - zmax);
        total += prow[c];
      }
      S kl = S(0);
      for (int c = 0; c < z.cols; ++c) {
        prow[c] /= total;
        if (prow[c] > S(0)) {
          kl += prow[c] * std::log(prow[c] / std::max(teacher.at(r, c), floor));
        }
      }
      row_kl[static_cast<size_t>(r)] = kl;
      loss += kl;
    }
    Matrix out(1, 1);
    out.at(0, 0) = loss;
    const int id = push(std::move(out));
    nodes_.back().back = [this, logits, id, probs = std::move(probs),
                          teacher = std::move(teacher), row_kl = std::move(row_kl)] {
      const S seed = grad(id).at(0, 0);
      if (seed == S(0)) return;
      const S floor = S(1e-9);
      Matrix& gz = mutable_grad(logits);
      for (int r = 0; r < probs.rows; ++r) {
        const S* prow = probs.row(r);
        const S kl = row_kl[static_cast<size_t>(r)];
        S* grow = gz.row(r);
        for (int c = 0; c < probs.cols; ++c) {
          if (prow[c] <= S(0)) continue;
          const S log_ratio = std::log(prow[c] / std::max(teacher.at(r, c), floor));
          grow[c] += seed * prow[c] * (log_ratio - kl);
        }
      }
    };
    return id;
  }

  /// Seeds the given scalar roots and replays every closure in reverse
  /// creation order. Intended to run once per tape.
  void backward(const std::vector<std::pair<int, S>>& roots) {
    for (const auto& [id, seed] : roots) {
      Matrix& g = mutable_grad(id);
      if (g.rows != 1 || g.cols != 1) throw Error("tape backward: root must be scalar");
      g.at(0, 0) += seed;
    }
    for (size_t i = nodes_.size(); i > 0; --i) {
      if (nodes_[i - 1].back) nodes_[i - 1].back();
    }
  }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::function<void()> back;
  };

  std::vector<Node> nodes_;

  int push(Matrix val) {
    Node node;
    node.grad = Matrix(val.rows, val.cols);
    node.val = std::move(val);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Matrix& mutable_grad(int id) { return nodes_[static_cast<size_t>(id)].grad; }

  void accumulate(int id, const S* values, size_t count) {
    Matrix& g = mutable_grad(id);
    for (size_t i = 0; i < count; ++i) g.data[i] += values[i];
  }

  static void add_into(Matrix& dst, const Matrix& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
  }
};

using Tape = TapeT<double>;

}  // namespace isonmt

#endif  // ISONMT_TAPE_HPP_
