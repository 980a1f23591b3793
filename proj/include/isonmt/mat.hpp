// isonmt/mat.hpp

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
// Dense row-major matrices over a float or double scalar, with the three
// multiplication kernels the model needs. Loop order keeps the inner loop on
// contiguous rows.

#ifndef ISONMT_MAT_HPP_
#define ISONMT_MAT_HPP_

#include <vector>

#include "isonmt/common.hpp"

namespace isonmt {

template <typename S>
struct MatT {
  int rows = 0;
  int cols = 0;
  std::vector<S> data;

  MatT() = default;
  MatT(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, S(0)) {}

  S* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const S* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  S& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  const S& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const MatT& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

using Mat = MatT<double>;

template <typename S, typename T>
MatT<S> cast_mat(const MatT<T>& m) {
  MatT<S> out(m.rows, m.cols);
  for (size_t i = 0; i < m.data.size(); ++i) out.data[i] = static_cast<S>(m.data[i]);
  return out;
}

/// C = A B with A [m,p], B [p,n].
template <typename S>
MatT<S> matmul(const MatT<S>& a, const MatT<S>& b) {
  if (a.cols != b.rows) throw Error("matmul: inner dimensions disagree");
  MatT<S> c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    S* crow = c.row(i);
    const S* arow = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const S s = arow[k];
      const S* brow = b.row(k);
      for (int j = 0; j < b.cols; ++j) crow[j] += s * brow[j];
    }
  }
  return c;
}

/// C = A Bᵗ with A [m,p], B [n,p].
template <typename S>
MatT<S> matmul_nt(const MatT<S>& a, const MatT<S>& b) {
  if (a.cols != b.cols) throw Error("matmul_nt: inner dimensions disagree");
  MatT<S> c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const S* arow = a.row(i);
    S* crow = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const S* brow = b.row(j);
      S acc = S(0);
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

/// C = Aᵗ B with A [p,m], B [p,n].
template <typename S>
MatT<S> matmul_tn(const MatT<S>& a, const MatT<S>& b) {
  if (a.rows != b.rows) throw Error("matmul_tn: inner dimensions disagree");
  MatT<S> c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const S* arow = a.row(k);
    const S* brow = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      const S s = arow[i];
      S* crow = c.row(i);
      for (int j = 0; j < b.cols; ++j) crow[j] += s * brow[j];
    }
  }
  return c;
}

}  // namespace isonmt

#endif  // ISONMT_MAT_HPP_
