// Copyright 2026 The vmfosr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Small dense vector/matrix helpers shared across the library. Everything is
// row-major double precision. The workloads are desk scale (dims and batch
// sizes in the tens to hundreds), so plain loops beat a heavyweight
// linear-algebra dependency here.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "vmfosr/errors.hpp"

namespace vmfosr {

using Vec = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  void set_row(std::size_t i, std::span<const double> values) {
    for (std::size_t j = 0; j < cols; ++j) (*this)(i, j) = values[j];
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw NumericError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw NumericError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale_inplace(std::span<double> v, double alpha) {
  for (double& x : v) x *= alpha;
}

/// W (out x in) applied to x (in) -> out
inline Vec matvec(const Matrix& W, std::span<const double> x) {
  if (W.cols != x.size()) throw NumericError("matvec: shape mismatch");
  Vec y(W.rows, 0.0);
  for (std::size_t i = 0; i < W.rows; ++i) y[i] = dot(W.row(i), x);
  return y;
}

/// W^T (in x out)^T applied to g (out) -> in. Used when propagating gradients
/// backwards through an affine layer.
inline Vec matvec_transpose(const Matrix& W, std::span<const double> g) {
  if (W.rows != g.size()) throw NumericError("matvec_transpose: shape mismatch");
  Vec y(W.cols, 0.0);
  for (std::size_t i = 0; i < W.rows; ++i) {
    const double gi = g[i];
    auto wi = W.row(i);
    for (std::size_t j = 0; j < W.cols; ++j) y[j] += wi[j] * gi;
  }
  return y;
}

/// A += alpha * g x^T (outer-product accumulation)
inline void add_outer(Matrix& A, double alpha, std::span<const double> g,
                      std::span<const double> x) {
  if (A.rows != g.size() || A.cols != x.size())
    throw NumericError("add_outer: shape mismatch");
  for (std::size_t i = 0; i < A.rows; ++i) {
    auto ai = A.row(i);
    const double s = alpha * g[i];
    for (std::size_t j = 0; j < A.cols; ++j) ai[j] += s * x[j];
  }
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace vmfosr
