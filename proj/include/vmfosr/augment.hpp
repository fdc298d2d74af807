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

// Stage-one augmentation pipeline: Gaussian input jitter, label smoothing,
// Mixup, and unified-batch assembly. Every operation maps probability-vector
// labels to probability-vector labels.

#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/rng.hpp"

namespace vmfosr::augment {

/// Inputs paired with probability-vector labels. Holds the unified 2N-sample
/// training batch once label smoothing and Mixup have been applied.
struct SoftLabeledBatch {
  Matrix inputs;       // n x input_dim
  Matrix soft_labels;  // n x C, each row sums to 1
};

struct AugmentConfig {
  double sigma = 0.1;        // label-smoothing coefficient, in [0, 1)
  double jitter_std = 0.05;  // Gaussian input jitter
  bool mixup_enabled = true;
  bool ls_enabled = true;
  double beta_a = 1.0;  // Mixup lambda ~ Beta(beta_a, beta_b)
  double beta_b = 1.0;
};

/// Smoothed label vector: 1 - sigma at the target class, sigma/(C-1)
/// elsewhere. sigma = 0 gives a one-hot vector.
inline Vec label_smooth(std::size_t class_index, std::size_t C, double sigma) {
  if (!(sigma >= 0.0 && sigma < 1.0))
    throw ConfigError("label_smooth: sigma must lie in [0, 1)");
  if (C < 2) throw ConfigError("label_smooth: need at least two classes");
  if (class_index >= C) throw ConfigError("label_smooth: class index out of range");
  Vec y(C, sigma / static_cast<double>(C - 1));
  y[class_index] = 1.0 - sigma;
  return y;
}

/// Convex combination of two labeled samples with the same lambda on inputs
/// and labels.
inline std::pair<Vec, Vec> mixup_pair(std::span<const double> x_i,
                                      std::span<const double> y_i,
                                      std::span<const double> x_j,
                                      std::span<const double> y_j, double lambda) {
  if (x_i.size() != x_j.size() || y_i.size() != y_j.size())
    throw NumericError("mixup_pair: shape mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw NumericError("mixup_pair: lambda must lie in [0, 1]");
  Vec x(x_i.size());
  Vec y(y_i.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    x[k] = lambda * x_i[k] + (1.0 - lambda) * x_j[k];
  for (std::size_t k = 0; k < y.size(); ++k)
    y[k] = lambda * y_i[k] + (1.0 - lambda) * y_j[k];
  return {std::move(x), std::move(y)};
}

/// Isotropic Gaussian jitter applied to every input row. The desk-scale
/// stand-in for an image augmentation pass; applied once per batch before
/// Mixup. jitter_std = 0 is the identity.
inline Matrix apply_jitter(const Matrix& inputs, double jitter_std,
                           numerics::SeededRng& rng) {
  if (jitter_std < 0.0) throw ConfigError("apply_jitter: negative std");
  Matrix out = inputs;
  if (jitter_std == 0.0) return out;
  for (double& x : out.data) x += jitter_std * rng.normal();
  return out;
}

inline double sample_mixup_lambda(const AugmentConfig& config,
                                  numerics::SeededRng& rng) {
  // Beta(1,1) is uniform on [0,1]; take the exact identity instead of the
  // gamma-ratio path.
  if (config.beta_a == 1.0 && config.beta_b == 1.0) return rng.uniform();
  return rng.beta(config.beta_a, config.beta_b);
}

/// Unified augmented batch: the N input rows followed, when Mixup is
/// enabled, by N Mixup rows built over a random pairing of the batch with a
/// fresh lambda per pair. The input batch is expected to already be jittered
/// and label-smoothed.
inline SoftLabeledBatch build_unified_batch(const SoftLabeledBatch& batch,
                                            const AugmentConfig& config,
                                            numerics::SeededRng& rng) {
  const std::size_t n = batch.inputs.rows;
  if (n == 0) throw NumericError("build_unified_batch: empty batch");
  if (batch.soft_labels.rows != n)
    throw NumericError("build_unified_batch: inputs/labels row mismatch");
  if (!config.mixup_enabled) return batch;

  SoftLabeledBatch out;
  out.inputs = Matrix(2 * n, batch.inputs.cols);
  out.soft_labels = Matrix(2 * n, batch.soft_labels.cols);
  for (std::size_t i = 0; i < n; ++i) {
    out.inputs.set_row(i, batch.inputs.row(i));
    out.soft_labels.set_row(i, batch.soft_labels.row(i));
  }

  // Fisher-Yates pairing permutation.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i)
    std::swap(perm[i - 1], perm[rng.below(i)]);

  for (std::size_t i = 0; i < n; ++i) {
    const double lambda = sample_mixup_lambda(config, rng);
    auto [x, y] = mixup_pair(batch.inputs.row(i), batch.soft_labels.row(i),
                             batch.inputs.row(perm[i]), batch.soft_labels.row(perm[i]),
                             lambda);
    out.inputs.set_row(n + i, x);
    out.soft_labels.set_row(n + i, y);
  }
  return out;
}

}  // namespace vmfosr::augment
