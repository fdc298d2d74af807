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

// Spherical alignment loss and class-direction orthogonality regularizer.
//
// Embeddings z and class directions mu live on the unit sphere in R^p. The
// class posterior is a temperature-scaled softmax over cosine similarities,
//
//   P_k(z) = exp(z.mu_k / tau) / sum_j exp(z.mu_j / tau),
//
// and the alignment loss is the cross entropy between P and a soft label row
// S (hard labels are the one-hot special case). The regularizer pushes the
// pairwise class cosines toward zero:
//
//   R_Ortho = log( (1 / (C^2 - C)) * sum_{i != j} exp((mu_i . mu_j)^2 / tau) ).
//
// All gradients here are closed form; gradcheck.hpp verifies them against
// central differences.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/numerics.hpp"

namespace vmfosr::losses {

// Counter of embedding-vs-class-direction similarity evaluations, used by
// tests to pin the loss's cost at exactly batch_size * n_classes dot
// products. thread_local so concurrent test shards cannot race it.
inline thread_local std::uint64_t g_similarity_dots = 0;

inline void reset_similarity_count() { g_similarity_dots = 0; }
inline std::uint64_t similarity_count() { return g_similarity_dots; }

/// Similarity row s_k = z . mu_k against every class direction. Each entry
/// bumps the instrumentation counter once.
inline Vec class_similarities(std::span<const double> z, const Matrix& directions) {
  if (z.size() != directions.cols)
    throw NumericError("class_similarities: embedding and direction dims differ");
  if (directions.rows == 0) throw NumericError("class_similarities: no classes");
  Vec s(directions.rows);
  for (std::size_t k = 0; k < directions.rows; ++k) {
    s[k] = dot(z, directions.row(k));
    ++g_similarity_dots;
  }
  return s;
}

/// Class posterior P(z): softmax over class_similarities(z) / tau.
inline Vec posterior(std::span<const double> z, const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("posterior: tau must be positive");
  const Vec s = class_similarities(z, directions);
  return numerics::softmax(s, tau);
}

namespace detail {

inline void check_soft_row(std::span<const double> soft) {
  double total = 0.0;
  for (double v : soft) {
    if (!(v >= 0.0)) throw NumericError("soft label entries must be >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw NumericError("soft label row sums to zero");
}

/// Per-sample loss from a precomputed similarity row:
///   L = -sum_k S_k * log P_k, with S the mass-normalized soft row.
/// Written literally over log-probabilities so tests can compare it with the
/// alignment + uniformity decomposition computed by separate code paths.
inline double sample_loss_from_similarities(std::span<const double> s,
                                            std::span<const double> soft, double tau) {
  check_soft_row(soft);
  double mass = 0.0;
  for (double v : soft) mass += v;
  Vec scaled(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) scaled[k] = s[k] / tau;
  const double lse = numerics::log_sum_exp(scaled);
  double loss = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k)
    loss -= (soft[k] / mass) * (scaled[k] - lse);
  return loss;
}

}  // namespace detail

/// Row-normalized soft labels: S_ik = y_ik / sum_j y_ij. Rows must be
/// nonnegative with positive mass.
inline Matrix label_similarity(const Matrix& soft_labels) {
  Matrix s = soft_labels;
  for (std::size_t i = 0; i < s.rows; ++i) {
    auto row = s.row(i);
    detail::check_soft_row(row);
    double mass = 0.0;
    for (double v : row) mass += v;
    for (double& v : row) v /= mass;
  }
  return s;
}

/// Hard-label loss for one sample: -log P_target(z).
inline double vmfal_hard(std::span<const double> z, const Matrix& directions,
                         std::size_t target, double tau) {
  if (!(tau > 0.0)) throw ConfigError("vmfal_hard: tau must be positive");
  if (target >= directions.rows) throw NumericError("vmfal_hard: target out of range");
  const Vec s = class_similarities(z, directions);
  Vec soft(directions.rows, 0.0);
  soft[target] = 1.0;
  return detail::sample_loss_from_similarities(s, soft, tau);
}

/// Batch hard-label loss: mean over samples of -log P at the target class.
inline double vmfal_hard(const Matrix& embeddings, const std::vector<std::size_t>& targets,
                         const Matrix& directions, double tau) {
  if (embeddings.rows == 0) throw NumericError("vmfal_hard: empty batch");
  if (embeddings.rows != targets.size())
    throw NumericError("vmfal_hard: batch and target counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < embeddings.rows; ++i)
    total += vmfal_hard(embeddings.row(i), directions, targets[i], tau);
  return total / static_cast<double>(embeddings.rows);
}

/// Soft-label loss for one sample. The soft row is normalized to unit mass
/// internally, so unnormalized accumulations of label vectors are accepted.
inline double vmfal_sample(std::span<const double> z, std::span<const double> soft,
                           const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("vmfal_sample: tau must be positive");
  if (soft.size() != directions.rows)
    throw NumericError("vmfal_sample: soft label width != n_classes");
  const Vec s = class_similarities(z, directions);
  return detail::sample_loss_from_similarities(s, soft, tau);
}

/// Batch soft-label loss: mean of vmfal_sample over rows. Evaluates exactly
/// embeddings.rows * directions.rows similarity dot products.
inline double vmfal_soft(const Matrix& embeddings, const Matrix& soft_labels,
                         const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("vmfal_soft: tau must be positive");
  if (embeddings.rows == 0) throw NumericError("vmfal_soft: empty batch");
  if (embeddings.rows != soft_labels.rows)
    throw NumericError("vmfal_soft: embeddings and soft labels disagree on batch size");
  if (soft_labels.cols != directions.rows)
    throw NumericError("vmfal_soft: soft label width != n_classes");
  double total = 0.0;
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    const Vec s = class_similarities(embeddings.row(i), directions);
    total += detail::sample_loss_from_similarities(s, soft_labels.row(i), tau);
  }
  return total / static_cast<double>(embeddings.rows);
}

/// Alignment half of the per-sample decomposition:
///   -(1/tau) * sum_k S_k * (z . mu_k), S mass-normalized.
inline double alignment_term(std::span<const double> z, std::span<const double> soft,
                             const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("alignment_term: tau must be positive");
  if (soft.size() != directions.rows)
    throw NumericError("alignment_term: soft label width != n_classes");
  detail::check_soft_row(soft);
  double mass = 0.0;
  for (double v : soft) mass += v;
  const Vec s = class_similarities(z, directions);
  double acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) acc += (soft[k] / mass) * s[k];
  return -acc / tau;
}

/// Uniformity half of the per-sample decomposition:
///   log sum_k exp(z . mu_k / tau).
inline double uniformity_term(std::span<const double> z, const Matrix& directions,
                              double tau) {
  if (!(tau > 0.0)) throw ConfigError("uniformity_term: tau must be positive");
  const Vec s = class_similarities(z, directions);
  Vec scaled(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) scaled[k] = s[k] / tau;
  return numerics::log_sum_exp(scaled);
}

/// Per-sample loss split into its two spherical pulls; the pair sums to
/// vmfal_sample up to floating-point association:
///   alignment pulls z toward the label's direction mix,
///   uniformity pushes z away from all directions at once.
inline std::pair<double, double> decompose_alignment_uniformity(
    std::span<const double> z, std::span<const double> soft, const Matrix& directions,
    double tau) {
  return {alignment_term(z, soft, directions, tau), uniformity_term(z, directions, tau)};
}

/// Gradient of the per-sample loss with respect to the embedding:
///   dL/dz = -(1/tau) * sum_k (S_k - P_k) * mu_k.
inline Vec vmfal_grad_z(std::span<const double> z, std::span<const double> soft,
                        const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("vmfal_grad_z: tau must be positive");
  if (soft.size() != directions.rows)
    throw NumericError("vmfal_grad_z: soft label width != n_classes");
  detail::check_soft_row(soft);
  double mass = 0.0;
  for (double v : soft) mass += v;
  const Vec p = posterior(z, directions, tau);
  Vec grad(z.size(), 0.0);
  for (std::size_t k = 0; k < directions.rows; ++k) {
    const double w = -(soft[k] / mass - p[k]) / tau;
    axpy(w, directions.row(k), grad);
  }
  return grad;
}

/// Gradient of the batch-mean loss with respect to the class directions:
///   dL/dmu_c = (1/N) * sum_i (P_ic - S_ic) * z_i / tau.
inline Matrix vmfal_grad_embeddings(const Matrix& embeddings, const Matrix& soft_labels,
                                    const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("vmfal_grad_embeddings: tau must be positive");
  if (embeddings.rows == 0) throw NumericError("vmfal_grad_embeddings: empty batch");
  if (embeddings.rows != soft_labels.rows || soft_labels.cols != directions.rows)
    throw NumericError("vmfal_grad_embeddings: shape mismatch");
  Matrix grad(directions.rows, directions.cols);
  const double inv_n = 1.0 / static_cast<double>(embeddings.rows);
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    const auto z = embeddings.row(i);
    const auto soft = soft_labels.row(i);
    detail::check_soft_row(soft);
    double mass = 0.0;
    for (double v : soft) mass += v;
    const Vec p = posterior(z, directions, tau);
    for (std::size_t c = 0; c < directions.rows; ++c) {
      const double w = inv_n * (p[c] - soft[c] / mass) / tau;
      axpy(w, z, grad.row(c));
    }
  }
  return grad;
}

/// Orthogonality regularizer over class directions. Computed with a
/// max-shifted log-mean-exp so the two boundary geometries are exact in
/// floating point: exactly 0 for an orthonormal set and exactly 1/tau when
/// all directions coincide.
inline double r_ortho(const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("r_ortho: tau must be positive");
  const std::size_t c = directions.rows;
  if (c < 2) throw NumericError("r_ortho: needs at least two class directions");
  const std::size_t n_pairs = c * (c - 1);
  Vec scaled;
  scaled.reserve(n_pairs);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      if (i == j) continue;
      const double d = dot(directions.row(i), directions.row(j));
      const double v = d * d / tau;
      if (!std::isfinite(v)) throw NumericError("r_ortho: non-finite similarity");
      scaled.push_back(v);
      m = std::max(m, v);
    }
  double s = 0.0;
  for (double v : scaled) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(n_pairs));
}

/// Gradient of r_ortho:
///   dR/dmu_a = (4 / (tau * W)) * sum_{b != a} exp(d_ab^2 / tau) * d_ab * mu_b,
/// with d_ab = mu_a . mu_b and W = sum_{i != j} exp(d_ij^2 / tau). The shared
/// max shift cancels between numerator and denominator.
inline Matrix r_ortho_grad(const Matrix& directions, double tau) {
  if (!(tau > 0.0)) throw ConfigError("r_ortho_grad: tau must be positive");
  const std::size_t c = directions.rows;
  if (c < 2) throw NumericError("r_ortho_grad: needs at least two class directions");
  Matrix d(c, c);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      if (i == j) continue;
      d(i, j) = dot(directions.row(i), directions.row(j));
      m = std::max(m, d(i, j) * d(i, j) / tau);
    }
  double w = 0.0;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (i != j) w += std::exp(d(i, j) * d(i, j) / tau - m);
  Matrix grad(c, directions.cols);
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t b = 0; b < c; ++b) {
      if (a == b) continue;
      const double coeff =
          4.0 / tau * std::exp(d(a, b) * d(a, b) / tau - m) * d(a, b) / w;
      axpy(coeff, directions.row(b), grad.row(a));
    }
  return grad;
}

struct LossBreakdown {
  double alignment = 0.0;  // batch soft-label loss
  double ortho = 0.0;      // regularizer (0 when disabled)
  double total = 0.0;
};

/// Full training objective: batch soft loss plus (optionally) r_ortho.
inline LossBreakdown total_loss(const Matrix& embeddings, const Matrix& soft_labels,
                                const Matrix& directions, double tau,
                                bool r_ortho_enabled) {
  LossBreakdown out;
  out.alignment = vmfal_soft(embeddings, soft_labels, directions, tau);
  out.ortho = r_ortho_enabled ? r_ortho(directions, tau) : 0.0;
  out.total = out.alignment + out.ortho;
  return out;
}

}  // namespace vmfosr::losses
