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

// Deterministic numerical primitives: normalization, stable softmax and
// log-sum-exp, sampling on the unit hypersphere (uniform and von
// Mises-Fisher), and a central finite-difference gradient oracle.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>

#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/rng.hpp"

namespace vmfosr::numerics {

inline constexpr double kNormEpsilon = 1e-12;

/// Scale v to unit Euclidean norm. Throws when the input is numerically
/// degenerate (norm below kNormEpsilon).
inline Vec l2_normalize(std::span<const double> v) {
  const double n = norm(v);
  if (!(n > kNormEpsilon))
    throw NumericError("l2_normalize: near-zero norm (" + std::to_string(n) + ")");
  Vec out(v.begin(), v.end());
  scale_inplace(out, 1.0 / n);
  return out;
}

/// log(sum_i exp(v_i)) with max-subtraction, safe for entries up to +-1e4.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw NumericError("log_sum_exp: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("log_sum_exp: non-finite input");
    m = std::max(m, v);
  }
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

/// softmax(v / tau). Entries are nonnegative and sum to one.
inline Vec softmax(std::span<const double> values, double temperature) {
  if (!(temperature > 0.0))
    throw NumericError("softmax: temperature must be positive");
  if (values.empty()) throw NumericError("softmax: empty input");
  Vec scaled(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) scaled[i] = values[i] / temperature;
  const double lse = log_sum_exp(scaled);
  Vec out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::exp(scaled[i] - lse);
  return out;
}

/// Uniform draw from the unit sphere in R^p: normalized isotropic Gaussian,
/// so the law is rotation invariant by construction.
inline Vec sample_uniform_sphere(std::size_t p, SeededRng& rng) {
  if (p < 2) throw NumericError("sample_uniform_sphere: dimension must be >= 2");
  for (;;) {
    Vec g = rng.normal_vector(p);
    if (norm(g) > kNormEpsilon) return l2_normalize(g);
  }
}

/// von Mises-Fisher draw on the unit sphere in R^p via the tangent-normal
/// decomposition: the cosine w of the angle to mu comes from Wood's
/// rejection sampler for the marginal, the tangent direction is uniform in
/// the orthogonal complement of mu. The density's normalization constant is
/// never evaluated.
inline Vec sample_vmf(std::span<const double> mu, double kappa, SeededRng& rng) {
  const std::size_t p = mu.size();
  if (p < 2) throw NumericError("sample_vmf: dimension must be >= 2");
  if (kappa < 0.0) throw NumericError("sample_vmf: kappa must be nonnegative");
  if (std::abs(norm(mu) - 1.0) > 1e-6)
    throw NumericError("sample_vmf: mu must be a unit vector");
  if (kappa == 0.0) return sample_uniform_sphere(p, rng);

  const double m = static_cast<double>(p - 1);
  // b = (-2k + sqrt(4k^2 + m^2)) / m, written in its cancellation-free form.
  const double b = m / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m * m));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m * std::log(1.0 - x0 * x0);

  double w = 0.0;
  for (;;) {
    const double z = rng.beta(m / 2.0, m / 2.0);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform();
    if (kappa * w + m * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }

  // Uniform tangent direction orthogonal to mu.
  Vec v;
  for (;;) {
    Vec g = rng.normal_vector(p);
    const double proj = dot(g, mu);
    for (std::size_t i = 0; i < p; ++i) g[i] -= proj * mu[i];
    if (norm(g) > kNormEpsilon) {
      v = l2_normalize(g);
      break;
    }
  }

  Vec out(p);
  const double t = std::sqrt(std::max(0.0, 1.0 - w * w));
  for (std::size_t i = 0; i < p; ++i) out[i] = w * mu[i] + t * v[i];
  return l2_normalize(out);
}

/// Central-difference gradient estimate of f at x with step h.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                                      const Vec& x, double h) {
  if (!(h >= 1e-7 && h <= 1e-3))
    throw NumericError("finite_difference_gradient: step outside [1e-7, 1e-3]");
  Vec grad(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_difference_gradient: non-finite evaluation");
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace vmfosr::numerics
