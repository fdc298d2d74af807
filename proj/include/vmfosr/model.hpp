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

// Model parameters and manual reverse-mode gradients.
//
// The network is a plain MLP encoder x -> f (dimension d), a single affine
// projection f -> u (dimension p) whose output is L2-normalized onto the
// sphere as z = u / ||u||, a learned matrix of unit-norm class directions
// (one row per known class), and a separate classifier head f -> logits used
// after representation learning. Backward passes are hand-written over the
// explicit layer composition; gradcheck.hpp holds them to central finite
// differences.

#include <cmath>
#include <cstdint>
#include <vector>

#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/numerics.hpp"
#include "vmfosr/rng.hpp"

namespace vmfosr::model {

enum class Activation { Tanh, Relu };

struct ModelConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_layers = {64, 64};  // {} = affine encoder
  std::size_t d = 32;  // encoder output width
  std::size_t p = 16;  // projection / sphere dimension
  std::size_t n_classes = 8;
  Activation activation = Activation::Tanh;
  double tau = 0.1;
  std::size_t classifier_hidden = 0;  // 0 = single affine head

  void validate() const {
    if (input_dim < 1 || d < 1 || p < 2)
      throw ConfigError("ModelConfig: need input_dim >= 1, d >= 1, p >= 2");
    for (auto w : hidden_layers)
      if (w < 1) throw ConfigError("ModelConfig: hidden widths must be >= 1");
    if (n_classes < 2) throw ConfigError("ModelConfig: need at least two classes");
    if (!(tau > 0.0)) throw ConfigError("ModelConfig: tau must be positive");
  }
};

struct Affine {
  Matrix W;  // out x in
  Vec b;     // out

  Affine() = default;
  Affine(std::size_t out, std::size_t in) : W(out, in), b(out, 0.0) {}
};

/// He-initialized affine layer: W entries ~ N(0, 2/fan_in), b = 0.
inline Affine kaiming_affine(std::size_t out, std::size_t in,
                             numerics::SeededRng& rng) {
  Affine a(out, in);
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  for (double& w : a.W.data) w = stddev * rng.normal();
  return a;
}

/// Class direction matrix: rows ~ N(0, 2/p) then normalized onto the sphere.
inline Matrix init_label_embeddings(std::size_t n_classes, std::size_t p,
                                    numerics::SeededRng& rng) {
  if (n_classes < 2 || p < 2)
    throw ConfigError("init_label_embeddings: need n_classes >= 2 and p >= 2");
  Matrix m(n_classes, p);
  const double stddev = std::sqrt(2.0 / static_cast<double>(p));
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (;;) {
      for (std::size_t j = 0; j < p; ++j) m(c, j) = stddev * rng.normal();
      if (norm(m.row(c)) > numerics::kNormEpsilon) break;
    }
    m.set_row(c, numerics::l2_normalize(m.row(c)));
  }
  return m;
}

/// Rescale every row of M to unit norm. Applied after each optimizer step on
/// the class directions.
inline void renormalize_embeddings(Matrix& m) {
  for (std::size_t c = 0; c < m.rows; ++c)
    m.set_row(c, numerics::l2_normalize(m.row(c)));
}

/// max_c | ||row_c|| - 1 |, the unit-row drift monitored every epoch.
inline double max_row_norm_deviation(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t c = 0; c < m.rows; ++c)
    worst = std::max(worst, std::abs(norm(m.row(c)) - 1.0));
  return worst;
}

struct ModelState {
  ModelConfig config;
  std::vector<Affine> encoder;     // hidden chain then final layer into R^d
  Affine projection;               // d -> p
  Matrix label_embeddings;         // n_classes x p, unit rows
  std::vector<Affine> classifier;  // d -> [classifier_hidden ->] n_classes
};

/// Fresh state with He-initialized layers. Parameter draw order is fixed
/// (encoder layers, projection, label embeddings, classifier), so one seed
/// pins every weight.
inline ModelState init_model(const ModelConfig& cfg, numerics::SeededRng& rng) {
  cfg.validate();
  ModelState state;
  state.config = cfg;
  std::size_t in = cfg.input_dim;
  for (auto width : cfg.hidden_layers) {
    state.encoder.push_back(kaiming_affine(width, in, rng));
    in = width;
  }
  state.encoder.push_back(kaiming_affine(cfg.d, in, rng));
  state.projection = kaiming_affine(cfg.p, cfg.d, rng);
  state.label_embeddings = init_label_embeddings(cfg.n_classes, cfg.p, rng);
  if (cfg.classifier_hidden > 0) {
    state.classifier.push_back(kaiming_affine(cfg.classifier_hidden, cfg.d, rng));
    state.classifier.push_back(kaiming_affine(cfg.n_classes, cfg.classifier_hidden, rng));
  } else {
    state.classifier.push_back(kaiming_affine(cfg.n_classes, cfg.d, rng));
  }
  return state;
}

namespace detail {

inline double activate(double v, Activation a) {
  return a == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
}

/// Derivative of the activation expressed through pre- and post-activation
/// values (tanh' = 1 - act^2; relu' from the sign of the pre-activation).
inline double activate_grad(double pre, double act, Activation a) {
  return a == Activation::Tanh ? 1.0 - act * act : (pre > 0.0 ? 1.0 : 0.0);
}

inline Vec affine_forward(const Affine& layer, std::span<const double> x) {
  Vec y = matvec(layer.W, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += layer.b[i];
  return y;
}

}  // namespace detail

/// Per-sample intermediate values kept for the backward pass.
struct ForwardCache {
  Vec input;
  std::vector<Vec> encoder_pre;  // affine outputs, per encoder layer
  std::vector<Vec> encoder_act;  // activations of hidden layers only
  Vec f;                         // encoder output
  Vec u;                         // projection output before normalization
  Vec z;                         // unit embedding
  double u_norm = 0.0;
};

/// Encoder forward pass: hidden affine+activation chain, then a final affine
/// into R^d with no activation (so a depth-zero encoder is exactly affine).
inline Vec encode(std::span<const double> x, const ModelState& state,
                  ForwardCache* cache = nullptr) {
  if (x.size() != state.config.input_dim)
    throw NumericError("encode: input width != input_dim");
  if (cache) {
    cache->input.assign(x.begin(), x.end());
    cache->encoder_pre.clear();
    cache->encoder_act.clear();
  }
  Vec cur(x.begin(), x.end());
  const std::size_t n_layers = state.encoder.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Vec pre = detail::affine_forward(state.encoder[l], cur);
    if (cache) cache->encoder_pre.push_back(pre);
    if (l + 1 < n_layers) {
      Vec act(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i)
        act[i] = detail::activate(pre[i], state.config.activation);
      if (cache) cache->encoder_act.push_back(act);
      cur = std::move(act);
    } else {
      cur = std::move(pre);
    }
  }
  if (cache) cache->f = cur;
  return cur;
}

/// Projection then L2 normalization onto the sphere.
inline Vec project_normalize(std::span<const double> f, const ModelState& state,
                             ForwardCache* cache = nullptr) {
  if (f.size() != state.config.d)
    throw NumericError("project_normalize: feature width != d");
  Vec u = detail::affine_forward(state.projection, f);
  const double n = norm(u);
  if (!(n > numerics::kNormEpsilon))
    throw NumericError("project_normalize: near-zero projection norm");
  Vec z = u;
  scale_inplace(z, 1.0 / n);
  if (cache) {
    cache->u = std::move(u);
    cache->u_norm = n;
    cache->z = z;
  }
  return z;
}

/// Full embedding pass x -> z, filling the cache when provided.
inline Vec embed(std::span<const double> x, const ModelState& state,
                 ForwardCache* cache = nullptr) {
  Vec f = encode(x, state, cache);
  return project_normalize(f, state, cache);
}

/// Classifier head on unnormalized encoder features.
struct ClassifierCache {
  Vec input;
  Vec hidden_pre;
  Vec hidden_act;
};

inline Vec classify(std::span<const double> f, const ModelState& state,
                    ClassifierCache* cache = nullptr) {
  if (f.size() != state.config.d)
    throw NumericError("classify: feature width != d");
  if (cache) cache->input.assign(f.begin(), f.end());
  if (state.classifier.size() == 1)
    return detail::affine_forward(state.classifier[0], f);
  Vec pre = detail::affine_forward(state.classifier[0], f);
  Vec act(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i)
    act[i] = detail::activate(pre[i], state.config.activation);
  if (cache) {
    cache->hidden_pre = pre;
    cache->hidden_act = act;
  }
  return detail::affine_forward(state.classifier[1], act);
}

/// Gradient accumulator shaped like the trainable parameters.
struct Gradients {
  std::vector<Affine> encoder;
  Affine projection;
  Matrix label_embeddings;
  std::vector<Affine> classifier;
};

inline Gradients make_zero_gradients(const ModelState& state) {
  Gradients g;
  for (const auto& layer : state.encoder)
    g.encoder.emplace_back(layer.W.rows, layer.W.cols);
  g.projection = Affine(state.projection.W.rows, state.projection.W.cols);
  g.label_embeddings = Matrix(state.label_embeddings.rows, state.label_embeddings.cols);
  for (const auto& layer : state.classifier)
    g.classifier.emplace_back(layer.W.rows, layer.W.cols);
  return g;
}

namespace detail {

/// y = Wx + b backward: given g = dL/dy, accumulate dW += g x^T, db += g and
/// return dL/dx = W^T g.
inline Vec affine_backward(const Affine& layer, std::span<const double> x,
                           std::span<const double> g, Affine& grad) {
  add_outer(grad.W, 1.0, g, x);
  for (std::size_t i = 0; i < g.size(); ++i) grad.b[i] += g[i];
  return matvec_transpose(layer.W, g);
}

}  // namespace detail

/// Backward through z = u/||u||, projection, and the encoder chain, starting
/// from dL/dz. Accumulates into `grads` and returns dL/dx (useful for
/// checking input sensitivities).
inline Vec backward_embedding(const ModelState& state, const ForwardCache& cache,
                              std::span<const double> dz, Gradients& grads) {
  if (dz.size() != state.config.p)
    throw NumericError("backward_embedding: gradient width != p");
  // Normalization: dL/du = (dL/dz - z (z . dL/dz)) / ||u||.
  const double zdot = dot(cache.z, dz);
  Vec du(dz.size());
  for (std::size_t i = 0; i < du.size(); ++i)
    du[i] = (dz[i] - cache.z[i] * zdot) / cache.u_norm;

  Vec df = detail::affine_backward(state.projection, cache.f, du, grads.projection);

  // Encoder chain, last layer first. Hidden layers apply the activation.
  Vec g = std::move(df);
  const std::size_t n_layers = state.encoder.size();
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) {
      // g currently holds dL/d(act): fold in the activation derivative.
      const Vec& pre = cache.encoder_pre[l];
      const Vec& act = cache.encoder_act[l];
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] *= detail::activate_grad(pre[i], act[i], state.config.activation);
    }
    const std::span<const double> layer_in =
        l == 0 ? std::span<const double>(cache.input)
               : std::span<const double>(cache.encoder_act[l - 1]);
    g = detail::affine_backward(state.encoder[l], layer_in, g, grads.encoder[l]);
  }
  return g;
}

/// Backward through the classifier head from dL/dlogits. Encoder features are
/// treated as constants (the head trains on a frozen backbone), so only
/// classifier parameter gradients accumulate.
inline void backward_classifier(const ModelState& state, const ClassifierCache& cache,
                                std::span<const double> dlogits, Gradients& grads) {
  if (dlogits.size() != state.config.n_classes)
    throw NumericError("backward_classifier: gradient width != n_classes");
  if (state.classifier.size() == 1) {
    detail::affine_backward(state.classifier[0], cache.input, dlogits,
                            grads.classifier[0]);
    return;
  }
  Vec ghidden = detail::affine_backward(state.classifier[1], cache.hidden_act, dlogits,
                                        grads.classifier[1]);
  for (std::size_t i = 0; i < ghidden.size(); ++i)
    ghidden[i] *= detail::activate_grad(cache.hidden_pre[i], cache.hidden_act[i],
                                        state.config.activation);
  detail::affine_backward(state.classifier[0], cache.input, ghidden,
                          grads.classifier[0]);
}

}  // namespace vmfosr::model
