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

// Central finite-difference verification of every analytic gradient: the
// per-sample loss gradient, the class-direction gradients of both loss terms,
// and the hand-written backward passes through encoder, projection,
// normalization, and classifier. Each block reports its worst relative error
// over randomized instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/losses.hpp"
#include "vmfosr/model.hpp"
#include "vmfosr/numerics.hpp"
#include "vmfosr/training.hpp"

namespace vmfosr::gradcheck {

inline constexpr double kTolerance = 1e-5;
inline constexpr double kStep = 1e-5;

struct BlockReport {
  std::string block;
  std::size_t instances = 0;
  double worst_rel_err = 0.0;
  bool pass = false;
};

/// ||fd - analytic|| / max(||fd||, ||analytic||, floor).
inline double relative_error(std::span<const double> fd,
                             std::span<const double> analytic) {
  if (fd.size() != analytic.size())
    throw NumericError("relative_error: size mismatch");
  double diff2 = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double d = fd[i] - analytic[i];
    diff2 += d * d;
  }
  const double scale = std::max({norm(fd), norm(analytic), 1e-8});
  return std::sqrt(diff2) / scale;
}

/// One vector-valued check: central differences of f at x against the given
/// analytic gradient. Public so tests can feed a deliberately wrong gradient
/// and watch the check fail.
inline BlockReport check_vector_gradient(const std::string& name,
                                         const std::function<double(const Vec&)>& f,
                                         const Vec& x, const Vec& analytic,
                                         double h = kStep, double tol = kTolerance) {
  const Vec fd = numerics::finite_difference_gradient(f, x, h);
  BlockReport report;
  report.block = name;
  report.instances = 1;
  report.worst_rel_err = relative_error(fd, analytic);
  report.pass = report.worst_rel_err <= tol;
  return report;
}

namespace detail {

/// Central difference through a single parameter slot of live state.
template <typename LossFn>
inline double fd_slot(LossFn&& loss, double& slot, double h) {
  const double saved = slot;
  slot = saved + h;
  const double up = loss();
  slot = saved - h;
  const double down = loss();
  slot = saved;
  return (up - down) / (2.0 * h);
}

inline Vec random_soft_row(std::size_t c, numerics::SeededRng& rng) {
  Vec soft(c);
  double mass = 0.0;
  for (double& v : soft) {
    v = rng.uniform(0.1, 1.0);
    mass += v;
  }
  for (double& v : soft) v /= mass;
  return soft;
}

inline Matrix random_unit_rows(std::size_t rows, std::size_t cols,
                               numerics::SeededRng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    m.set_row(i, numerics::sample_uniform_sphere(cols, rng));
  return m;
}

inline void update_worst(BlockReport& report, double err) {
  ++report.instances;
  report.worst_rel_err = std::max(report.worst_rel_err, err);
}

}  // namespace detail

/// Per-sample loss gradient over the full small-problem grid:
/// p in {4,16} x C in {3,10} x tau in {0.1,1.0}, 25 instances each.
inline BlockReport check_vmfal_grad_z(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "vmfal_grad_z";
  for (std::size_t p : {std::size_t{4}, std::size_t{16}})
    for (std::size_t c : {std::size_t{3}, std::size_t{10}})
      for (double tau : {0.1, 1.0})
        for (int rep = 0; rep < 25; ++rep) {
          const Matrix m = detail::random_unit_rows(c, p, rng);
          const Vec soft = detail::random_soft_row(c, rng);
          const Vec z = numerics::sample_uniform_sphere(p, rng);
          const Vec analytic = losses::vmfal_grad_z(z, soft, m, tau);
          const auto f = [&](const Vec& zz) {
            return losses::vmfal_sample(zz, soft, m, tau);
          };
          const Vec fd = numerics::finite_difference_gradient(f, z, kStep);
          detail::update_worst(report, relative_error(fd, analytic));
        }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

/// Class-direction gradient of the batch soft loss.
inline BlockReport check_vmfal_grad_embeddings(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "vmfal_grad_embeddings";
  for (double tau : {0.1, 1.0})
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t p = 6, c = 4, b = 5;
      Matrix m = detail::random_unit_rows(c, p, rng);
      Matrix z(b, p);
      Matrix soft(b, c);
      for (std::size_t i = 0; i < b; ++i) {
        z.set_row(i, numerics::sample_uniform_sphere(p, rng));
        soft.set_row(i, detail::random_soft_row(c, rng));
      }
      const Matrix analytic = losses::vmfal_grad_embeddings(z, soft, m, tau);
      Vec fd(m.data.size());
      const auto loss = [&] { return losses::vmfal_soft(z, soft, m, tau); };
      for (std::size_t i = 0; i < m.data.size(); ++i)
        fd[i] = detail::fd_slot(loss, m.data[i], kStep);
      detail::update_worst(report, relative_error(fd, analytic.data));
    }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

/// Orthogonality regularizer gradient.
inline BlockReport check_r_ortho_grad(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "r_ortho_grad";
  for (double tau : {0.1, 1.0})
    for (int rep = 0; rep < 10; ++rep) {
      Matrix m = detail::random_unit_rows(5, 7, rng);
      const Matrix analytic = losses::r_ortho_grad(m, tau);
      Vec fd(m.data.size());
      const auto loss = [&] { return losses::r_ortho(m, tau); };
      for (std::size_t i = 0; i < m.data.size(); ++i)
        fd[i] = detail::fd_slot(loss, m.data[i], kStep);
      detail::update_worst(report, relative_error(fd, analytic.data));
    }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

namespace detail {

struct SmallProblem {
  model::ModelState state;
  Vec input;
  Vec soft;

  double loss() const {
    const Vec z = model::embed(input, state);
    return losses::vmfal_sample(z, soft, state.label_embeddings, state.config.tau);
  }

  double loss_with_r_ortho() const {
    return loss() + losses::r_ortho(state.label_embeddings, state.config.tau);
  }

  /// Analytic gradients of loss() for all embedding-path parameters, plus
  /// dL/dx as the return value.
  Vec analytic(model::Gradients& grads) const {
    model::ForwardCache cache;
    const Vec z = model::embed(input, state, &cache);
    const Vec dz = losses::vmfal_grad_z(z, soft, state.label_embeddings,
                                        state.config.tau);
    return model::backward_embedding(state, cache, dz, grads);
  }
};

/// Central differences are only meaningful away from non-smooth points, so a
/// random instance is rejected when the projection norm is tiny (normalization
/// undefined; dead-ReLU networks hit exactly zero) or any ReLU pre-activation
/// sits within FD reach of the kink.
inline bool well_conditioned(const model::ModelState& state, const Vec& input) {
  model::ForwardCache cache;
  try {
    model::embed(input, state, &cache);
  } catch (const NumericError&) {
    return false;
  }
  if (cache.u_norm < 0.1) return false;
  if (state.config.activation == model::Activation::Relu) {
    const std::size_t hidden = state.encoder.size() - 1;
    for (std::size_t l = 0; l < hidden; ++l) {
      std::size_t active = 0;
      for (double pre : cache.encoder_pre[l]) {
        if (std::abs(pre) < 1e-3) return false;
        active += pre > 0.0;
      }
      // With a single active unit the downstream feature is rank-1 and the
      // normalized embedding is locally constant, so the instance would only
      // compare rounding noise against an exactly-zero gradient.
      if (active < 2) return false;
    }
  }
  return true;
}

inline SmallProblem make_small_problem(numerics::SeededRng& rng, bool relu,
                                       bool deep_classifier) {
  model::ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_layers = {8, 7};
  cfg.d = 5;
  cfg.p = 4;
  cfg.n_classes = 3;
  cfg.activation = relu ? model::Activation::Relu : model::Activation::Tanh;
  cfg.tau = 0.5;
  cfg.classifier_hidden = deep_classifier ? 6 : 0;
  SmallProblem prob;
  do {
    prob.state = model::init_model(cfg, rng);
    prob.input = rng.normal_vector(cfg.input_dim);
  } while (!well_conditioned(prob.state, prob.input));
  prob.soft = random_soft_row(cfg.n_classes, rng);
  return prob;
}

template <typename LossFn>
inline void fd_affine(LossFn&& loss, model::Affine& layer, Vec& out) {
  for (double& w : layer.W.data) out.push_back(fd_slot(loss, w, kStep));
  for (double& b : layer.b) out.push_back(fd_slot(loss, b, kStep));
}

inline void flatten_affine(const model::Affine& layer, Vec& out) {
  out.insert(out.end(), layer.W.data.begin(), layer.W.data.end());
  out.insert(out.end(), layer.b.begin(), layer.b.end());
}

}  // namespace detail

/// Encoder weights and biases through the embedding pipeline and loss.
inline BlockReport check_encoder(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "encoder";
  for (bool relu : {false, true})
    for (int rep = 0; rep < 5; ++rep) {
      auto prob = detail::make_small_problem(rng, relu, false);
      model::Gradients grads = model::make_zero_gradients(prob.state);
      prob.analytic(grads);
      Vec fd, analytic;
      const auto loss = [&] { return prob.loss(); };
      for (std::size_t l = 0; l < prob.state.encoder.size(); ++l) {
        detail::fd_affine(loss, prob.state.encoder[l], fd);
        detail::flatten_affine(grads.encoder[l], analytic);
      }
      detail::update_worst(report, relative_error(fd, analytic));
    }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

/// Projection layer through normalization and loss.
inline BlockReport check_projection(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "projection";
  for (bool relu : {false, true})
    for (int rep = 0; rep < 5; ++rep) {
      auto prob = detail::make_small_problem(rng, relu, false);
      model::Gradients grads = model::make_zero_gradients(prob.state);
      prob.analytic(grads);
      Vec fd, analytic;
      const auto loss = [&] { return prob.loss(); };
      detail::fd_affine(loss, prob.state.projection, fd);
      detail::flatten_affine(grads.projection, analytic);
      detail::update_worst(report, relative_error(fd, analytic));
    }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

/// Class directions through the full training objective (soft loss plus
/// regularizer).
inline BlockReport check_label_embeddings(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "label_embeddings";
  for (int rep = 0; rep < 10; ++rep) {
    auto prob = detail::make_small_problem(rng, false, false);
    const Vec z = model::embed(prob.input, prob.state);
    Matrix zbatch(1, z.size());
    zbatch.set_row(0, z);
    Matrix soft(1, prob.soft.size());
    soft.set_row(0, prob.soft);
    Matrix analytic = losses::vmfal_grad_embeddings(
        zbatch, soft, prob.state.label_embeddings, prob.state.config.tau);
    const Matrix rgrad =
        losses::r_ortho_grad(prob.state.label_embeddings, prob.state.config.tau);
    for (std::size_t i = 0; i < analytic.data.size(); ++i)
      analytic.data[i] += rgrad.data[i];
    Vec fd(prob.state.label_embeddings.data.size());
    const auto loss = [&] { return prob.loss_with_r_ortho(); };
    for (std::size_t i = 0; i < fd.size(); ++i)
      fd[i] = detail::fd_slot(loss, prob.state.label_embeddings.data[i], kStep);
    detail::update_worst(report, relative_error(fd, analytic.data));
  }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

/// Classifier head parameters under cross entropy, both head shapes.
inline BlockReport check_classifier(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "classifier";
  for (bool deep : {false, true})
    for (int rep = 0; rep < 5; ++rep) {
      auto prob = detail::make_small_problem(rng, false, deep);
      const Vec f = model::encode(prob.input, prob.state);
      Vec onehot(prob.state.config.n_classes, 0.0);
      onehot[rng.below(prob.state.config.n_classes)] = 1.0;

      model::ClassifierCache cache;
      const Vec logits = model::classify(f, prob.state, &cache);
      Vec dlogits = numerics::softmax(logits, 1.0);
      for (std::size_t k = 0; k < dlogits.size(); ++k) dlogits[k] -= onehot[k];
      model::Gradients grads = model::make_zero_gradients(prob.state);
      model::backward_classifier(prob.state, cache, dlogits, grads);

      Vec fd, analytic;
      const auto loss = [&] {
        return training::cross_entropy(model::classify(f, prob.state), onehot);
      };
      for (std::size_t l = 0; l < prob.state.classifier.size(); ++l) {
        detail::fd_affine(loss, prob.state.classifier[l], fd);
        detail::flatten_affine(grads.classifier[l], analytic);
      }
      detail::update_worst(report, relative_error(fd, analytic));
    }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

/// Input sensitivity dL/dx returned by the embedding backward pass.
inline BlockReport check_input_gradient(std::uint64_t seed) {
  numerics::SeededRng rng(seed);
  BlockReport report;
  report.block = "encode_input";
  for (bool relu : {false, true})
    for (int rep = 0; rep < 5; ++rep) {
      auto prob = detail::make_small_problem(rng, relu, false);
      model::Gradients grads = model::make_zero_gradients(prob.state);
      const Vec analytic = prob.analytic(grads);
      const auto f = [&](const Vec& x) {
        const Vec z = model::embed(x, prob.state);
        return losses::vmfal_sample(z, prob.soft, prob.state.label_embeddings,
                                    prob.state.config.tau);
      };
      const Vec fd = numerics::finite_difference_gradient(f, prob.input, kStep);
      detail::update_worst(report, relative_error(fd, analytic));
    }
  report.pass = report.worst_rel_err <= kTolerance;
  return report;
}

/// The full suite. Deterministic given the seed.
inline std::vector<BlockReport> run_all(std::uint64_t seed = 7) {
  std::vector<BlockReport> reports;
  reports.push_back(check_vmfal_grad_z(seed));
  reports.push_back(check_vmfal_grad_embeddings(seed + 1));
  reports.push_back(check_r_ortho_grad(seed + 2));
  reports.push_back(check_encoder(seed + 3));
  reports.push_back(check_projection(seed + 4));
  reports.push_back(check_label_embeddings(seed + 5));
  reports.push_back(check_classifier(seed + 6));
  reports.push_back(check_input_gradient(seed + 7));
  return reports;
}

inline bool all_pass(const std::vector<BlockReport>& reports) {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return true;
}

}  // namespace vmfosr::gradcheck
