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

// Two-stage training.
//
// Stage one learns the representation: each batch is jittered, label-smoothed
// and Mixup-expanded, embedded onto the sphere, and scored with the alignment
// loss plus the orthogonality regularizer; encoder, projection, and class
// directions take an SGD-momentum step, after which the class directions are
// projected back onto the unit sphere.
//
// Stage two freezes the backbone, discards projection and class directions,
// and fits a classifier head on unnormalized encoder features with standard
// cross entropy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "vmfosr/augment.hpp"
#include "vmfosr/datagen.hpp"
#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/losses.hpp"
#include "vmfosr/model.hpp"
#include "vmfosr/numerics.hpp"

namespace vmfosr::training {

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  std::size_t epochs_stage1 = 200;
  std::size_t epochs_stage2 = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  LrSchedule lr_schedule = LrSchedule::Cosine;
  bool r_ortho_enabled = true;
  // Stage two re-jitters the raw inputs and re-encodes them each epoch by
  // default; false trains on the static feature bank instead.
  bool stage2_reencode = true;
  std::uint64_t seed = 1;
  augment::AugmentConfig augment;

  void validate() const {
    if (epochs_stage1 < 1 || epochs_stage2 < 1 || batch_size < 1)
      throw ConfigError("TrainConfig: epoch and batch counts must be positive");
    if (!(learning_rate >= 0.0))
      throw ConfigError("TrainConfig: learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw ConfigError("TrainConfig: momentum must lie in [0, 1)");
  }
};

/// Learning rate for a given epoch under the configured schedule.
inline double epoch_learning_rate(const TrainConfig& cfg, std::size_t epoch,
                                  std::size_t total_epochs) {
  if (cfg.lr_schedule == LrSchedule::Constant) return cfg.learning_rate;
  const double t =
      static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

namespace detail {

inline void sgd_affine(model::Affine& param, const model::Affine& grad,
                       model::Affine& vel, double lr, double momentum) {
  for (std::size_t i = 0; i < param.W.data.size(); ++i) {
    vel.W.data[i] = momentum * vel.W.data[i] + grad.W.data[i];
    param.W.data[i] -= lr * vel.W.data[i];
  }
  for (std::size_t i = 0; i < param.b.size(); ++i) {
    vel.b[i] = momentum * vel.b[i] + grad.b[i];
    param.b[i] -= lr * vel.b[i];
  }
}

inline void sgd_matrix(Matrix& param, const Matrix& grad, Matrix& vel, double lr,
                       double momentum) {
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    vel.data[i] = momentum * vel.data[i] + grad.data[i];
    param.data[i] -= lr * vel.data[i];
  }
}

inline void require_known_train_split(const datagen::Dataset& data,
                                      std::size_t n_classes, const char* who) {
  if (data.role != datagen::Role::Train)
    throw ConfigError(std::string(who) + ": data must be the train split");
  if (data.size() == 0) throw ConfigError(std::string(who) + ": empty dataset");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.known[i])
      throw ConfigError(std::string(who) + ": unknown-class sample in train split");
    if (data.labels[i] < 0 || static_cast<std::size_t>(data.labels[i]) >= n_classes)
      throw ConfigError(std::string(who) + ": label outside [0, n_classes)");
  }
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 numerics::SeededRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace detail

struct StageOneResult {
  model::ModelState state;
  std::vector<double> epoch_loss;           // mean batch total loss per epoch
  std::vector<double> epoch_row_norm_dev;   // max | ||row of M|| - 1 | per epoch
};

/// Representation learning on the known-class train split. Throws
/// NumericError with the offending epoch/batch when the loss goes non-finite.
inline StageOneResult train_stage_one(const datagen::Dataset& data,
                                      const model::ModelConfig& model_cfg,
                                      const TrainConfig& train_cfg,
                                      numerics::SeededRng& rng) {
  model_cfg.validate();
  train_cfg.validate();
  detail::require_known_train_split(data, model_cfg.n_classes, "train_stage_one");

  StageOneResult result;
  result.state = model::init_model(model_cfg, rng);
  model::ModelState& state = result.state;
  model::Gradients velocity = model::make_zero_gradients(state);

  const std::size_t n = data.size();
  const std::size_t bs = std::min(train_cfg.batch_size, n);

  for (std::size_t epoch = 0; epoch < train_cfg.epochs_stage1; ++epoch) {
    const double lr = epoch_learning_rate(train_cfg, epoch, train_cfg.epochs_stage1);
    const auto order = detail::shuffled_indices(n, rng);

    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);

      augment::SoftLabeledBatch batch;
      batch.inputs = Matrix(count, model_cfg.input_dim);
      batch.soft_labels = Matrix(count, model_cfg.n_classes);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        batch.inputs.set_row(i, data.row(src));
        const auto cls = static_cast<std::size_t>(data.labels[src]);
        const double sigma = train_cfg.augment.ls_enabled ? train_cfg.augment.sigma : 0.0;
        batch.soft_labels.set_row(
            i, augment::label_smooth(cls, model_cfg.n_classes, sigma));
      }
      batch.inputs = augment::apply_jitter(batch.inputs, train_cfg.augment.jitter_std, rng);
      const augment::SoftLabeledBatch unified =
          augment::build_unified_batch(batch, train_cfg.augment, rng);

      // Forward: embed every row, keeping caches for the backward pass.
      const std::size_t m = unified.inputs.rows;
      std::vector<model::ForwardCache> caches(m);
      Matrix embeddings(m, model_cfg.p);
      for (std::size_t i = 0; i < m; ++i)
        embeddings.set_row(i, model::embed(unified.inputs.row(i), state, &caches[i]));

      const losses::LossBreakdown loss =
          losses::total_loss(embeddings, unified.soft_labels, state.label_embeddings,
                             model_cfg.tau, train_cfg.r_ortho_enabled);
      if (!std::isfinite(loss.total))
        throw NumericError("train_stage_one: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches) + " (alignment=" +
                           std::to_string(loss.alignment) + ", ortho=" +
                           std::to_string(loss.ortho) + ")");
      loss_sum += loss.total;
      ++n_batches;

      // Backward: batch-mean alignment loss into encoder/projection, plus the
      // class-direction gradients from both loss terms.
      model::Gradients grads = model::make_zero_gradients(state);
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        Vec dz = losses::vmfal_grad_z(embeddings.row(i), unified.soft_labels.row(i),
                                      state.label_embeddings, model_cfg.tau);
        scale_inplace(dz, inv_m);
        model::backward_embedding(state, caches[i], dz, grads);
      }
      grads.label_embeddings = losses::vmfal_grad_embeddings(
          embeddings, unified.soft_labels, state.label_embeddings, model_cfg.tau);
      if (train_cfg.r_ortho_enabled) {
        const Matrix rgrad =
            losses::r_ortho_grad(state.label_embeddings, model_cfg.tau);
        for (std::size_t i = 0; i < rgrad.data.size(); ++i)
          grads.label_embeddings.data[i] += rgrad.data[i];
      }

      for (std::size_t l = 0; l < state.encoder.size(); ++l)
        detail::sgd_affine(state.encoder[l], grads.encoder[l], velocity.encoder[l],
                           lr, train_cfg.momentum);
      detail::sgd_affine(state.projection, grads.projection, velocity.projection, lr,
                         train_cfg.momentum);
      detail::sgd_matrix(state.label_embeddings, grads.label_embeddings,
                         velocity.label_embeddings, lr, train_cfg.momentum);
      model::renormalize_embeddings(state.label_embeddings);
    }

    result.epoch_loss.push_back(loss_sum / static_cast<double>(n_batches));
    result.epoch_row_norm_dev.push_back(
        model::max_row_norm_deviation(state.label_embeddings));
  }
  return result;
}

/// Unnormalized encoder features for every sample of a known-class train
/// split, in dataset order.
struct FeatureBank {
  Matrix features;  // n x d
  std::vector<int> labels;
  std::string source;

  std::size_t size() const { return features.rows; }
};

inline FeatureBank extract_features(const model::ModelState& state,
                                    const datagen::Dataset& data,
                                    std::string source = "") {
  detail::require_known_train_split(data, state.config.n_classes,
                                    "extract_features");
  FeatureBank bank;
  bank.features = Matrix(data.size(), state.config.d);
  bank.labels = data.labels;
  bank.source = std::move(source);
  for (std::size_t i = 0; i < data.size(); ++i)
    bank.features.set_row(i, model::encode(data.row(i), state));
  return bank;
}

/// -sum_k y_k log softmax(logits)_k, evaluated through log_sum_exp.
inline double cross_entropy(std::span<const double> logits,
                            std::span<const double> label) {
  if (logits.size() != label.size())
    throw NumericError("cross_entropy: logits and label widths differ");
  if (logits.empty()) throw NumericError("cross_entropy: empty input");
  const double lse = numerics::log_sum_exp(logits);
  double loss = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!(label[k] >= 0.0)) throw NumericError("cross_entropy: negative label mass");
    loss -= label[k] * (logits[k] - lse);
  }
  return loss;
}

struct StageTwoResult {
  model::ModelState state;
  std::vector<double> epoch_accuracy;  // classifier accuracy on the bank
};

/// Classifier training on the frozen backbone. Only classifier parameters
/// move; the returned state carries everything else bit-identical. In
/// re-encode mode each epoch jitters the raw inputs and encodes them through
/// the frozen encoder; otherwise the static bank features are used directly.
inline StageTwoResult train_stage_two(const datagen::Dataset& data,
                                      const FeatureBank& bank,
                                      const model::ModelState& trained,
                                      const TrainConfig& train_cfg,
                                      numerics::SeededRng& rng) {
  train_cfg.validate();
  const model::ModelConfig& mcfg = trained.config;
  detail::require_known_train_split(data, mcfg.n_classes, "train_stage_two");
  if (bank.size() != data.size())
    throw ConfigError("train_stage_two: bank and dataset sizes differ");

  StageTwoResult result;
  result.state = trained;
  model::ModelState& state = result.state;
  model::Gradients velocity = model::make_zero_gradients(state);

  const std::size_t n = data.size();
  const std::size_t bs = std::min(train_cfg.batch_size, n);

  for (std::size_t epoch = 0; epoch < train_cfg.epochs_stage2; ++epoch) {
    const double lr = epoch_learning_rate(train_cfg, epoch, train_cfg.epochs_stage2);
    const auto order = detail::shuffled_indices(n, rng);

    // Epoch feature source: re-jittered and re-encoded, or the static bank.
    Matrix features;
    if (train_cfg.stage2_reencode) {
      Matrix inputs(n, mcfg.input_dim);
      for (std::size_t i = 0; i < n; ++i) inputs.set_row(i, data.row(i));
      inputs = augment::apply_jitter(inputs, train_cfg.augment.jitter_std, rng);
      features = Matrix(n, mcfg.d);
      for (std::size_t i = 0; i < n; ++i)
        features.set_row(i, model::encode(inputs.row(i), state));
    } else {
      features = bank.features;
    }

    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      model::Gradients grads = model::make_zero_gradients(state);
      const double inv = 1.0 / static_cast<double>(count);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        model::ClassifierCache cache;
        const Vec logits = model::classify(features.row(src), state, &cache);
        const auto target = static_cast<std::size_t>(data.labels[src]);
        Vec onehot(mcfg.n_classes, 0.0);
        onehot[target] = 1.0;
        batch_loss += cross_entropy(logits, onehot);
        // d(cross entropy)/dlogits = softmax(logits) - onehot.
        Vec dlogits = numerics::softmax(logits, 1.0);
        dlogits[target] -= 1.0;
        scale_inplace(dlogits, inv);
        model::backward_classifier(state, cache, dlogits, grads);
      }
      if (!std::isfinite(batch_loss))
        throw NumericError("train_stage_two: non-finite loss at epoch " +
                           std::to_string(epoch));
      for (std::size_t l = 0; l < state.classifier.size(); ++l)
        detail::sgd_affine(state.classifier[l], grads.classifier[l],
                           velocity.classifier[l], lr, train_cfg.momentum);
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const Vec logits = model::classify(bank.features.row(i), state);
      std::size_t arg = 0;
      for (std::size_t k = 1; k < logits.size(); ++k)
        if (logits[k] > logits[arg]) arg = k;
      if (static_cast<int>(arg) == bank.labels[i]) ++correct;
    }
    result.epoch_accuracy.push_back(static_cast<double>(correct) /
                                    static_cast<double>(bank.size()));
  }
  return result;
}

}  // namespace vmfosr::training
