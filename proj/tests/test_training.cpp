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

// Tests for the two training stages on a small, easy synthetic problem:
// learning-rate schedule, loss descent, the unit-norm constraint on class
// directions, stage separation (stage two moves only the classifier), and
// determinism of the whole path.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "vmfosr/datagen.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/model.hpp"
#include "vmfosr/numerics.hpp"
#include "vmfosr/training.hpp"

using vmfosr::Matrix;
using vmfosr::Vec;
using vmfosr::datagen::SyntheticSpec;
using vmfosr::model::ModelConfig;
using vmfosr::numerics::SeededRng;
using vmfosr::training::TrainConfig;

namespace {

SyntheticSpec easy_spec() {
  SyntheticSpec spec;
  spec.p_latent = 8;
  spec.input_dim = 8;
  spec.n_known_classes = 3;
  spec.n_unknown_classes = 2;
  spec.samples_per_class_train = 30;
  spec.samples_per_class_test = 10;
  spec.kappa_data = 30.0;
  spec.hardness = 0.2;
  spec.observation_map = vmfosr::datagen::ObservationMap::Identity;
  return spec;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.input_dim = 8;
  cfg.hidden_layers = {};
  cfg.d = 8;
  cfg.p = 4;
  cfg.n_classes = 3;
  cfg.tau = 0.1;
  return cfg;
}

TrainConfig short_training() {
  TrainConfig cfg;
  cfg.epochs_stage1 = 20;
  cfg.epochs_stage2 = 15;
  cfg.batch_size = 16;
  return cfg;
}

}  // namespace

TEST_CASE("train config validation rejects out-of-range values") {
  TrainConfig cfg;
  cfg.epochs_stage1 = 0;
  CHECK_THROWS_AS(cfg.validate(), vmfosr::ConfigError);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), vmfosr::ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(cfg.validate(), vmfosr::ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), vmfosr::ConfigError);
}

TEST_CASE("learning rate schedule follows the half-cosine") {
  TrainConfig cfg;
  cfg.learning_rate = 0.08;
  cfg.lr_schedule = vmfosr::training::LrSchedule::Cosine;
  CHECK(vmfosr::training::epoch_learning_rate(cfg, 0, 100) == 0.08);
  CHECK_THAT(vmfosr::training::epoch_learning_rate(cfg, 50, 100),
             Catch::Matchers::WithinAbs(0.04, 1e-15));
  for (std::size_t e = 0; e < 100; ++e) {
    const double want =
        0.08 * 0.5 * (1.0 + std::cos(std::numbers::pi * e / 100.0));
    CHECK_THAT(vmfosr::training::epoch_learning_rate(cfg, e, 100),
               Catch::Matchers::WithinAbs(want, 1e-15));
  }
  cfg.lr_schedule = vmfosr::training::LrSchedule::Constant;
  CHECK(vmfosr::training::epoch_learning_rate(cfg, 99, 100) == 0.08);
}

TEST_CASE("stage one descends the loss and keeps class directions unit norm") {
  SeededRng data_rng(5, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(easy_spec(), data_rng);

  SeededRng train_rng(5, 1);
  const auto result = vmfosr::training::train_stage_one(train, small_model(),
                                                        short_training(), train_rng);
  REQUIRE(result.epoch_loss.size() == 20);
  REQUIRE(result.epoch_row_norm_dev.size() == 20);

  // Average of the last three epochs must lie below the first epoch.
  const double tail = (result.epoch_loss[17] + result.epoch_loss[18] +
                       result.epoch_loss[19]) / 3.0;
  CHECK(tail < result.epoch_loss[0]);

  // Unit-row constraint after every epoch's renormalization.
  for (double dev : result.epoch_row_norm_dev) CHECK(dev <= 1e-9);
  CHECK(vmfosr::model::max_row_norm_deviation(result.state.label_embeddings) <= 1e-9);
}

TEST_CASE("stage one is deterministic in the rng seed") {
  SeededRng data_rng(7, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(easy_spec(), data_rng);

  SeededRng a(9, 1), b(9, 1), c(10, 1);
  const auto r1 = vmfosr::training::train_stage_one(train, small_model(),
                                                    short_training(), a);
  const auto r2 = vmfosr::training::train_stage_one(train, small_model(),
                                                    short_training(), b);
  const auto r3 = vmfosr::training::train_stage_one(train, small_model(),
                                                    short_training(), c);
  REQUIRE(r1.epoch_loss == r2.epoch_loss);
  REQUIRE(r1.state.projection.W.data == r2.state.projection.W.data);
  REQUIRE(r1.state.label_embeddings.data == r2.state.label_embeddings.data);
  CHECK(r1.state.projection.W.data != r3.state.projection.W.data);
}

TEST_CASE("stage one rejects wrong splits and labels") {
  SeededRng data_rng(11, 0);
  auto [train, test] = vmfosr::datagen::generate_dataset(easy_spec(), data_rng);
  SeededRng rng(11, 1);

  CHECK_THROWS_AS(vmfosr::training::train_stage_one(test, small_model(),
                                                    short_training(), rng),
                  vmfosr::ConfigError);

  vmfosr::datagen::Dataset bad = train;
  bad.labels[0] = 7;  // outside [0, n_classes)
  CHECK_THROWS_AS(vmfosr::training::train_stage_one(bad, small_model(),
                                                    short_training(), rng),
                  vmfosr::ConfigError);

  bad = train;
  bad.known[3] = 0;
  CHECK_THROWS_AS(vmfosr::training::train_stage_one(bad, small_model(),
                                                    short_training(), rng),
                  vmfosr::ConfigError);
}

TEST_CASE("feature bank holds encoder outputs in dataset order") {
  SeededRng data_rng(13, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(easy_spec(), data_rng);
  SeededRng rng(13, 1);
  const auto stage1 = vmfosr::training::train_stage_one(train, small_model(),
                                                        short_training(), rng);
  const auto bank =
      vmfosr::training::extract_features(stage1.state, train, "train@seed13");
  REQUIRE(bank.size() == train.size());
  CHECK(bank.labels == train.labels);
  CHECK(bank.source == "train@seed13");
  for (std::size_t i : {std::size_t{0}, std::size_t{17}, train.size() - 1}) {
    const Vec f = vmfosr::model::encode(train.row(i), stage1.state);
    for (std::size_t j = 0; j < f.size(); ++j)
      REQUIRE(bank.features(i, j) == f[j]);
  }
  CHECK_THROWS_AS(vmfosr::training::extract_features(stage1.state, test),
                  vmfosr::ConfigError);
}

TEST_CASE("cross entropy matches a naive softmax evaluation") {
  SeededRng rng(17, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const Vec logits = rng.normal_vector(6);
    Vec label(6, 0.0);
    label[rng.below(6)] = 1.0;
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v);
    double want = 0.0;
    for (std::size_t k = 0; k < 6; ++k)
      want -= label[k] * std::log(std::exp(logits[k]) / denom);
    CHECK_THAT(vmfosr::training::cross_entropy(logits, label),
               Catch::Matchers::WithinAbs(want, 1e-12));
  }
  CHECK_THROWS_AS(vmfosr::training::cross_entropy(Vec{1.0}, Vec{1.0, 0.0}),
                  vmfosr::NumericError);
  CHECK_THROWS_AS(vmfosr::training::cross_entropy(Vec{1.0, 2.0}, Vec{1.0, -0.5}),
                  vmfosr::NumericError);
}

TEST_CASE("stage two trains only the classifier head") {
  SeededRng data_rng(19, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(easy_spec(), data_rng);
  SeededRng rng1(19, 1);
  const auto stage1 = vmfosr::training::train_stage_one(train, small_model(),
                                                        short_training(), rng1);
  const auto bank = vmfosr::training::extract_features(stage1.state, train);

  SeededRng rng2(19, 2);
  const auto stage2 = vmfosr::training::train_stage_two(train, bank, stage1.state,
                                                        short_training(), rng2);
  REQUIRE(stage2.epoch_accuracy.size() == 15);

  // Frozen pieces are bit-identical; the classifier moved.
  for (std::size_t l = 0; l < stage1.state.encoder.size(); ++l) {
    REQUIRE(stage2.state.encoder[l].W.data == stage1.state.encoder[l].W.data);
    REQUIRE(stage2.state.encoder[l].b == stage1.state.encoder[l].b);
  }
  REQUIRE(stage2.state.projection.W.data == stage1.state.projection.W.data);
  REQUIRE(stage2.state.label_embeddings.data == stage1.state.label_embeddings.data);
  CHECK(stage2.state.classifier[0].W.data != stage1.state.classifier[0].W.data);

  // An easy three-class problem ends well above chance on the bank.
  CHECK(stage2.epoch_accuracy.back() > 0.9);
  CHECK(stage2.epoch_accuracy.back() >= stage2.epoch_accuracy.front());
}

TEST_CASE("stage two without re-encoding trains on the static bank") {
  SeededRng data_rng(23, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(easy_spec(), data_rng);
  SeededRng rng1(23, 1);
  const auto stage1 = vmfosr::training::train_stage_one(train, small_model(),
                                                        short_training(), rng1);
  const auto bank = vmfosr::training::extract_features(stage1.state, train);

  TrainConfig cfg = short_training();
  cfg.stage2_reencode = false;
  SeededRng rng2(23, 2);
  const auto stage2 =
      vmfosr::training::train_stage_two(train, bank, stage1.state, cfg, rng2);
  CHECK(stage2.epoch_accuracy.back() > 0.9);
}

TEST_CASE("stage two rejects a bank that does not match the dataset") {
  SeededRng data_rng(29, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(easy_spec(), data_rng);
  SeededRng rng1(29, 1);
  const auto stage1 = vmfosr::training::train_stage_one(train, small_model(),
                                                        short_training(), rng1);
  auto bank = vmfosr::training::extract_features(stage1.state, train);
  bank.features = Matrix(bank.features.rows - 1, bank.features.cols);
  bank.labels.pop_back();
  SeededRng rng2(29, 2);
  CHECK_THROWS_AS(vmfosr::training::train_stage_two(train, bank, stage1.state,
                                                    short_training(), rng2),
                  vmfosr::ConfigError);
}

TEST_CASE("two-stage path is deterministic end to end") {
  SeededRng data_a(31, 0), data_b(31, 0);
  const auto [train_a, test_a] = vmfosr::datagen::generate_dataset(easy_spec(), data_a);
  const auto [train_b, test_b] = vmfosr::datagen::generate_dataset(easy_spec(), data_b);

  auto run = [](const vmfosr::datagen::Dataset& train) {
    SeededRng rng1(33, 1);
    const auto s1 = vmfosr::training::train_stage_one(train, small_model(),
                                                      short_training(), rng1);
    const auto bank = vmfosr::training::extract_features(s1.state, train);
    SeededRng rng2(33, 2);
    return vmfosr::training::train_stage_two(train, bank, s1.state, short_training(),
                                             rng2);
  };
  const auto r1 = run(train_a);
  const auto r2 = run(train_b);
  REQUIRE(r1.state.classifier[0].W.data == r2.state.classifier[0].W.data);
  REQUIRE(r1.epoch_accuracy == r2.epoch_accuracy);
}
