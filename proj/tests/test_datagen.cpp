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

// Tests for the synthetic open-set generator: class geometry under the
// hardness dial, split shapes and labeling, observation maps, determinism,
// openness, and the CSV round trip.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "vmfosr/datagen.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/numerics.hpp"

using vmfosr::Matrix;
using vmfosr::Vec;
using vmfosr::datagen::Dataset;
using vmfosr::datagen::DirectionMode;
using vmfosr::datagen::ObservationMap;
using vmfosr::datagen::Role;
using vmfosr::datagen::SyntheticSpec;
using vmfosr::numerics::SeededRng;

namespace {

double max_cosine_to_knowns(const std::vector<Vec>& dirs, std::size_t n_known,
                            std::size_t unknown_index) {
  double best = -1.0;
  for (std::size_t k = 0; k < n_known; ++k)
    best = std::max(best, vmfosr::dot(dirs[n_known + unknown_index], dirs[k]));
  return best;
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.p_latent = 16;
  spec.input_dim = 16;
  spec.n_known_classes = 4;
  spec.n_unknown_classes = 3;
  spec.samples_per_class_train = 20;
  spec.samples_per_class_test = 10;
  spec.observation_map = ObservationMap::Identity;
  return spec;
}

}  // namespace

TEST_CASE("class directions are unit norm with orthonormal knowns") {
  SeededRng rng(3, 0);
  SyntheticSpec spec = small_spec();
  const auto dirs = vmfosr::datagen::generate_class_directions(spec, rng);
  REQUIRE(dirs.size() == spec.n_known_classes + spec.n_unknown_classes);
  for (const Vec& d : dirs)
    CHECK_THAT(vmfosr::norm(d), Catch::Matchers::WithinAbs(1.0, 1e-12));
  for (std::size_t i = 0; i < spec.n_known_classes; ++i)
    for (std::size_t j = 0; j < i; ++j)
      CHECK_THAT(vmfosr::dot(dirs[i], dirs[j]), Catch::Matchers::WithinAbs(0.0, 1e-10));
}

TEST_CASE("hardness endpoints: orthogonal unknowns at 0, within 15 degrees at 1") {
  const double cos15 = std::cos(15.0 * std::numbers::pi / 180.0);
  SyntheticSpec spec = small_spec();

  spec.hardness = 0.0;
  {
    SeededRng rng(5, 0);
    const auto dirs = vmfosr::datagen::generate_class_directions(spec, rng);
    for (std::size_t u = 0; u < spec.n_unknown_classes; ++u)
      CHECK_THAT(max_cosine_to_knowns(dirs, spec.n_known_classes, u),
                 Catch::Matchers::WithinAbs(0.0, 1e-10));
  }

  spec.hardness = 1.0;
  {
    SeededRng rng(5, 0);
    const auto dirs = vmfosr::datagen::generate_class_directions(spec, rng);
    for (std::size_t u = 0; u < spec.n_unknown_classes; ++u)
      CHECK(max_cosine_to_knowns(dirs, spec.n_known_classes, u) >= cos15 - 1e-10);
  }
}

TEST_CASE("max cosine to knowns grows monotonically with hardness") {
  // In orthogonal mode every non-anchor known is orthogonal to both the
  // anchor and the complement direction, so the max cosine equals
  // hardness * cos(15 deg) exactly.
  const double cos15 = std::cos(15.0 * std::numbers::pi / 180.0);
  SyntheticSpec spec = small_spec();
  std::vector<double> grid = {0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0};
  double prev = -1.0;
  for (double h : grid) {
    spec.hardness = h;
    SeededRng rng(7, 0);  // same seed: same anchors and complements
    const auto dirs = vmfosr::datagen::generate_class_directions(spec, rng);
    double worst = 2.0;
    for (std::size_t u = 0; u < spec.n_unknown_classes; ++u) {
      const double mc = max_cosine_to_knowns(dirs, spec.n_known_classes, u);
      CHECK_THAT(mc, Catch::Matchers::WithinAbs(h * cos15, 1e-10));
      worst = std::min(worst, mc);
    }
    CHECK(worst > prev - 1e-12);
    prev = worst;
  }
}

TEST_CASE("random direction mode keeps knowns 60 degrees apart") {
  SyntheticSpec spec = small_spec();
  spec.direction_mode = DirectionMode::Random;
  spec.hardness = 0.7;
  SeededRng rng(11, 0);
  const auto dirs = vmfosr::datagen::generate_class_directions(spec, rng);
  for (std::size_t i = 0; i < spec.n_known_classes; ++i)
    for (std::size_t j = 0; j < i; ++j)
      CHECK(vmfosr::dot(dirs[i], dirs[j]) <= 0.5 + 1e-12);
  // The anchor construction still guarantees at least h * cos(15 deg).
  const double want = 0.7 * std::cos(15.0 * std::numbers::pi / 180.0);
  for (std::size_t u = 0; u < spec.n_unknown_classes; ++u)
    CHECK(max_cosine_to_knowns(dirs, spec.n_known_classes, u) >= want - 1e-10);
}

TEST_CASE("orthogonal mode rejects dimensions below the class count") {
  SyntheticSpec spec = small_spec();
  spec.p_latent = 6;  // 4 + 3 classes will not fit
  spec.input_dim = 6;
  SeededRng rng(13, 0);
  CHECK_THROWS_AS(vmfosr::datagen::generate_class_directions(spec, rng),
                  vmfosr::ConfigError);
}

TEST_CASE("spec validation rejects out-of-range fields") {
  SeededRng rng(17, 0);
  SyntheticSpec spec = small_spec();
  spec.hardness = 1.5;
  CHECK_THROWS_AS(vmfosr::datagen::generate_dataset(spec, rng), vmfosr::ConfigError);
  spec = small_spec();
  spec.n_known_classes = 1;
  CHECK_THROWS_AS(vmfosr::datagen::generate_dataset(spec, rng), vmfosr::ConfigError);
  spec = small_spec();
  spec.kappa_data = -1.0;
  CHECK_THROWS_AS(vmfosr::datagen::generate_dataset(spec, rng), vmfosr::ConfigError);
  spec = small_spec();
  spec.input_dim = 8;  // identity map needs input_dim == p_latent
  CHECK_THROWS_AS(vmfosr::datagen::generate_dataset(spec, rng), vmfosr::ConfigError);
}

TEST_CASE("generated splits have the configured shapes and label layout") {
  SyntheticSpec spec = small_spec();
  SeededRng rng(19, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(spec, rng);

  REQUIRE(train.size() == spec.n_known_classes * spec.samples_per_class_train);
  REQUIRE(test.size() ==
          (spec.n_known_classes + spec.n_unknown_classes) * spec.samples_per_class_test);
  CHECK(train.role == Role::Train);
  CHECK(test.role == Role::Test);
  CHECK_FALSE(train.has_unknowns());
  CHECK(test.has_unknowns());

  for (std::size_t i = 0; i < train.size(); ++i) {
    CHECK(train.known[i] == 1);
    CHECK(train.labels[i] >= 0);
    CHECK(train.labels[i] < static_cast<int>(spec.n_known_classes));
  }
  std::size_t unknown_rows = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.known[i]) {
      CHECK(test.labels[i] < static_cast<int>(spec.n_known_classes));
    } else {
      ++unknown_rows;
      CHECK(test.labels[i] >= static_cast<int>(spec.n_known_classes));
    }
  }
  CHECK(unknown_rows == spec.n_unknown_classes * spec.samples_per_class_test);
}

TEST_CASE("identity-map samples concentrate around their class directions") {
  SyntheticSpec spec = small_spec();
  spec.samples_per_class_train = 200;
  spec.kappa_data = 20.0;
  SeededRng rng(23, 0);
  SeededRng rng_dirs(23, 0);
  const auto dirs = vmfosr::datagen::generate_class_directions(spec, rng_dirs);
  const auto [train, test] = vmfosr::datagen::generate_dataset(spec, rng);

  // Identity map exposes the latent draws directly: the per-class mean
  // direction must align with the class direction used to generate it.
  for (std::size_t c = 0; c < spec.n_known_classes; ++c) {
    Vec mean(spec.p_latent, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train.labels[i] != static_cast<int>(c)) continue;
      vmfosr::axpy(1.0, train.inputs.row(i), mean);
      ++count;
    }
    REQUIRE(count == spec.samples_per_class_train);
    const Vec unit = vmfosr::numerics::l2_normalize(mean);
    CHECK(vmfosr::dot(unit, dirs[c]) > 0.95);
  }
}

TEST_CASE("every sample is unit norm under the identity map") {
  SyntheticSpec spec = small_spec();
  SeededRng rng(27, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(spec, rng);
  for (std::size_t i = 0; i < train.size(); ++i)
    CHECK_THAT(vmfosr::norm(train.inputs.row(i)),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("tanh observation map bounds inputs; affine map reaches beyond") {
  SyntheticSpec spec = small_spec();
  spec.input_dim = 32;
  spec.observation_map = ObservationMap::RandomAffineTanh;
  SeededRng rng(29, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(spec, rng);
  for (double v : train.inputs.data) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }

  spec.observation_map = ObservationMap::RandomAffine;
  SeededRng rng2(29, 0);
  const auto [train2, test2] = vmfosr::datagen::generate_dataset(spec, rng2);
  double widest = 0.0;
  for (double v : train2.inputs.data) widest = std::max(widest, std::abs(v));
  CHECK(widest > 1.0);
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticSpec spec = small_spec();
  spec.observation_map = ObservationMap::RandomAffineTanh;
  spec.input_dim = 24;
  SeededRng a(31, 0), b(31, 0), c(32, 0);
  const auto [train_a, test_a] = vmfosr::datagen::generate_dataset(spec, a);
  const auto [train_b, test_b] = vmfosr::datagen::generate_dataset(spec, b);
  const auto [train_c, test_c] = vmfosr::datagen::generate_dataset(spec, c);

  REQUIRE(train_a.inputs.data == train_b.inputs.data);
  REQUIRE(test_a.inputs.data == test_b.inputs.data);
  REQUIRE(train_a.labels == train_b.labels);
  CHECK(train_a.inputs.data != train_c.inputs.data);
}

TEST_CASE("per-class streams decouple sample counts across classes and roles") {
  // Growing the test split must not disturb the train draws, and vice versa;
  // each (class, role) pair owns an RNG stream.
  SyntheticSpec spec = small_spec();
  SyntheticSpec bigger = spec;
  bigger.samples_per_class_test = spec.samples_per_class_test + 7;

  SeededRng a(37, 0), b(37, 0);
  const auto [train_small, test_small] = vmfosr::datagen::generate_dataset(spec, a);
  const auto [train_big, test_big] = vmfosr::datagen::generate_dataset(bigger, b);

  REQUIRE(train_small.inputs.data == train_big.inputs.data);
  // The first samples_per_class_test rows of each class block also agree.
  const std::size_t n_cls = spec.n_known_classes + spec.n_unknown_classes;
  for (std::size_t cls = 0; cls < n_cls; ++cls) {
    for (std::size_t s = 0; s < spec.samples_per_class_test; ++s) {
      const auto small_row = test_small.inputs.row(cls * spec.samples_per_class_test + s);
      const auto big_row = test_big.inputs.row(cls * bigger.samples_per_class_test + s);
      for (std::size_t j = 0; j < small_row.size(); ++j)
        REQUIRE(small_row[j] == big_row[j]);
    }
  }
}

TEST_CASE("openness follows the class-count formula") {
  using vmfosr::datagen::openness;
  CHECK(openness(5, 5) == 0.0);
  CHECK_THAT(openness(1, 4), Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(openness(8, 16), Catch::Matchers::WithinAbs(1.0 - std::sqrt(0.5), 1e-15));
  CHECK_THROWS_AS(openness(0, 5), vmfosr::ConfigError);
  CHECK_THROWS_AS(openness(6, 5), vmfosr::ConfigError);
}

TEST_CASE("dataset row reads are counted") {
  SyntheticSpec spec = small_spec();
  SeededRng rng(41, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(spec, rng);
  const std::uint64_t before = train.reads;
  (void)train.row(0);
  (void)train.row(1);
  CHECK(train.reads == before + 2);
}

TEST_CASE("csv round trip preserves the dataset bit for bit") {
  namespace fs = std::filesystem;
  SyntheticSpec spec = small_spec();
  spec.observation_map = ObservationMap::RandomAffineTanh;
  spec.input_dim = 20;
  SeededRng rng(43, 0);
  const auto [train, test] = vmfosr::datagen::generate_dataset(spec, rng);

  const fs::path dir = fs::temp_directory_path() / "vmfosr_datagen_csv";
  fs::create_directories(dir);
  const std::string inputs = (dir / "inputs.csv").string();
  const std::string labels = (dir / "labels.csv").string();
  vmfosr::datagen::write_dataset_csv(train, test, inputs, labels);

  const auto [train2, test2] = vmfosr::datagen::read_dataset_csv(inputs, labels);
  REQUIRE(train2.inputs.rows == train.inputs.rows);
  REQUIRE(test2.inputs.rows == test.inputs.rows);
  REQUIRE(train2.inputs.data == train.inputs.data);  // %.17g round-trips doubles
  REQUIRE(test2.inputs.data == test.inputs.data);
  CHECK(train2.labels == train.labels);
  CHECK(test2.labels == test.labels);
  CHECK(train2.known == train.known);
  CHECK(test2.known == test.known);
  fs::remove_all(dir);
}

TEST_CASE("csv reader rejects malformed files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vmfosr_datagen_bad_csv";
  fs::create_directories(dir);
  const std::string inputs = (dir / "inputs.csv").string();
  const std::string labels = (dir / "labels.csv").string();

  auto write = [](const std::string& path, const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs(text.c_str(), f);
    std::fclose(f);
  };

  CHECK_THROWS_AS(
      vmfosr::datagen::read_dataset_csv((dir / "missing.csv").string(), labels),
      vmfosr::IoError);

  write(inputs, "1.0,2.0\n3.0\n");  // ragged
  write(labels, "sample_id,class_id,known,role\n0,0,1,train\n1,0,1,train\n");
  CHECK_THROWS_AS(vmfosr::datagen::read_dataset_csv(inputs, labels), vmfosr::IoError);

  write(inputs, "1.0,2.0\n3.0,4.0\n");
  write(labels, "wrong,header\n");
  CHECK_THROWS_AS(vmfosr::datagen::read_dataset_csv(inputs, labels), vmfosr::IoError);

  // Unknown-class sample placed in the train split.
  write(labels, "sample_id,class_id,known,role\n0,5,0,train\n1,0,1,test\n");
  CHECK_THROWS_AS(vmfosr::datagen::read_dataset_csv(inputs, labels), vmfosr::IoError);

  // Non-consecutive sample ids.
  write(labels, "sample_id,class_id,known,role\n0,0,1,train\n2,0,1,test\n");
  CHECK_THROWS_AS(vmfosr::datagen::read_dataset_csv(inputs, labels), vmfosr::IoError);

  // Bad numeric field.
  write(inputs, "1.0,oops\n3.0,4.0\n");
  write(labels, "sample_id,class_id,known,role\n0,0,1,train\n1,0,1,test\n");
  CHECK_THROWS_AS(vmfosr::datagen::read_dataset_csv(inputs, labels), vmfosr::IoError);

  fs::remove_all(dir);
}
