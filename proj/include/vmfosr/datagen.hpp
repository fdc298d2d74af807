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

// Synthetic open-set datasets drawn from von Mises-Fisher mixtures with
// controllable known/unknown class geometry. A single hardness dial moves
// unknown class directions from orthogonal-to-everything (easy) to within
// 15 degrees of a known class (hard).

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/numerics.hpp"

namespace vmfosr::datagen {

enum class ObservationMap { Identity, RandomAffine, RandomAffineTanh };
enum class DirectionMode { Orthogonal, Random };
enum class Role { Train, Test };

struct SyntheticSpec {
  std::size_t p_latent = 16;
  std::size_t input_dim = 32;
  std::size_t n_known_classes = 8;
  std::size_t n_unknown_classes = 8;
  std::size_t samples_per_class_train = 400;
  std::size_t samples_per_class_test = 50;
  double kappa_data = 20.0;
  double hardness = 0.5;  // 0 = unknowns orthogonal, 1 = within 15 deg of a known
  ObservationMap observation_map = ObservationMap::RandomAffineTanh;
  DirectionMode direction_mode = DirectionMode::Orthogonal;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_known_classes < 2)
      throw ConfigError("SyntheticSpec: need at least two known classes");
    if (p_latent < 2) throw ConfigError("SyntheticSpec: p_latent must be >= 2");
    if (!(hardness >= 0.0 && hardness <= 1.0))
      throw ConfigError("SyntheticSpec: hardness must lie in [0, 1]");
    if (kappa_data < 0.0) throw ConfigError("SyntheticSpec: kappa_data must be >= 0");
    if (observation_map == ObservationMap::Identity && input_dim != p_latent)
      throw ConfigError("SyntheticSpec: identity map needs input_dim == p_latent");
  }
};

/// Labeled sample matrix. Known classes use ids 0..C-1; unknown test classes
/// carry the sentinel ids C, C+1, ... together with known = false. Row reads
/// through row() are counted so tests can assert which splits a consumer
/// touched.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  std::vector<std::uint8_t> known;
  Role role = Role::Train;
  mutable std::uint64_t reads = 0;

  std::size_t size() const { return inputs.rows; }

  std::span<const double> row(std::size_t i) const {
    ++reads;
    return inputs.row(i);
  }

  bool has_unknowns() const {
    for (auto k : known)
      if (!k) return true;
    return false;
  }
};

/// Benchmark openness from class counts: 1 - sqrt(N_train / N_test).
inline double openness(std::size_t n_train_classes, std::size_t n_test_classes) {
  if (n_train_classes < 1 || n_train_classes > n_test_classes)
    throw ConfigError("openness: need 1 <= n_train_classes <= n_test_classes");
  return 1.0 - std::sqrt(static_cast<double>(n_train_classes) /
                         static_cast<double>(n_test_classes));
}

namespace detail {

/// Columns of a random orthonormal frame in R^p via modified Gram-Schmidt on
/// Gaussian draws.
inline std::vector<Vec> random_orthonormal_frame(std::size_t p, std::size_t count,
                                                 numerics::SeededRng& rng) {
  std::vector<Vec> frame;
  frame.reserve(count);
  while (frame.size() < count) {
    Vec g = rng.normal_vector(p);
    for (const Vec& q : frame) {
      const double proj = dot(g, q);
      for (std::size_t i = 0; i < p; ++i) g[i] -= proj * q[i];
    }
    if (norm(g) > 1e-8) frame.push_back(numerics::l2_normalize(g));
  }
  return frame;
}

}  // namespace detail

/// Class mean directions, knowns first, then unknowns. Known directions are
/// exactly orthogonal in Orthogonal mode and pairwise separated by at least
/// 60 degrees in Random mode. Each unknown direction has cosine
/// hardness * cos(15 deg) to a randomly chosen known anchor, reached by
/// rotating from a direction in the anchor's orthogonal complement: hardness 0
/// puts unknowns orthogonal to every known, hardness 1 puts each at exactly
/// 15 degrees from its anchor, and the maximum cosine to the knowns grows
/// linearly (hence monotonically) with hardness.
inline std::vector<Vec> generate_class_directions(const SyntheticSpec& spec,
                                                  numerics::SeededRng& rng) {
  spec.validate();
  const std::size_t ck = spec.n_known_classes;
  const std::size_t cu = spec.n_unknown_classes;
  const std::size_t p = spec.p_latent;

  std::vector<Vec> known;
  std::vector<Vec> complement;  // per-unknown orthogonal directions

  if (spec.direction_mode == DirectionMode::Orthogonal) {
    if (p < ck + cu)
      throw ConfigError(
          "generate_class_directions: dimension too small for orthogonal mode "
          "(p_latent < known + unknown classes)");
    auto frame = detail::random_orthonormal_frame(p, ck + cu, rng);
    known.assign(frame.begin(), frame.begin() + static_cast<std::ptrdiff_t>(ck));
    complement.assign(frame.begin() + static_cast<std::ptrdiff_t>(ck), frame.end());
  } else {
    // Rejection sampling: uniform directions, pairwise cosine <= 0.5.
    constexpr std::size_t kMaxAttempts = 100000;
    std::size_t attempts = 0;
    while (known.size() < ck) {
      if (++attempts > kMaxAttempts)
        throw ConfigError(
            "generate_class_directions: could not place known directions at "
            ">= 60 degree separation; dimension too small for class count");
      Vec cand = numerics::sample_uniform_sphere(p, rng);
      bool ok = true;
      for (const Vec& u : known)
        if (dot(cand, u) > 0.5) {
          ok = false;
          break;
        }
      if (ok) known.push_back(std::move(cand));
    }
  }

  std::vector<Vec> directions = known;
  const double cos_anchor =
      spec.hardness * std::cos(15.0 * std::numbers::pi / 180.0);
  const double sin_anchor = std::sqrt(1.0 - cos_anchor * cos_anchor);
  for (std::size_t u = 0; u < cu; ++u) {
    const Vec& anchor = known[rng.below(ck)];
    Vec ortho;
    if (spec.direction_mode == DirectionMode::Orthogonal) {
      ortho = complement[u];
    } else {
      for (;;) {
        Vec g = numerics::sample_uniform_sphere(p, rng);
        const double proj = dot(g, anchor);
        for (std::size_t i = 0; i < p; ++i) g[i] -= proj * anchor[i];
        if (norm(g) > 1e-8) {
          ortho = numerics::l2_normalize(g);
          break;
        }
      }
    }
    Vec dir(p);
    for (std::size_t i = 0; i < p; ++i)
      dir[i] = cos_anchor * anchor[i] + sin_anchor * ortho[i];
    directions.push_back(numerics::l2_normalize(dir));
  }
  return directions;
}

namespace detail {

struct Observation {
  ObservationMap kind;
  Matrix A;  // input_dim x p_latent
  Vec b;     // input_dim

  Vec apply(std::span<const double> z) const {
    if (kind == ObservationMap::Identity) return Vec(z.begin(), z.end());
    Vec x = matvec(A, z);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += b[i];
    if (kind == ObservationMap::RandomAffineTanh)
      for (double& v : x) v = std::tanh(v);
    return x;
  }
};

inline Observation make_observation(const SyntheticSpec& spec,
                                    numerics::SeededRng& rng) {
  Observation obs;
  obs.kind = spec.observation_map;
  if (obs.kind == ObservationMap::Identity) return obs;
  obs.A = Matrix(spec.input_dim, spec.p_latent);
  for (double& a : obs.A.data) a = rng.normal();
  obs.b = Vec(spec.input_dim);
  for (double& v : obs.b) v = 0.1 * rng.normal();
  return obs;
}

}  // namespace detail

/// Draw the train and test splits. Latent samples are vMF draws around each
/// class direction, pushed through the observation map. The train split holds
/// known classes only; the test split holds knowns and unknowns in the
/// spec'd per-class counts. Each (class, role) pair samples from its own RNG
/// stream, so per-class generation order never changes the result.
inline std::pair<Dataset, Dataset> generate_dataset(const SyntheticSpec& spec,
                                                    numerics::SeededRng& rng) {
  spec.validate();
  const std::size_t ck = spec.n_known_classes;
  const std::size_t cu = spec.n_unknown_classes;

  auto directions = generate_class_directions(spec, rng);
  auto observation = detail::make_observation(spec, rng);
  const std::uint64_t stream_base = rng.next_u64();

  Dataset train;
  train.role = Role::Train;
  train.inputs = Matrix(ck * spec.samples_per_class_train, spec.input_dim);
  Dataset test;
  test.role = Role::Test;
  test.inputs = Matrix((ck + cu) * spec.samples_per_class_test, spec.input_dim);

  std::size_t train_row = 0;
  std::size_t test_row = 0;
  for (std::size_t c = 0; c < ck + cu; ++c) {
    const bool is_known = c < ck;
    numerics::SeededRng class_rng(stream_base, 2 * c);
    numerics::SeededRng class_rng_test(stream_base, 2 * c + 1);

    if (is_known) {
      for (std::size_t s = 0; s < spec.samples_per_class_train; ++s) {
        Vec z = numerics::sample_vmf(directions[c], spec.kappa_data, class_rng);
        train.inputs.set_row(train_row++, observation.apply(z));
        train.labels.push_back(static_cast<int>(c));
        train.known.push_back(1);
      }
    }
    for (std::size_t s = 0; s < spec.samples_per_class_test; ++s) {
      Vec z = numerics::sample_vmf(directions[c], spec.kappa_data, class_rng_test);
      test.inputs.set_row(test_row++, observation.apply(z));
      test.labels.push_back(static_cast<int>(c));
      test.known.push_back(is_known ? 1 : 0);
    }
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// CSV export/import. inputs.csv holds one comma-separated row of input_dim
// values per sample, no header. labels.csv holds a header line
// "sample_id,class_id,known,role" followed by one row per sample; sample ids
// index into inputs.csv. Train rows precede test rows.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline double parse_double(const std::string& tok) {
  double v = 0.0;
  const auto* begin = tok.data();
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw IoError("dataset CSV: bad numeric field '" + tok + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(line);
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace detail

inline void write_dataset_csv(const Dataset& train, const Dataset& test,
                              const std::string& inputs_path,
                              const std::string& labels_path) {
  std::ofstream in_file(inputs_path);
  std::ofstream lab_file(labels_path);
  if (!in_file || !lab_file)
    throw IoError("write_dataset_csv: cannot open output files");
  lab_file << "sample_id,class_id,known,role\n";

  std::size_t sample_id = 0;
  for (const Dataset* ds : {&train, &test}) {
    const char* role = ds->role == Role::Train ? "train" : "test";
    for (std::size_t i = 0; i < ds->size(); ++i) {
      auto r = ds->inputs.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (j) in_file << ',';
        in_file << detail::format_double(r[j]);
      }
      in_file << '\n';
      lab_file << sample_id + i << ',' << ds->labels[i] << ','
               << static_cast<int>(ds->known[i]) << ',' << role << '\n';
    }
    sample_id += ds->size();
  }
}

inline std::pair<Dataset, Dataset> read_dataset_csv(const std::string& inputs_path,
                                                    const std::string& labels_path) {
  std::ifstream in_file(inputs_path);
  std::ifstream lab_file(labels_path);
  if (!in_file) throw IoError("read_dataset_csv: cannot open " + inputs_path);
  if (!lab_file) throw IoError("read_dataset_csv: cannot open " + labels_path);

  std::vector<Vec> rows;
  std::string line;
  while (std::getline(in_file, line)) {
    if (line.empty()) continue;
    auto toks = detail::split_csv_line(line);
    Vec r(toks.size());
    for (std::size_t j = 0; j < toks.size(); ++j) r[j] = detail::parse_double(toks[j]);
    if (!rows.empty() && r.size() != rows.front().size())
      throw IoError("read_dataset_csv: ragged inputs.csv");
    rows.push_back(std::move(r));
  }

  Dataset train, test;
  train.role = Role::Train;
  test.role = Role::Test;
  std::vector<std::pair<Dataset*, std::size_t>> placement;  // per sample id

  if (!std::getline(lab_file, line) || line != "sample_id,class_id,known,role")
    throw IoError("read_dataset_csv: labels.csv missing header");
  std::size_t expected_id = 0;
  std::vector<std::size_t> train_ids, test_ids;
  struct LabelRow {
    int class_id;
    std::uint8_t known;
    Role role;
  };
  std::vector<LabelRow> label_rows;
  while (std::getline(lab_file, line)) {
    if (line.empty()) continue;
    auto toks = detail::split_csv_line(line);
    if (toks.size() != 4) throw IoError("read_dataset_csv: bad labels.csv row");
    const auto id = static_cast<std::size_t>(detail::parse_double(toks[0]));
    if (id != expected_id++)
      throw IoError("read_dataset_csv: sample ids must be consecutive from 0");
    LabelRow row;
    row.class_id = static_cast<int>(detail::parse_double(toks[1]));
    row.known = toks[2] == "1" ? 1 : 0;
    if (toks[3] == "train")
      row.role = Role::Train;
    else if (toks[3] == "test")
      row.role = Role::Test;
    else
      throw IoError("read_dataset_csv: unknown role '" + toks[3] + "'");
    label_rows.push_back(row);
    (row.role == Role::Train ? train_ids : test_ids).push_back(id);
  }
  if (label_rows.size() != rows.size())
    throw IoError("read_dataset_csv: inputs.csv and labels.csv disagree on count");

  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  train.inputs = Matrix(train_ids.size(), dim);
  test.inputs = Matrix(test_ids.size(), dim);
  std::size_t ti = 0, si = 0;
  for (std::size_t id = 0; id < rows.size(); ++id) {
    const LabelRow& lr = label_rows[id];
    if (lr.role == Role::Train) {
      if (!lr.known) throw IoError("read_dataset_csv: unknown-class row in train split");
      train.inputs.set_row(ti++, rows[id]);
      train.labels.push_back(lr.class_id);
      train.known.push_back(lr.known);
    } else {
      test.inputs.set_row(si++, rows[id]);
      test.labels.push_back(lr.class_id);
      test.known.push_back(lr.known);
    }
  }
  return {std::move(train), std::move(test)};
}

}  // namespace vmfosr::datagen
