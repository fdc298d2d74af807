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

// Tests for the evaluation metrics. Every ranking metric is checked against
// a quadratic brute-force oracle written directly from its definition, and
// the two exact floating-point identities (auroc complement, oscr equals
// accuracy under perfect separation) are asserted with operator==.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "vmfosr/linalg.hpp"
#include "vmfosr/metrics.hpp"
#include "vmfosr/numerics.hpp"
#include "vmfosr/rng.hpp"
#include "vmfosr/scoring.hpp"

using vmfosr::Matrix;
using vmfosr::Vec;
using vmfosr::numerics::SeededRng;
using vmfosr::scoring::ScoredSample;

namespace {

// Pairwise probability oracle: P(known > unknown) + 0.5 P(tie), all pairs.
double auroc_naive(const std::vector<double>& known,
                   const std::vector<double>& unknown) {
  double credit = 0.0;
  for (double a : known)
    for (double b : unknown) {
      if (a > b) credit += 1.0;
      else if (a == b) credit += 0.5;
    }
  return credit / (static_cast<double>(known.size()) *
                   static_cast<double>(unknown.size()));
}

// Balanced-accuracy oracle: test every observed score as the threshold.
double dtacc_naive(const std::vector<double>& known,
                   const std::vector<double>& unknown) {
  std::vector<double> cand = known;
  cand.insert(cand.end(), unknown.begin(), unknown.end());
  double best = 0.5;
  for (double theta : cand) {
    double kge = 0.0, ult = 0.0;
    for (double a : known) kge += a >= theta ? 1.0 : 0.0;
    for (double b : unknown) ult += b < theta ? 1.0 : 0.0;
    best = std::max(best, 0.5 * kge / known.size() + 0.5 * ult / unknown.size());
  }
  return best;
}

// Trapezoidal OSCR oracle: sweep unique thresholds descending, measure
// (unknown admit rate, correct known admit rate) per threshold directly.
double oscr_naive(const std::vector<ScoredSample>& knowns,
                  const std::vector<double>& unknown) {
  std::vector<double> cand;
  for (const auto& s : knowns) cand.push_back(s.score);
  cand.insert(cand.end(), unknown.begin(), unknown.end());
  std::sort(cand.begin(), cand.end(), std::greater<double>());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  auto point = [&](double theta) {
    double fpr = 0.0, ccr = 0.0;
    for (double b : unknown) fpr += b >= theta ? 1.0 : 0.0;
    for (const auto& s : knowns) {
      const bool correct = s.true_class >= 0 &&
                           static_cast<std::size_t>(s.true_class) == s.predicted_class;
      ccr += (s.score >= theta && correct) ? 1.0 : 0.0;
    }
    return std::pair<double, double>{fpr / unknown.size(), ccr / knowns.size()};
  };

  double area = 0.0;
  double prev_x = 0.0, prev_y = 0.0;  // threshold above every score
  for (double theta : cand) {
    const auto [x, y] = point(theta);
    area += (x - prev_x) * 0.5 * (prev_y + y);
    prev_x = x;
    prev_y = y;
  }
  return area;
}

// Max-cosine oracle over raw (unnormalized) rows.
double angular_separability_naive(const Matrix& known, const Matrix& unknown) {
  double total = 0.0;
  for (std::size_t u = 0; u < unknown.rows; ++u) {
    double best = -1.0;
    for (std::size_t k = 0; k < known.rows; ++k) {
      const double c = vmfosr::dot(unknown.row(u), known.row(k)) /
                       (vmfosr::norm(unknown.row(u)) * vmfosr::norm(known.row(k)));
      best = std::max(best, c);
    }
    total += best;
  }
  return total / static_cast<double>(unknown.rows);
}

std::vector<double> random_scores(std::size_t n, SeededRng& rng, bool with_ties) {
  std::vector<double> v(n);
  for (double& x : v)
    x = with_ties ? std::round(rng.normal() * 4.0) / 4.0 : rng.normal();
  return v;
}

std::vector<ScoredSample> random_known_samples(std::size_t n, std::size_t n_classes,
                                               SeededRng& rng, bool with_ties) {
  std::vector<ScoredSample> out(n);
  for (auto& s : out) {
    s.score = with_ties ? std::round(rng.normal() * 4.0) / 4.0 : rng.normal();
    s.is_known_truth = true;
    s.true_class = static_cast<int>(rng.below(n_classes));
    s.predicted_class = rng.below(n_classes);
  }
  return out;
}

}  // namespace

TEST_CASE("accuracy counts exact matches") {
  CHECK(vmfosr::metrics::accuracy({0, 1, 2, 1}, {0, 1, 1, 1}) == 0.75);
  CHECK(vmfosr::metrics::accuracy({0}, {-1}) == 0.0);  // negative truth never matches
  CHECK_THROWS_AS(vmfosr::metrics::accuracy({}, {}), vmfosr::NumericError);
  CHECK_THROWS_AS(vmfosr::metrics::accuracy({0, 1}, {0}), vmfosr::NumericError);
}

TEST_CASE("auroc matches the all-pairs oracle with and without ties") {
  SeededRng rng(3, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const bool ties = rep % 2 == 0;
    const std::size_t nk = 1 + rng.below(200);
    const std::size_t nu = 1 + rng.below(200);
    const auto known = random_scores(nk, rng, ties);
    const auto unknown = random_scores(nu, rng, ties);
    REQUIRE(std::abs(vmfosr::metrics::auroc(known, unknown) -
                     auroc_naive(known, unknown)) <= 1e-10);
  }
}

TEST_CASE("auroc complement identity holds exactly") {
  SeededRng rng(5, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t nk = 1 + rng.below(60);
    const std::size_t nu = 1 + rng.below(60);
    const auto a = random_scores(nk, rng, rep % 2 == 0);
    const auto b = random_scores(nu, rng, rep % 2 == 0);
    REQUIRE(vmfosr::metrics::auroc(a, b) + vmfosr::metrics::auroc(b, a) == 1.0);
  }
}

TEST_CASE("auroc boundary values and validation") {
  CHECK(vmfosr::metrics::auroc({2.0, 3.0}, {0.0, 1.0}) == 1.0);
  CHECK(vmfosr::metrics::auroc({0.0, 1.0}, {2.0, 3.0}) == 0.0);
  CHECK(vmfosr::metrics::auroc({1.0}, {1.0}) == 0.5);
  CHECK_THROWS_AS(vmfosr::metrics::auroc({}, {1.0}), vmfosr::NumericError);
  CHECK_THROWS_AS(vmfosr::metrics::auroc({1.0}, {std::nan("")}), vmfosr::NumericError);
}

TEST_CASE("dtacc matches the exhaustive threshold oracle") {
  SeededRng rng(7, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const bool ties = rep % 2 == 0;
    const auto known = random_scores(1 + rng.below(150), rng, ties);
    const auto unknown = random_scores(1 + rng.below(150), rng, ties);
    REQUIRE(std::abs(vmfosr::metrics::dtacc(known, unknown) -
                     dtacc_naive(known, unknown)) <= 1e-10);
  }
  // Perfect separation, inverted separation, and the degenerate tie all have
  // closed-form values.
  CHECK(vmfosr::metrics::dtacc({2.0, 3.0}, {0.0, 1.0}) == 1.0);
  CHECK(vmfosr::metrics::dtacc({0.0}, {1.0}) == 0.5);
  CHECK(vmfosr::metrics::dtacc({1.0}, {1.0}) == 0.5);
}

TEST_CASE("oscr matches the trapezoidal threshold-sweep oracle") {
  SeededRng rng(9, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const bool ties = rep % 2 == 0;
    const auto knowns = random_known_samples(1 + rng.below(150), 4, rng, ties);
    const auto unknown = random_scores(1 + rng.below(150), rng, ties);
    REQUIRE(std::abs(vmfosr::metrics::oscr(knowns, unknown) -
                     oscr_naive(knowns, unknown)) <= 1e-10);
  }
}

TEST_CASE("oscr equals accuracy exactly under perfect separation") {
  SeededRng rng(11, 0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t nk = 1 + rng.below(100);
    const std::size_t nu = 1 + rng.below(100);
    // Knowns all score above every unknown.
    auto knowns = random_known_samples(nk, 5, rng, false);
    for (auto& s : knowns) s.score = 1.0 + rng.uniform();
    std::vector<double> unknown(nu);
    for (double& v : unknown) v = -rng.uniform();

    std::vector<std::size_t> preds;
    std::vector<int> truths;
    for (const auto& s : knowns) {
      preds.push_back(s.predicted_class);
      truths.push_back(s.true_class);
    }
    const double acc = vmfosr::metrics::accuracy(preds, truths);
    REQUIRE(vmfosr::metrics::oscr(knowns, unknown) == acc);
  }
}

TEST_CASE("oscr rejects malformed inputs") {
  SeededRng rng(13, 0);
  auto knowns = random_known_samples(3, 2, rng, false);
  CHECK_THROWS_AS(vmfosr::metrics::oscr(knowns, {}), vmfosr::NumericError);
  knowns[1].is_known_truth = false;
  CHECK_THROWS_AS(vmfosr::metrics::oscr(knowns, {0.0}), vmfosr::NumericError);
}

TEST_CASE("roc and oscr curves span the unit range monotonically") {
  SeededRng rng(17, 0);
  const auto known = random_scores(40, rng, false);
  const auto unknown = random_scores(30, rng, false);
  const auto roc = vmfosr::metrics::roc_curve(known, unknown);
  REQUIRE(roc.size() >= 2);
  CHECK(roc.front().x == 0.0);
  CHECK(roc.front().y == 0.0);
  CHECK(roc.back().x == 1.0);
  CHECK(roc.back().y == 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].x >= roc[i - 1].x);
    CHECK(roc[i].y >= roc[i - 1].y);
  }

  const auto knowns = random_known_samples(40, 3, rng, false);
  const auto curve = vmfosr::metrics::oscr_curve(knowns, unknown);
  std::size_t correct = 0;
  for (const auto& s : knowns)
    correct += s.true_class >= 0 &&
               static_cast<std::size_t>(s.true_class) == s.predicted_class;
  CHECK(curve.front().x == 0.0);
  CHECK(curve.front().y == 0.0);
  CHECK(curve.back().x == 1.0);
  CHECK_THAT(curve.back().y, Catch::Matchers::WithinAbs(
                                 static_cast<double>(correct) / knowns.size(), 1e-15));
}

TEST_CASE("angular separability matches the normalized max-cosine oracle") {
  SeededRng rng(19, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t dim = 3 + rng.below(6);
    Matrix known(1 + rng.below(40), dim);
    Matrix unknown(1 + rng.below(40), dim);
    for (double& v : known.data) v = rng.normal() * 2.0;
    for (double& v : unknown.data) v = rng.normal() * 2.0;
    REQUIRE(std::abs(vmfosr::metrics::angular_separability(known, unknown) -
                     angular_separability_naive(known, unknown)) <= 1e-10);
  }
  Matrix a(1, 3), b(1, 4);
  a.set_row(0, Vec{1.0, 0.0, 0.0});
  b.set_row(0, Vec{1.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(vmfosr::metrics::angular_separability(a, b), vmfosr::NumericError);
}

TEST_CASE("angular separability hits its geometric extremes") {
  Matrix known(2, 4);
  known.set_row(0, Vec{2.0, 0.0, 0.0, 0.0});
  known.set_row(1, Vec{0.0, 3.0, 0.0, 0.0});
  Matrix aligned(1, 4);
  aligned.set_row(0, Vec{0.0, 0.5, 0.0, 0.0});  // parallel to a known row
  CHECK_THAT(vmfosr::metrics::angular_separability(known, aligned),
             Catch::Matchers::WithinAbs(1.0, 1e-12));
  Matrix orthogonal(1, 4);
  orthogonal.set_row(0, Vec{0.0, 0.0, 0.0, 1.5});
  CHECK_THAT(vmfosr::metrics::angular_separability(known, orthogonal),
             Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("norm separability is the auroc of feature norms") {
  SeededRng rng(23, 0);
  Matrix known(30, 5), unknown(25, 5);
  for (double& v : known.data) v = rng.normal() * 1.5;
  for (double& v : unknown.data) v = rng.normal();
  std::vector<double> kn, un;
  for (std::size_t i = 0; i < known.rows; ++i) kn.push_back(vmfosr::norm(known.row(i)));
  for (std::size_t i = 0; i < unknown.rows; ++i)
    un.push_back(vmfosr::norm(unknown.row(i)));
  REQUIRE(vmfosr::metrics::norm_separability(known, unknown) ==
          vmfosr::metrics::auroc(kn, un));
}

TEST_CASE("dispersion reproduces hand-computed class geometries") {
  // Two classes along orthogonal axes: mean pairwise angle is 90 degrees.
  Matrix feats(4, 3);
  feats.set_row(0, Vec{1.0, 0.0, 0.0});
  feats.set_row(1, Vec{2.0, 0.0, 0.0});
  feats.set_row(2, Vec{0.0, 1.0, 0.0});
  feats.set_row(3, Vec{0.0, 3.0, 0.0});
  const std::vector<int> labels = {0, 0, 1, 1};
  CHECK_THAT(vmfosr::metrics::dispersion_degrees(feats, labels, 2),
             Catch::Matchers::WithinAbs(90.0, 1e-12));

  // Antipodal class means: 180 degrees.
  Matrix anti(2, 2);
  anti.set_row(0, Vec{1.0, 0.0});
  anti.set_row(1, Vec{-1.0, 0.0});
  CHECK_THAT(vmfosr::metrics::dispersion_degrees(anti, {0, 1}, 2),
             Catch::Matchers::WithinAbs(180.0, 1e-12));

  // Coincident axis-aligned means: normalization is exact, angle is exactly 0.
  Matrix same(2, 2);
  same.set_row(0, Vec{1.0, 0.0});
  same.set_row(1, Vec{2.0, 0.0});
  CHECK(vmfosr::metrics::dispersion_degrees(same, {0, 1}, 2) == 0.0);

  // Coincident diagonal means: normalization rounds, and acos near 1 turns a
  // one-ulp cosine error into about 1e-6 degrees. Tolerance reflects that.
  Matrix diag(2, 2);
  diag.set_row(0, Vec{1.0, 1.0});
  diag.set_row(1, Vec{2.0, 2.0});
  CHECK_THAT(vmfosr::metrics::dispersion_degrees(diag, {0, 1}, 2),
             Catch::Matchers::WithinAbs(0.0, 1e-4));
}

TEST_CASE("dispersion matches an independent double loop on random data") {
  SeededRng rng(29, 0);
  const std::size_t n_classes = 5, dim = 6, per_class = 8;
  Matrix feats(n_classes * per_class, dim);
  std::vector<int> labels;
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t s = 0; s < per_class; ++s) {
      const std::size_t i = c * per_class + s;
      for (std::size_t j = 0; j < dim; ++j) feats(i, j) = rng.normal();
      labels.push_back(static_cast<int>(c));
    }

  // Oracle: accumulate means, normalize, average pairwise acos over ordered
  // pairs.
  std::vector<Vec> means(n_classes, Vec(dim, 0.0));
  for (std::size_t i = 0; i < feats.rows; ++i)
    vmfosr::axpy(1.0 / per_class, feats.row(i), means[labels[i]]);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n_classes; ++i)
    for (std::size_t j = 0; j < n_classes; ++j) {
      if (i == j) continue;
      const double c = vmfosr::dot(means[i], means[j]) /
                       (vmfosr::norm(means[i]) * vmfosr::norm(means[j]));
      total += std::acos(std::clamp(c, -1.0, 1.0));
      ++pairs;
    }
  const double want = total / pairs * 180.0 / std::numbers::pi;
  REQUIRE(std::abs(vmfosr::metrics::dispersion_degrees(feats, labels, n_classes) -
                   want) <= 1e-10);
}

TEST_CASE("dispersion validates labels and class coverage") {
  Matrix feats(2, 2);
  feats.set_row(0, Vec{1.0, 0.0});
  feats.set_row(1, Vec{0.0, 1.0});
  CHECK_THROWS_AS(vmfosr::metrics::dispersion_degrees(feats, {0, 0}, 2),
                  vmfosr::NumericError);  // class 1 empty
  CHECK_THROWS_AS(vmfosr::metrics::dispersion_degrees(feats, {0, 2}, 2),
                  vmfosr::NumericError);  // label out of range
  CHECK_THROWS_AS(vmfosr::metrics::dispersion_degrees(feats, {0}, 2),
                  vmfosr::NumericError);  // count mismatch
}
