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

// Open-set evaluation metrics.
//
// auroc and oscr are computed over exact integer pair/step counts with a
// single final division, which buys two identities that hold in floating
// point, not just approximately:
//   auroc(A, B) + auroc(B, A) == 1.0
//   oscr == accuracy when every unknown scores below every known
//
// All remaining metrics are direct evaluations of their definitions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "vmfosr/datagen.hpp"
#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/model.hpp"
#include "vmfosr/numerics.hpp"
#include "vmfosr/scoring.hpp"
#include "vmfosr/training.hpp"

namespace vmfosr::metrics {

/// Fraction of predictions matching the true class.
inline double accuracy(const std::vector<std::size_t>& predictions,
                       const std::vector<int>& true_classes) {
  if (predictions.empty()) throw NumericError("accuracy: empty input");
  if (predictions.size() != true_classes.size())
    throw NumericError("accuracy: prediction and truth counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (true_classes[i] >= 0 &&
        static_cast<std::size_t>(true_classes[i]) == predictions[i])
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

namespace detail {

/// Twice the Mann-Whitney credit of A over B: 2 * #{a > b} + #{a == b},
/// an exact integer.
inline std::uint64_t rank_credit2(const std::vector<double>& a,
                                  const std::vector<double>& b) {
  std::vector<double> sorted_b = b;
  std::sort(sorted_b.begin(), sorted_b.end());
  std::uint64_t credit2 = 0;
  for (double v : a) {
    if (!std::isfinite(v)) throw NumericError("auroc: non-finite score");
    const auto lo = std::lower_bound(sorted_b.begin(), sorted_b.end(), v);
    const auto hi = std::upper_bound(lo, sorted_b.end(), v);
    credit2 += 2 * static_cast<std::uint64_t>(lo - sorted_b.begin());
    credit2 += static_cast<std::uint64_t>(hi - lo);
  }
  return credit2;
}

}  // namespace detail

/// P(known > unknown) + 0.5 P(tie) over all pairs. The complement branch
/// makes auroc(A,B) + auroc(B,A) sum to exactly 1.0: the minority side is a
/// single correctly-rounded division and the majority side is one subtraction
/// from 1.
inline double auroc(const std::vector<double>& known_scores,
                    const std::vector<double>& unknown_scores) {
  if (known_scores.empty() || unknown_scores.empty())
    throw NumericError("auroc: empty score list");
  for (double v : unknown_scores)
    if (!std::isfinite(v)) throw NumericError("auroc: non-finite score");
  const std::uint64_t credit2 = detail::rank_credit2(known_scores, unknown_scores);
  const std::uint64_t denom2 =
      2 * static_cast<std::uint64_t>(known_scores.size()) *
      static_cast<std::uint64_t>(unknown_scores.size());
  if (2 * credit2 == denom2) return 0.5;
  if (2 * credit2 < denom2)
    return static_cast<double>(credit2) / static_cast<double>(denom2);
  return 1.0 - static_cast<double>(denom2 - credit2) / static_cast<double>(denom2);
}

/// Best balanced detection accuracy over all thresholds:
///   max_theta 0.5 * P(known >= theta) + 0.5 * P(unknown < theta).
inline double dtacc(const std::vector<double>& known_scores,
                    const std::vector<double>& unknown_scores) {
  if (known_scores.empty() || unknown_scores.empty())
    throw NumericError("dtacc: empty score list");
  std::vector<double> ks = known_scores;
  std::vector<double> us = unknown_scores;
  std::sort(ks.begin(), ks.end());
  std::sort(us.begin(), us.end());
  std::vector<double> candidates = ks;
  candidates.insert(candidates.end(), us.begin(), us.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  const double nk = static_cast<double>(ks.size());
  const double nu = static_cast<double>(us.size());
  double best = 0.5;  // theta at either infinity
  for (double theta : candidates) {
    if (!std::isfinite(theta)) throw NumericError("dtacc: non-finite score");
    const double known_ge = static_cast<double>(
        ks.end() - std::lower_bound(ks.begin(), ks.end(), theta));
    const double unknown_lt =
        static_cast<double>(std::lower_bound(us.begin(), us.end(), theta) - us.begin());
    best = std::max(best, 0.5 * (known_ge / nk) + 0.5 * (unknown_lt / nu));
  }
  return best;
}

struct CurvePoint {
  double x = 0.0;  // false positive rate (unknowns admitted)
  double y = 0.0;  // TPR for ROC, CCR for OSCR
};

namespace detail {

struct SweepArrays {
  std::vector<double> known_desc;       // known scores, descending
  std::vector<std::size_t> correct_at;  // #correct among the first i knowns
  std::vector<double> unknown_desc;
};

inline SweepArrays make_sweep(const std::vector<scoring::ScoredSample>& known_samples,
                              const std::vector<double>& unknown_scores,
                              const char* who) {
  if (known_samples.empty() || unknown_scores.empty())
    throw NumericError(std::string(who) + ": empty input");
  SweepArrays s;
  std::vector<std::pair<double, bool>> ks;
  ks.reserve(known_samples.size());
  for (const auto& sample : known_samples) {
    if (!sample.is_known_truth)
      throw NumericError(std::string(who) + ": unknown-truth sample in known list");
    if (!std::isfinite(sample.score))
      throw NumericError(std::string(who) + ": non-finite score");
    const bool correct = sample.true_class >= 0 &&
                         static_cast<std::size_t>(sample.true_class) ==
                             sample.predicted_class;
    ks.emplace_back(sample.score, correct);
  }
  std::sort(ks.begin(), ks.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  s.known_desc.reserve(ks.size());
  s.correct_at.assign(1, 0);
  for (const auto& [score, correct] : ks) {
    s.known_desc.push_back(score);
    s.correct_at.push_back(s.correct_at.back() + (correct ? 1 : 0));
  }
  s.unknown_desc = unknown_scores;
  for (double v : s.unknown_desc)
    if (!std::isfinite(v)) throw NumericError(std::string(who) + ": non-finite score");
  std::sort(s.unknown_desc.begin(), s.unknown_desc.end(), std::greater<double>());
  return s;
}

/// Walks thresholds from +inf down through every observed score, reporting
/// integer (unknowns admitted, correct knowns admitted) pairs.
template <typename Visit>
inline void sweep_thresholds(const SweepArrays& s, Visit&& visit) {
  std::vector<double> cand;
  cand.reserve(s.known_desc.size() + s.unknown_desc.size());
  cand.insert(cand.end(), s.known_desc.begin(), s.known_desc.end());
  cand.insert(cand.end(), s.unknown_desc.begin(), s.unknown_desc.end());
  std::sort(cand.begin(), cand.end(), std::greater<double>());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  std::size_t ik = 0, iu = 0;
  visit(std::size_t{0}, std::size_t{0}, std::size_t{0});  // theta above all scores
  for (double theta : cand) {
    while (ik < s.known_desc.size() && s.known_desc[ik] >= theta) ++ik;
    while (iu < s.unknown_desc.size() && s.unknown_desc[iu] >= theta) ++iu;
    visit(iu, ik, s.correct_at[ik]);
  }
}

}  // namespace detail

/// Area under the correct-classification-rate vs false-positive-rate curve.
/// Thresholds sweep all observed scores; trapezoidal integration over FPR,
/// accumulated in exact integer steps with one final division.
inline double oscr(const std::vector<scoring::ScoredSample>& known_samples,
                   const std::vector<double>& unknown_scores) {
  const auto s = detail::make_sweep(known_samples, unknown_scores, "oscr");
  std::uint64_t area2 = 0;  // sum of (du) * (corr_prev + corr_new)
  std::size_t prev_u = 0, prev_corr = 0;
  detail::sweep_thresholds(s, [&](std::size_t u, std::size_t /*k*/, std::size_t corr) {
    area2 += static_cast<std::uint64_t>(u - prev_u) *
             static_cast<std::uint64_t>(prev_corr + corr);
    prev_u = u;
    prev_corr = corr;
  });
  const double denom = 2.0 * static_cast<double>(unknown_scores.size()) *
                       static_cast<double>(known_samples.size());
  return static_cast<double>(area2) / denom;
}

/// OSCR curve points (FPR, CCR), thresholds descending from +inf.
inline std::vector<CurvePoint> oscr_curve(
    const std::vector<scoring::ScoredSample>& known_samples,
    const std::vector<double>& unknown_scores) {
  const auto s = detail::make_sweep(known_samples, unknown_scores, "oscr_curve");
  const double nk = static_cast<double>(known_samples.size());
  const double nu = static_cast<double>(unknown_scores.size());
  std::vector<CurvePoint> points;
  detail::sweep_thresholds(s, [&](std::size_t u, std::size_t /*k*/, std::size_t corr) {
    points.push_back({static_cast<double>(u) / nu, static_cast<double>(corr) / nk});
  });
  return points;
}

/// ROC curve points (FPR, TPR), thresholds descending from +inf.
inline std::vector<CurvePoint> roc_curve(const std::vector<double>& known_scores,
                                         const std::vector<double>& unknown_scores) {
  if (known_scores.empty() || unknown_scores.empty())
    throw NumericError("roc_curve: empty input");
  std::vector<scoring::ScoredSample> wrapped;
  wrapped.reserve(known_scores.size());
  for (double v : known_scores) {
    scoring::ScoredSample s;
    s.score = v;
    s.is_known_truth = true;
    s.true_class = 0;
    s.predicted_class = 0;  // every sample "correct" so CCR doubles as TPR
    wrapped.push_back(s);
  }
  const auto s = detail::make_sweep(wrapped, unknown_scores, "roc_curve");
  const double nk = static_cast<double>(known_scores.size());
  const double nu = static_cast<double>(unknown_scores.size());
  std::vector<CurvePoint> points;
  detail::sweep_thresholds(s, [&](std::size_t u, std::size_t k, std::size_t /*corr*/) {
    points.push_back({static_cast<double>(u) / nu, static_cast<double>(k) / nk});
  });
  return points;
}

/// Mean over unknowns of the max cosine similarity to any known feature.
/// Lower values mean unknowns sit farther from every known direction.
inline double angular_separability(const Matrix& known_features,
                                   const Matrix& unknown_features) {
  if (known_features.rows == 0 || unknown_features.rows == 0)
    throw NumericError("angular_separability: empty feature set");
  if (known_features.cols != unknown_features.cols)
    throw NumericError("angular_separability: feature widths differ");
  std::vector<Vec> known_unit(known_features.rows);
  for (std::size_t i = 0; i < known_features.rows; ++i)
    known_unit[i] = numerics::l2_normalize(known_features.row(i));
  double total = 0.0;
  for (std::size_t u = 0; u < unknown_features.rows; ++u) {
    const Vec q = numerics::l2_normalize(unknown_features.row(u));
    double best = -1.0;
    for (const Vec& v : known_unit) best = std::max(best, dot(q, v));
    total += best;
  }
  return total / static_cast<double>(unknown_features.rows);
}

/// AUROC of feature norms, knowns as positives. 0.5 means norms alone carry
/// no known-vs-unknown signal.
inline double norm_separability(const Matrix& known_features,
                                const Matrix& unknown_features) {
  if (known_features.rows == 0 || unknown_features.rows == 0)
    throw NumericError("norm_separability: empty feature set");
  std::vector<double> known_norms(known_features.rows);
  for (std::size_t i = 0; i < known_features.rows; ++i)
    known_norms[i] = norm(known_features.row(i));
  std::vector<double> unknown_norms(unknown_features.rows);
  for (std::size_t i = 0; i < unknown_features.rows; ++i)
    unknown_norms[i] = norm(unknown_features.row(i));
  return auroc(known_norms, unknown_norms);
}

/// Mean pairwise angle in degrees between normalized class-mean features,
/// averaged over ordered pairs. Every class in [0, n_classes) must appear.
inline double dispersion_degrees(const Matrix& features,
                                 const std::vector<int>& labels,
                                 std::size_t n_classes) {
  if (n_classes < 2) throw NumericError("dispersion: needs at least two classes");
  if (features.rows != labels.size())
    throw NumericError("dispersion: feature and label counts differ");
  Matrix means(n_classes, features.cols);
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes)
      throw NumericError("dispersion: label outside [0, n_classes)");
    axpy(1.0, features.row(i), means.row(static_cast<std::size_t>(label)));
    ++counts[static_cast<std::size_t>(label)];
  }
  std::vector<Vec> unit(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] == 0)
      throw NumericError("dispersion: class " + std::to_string(c) + " has no samples");
    scale_inplace(means.row(c), 1.0 / static_cast<double>(counts[c]));
    unit[c] = numerics::l2_normalize(means.row(c));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n_classes; ++i)
    for (std::size_t j = 0; j < n_classes; ++j) {
      if (i == j) continue;
      const double c = std::clamp(dot(unit[i], unit[j]), -1.0, 1.0);
      total += std::acos(c);
    }
  const double n_pairs = static_cast<double>(n_classes * (n_classes - 1));
  return total / n_pairs * 180.0 / std::numbers::pi;
}

struct RuleMetrics {
  double auroc = 0.0;
  double oscr = 0.0;
  double dtacc = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::pair<scoring::Rule, RuleMetrics>> per_rule;
  double angular_separability = 0.0;
  double norm_separability = 0.0;
  double dispersion_degrees = 0.0;
  double openness = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Full evaluation: closed-set accuracy on knowns, per-rule threshold-free
/// metrics, and the three representation diagnostics on unnormalized encoder
/// features.
inline EvalReport evaluate(const model::ModelState& state,
                           const datagen::Dataset& test,
                           const training::FeatureBank& bank,
                           const std::vector<scoring::Rule>& rules, std::size_t k) {
  if (test.size() == 0) throw NumericError("evaluate: empty test set");
  const std::size_t n_classes = state.config.n_classes;

  std::size_t n_known = 0;
  for (auto flag : test.known) n_known += flag ? 1 : 0;
  const std::size_t n_unknown = test.size() - n_known;
  if (n_known == 0 || n_unknown == 0)
    throw NumericError("evaluate: test split needs both known and unknown samples");

  Matrix known_features(n_known, state.config.d);
  Matrix unknown_features(n_unknown, state.config.d);
  std::vector<std::size_t> known_predictions;
  std::vector<int> known_labels;
  std::size_t ik = 0, iu = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Vec f = model::encode(test.row(i), state);
    if (test.known[i]) {
      known_features.set_row(ik++, f);
      const Vec logits = model::classify(f, state);
      std::size_t arg = 0;
      for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits[c] > logits[arg]) arg = c;
      known_predictions.push_back(arg);
      known_labels.push_back(test.labels[i]);
    } else {
      unknown_features.set_row(iu++, f);
    }
  }

  EvalReport report;
  report.accuracy = accuracy(known_predictions, known_labels);
  report.angular_separability = angular_separability(known_features, unknown_features);
  report.norm_separability = norm_separability(known_features, unknown_features);
  report.dispersion_degrees = dispersion_degrees(known_features, known_labels, n_classes);

  std::vector<int> distinct = test.labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  report.openness = datagen::openness(n_classes, distinct.size());

  for (scoring::Rule rule : rules) {
    const auto scored = scoring::score_dataset(state, test, bank, rule, k);
    std::vector<scoring::ScoredSample> knowns;
    std::vector<double> known_scores, unknown_scores;
    for (const auto& s : scored) {
      if (s.is_known_truth) {
        knowns.push_back(s);
        known_scores.push_back(s.score);
      } else {
        unknown_scores.push_back(s.score);
      }
    }
    RuleMetrics m;
    m.auroc = auroc(known_scores, unknown_scores);
    m.oscr = oscr(knowns, unknown_scores);
    m.dtacc = dtacc(known_scores, unknown_scores);
    report.per_rule.emplace_back(rule, m);
  }
  return report;
}

}  // namespace vmfosr::metrics
