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

// Known-vs-unknown scoring rules. Every rule maps a test sample to a real
// score where higher means more known-like; the threshold decision declares a
// sample known iff score >= theta.
//
//   maxlogit  - max over classifier logits
//   msp       - max softmax probability
//   knn       - negative distance to the k-th nearest normalized bank feature
//   nnguide   - maxlogit weighted by mean top-k bank similarity

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vmfosr/datagen.hpp"
#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/model.hpp"
#include "vmfosr/numerics.hpp"
#include "vmfosr/training.hpp"

namespace vmfosr::scoring {

enum class Rule { MaxLogit, Msp, Knn, NnGuide };

inline const std::vector<Rule>& all_rules() {
  static const std::vector<Rule> rules = {Rule::MaxLogit, Rule::Msp, Rule::Knn,
                                          Rule::NnGuide};
  return rules;
}

inline std::string rule_name(Rule rule) {
  switch (rule) {
    case Rule::MaxLogit: return "maxlogit";
    case Rule::Msp: return "msp";
    case Rule::Knn: return "knn";
    case Rule::NnGuide: return "nnguide";
  }
  throw ConfigError("rule_name: unknown rule");
}

inline Rule rule_from_name(const std::string& name) {
  for (Rule rule : all_rules())
    if (rule_name(rule) == name) return rule;
  throw ConfigError("rule_from_name: unknown scoring rule '" + name + "'");
}

struct ScoredSample {
  double score = 0.0;
  std::size_t predicted_class = 0;  // argmax of the classifier logits
  bool is_known_truth = false;
  int true_class = 0;  // sentinel id >= n_classes for unknown classes
};

inline double maxlogit(std::span<const double> logits) {
  if (logits.empty()) throw NumericError("maxlogit: empty logits");
  return *std::max_element(logits.begin(), logits.end());
}

inline double msp(std::span<const double> logits) {
  if (logits.empty()) throw NumericError("msp: empty logits");
  const Vec probs = numerics::softmax(logits, 1.0);
  return *std::max_element(probs.begin(), probs.end());
}

namespace detail {

inline Matrix normalized_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    out.set_row(i, numerics::l2_normalize(m.row(i)));
  return out;
}

inline void check_bank(const training::FeatureBank& bank, std::size_t k,
                       const char* who) {
  if (k < 1) throw ConfigError(std::string(who) + ": k must be >= 1");
  if (k > bank.size())
    throw ConfigError(std::string(who) + ": bank smaller than k");
}

}  // namespace detail

/// Negative Euclidean distance from the normalized query to its k-th nearest
/// normalized bank feature.
inline double knn_score(std::span<const double> feature,
                        const training::FeatureBank& bank, std::size_t k) {
  detail::check_bank(bank, k, "knn_score");
  const Vec q = numerics::l2_normalize(feature);
  std::vector<double> dist2(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const Vec row = numerics::l2_normalize(bank.features.row(i));
    double acc = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double diff = q[j] - row[j];
      acc += diff * diff;
    }
    dist2[i] = acc;
  }
  std::nth_element(dist2.begin(), dist2.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   dist2.end());
  return -std::sqrt(dist2[k - 1]);
}

/// maxlogit scaled by the mean inner product between the normalized query and
/// its k most similar normalized bank features.
inline double nnguide_score(std::span<const double> feature,
                            std::span<const double> logits,
                            const training::FeatureBank& bank, std::size_t k) {
  detail::check_bank(bank, k, "nnguide_score");
  const Vec q = numerics::l2_normalize(feature);
  std::vector<double> sims(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i)
    sims[i] = dot(q, numerics::l2_normalize(bank.features.row(i)));
  std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   sims.end(), std::greater<double>());
  double guidance = 0.0;
  for (std::size_t i = 0; i < k; ++i) guidance += sims[i];
  guidance /= static_cast<double>(k);
  return maxlogit(logits) * guidance;
}

/// Threshold decision: known iff score >= theta.
inline bool decide(double score, double theta) { return score >= theta; }

/// Score every test sample under one rule. Logits come from the classifier
/// head on unnormalized encoder features; predicted_class is their argmax.
inline std::vector<ScoredSample> score_dataset(const model::ModelState& state,
                                               const datagen::Dataset& test,
                                               const training::FeatureBank& bank,
                                               Rule rule, std::size_t k) {
  std::vector<ScoredSample> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Vec f = model::encode(test.row(i), state);
    const Vec logits = model::classify(f, state);
    ScoredSample s;
    s.is_known_truth = test.known[i] != 0;
    s.true_class = test.labels[i];
    s.predicted_class = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[s.predicted_class]) s.predicted_class = c;
    switch (rule) {
      case Rule::MaxLogit: s.score = maxlogit(logits); break;
      case Rule::Msp: s.score = msp(logits); break;
      case Rule::Knn: s.score = knn_score(f, bank, k); break;
      case Rule::NnGuide: s.score = nnguide_score(f, logits, bank, k); break;
    }
    out.push_back(s);
  }
  return out;
}

/// Score dump: one row per sample with the rule tag, %.17g scores.
inline void write_scores_csv(const std::string& path, Rule rule,
                             const std::vector<ScoredSample>& samples) {
  std::ofstream file(path);
  if (!file) throw IoError("write_scores_csv: cannot open " + path);
  file << "sample_id,rule,score,predicted_class,known_flag\n";
  const std::string name = rule_name(rule);
  char buf[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", samples[i].score);
    file << i << ',' << name << ',' << buf << ',' << samples[i].predicted_class
         << ',' << (samples[i].is_known_truth ? 1 : 0) << '\n';
  }
}

}  // namespace vmfosr::scoring
