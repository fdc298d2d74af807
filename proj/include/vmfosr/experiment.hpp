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

// Experiment plumbing: the schema-versioned JSON config with strict key
// checking and exact round-trips, the per-seed pipeline
// (generate -> stage one -> stage two -> score -> evaluate), multi-seed
// aggregation, ablation variants, and every file the CLI writes. All outputs
// are deterministic functions of config + seed, so reruns overwrite
// byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vmfosr/augment.hpp"
#include "vmfosr/datagen.hpp"
#include "vmfosr/errors.hpp"
#include "vmfosr/metrics.hpp"
#include "vmfosr/model.hpp"
#include "vmfosr/scoring.hpp"
#include "vmfosr/serialize.hpp"
#include "vmfosr/training.hpp"

namespace vmfosr::experiment {

using nlohmann::json;

inline constexpr const char* kConfigSchema = "vmfosr.config/1";

struct DatasetConfig {
  bool synthetic = true;
  datagen::SyntheticSpec spec;
  std::string inputs_csv;  // consulted when synthetic == false
  std::string labels_csv;
};

struct ScoringConfig {
  std::vector<scoring::Rule> rules = scoring::all_rules();
  std::size_t k = 10;
  std::vector<double> theta_grid;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  model::ModelConfig model;
  training::TrainConfig train;  // carries the augment section
  ScoringConfig scoring;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds = {1};
};

// ---------------------------------------------------------------------------
// JSON round-trip. Every field is optional (defaults apply); unknown keys are
// rejected at every nesting level.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string observation_map_name(datagen::ObservationMap m) {
  switch (m) {
    case datagen::ObservationMap::Identity: return "identity";
    case datagen::ObservationMap::RandomAffine: return "random_affine";
    case datagen::ObservationMap::RandomAffineTanh: return "random_affine_tanh";
  }
  throw ConfigError("unknown observation map");
}

inline datagen::ObservationMap observation_map_from_name(const std::string& name) {
  if (name == "identity") return datagen::ObservationMap::Identity;
  if (name == "random_affine") return datagen::ObservationMap::RandomAffine;
  if (name == "random_affine_tanh") return datagen::ObservationMap::RandomAffineTanh;
  throw ConfigError("unknown observation map '" + name + "'");
}

inline std::string direction_mode_name(datagen::DirectionMode m) {
  return m == datagen::DirectionMode::Orthogonal ? "orthogonal" : "random";
}

inline datagen::DirectionMode direction_mode_from_name(const std::string& name) {
  if (name == "orthogonal") return datagen::DirectionMode::Orthogonal;
  if (name == "random") return datagen::DirectionMode::Random;
  throw ConfigError("unknown direction mode '" + name + "'");
}

inline std::string lr_schedule_name(training::LrSchedule s) {
  return s == training::LrSchedule::Constant ? "constant" : "cosine";
}

inline training::LrSchedule lr_schedule_from_name(const std::string& name) {
  if (name == "constant") return training::LrSchedule::Constant;
  if (name == "cosine") return training::LrSchedule::Cosine;
  throw ConfigError("unknown lr schedule '" + name + "'");
}

}  // namespace detail

inline json synthetic_spec_to_json(const datagen::SyntheticSpec& spec) {
  return json{{"p_latent", spec.p_latent},
              {"input_dim", spec.input_dim},
              {"n_known_classes", spec.n_known_classes},
              {"n_unknown_classes", spec.n_unknown_classes},
              {"samples_per_class_train", spec.samples_per_class_train},
              {"samples_per_class_test", spec.samples_per_class_test},
              {"kappa_data", spec.kappa_data},
              {"hardness", spec.hardness},
              {"observation_map", detail::observation_map_name(spec.observation_map)},
              {"direction_mode", detail::direction_mode_name(spec.direction_mode)},
              {"seed", spec.seed}};
}

inline datagen::SyntheticSpec synthetic_spec_from_json(const json& j,
                                                       const std::string& where) {
  serialize::check_keys(j,
                        {"p_latent", "input_dim", "n_known_classes",
                         "n_unknown_classes", "samples_per_class_train",
                         "samples_per_class_test", "kappa_data", "hardness",
                         "observation_map", "direction_mode", "seed"},
                        where);
  datagen::SyntheticSpec spec;
  if (j.contains("p_latent")) spec.p_latent = j.at("p_latent").get<std::size_t>();
  if (j.contains("input_dim")) spec.input_dim = j.at("input_dim").get<std::size_t>();
  if (j.contains("n_known_classes"))
    spec.n_known_classes = j.at("n_known_classes").get<std::size_t>();
  if (j.contains("n_unknown_classes"))
    spec.n_unknown_classes = j.at("n_unknown_classes").get<std::size_t>();
  if (j.contains("samples_per_class_train"))
    spec.samples_per_class_train = j.at("samples_per_class_train").get<std::size_t>();
  if (j.contains("samples_per_class_test"))
    spec.samples_per_class_test = j.at("samples_per_class_test").get<std::size_t>();
  if (j.contains("kappa_data")) spec.kappa_data = j.at("kappa_data").get<double>();
  if (j.contains("hardness")) spec.hardness = j.at("hardness").get<double>();
  if (j.contains("observation_map"))
    spec.observation_map =
        detail::observation_map_from_name(j.at("observation_map").get<std::string>());
  if (j.contains("direction_mode"))
    spec.direction_mode =
        detail::direction_mode_from_name(j.at("direction_mode").get<std::string>());
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

inline json augment_config_to_json(const augment::AugmentConfig& cfg) {
  return json{{"sigma", cfg.sigma},
              {"jitter_std", cfg.jitter_std},
              {"mixup_enabled", cfg.mixup_enabled},
              {"ls_enabled", cfg.ls_enabled},
              {"beta_a", cfg.beta_a},
              {"beta_b", cfg.beta_b}};
}

inline augment::AugmentConfig augment_config_from_json(const json& j,
                                                       const std::string& where) {
  serialize::check_keys(
      j, {"sigma", "jitter_std", "mixup_enabled", "ls_enabled", "beta_a", "beta_b"},
      where);
  augment::AugmentConfig cfg;
  if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
  if (j.contains("jitter_std")) cfg.jitter_std = j.at("jitter_std").get<double>();
  if (j.contains("mixup_enabled")) cfg.mixup_enabled = j.at("mixup_enabled").get<bool>();
  if (j.contains("ls_enabled")) cfg.ls_enabled = j.at("ls_enabled").get<bool>();
  if (j.contains("beta_a")) cfg.beta_a = j.at("beta_a").get<double>();
  if (j.contains("beta_b")) cfg.beta_b = j.at("beta_b").get<double>();
  return cfg;
}

inline json train_config_to_json(const training::TrainConfig& cfg) {
  return json{{"epochs_stage1", cfg.epochs_stage1},
              {"epochs_stage2", cfg.epochs_stage2},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"momentum", cfg.momentum},
              {"lr_schedule", detail::lr_schedule_name(cfg.lr_schedule)},
              {"r_ortho_enabled", cfg.r_ortho_enabled},
              {"stage2_reencode", cfg.stage2_reencode},
              {"seed", cfg.seed}};
}

inline training::TrainConfig train_config_from_json(const json& j,
                                                    const std::string& where) {
  serialize::check_keys(j,
                        {"epochs_stage1", "epochs_stage2", "batch_size",
                         "learning_rate", "momentum", "lr_schedule",
                         "r_ortho_enabled", "stage2_reencode", "seed"},
                        where);
  training::TrainConfig cfg;
  if (j.contains("epochs_stage1"))
    cfg.epochs_stage1 = j.at("epochs_stage1").get<std::size_t>();
  if (j.contains("epochs_stage2"))
    cfg.epochs_stage2 = j.at("epochs_stage2").get<std::size_t>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("learning_rate"))
    cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("momentum")) cfg.momentum = j.at("momentum").get<double>();
  if (j.contains("lr_schedule"))
    cfg.lr_schedule = detail::lr_schedule_from_name(j.at("lr_schedule").get<std::string>());
  if (j.contains("r_ortho_enabled"))
    cfg.r_ortho_enabled = j.at("r_ortho_enabled").get<bool>();
  if (j.contains("stage2_reencode"))
    cfg.stage2_reencode = j.at("stage2_reencode").get<bool>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json rules = json::array();
  for (scoring::Rule rule : cfg.scoring.rules) rules.push_back(scoring::rule_name(rule));
  return json{
      {"schema_version", kConfigSchema},
      {"dataset",
       json{{"synthetic", cfg.dataset.synthetic},
            {"spec", synthetic_spec_to_json(cfg.dataset.spec)},
            {"inputs_csv", cfg.dataset.inputs_csv},
            {"labels_csv", cfg.dataset.labels_csv}}},
      {"model", serialize::model_config_to_json(cfg.model)},
      {"train", train_config_to_json(cfg.train)},
      {"augment", augment_config_to_json(cfg.train.augment)},
      {"scoring",
       json{{"rules", rules}, {"k", cfg.scoring.k}, {"theta_grid", cfg.scoring.theta_grid}}},
      {"output_dir", cfg.output_dir},
      {"seeds", cfg.seeds}};
}

inline ExperimentConfig config_from_json(const json& j) {
  serialize::check_keys(j,
                        {"schema_version", "dataset", "model", "train", "augment",
                         "scoring", "output_dir", "seeds"},
                        "config");
  if (!j.contains("schema_version") ||
      j.at("schema_version").get<std::string>() != kConfigSchema)
    throw ConfigError("config: missing or unsupported schema_version (expected '" +
                      std::string(kConfigSchema) + "')");
  ExperimentConfig cfg;
  try {
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      serialize::check_keys(d, {"synthetic", "spec", "inputs_csv", "labels_csv"},
                            "config.dataset");
      if (d.contains("synthetic")) cfg.dataset.synthetic = d.at("synthetic").get<bool>();
      if (d.contains("spec"))
        cfg.dataset.spec = synthetic_spec_from_json(d.at("spec"), "config.dataset.spec");
      if (d.contains("inputs_csv"))
        cfg.dataset.inputs_csv = d.at("inputs_csv").get<std::string>();
      if (d.contains("labels_csv"))
        cfg.dataset.labels_csv = d.at("labels_csv").get<std::string>();
    }
    if (j.contains("model"))
      cfg.model = serialize::model_config_from_json(j.at("model"), "config.model");
    if (j.contains("train"))
      cfg.train = train_config_from_json(j.at("train"), "config.train");
    if (j.contains("augment"))
      cfg.train.augment = augment_config_from_json(j.at("augment"), "config.augment");
    if (j.contains("scoring")) {
      const json& s = j.at("scoring");
      serialize::check_keys(s, {"rules", "k", "theta_grid"}, "config.scoring");
      if (s.contains("rules")) {
        cfg.scoring.rules.clear();
        for (const auto& name : s.at("rules"))
          cfg.scoring.rules.push_back(scoring::rule_from_name(name.get<std::string>()));
      }
      if (s.contains("k")) cfg.scoring.k = s.at("k").get<std::size_t>();
      if (s.contains("theta_grid"))
        cfg.scoring.theta_grid = s.at("theta_grid").get<std::vector<double>>();
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seeds"))
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed value: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("load_config: cannot open " + path);
  json j;
  try {
    file >> j;
  } catch (const json::exception& e) {
    throw ConfigError("load_config: bad JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a over the canonical serialized config; stable across runs and
/// platforms.
inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Build (or load) the train/test splits for one seed. Synthetic data draws
/// from RNG stream 0 of the seed; CSV data ignores the seed.
inline std::pair<datagen::Dataset, datagen::Dataset> make_dataset(
    const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.dataset.synthetic)
    return datagen::read_dataset_csv(cfg.dataset.inputs_csv, cfg.dataset.labels_csv);
  datagen::SyntheticSpec spec = cfg.dataset.spec;
  spec.seed = seed;
  numerics::SeededRng rng(spec.seed, 0);
  return datagen::generate_dataset(spec, rng);
}

struct SeedRunResult {
  std::uint64_t seed = 0;
  training::StageOneResult stage1;
  std::vector<double> stage2_accuracy;
  model::ModelState state;  // after both stages
  training::FeatureBank bank;
  metrics::EvalReport report;
};

/// Both training stages for one seed; report stays default-constructed. The
/// seed overrides both the dataset seed and the training seed; training
/// stages draw from RNG streams 1 and 2 so data and optimization randomness
/// stay decoupled.
inline SeedRunResult train_single_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.model.validate();
  cfg.train.validate();

  SeedRunResult result;
  result.seed = seed;
  auto [train_data, test_data] = make_dataset(cfg, seed);
  (void)test_data;

  training::TrainConfig tcfg = cfg.train;
  tcfg.seed = seed;
  numerics::SeededRng rng_stage1(seed, 1);
  result.stage1 = training::train_stage_one(train_data, cfg.model, tcfg, rng_stage1);

  result.bank = training::extract_features(result.stage1.state, train_data);

  numerics::SeededRng rng_stage2(seed, 2);
  auto stage2 = training::train_stage_two(train_data, result.bank,
                                          result.stage1.state, tcfg, rng_stage2);
  result.state = std::move(stage2.state);
  result.stage2_accuracy = std::move(stage2.epoch_accuracy);
  return result;
}

/// Full pipeline for one seed: train both stages, then score and evaluate the
/// test split.
inline SeedRunResult run_single_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedRunResult result = train_single_seed(cfg, seed);
  auto [train_data, test_data] = make_dataset(cfg, seed);
  (void)train_data;
  result.report = metrics::evaluate(result.state, test_data, result.bank,
                                    cfg.scoring.rules, cfg.scoring.k);
  result.report.seed = seed;
  result.report.config_hash = config_hash(cfg);
  return result;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (N-1), 0 for N=1
};

inline MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw NumericError("mean_std: empty input");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return out;
}

inline json aggregate_reports(const std::vector<metrics::EvalReport>& reports) {
  if (reports.empty()) throw NumericError("aggregate_reports: no reports");
  const auto collect = [&](auto&& get) {
    std::vector<double> values;
    for (const auto& r : reports) values.push_back(get(r));
    const MeanStd ms = mean_std(values);
    return json{{"mean", ms.mean}, {"stddev", ms.stddev}};
  };
  json out;
  out["n_seeds"] = reports.size();
  out["accuracy"] = collect([](const auto& r) { return r.accuracy; });
  out["angular_separability"] =
      collect([](const auto& r) { return r.angular_separability; });
  out["norm_separability"] = collect([](const auto& r) { return r.norm_separability; });
  out["dispersion_degrees"] = collect([](const auto& r) { return r.dispersion_degrees; });
  out["openness"] = collect([](const auto& r) { return r.openness; });
  json rules;
  for (std::size_t idx = 0; idx < reports.front().per_rule.size(); ++idx) {
    const auto rule = reports.front().per_rule[idx].first;
    for (const auto& r : reports)
      if (r.per_rule.size() <= idx || r.per_rule[idx].first != rule)
        throw NumericError("aggregate_reports: rule lists differ across seeds");
    json entry;
    entry["auroc"] =
        collect([idx](const auto& r) { return r.per_rule[idx].second.auroc; });
    entry["oscr"] = collect([idx](const auto& r) { return r.per_rule[idx].second.oscr; });
    entry["dtacc"] =
        collect([idx](const auto& r) { return r.per_rule[idx].second.dtacc; });
    rules[scoring::rule_name(rule)] = entry;
  }
  out["rules"] = rules;
  return out;
}

// ---------------------------------------------------------------------------
// Ablation variants
// ---------------------------------------------------------------------------

struct Variant {
  std::string name;
  bool mixup = true;
  bool ls = true;
  bool r_ortho = true;
};

inline const std::vector<Variant>& standard_variants() {
  static const std::vector<Variant> variants = {
      {"full", true, true, true},
      {"no_mixup", false, true, true},
      {"no_ls", true, false, true},
      {"no_r_ortho", true, true, false},
  };
  return variants;
}

inline ExperimentConfig apply_variant(ExperimentConfig cfg, const Variant& v) {
  cfg.train.augment.mixup_enabled = v.mixup;
  cfg.train.augment.ls_enabled = v.ls;
  cfg.train.r_ortho_enabled = v.r_ortho;
  return cfg;
}

// ---------------------------------------------------------------------------
// Report and manifest files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::ofstream open_out(const std::string& path, const char* who) {
  std::ofstream file(path);
  if (!file) throw IoError(std::string(who) + ": cannot open " + path);
  return file;
}

}  // namespace detail

inline void write_json_file(const json& j, const std::string& path) {
  auto file = detail::open_out(path, "write_json_file");
  file << j.dump(2) << '\n';
}

namespace detail {

inline std::size_t distinct_label_count(const std::vector<int>& labels) {
  std::vector<int> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  return distinct.size();
}

}  // namespace detail

inline json dataset_manifest(const ExperimentConfig& cfg,
                             const datagen::Dataset& train,
                             const datagen::Dataset& test) {
  const std::size_t n_train_classes = detail::distinct_label_count(train.labels);
  const std::size_t n_test_classes = detail::distinct_label_count(test.labels);
  json out{{"schema", "vmfosr.dataset_manifest/1"},
           {"n_train_samples", train.size()},
           {"n_test_samples", test.size()},
           {"n_train_classes", n_train_classes},
           {"n_test_classes", n_test_classes},
           {"openness", datagen::openness(n_train_classes, n_test_classes)}};
  if (cfg.dataset.synthetic) out["spec"] = synthetic_spec_to_json(cfg.dataset.spec);
  return out;
}

inline json run_manifest(const ExperimentConfig& cfg, const SeedRunResult& run,
                         const std::string& checkpoint_path) {
  return json{{"schema", "vmfosr.run_manifest/1"},
              {"seed", run.seed},
              {"config", config_to_json(cfg)},
              {"config_hash", config_hash(cfg)},
              {"checkpoint", checkpoint_path},
              {"stage1_epoch_loss", run.stage1.epoch_loss},
              {"stage1_row_norm_deviation", run.stage1.epoch_row_norm_dev},
              {"stage2_epoch_accuracy", run.stage2_accuracy}};
}

inline json report_to_json(const metrics::EvalReport& report) {
  json rules;
  for (const auto& [rule, m] : report.per_rule)
    rules[scoring::rule_name(rule)] =
        json{{"auroc", m.auroc}, {"oscr", m.oscr}, {"dtacc", m.dtacc}};
  return json{{"schema", "vmfosr.report/1"},
              {"seed", report.seed},
              {"config_hash", report.config_hash},
              {"accuracy", report.accuracy},
              {"angular_separability", report.angular_separability},
              {"norm_separability", report.norm_separability},
              {"dispersion_degrees", report.dispersion_degrees},
              {"openness", report.openness},
              {"rules", rules}};
}

inline constexpr const char* kReportCsvHeader =
    "seed,rule,accuracy,auroc,oscr,dtacc,angular_separability,norm_separability,"
    "dispersion_degrees,openness,config_hash";

/// One row per (seed, rule).
inline void write_reports_csv(const std::vector<metrics::EvalReport>& reports,
                              const std::string& path) {
  auto file = detail::open_out(path, "write_reports_csv");
  file << kReportCsvHeader << '\n';
  for (const auto& r : reports)
    for (const auto& [rule, m] : r.per_rule)
      file << r.seed << ',' << scoring::rule_name(rule) << ','
           << detail::fmt(r.accuracy) << ',' << detail::fmt(m.auroc) << ','
           << detail::fmt(m.oscr) << ',' << detail::fmt(m.dtacc) << ','
           << detail::fmt(r.angular_separability) << ','
           << detail::fmt(r.norm_separability) << ','
           << detail::fmt(r.dispersion_degrees) << ',' << detail::fmt(r.openness)
           << ',' << r.config_hash << '\n';
}

inline void write_curve_csv(const std::vector<metrics::CurvePoint>& points,
                            const std::string& x_name, const std::string& y_name,
                            const std::string& path) {
  auto file = detail::open_out(path, "write_curve_csv");
  file << x_name << ',' << y_name << '\n';
  for (const auto& p : points)
    file << detail::fmt(p.x) << ',' << detail::fmt(p.y) << '\n';
}

/// Threshold decisions over the config's theta grid: per rule and theta, the
/// admitted fraction of known and unknown test samples.
inline json decision_table(const std::vector<scoring::ScoredSample>& scored,
                           const std::vector<double>& theta_grid) {
  json out = json::array();
  std::size_t n_known = 0, n_unknown = 0;
  for (const auto& s : scored) (s.is_known_truth ? n_known : n_unknown)++;
  for (double theta : theta_grid) {
    std::size_t known_admitted = 0, unknown_admitted = 0;
    for (const auto& s : scored) {
      if (!scoring::decide(s.score, theta)) continue;
      (s.is_known_truth ? known_admitted : unknown_admitted)++;
    }
    json row;
    row["theta"] = theta;
    row["known_admit_rate"] =
        n_known ? static_cast<double>(known_admitted) / static_cast<double>(n_known) : 0.0;
    row["unknown_admit_rate"] =
        n_unknown ? static_cast<double>(unknown_admitted) / static_cast<double>(n_unknown)
                  : 0.0;
    out.push_back(row);
  }
  return out;
}

}  // namespace vmfosr::experiment
