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

// Command-line entry point.
//
//   vmfosr generate   write a synthetic dataset (inputs/labels CSV + manifest)
//   vmfosr train      run both training stages per seed, write checkpoints
//   vmfosr evaluate   score saved checkpoints, write reports and curves
//   vmfosr gradcheck  finite-difference audit of every analytic gradient
//   vmfosr ablate     train and evaluate the standard component-ablation grid
//
// Exit codes: 0 success, 2 config or I/O error, 3 numeric failure,
// 4 gradcheck failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vmfosr/errors.hpp"
#include "vmfosr/experiment.hpp"
#include "vmfosr/gradcheck.hpp"
#include "vmfosr/serialize.hpp"

namespace {

namespace fs = std::filesystem;
using vmfosr::experiment::ExperimentConfig;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool no_mixup = false;
  bool no_ls = false;
  bool no_r_ortho = false;
  std::vector<std::string> rules;
};

void add_common_flags(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "JSON experiment config");
  cmd->add_option("--seed", args->seed, "run a single seed, overriding the config list")
      ->each([args](const std::string&) { args->seed_set = true; });
  cmd->add_option("--out", args->out, "output directory, overriding the config");
  cmd->add_flag("--no-mixup", args->no_mixup, "disable input mixing");
  cmd->add_flag("--no-ls", args->no_ls, "disable label smoothing");
  cmd->add_flag("--no-r-ortho", args->no_r_ortho, "disable the orthogonality regularizer");
  cmd->add_option("--rules", args->rules,
                  "scoring rules (comma separated: maxlogit,msp,knn,nnguide)")
      ->delimiter(',');
}

ExperimentConfig effective_config(const CommonArgs& args) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? ExperimentConfig{}
                             : vmfosr::experiment::load_config(args.config_path);
  if (args.seed_set) cfg.seeds = {args.seed};
  if (!args.out.empty()) cfg.output_dir = args.out;
  if (args.no_mixup) cfg.train.augment.mixup_enabled = false;
  if (args.no_ls) cfg.train.augment.ls_enabled = false;
  if (args.no_r_ortho) cfg.train.r_ortho_enabled = false;
  if (!args.rules.empty()) {
    cfg.scoring.rules.clear();
    for (const std::string& name : args.rules)
      cfg.scoring.rules.push_back(vmfosr::scoring::rule_from_name(name));
  }
  if (cfg.seeds.empty()) throw vmfosr::ConfigError("config: empty seed list");
  return cfg;
}

fs::path ensure_output_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw vmfosr::IoError("cannot create output directory " + dir.string());
  return dir;
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

int cmd_generate(const CommonArgs& args) {
  const ExperimentConfig cfg = effective_config(args);
  if (!cfg.dataset.synthetic)
    throw vmfosr::ConfigError("generate: config selects CSV input, nothing to generate");
  const fs::path dir = ensure_output_dir(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    auto [train, test] = vmfosr::experiment::make_dataset(cfg, seed);
    const std::string tag = seed_tag(seed);
    vmfosr::datagen::write_dataset_csv(train, test,
                                       (dir / ("inputs_" + tag + ".csv")).string(),
                                       (dir / ("labels_" + tag + ".csv")).string());
    vmfosr::experiment::write_json_file(
        vmfosr::experiment::dataset_manifest(cfg, train, test),
        (dir / ("dataset_manifest_" + tag + ".json")).string());
    std::cout << "generate: seed " << seed << ": " << train.size() << " train / "
              << test.size() << " test samples -> " << dir.string() << '\n';
  }
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig cfg = effective_config(args);
  const fs::path dir = ensure_output_dir(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const auto run = vmfosr::experiment::train_single_seed(cfg, seed);
    const std::string tag = seed_tag(seed);
    const std::string checkpoint = (dir / ("checkpoint_" + tag + ".json")).string();
    vmfosr::serialize::save_checkpoint(run.state, checkpoint);
    vmfosr::experiment::write_json_file(
        vmfosr::experiment::run_manifest(cfg, run, checkpoint),
        (dir / ("run_manifest_" + tag + ".json")).string());
    std::cout << "train: seed " << seed << ": stage-1 final loss "
              << run.stage1.epoch_loss.back() << ", stage-2 final train accuracy "
              << run.stage2_accuracy.back() << '\n';
  }
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  const ExperimentConfig cfg = effective_config(args);
  const fs::path dir = ensure_output_dir(cfg);
  std::vector<vmfosr::metrics::EvalReport> reports;
  for (std::uint64_t seed : cfg.seeds) {
    const std::string tag = seed_tag(seed);
    const std::string checkpoint = (dir / ("checkpoint_" + tag + ".json")).string();
    if (!fs::exists(checkpoint))
      throw vmfosr::IoError("evaluate: missing checkpoint " + checkpoint +
                            " (run 'train' first)");
    const auto state = vmfosr::serialize::load_checkpoint(checkpoint);
    auto [train, test] = vmfosr::experiment::make_dataset(cfg, seed);
    const auto bank = vmfosr::training::extract_features(state, train);
    auto report = vmfosr::metrics::evaluate(state, test, bank, cfg.scoring.rules,
                                            cfg.scoring.k);
    report.seed = seed;
    report.config_hash = vmfosr::experiment::config_hash(cfg);
    vmfosr::experiment::write_json_file(
        vmfosr::experiment::report_to_json(report),
        (dir / ("report_" + tag + ".json")).string());

    for (vmfosr::scoring::Rule rule : cfg.scoring.rules) {
      const auto scored =
          vmfosr::scoring::score_dataset(state, test, bank, rule, cfg.scoring.k);
      vmfosr::scoring::write_scores_csv(
          (dir / ("scores_" + std::string(vmfosr::scoring::rule_name(rule)) + "_" +
                  tag + ".csv"))
              .string(),
          rule, scored);
      std::vector<vmfosr::scoring::ScoredSample> known;
      std::vector<double> known_scores, unknown_scores;
      for (const auto& s : scored)
        if (s.is_known_truth) {
          known.push_back(s);
          known_scores.push_back(s.score);
        } else {
          unknown_scores.push_back(s.score);
        }
      vmfosr::experiment::write_curve_csv(
          vmfosr::metrics::roc_curve(known_scores, unknown_scores), "fpr", "tpr",
          (dir / ("roc_" + std::string(vmfosr::scoring::rule_name(rule)) + "_" + tag +
                  ".csv"))
              .string());
      vmfosr::experiment::write_curve_csv(
          vmfosr::metrics::oscr_curve(known, unknown_scores), "fpr", "ccr",
          (dir / ("oscr_" + std::string(vmfosr::scoring::rule_name(rule)) + "_" + tag +
                  ".csv"))
              .string());
      if (!cfg.scoring.theta_grid.empty())
        vmfosr::experiment::write_json_file(
            vmfosr::experiment::decision_table(scored, cfg.scoring.theta_grid),
            (dir / ("decisions_" + std::string(vmfosr::scoring::rule_name(rule)) + "_" +
                    tag + ".json"))
                .string());
    }
    reports.push_back(std::move(report));
    std::cout << "evaluate: seed " << seed << ": accuracy "
              << reports.back().accuracy << '\n';
  }
  vmfosr::experiment::write_reports_csv(reports, (dir / "reports.csv").string());
  vmfosr::experiment::write_json_file(vmfosr::experiment::aggregate_reports(reports),
                                      (dir / "aggregate.json").string());
  std::cout << "evaluate: wrote " << (dir / "reports.csv").string() << " and "
            << (dir / "aggregate.json").string() << '\n';
  return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
  const std::uint64_t seed = args.seed_set ? args.seed : 7;
  const auto reports = vmfosr::gradcheck::run_all(seed);
  std::printf("%-24s %10s %16s %8s\n", "block", "instances", "worst_rel_err", "status");
  for (const auto& r : reports)
    std::printf("%-24s %10zu %16.3e %8s\n", r.block.c_str(), r.instances,
                r.worst_rel_err, r.pass ? "PASS" : "FAIL");
  if (!vmfosr::gradcheck::all_pass(reports)) {
    double worst = 0.0;
    std::string worst_block;
    for (const auto& r : reports)
      if (!r.pass && r.worst_rel_err > worst) {
        worst = r.worst_rel_err;
        worst_block = r.block;
      }
    throw vmfosr::GradCheckError("gradcheck: block '" + worst_block +
                                 "' worst relative error " + std::to_string(worst));
  }
  std::cout << "gradcheck: all blocks pass (seed " << seed << ")\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  const ExperimentConfig base = effective_config(args);
  const fs::path dir = ensure_output_dir(base);
  std::ofstream csv(dir / "ablation.csv");
  if (!csv) throw vmfosr::IoError("ablate: cannot open " + (dir / "ablation.csv").string());
  csv << "variant," << vmfosr::experiment::kReportCsvHeader << '\n';
  json summary;
  summary["schema"] = "vmfosr.ablation/1";
  for (const auto& variant : vmfosr::experiment::standard_variants()) {
    const ExperimentConfig cfg = vmfosr::experiment::apply_variant(base, variant);
    std::vector<vmfosr::metrics::EvalReport> reports;
    for (std::uint64_t seed : cfg.seeds) {
      auto run = vmfosr::experiment::run_single_seed(cfg, seed);
      for (const auto& [rule, m] : run.report.per_rule)
        csv << variant.name << ',' << run.report.seed << ','
            << vmfosr::scoring::rule_name(rule) << ',' << run.report.accuracy << ','
            << m.auroc << ',' << m.oscr << ',' << m.dtacc << ','
            << run.report.angular_separability << ','
            << run.report.norm_separability << ','
            << run.report.dispersion_degrees << ',' << run.report.openness << ','
            << run.report.config_hash << '\n';
      reports.push_back(std::move(run.report));
    }
    summary["variants"][variant.name] = vmfosr::experiment::aggregate_reports(reports);
    std::cout << "ablate: variant " << variant.name << " done ("
              << cfg.seeds.size() << " seeds)\n";
  }
  vmfosr::experiment::write_json_file(summary, (dir / "ablation.json").string());
  std::cout << "ablate: wrote " << (dir / "ablation.csv").string() << " and "
            << (dir / "ablation.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vmfosr: spherical representation learning and open-set scoring laboratory"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, grad_args, ablate_args;
  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset to CSV");
  add_common_flags(gen, &gen_args);
  CLI::App* train = app.add_subcommand("train", "run both training stages per seed");
  add_common_flags(train, &train_args);
  CLI::App* eval = app.add_subcommand("evaluate", "score checkpoints and write reports");
  add_common_flags(eval, &eval_args);
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  add_common_flags(grad, &grad_args);
  CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants");
  add_common_flags(ablate, &ablate_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_evaluate(eval_args);
    if (grad->parsed()) return cmd_gradcheck(grad_args);
    if (ablate->parsed()) return cmd_ablate(ablate_args);
  } catch (const vmfosr::GradCheckError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const vmfosr::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const vmfosr::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const vmfosr::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
