// Copyright 2026 The splitleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment runner. Subcommands:
//   validate    check a config file, print the normalized config
//   train       train the configured model once, save checkpoint + sidecar
//   attack-attr run the attribute-inference sweep
//   attack-inv  run the model-inversion sweep
//   report      rebuild aggregate CSVs and plots from detail CSVs
// Exit codes: 0 success, 2 config error, 3 runtime error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "splitleak/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
};

int load_config(const GlobalOptions& opts, bool required, splitleak::ExperimentConfig& config) {
  if (opts.config_path.empty()) {
    if (required) {
      std::cerr << "error: --config <path> is required for this command\n";
      return kExitConfigError;
    }
    return kExitOk;
  }
  const auto errors = splitleak::validate_config_file(opts.config_path, config);
  if (!errors.empty()) {
    std::cerr << "config errors in " << opts.config_path << ":\n";
    for (const auto& e : errors)
      std::cerr << "  " << (e.pointer.empty() ? "/" : e.pointer) << ": " << e.message << "\n";
    return kExitConfigError;
  }
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (opts.seed_set) config.seed = opts.seed;
  return kExitOk;
}

int expect_kind(const splitleak::ExperimentConfig& config, splitleak::ExperimentKind kind,
                const char* verb) {
  if (config.kind != kind) {
    std::cerr << "error: " << verb << " needs a config with kind '"
              << (kind == splitleak::ExperimentKind::attr_attack ? "attr-attack"
                                                                 : "inversion-attack")
              << "'\n";
    return kExitConfigError;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inference-attack and defense testbed for split models"};
  app.require_subcommand(1);

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "Experiment config (JSON)");
  app.add_option("--out", opts.out_dir, "Output directory (overrides config out_dir)");
  app.add_option("--seed", opts.seed, "Master seed (overrides config seed)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  app.add_option("--threads", opts.threads, "Worker threads for independent grid cells");

  CLI::App* validate = app.add_subcommand("validate", "Validate a config file");
  CLI::App* train = app.add_subcommand("train", "Train the configured model and save it");
  CLI::App* attack_attr = app.add_subcommand("attack-attr", "Run the attribute-inference sweep");
  CLI::App* attack_inv = app.add_subcommand("attack-inv", "Run the model-inversion sweep");
  CLI::App* report = app.add_subcommand("report", "Rebuild aggregates and plots from detail CSVs");
  // Global flags may appear after the verb.
  for (CLI::App* sub : {validate, train, attack_attr, attack_inv, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage/message
    return code == 0 ? kExitOk : kExitConfigError;
  }
  if (opts.threads == 0) opts.threads = 1;

  splitleak::ExperimentConfig config;
  try {
    if (validate->parsed()) {
      const int rc = load_config(opts, true, config);
      if (rc != kExitOk) return rc;
      std::cout << splitleak::config_to_json(config).dump(2) << "\n";
      return kExitOk;
    }
    if (train->parsed()) {
      const int rc = load_config(opts, true, config);
      if (rc != kExitOk) return rc;
      splitleak::train_and_save(config);
      std::cout << "model written to " << config.out_dir << "/model.nnck\n";
      return kExitOk;
    }
    if (attack_attr->parsed()) {
      const int rc = load_config(opts, true, config);
      if (rc != kExitOk) return rc;
      const int kc = expect_kind(config, splitleak::ExperimentKind::attr_attack, "attack-attr");
      if (kc != kExitOk) return kc;
      splitleak::run_attr_experiment(config, opts.threads);
      std::cout << "reports written to " << config.out_dir << "\n";
      return kExitOk;
    }
    if (attack_inv->parsed()) {
      const int rc = load_config(opts, true, config);
      if (rc != kExitOk) return rc;
      const int kc = expect_kind(config, splitleak::ExperimentKind::inversion_attack, "attack-inv");
      if (kc != kExitOk) return kc;
      splitleak::run_inversion_experiment(config, opts.threads);
      std::cout << "reports written to " << config.out_dir << "\n";
      return kExitOk;
    }
    if (report->parsed()) {
      std::string dir = opts.out_dir;
      if (dir.empty() && !opts.config_path.empty()) {
        const int rc = load_config(opts, true, config);
        if (rc != kExitOk) return rc;
        dir = config.out_dir;
      }
      if (dir.empty()) {
        std::cerr << "error: report needs --out <dir> (or --config with out_dir)\n";
        return kExitConfigError;
      }
      splitleak::regenerate_reports(dir);
      std::cout << "reports rebuilt in " << dir << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}
