/* Copyright 2026 The normkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// normkit run <config.json>
// normkit sweep <config.json> --axis sigma|lambda_l1 --values a,b,c
// normkit render <metrics.csv>
// normkit gradcheck [--preset BN|LN|DN|DN-no-center|identity-like]...

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "normkit/experiment.hpp"
#include "normkit/gradient_suite.hpp"

namespace {

namespace fs = std::filesystem;
using namespace normkit;

ExperimentConfig load(const std::string& path, const std::string& output_dir) {
  ExperimentConfig config = load_config(path);
  apply_seed_override(config, std::getenv("NORMKIT_SEED"));
  if (!output_dir.empty()) config.output_dir = output_dir;
  return config;
}

int run_command(const std::string& path, const std::string& output_dir) {
  ExperimentConfig config;
  try {
    config = load(path, output_dir);
  } catch (const Error& e) {
    std::cerr << "normkit: " << e.what() << "\n";
    return kExitConfig;
  }
  const RunOutcome outcome = run_experiment(config);
  if (outcome.exit_code != kExitOk) {
    std::cerr << "normkit: " << outcome.message << "\n";
    return outcome.exit_code;
  }
  std::cout << "wrote " << config.output_dir << "/{metrics.csv,summary.json,curves.svg} ("
            << outcome.records.size() << " rows)\n";
  if (outcome.final_eval) {
    std::cout << outcome.final_eval->split << ": loss " << outcome.final_eval->loss
              << ", accuracy " << outcome.final_eval->accuracy << ", mean |v| "
              << outcome.final_eval->mean_abs_v << "\n";
  }
  return kExitOk;
}

int sweep_command(const std::string& path, const std::string& output_dir,
                  const std::string& axis_text, const std::vector<double>& values) {
  ExperimentConfig config;
  SweepAxis axis;
  try {
    config = load(path, output_dir);
    axis = parse_sweep_axis(axis_text);
  } catch (const Error& e) {
    std::cerr << "normkit: " << e.what() << "\n";
    return kExitConfig;
  }
  const SweepOutcome sweep = run_sweep(config, axis, values);
  for (const SweepRow& row : sweep.rows) {
    std::cout << name(axis) << "=" << format_double(row.value) << ": exit "
              << row.outcome.exit_code;
    if (row.outcome.final_eval) {
      std::cout << ", loss " << row.outcome.final_eval->loss << ", mean |v| "
                << row.outcome.final_eval->mean_abs_v;
    }
    if (!row.outcome.message.empty()) std::cout << " (" << row.outcome.message << ")";
    std::cout << "\n";
  }
  std::cout << "wrote " << (fs::path(config.output_dir) / "sweep.csv").string() << "\n";
  return sweep.exit_code;
}

int render_command(const std::string& csv_path, std::string out_path) {
  try {
    const auto records = read_metrics_csv(read_file(csv_path));
    const fs::path dir = fs::path(csv_path).parent_path();
    if (out_path.empty()) out_path = (dir / "curves.svg").string();
    // The conventions live in the sibling summary.json when there is one.
    std::string note = "conventions: see summary.json written with " +
                       fs::path(csv_path).filename().string();
    write_file_atomic(out_path, render_curves(records, note));
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "normkit: " << e.what() << "\n";
    return kExitConfig;
  }
}

int gradcheck_command(const std::vector<std::string>& presets, int seeds, bool verbose) {
  GradientSuiteOptions options;
  options.seeds = seeds;
  if (!presets.empty()) {
    options.presets.clear();
    try {
      for (const std::string& p : presets) options.presets.push_back(parse_preset(p));
    } catch (const Error& e) {
      std::cerr << "normkit: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  const GradientSuiteReport report = run_gradient_suite(options);
  std::size_t failures = 0;
  for (const GradientCaseResult& r : report.results) {
    if (r.passed && !verbose) continue;
    failures += r.passed ? 0 : 1;
    std::printf("%s %s: analytic-tape %.3g, analytic-fd %.3g, tape-fd %.3g\n",
                r.passed ? "ok  " : "FAIL", describe(r.gradient_case).c_str(), r.analytic_vs_tape,
                r.analytic_vs_numeric, r.tape_vs_numeric);
  }
  std::printf("%zu cases, %zu failed; worst analytic-tape %.3g (limit %.0e), worst vs "
              "finite differences %.3g (limit %.0e)\n",
              report.results.size(), failures, report.worst_tape, options.tape_tolerance,
              report.worst_numeric, options.numeric_tolerance);
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normkit: configurable normalization layers, gradient checks and training runs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(normkit::version()));

  std::string config_path, output_dir, csv_path, svg_path, axis = "sigma";
  std::string values_text;
  std::vector<std::string> presets;
  int seeds = 10;
  bool verbose = false;

  auto* run = app.add_subcommand("run", "train and evaluate one config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", output_dir, "override output_dir");

  auto* sweep = app.add_subcommand("sweep", "one run per value of sigma or lambda_l1");
  sweep->add_option("config", config_path, "experiment config (JSON)")->required();
  sweep->add_option("--axis", axis, "sigma or lambda_l1")->check(CLI::IsMember({"sigma", "lambda_l1"}));
  sweep->add_option("--values", values_text, "comma-separated values")->required();
  sweep->add_option("--out", output_dir, "override output_dir");

  auto* render = app.add_subcommand("render", "draw curves.svg from a metrics.csv");
  render->add_option("metrics", csv_path, "metrics.csv")->required();
  render->add_option("--out", svg_path, "SVG path (default: next to the CSV)");

  auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs tape vs finite differences");
  gradcheck->add_option("--preset", presets, "BN, LN, DN, DN-no-center or identity-like");
  gradcheck->add_option("--seeds", seeds, "seeds per configuration")->check(CLI::PositiveNumber);
  gradcheck->add_flag("--verbose", verbose, "print passing cases too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) return run_command(config_path, output_dir);
  if (*sweep) {
    std::vector<double> values;
    try {
      std::size_t begin = 0;
      while (begin < values_text.size()) {
        const std::size_t end = std::min(values_text.find(',', begin), values_text.size());
        values.push_back(parse_double(values_text.substr(begin, end - begin)));
        begin = end + 1;
      }
    } catch (const Error& e) {
      std::cerr << "normkit: --values: " << e.what() << "\n";
      return kExitConfig;
    }
    if (values.empty()) {
      std::cerr << "normkit: sweep needs at least one value\n";
      return kExitConfig;
    }
    return sweep_command(config_path, output_dir, axis, values);
  }
  if (*render) return render_command(csv_path, svg_path);
  return gradcheck_command(presets, seeds, verbose);
}
