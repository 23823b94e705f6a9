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

// Experiment configs, single runs and sweeps. A run writes three artifacts
// into its output directory:
//
//   metrics.csv   one row per training batch plus one evaluation row per epoch
//   summary.json  final metrics, the resolved config, conventions, version
//   curves.svg    loss by step, one polyline per split

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "normkit/metrics_io.hpp"
#include "normkit/training.hpp"

namespace normkit {

/// Bad config text or values. `line` is 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// git-describe-style build version.
const char* version();

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3 };

struct ExperimentConfig {
  ModelConfig model;  // input extents and class count come from the dataset
  TrainConfig train;
  DatasetRequest dataset;
  std::string output_dir = "normkit-out";
};

/// Strict: unknown keys and wrongly typed values are errors. Relative paths
/// resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// The resolved config as JSON, defaults included.
std::string config_json(const ExperimentConfig& config);

/// Conventions the numbers depend on, as a JSON object and as one line.
std::string conventions_json(const ExperimentConfig& config);
std::string conventions_line(const ExperimentConfig& config);

/// NORMKIT_SEED, when set, replaces train.seed.
void apply_seed_override(ExperimentConfig& config, const char* env_value);

/// Loads the dataset and fills the model's input extents and class count.
std::shared_ptr<const Dataset> prepare(ExperimentConfig& config);

struct RunOutcome {
  int exit_code = kExitOk;
  std::string message;
  std::vector<MetricsRecord> records;
  std::optional<MetricsRecord> final_eval;   // last evaluation row
  std::optional<MetricsRecord> final_train;  // whole train split, final params
  std::string summary;                       // summary.json contents
};

/// Trains and evaluates; writes the artifacts unless `write_outputs` is
/// false. Errors become exit codes. `data`, when given, must come from
/// prepare() on an equivalent config.
RunOutcome run_experiment(ExperimentConfig config, std::shared_ptr<const Dataset> data = nullptr,
                          bool write_outputs = true);

enum class SweepAxis { kSigma, kLambdaL1 };
std::string_view name(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepRow {
  double value = 0.0;
  RunOutcome outcome;
};

struct SweepOutcome {
  int exit_code = kExitOk;
  std::vector<SweepRow> rows;
  std::string csv;  // sweep.csv contents
};

/// One run per value, concurrently, each under output_dir/<axis>=<value>.
/// Exits nonzero only if every run fails.
SweepOutcome run_sweep(const ExperimentConfig& config, SweepAxis axis,
                       const std::vector<double>& values, bool write_outputs = true);

}  // namespace normkit
