/*
 * Copyright 2026 The synstop Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synstop/datagen.hpp"
#include "synstop/earlystop.hpp"
#include "synstop/fedcore.hpp"

namespace synstop {

/// Task shape as written in a config file; prototypes come from the seed.
struct TaskConfig {
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 0;
  std::size_t classes = 14;
  std::size_t train_size = 10000;
  std::size_t test_size = 2000;
  double feature_noise = 0.5;
  double bias = 0.0;

  ArchDescriptor arch() const { return {input_dim, hidden_dim, classes}; }
};

struct ExperimentConfig {
  TaskConfig task;
  FedConfig fed;
  GeneratorConfig generator = generator_preset("roentgen", 50);
  int patience = 5;
  double alpha = 0.1;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  MetricMode metric_mode = MetricMode::exact_match;
  std::filesystem::path output_dir = "runs";

  /// Throws ConfigError on unknown keys, wrong types or invalid values.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;

  /// Stable identifier of the grid cell (method, alpha, eta, p, generator).
  std::string cell_id() const;
};

struct RunOptions {
  bool halt_at_stop = false;
};

enum class RunStatus { ok, diverged };

/// One seeded run. records[i] describes the global model after i
/// aggregations, so records[0] is the initial evaluation.
struct RunResult {
  std::string cell_id;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::ok;
  std::string error;

  std::string method;
  double alpha = 0.0;
  std::size_t samples_per_class = 0;
  int patience = 1;
  std::string generator;
  MetricMode metric_mode = MetricMode::exact_match;
  int max_rounds = 0;
  bool halted_at_stop = false;

  std::vector<RoundRecord> records;
  std::optional<int> r_near;  // monitor decision; absent when it never fired
  bool no_stop = false;
  int r_near_reported = 0;  // r_near, or the last round when no_stop
  int r_star = 0;
  double acc_at_r_near = 0.0;
  double acc_at_r_star = 0.0;
  double speedup = 1.0;
  double diff_pct = 0.0;
};

/// Speed-up and accuracy deviation derived from the traces alone.
struct StopMetrics {
  std::optional<int> r_near;
  bool no_stop = false;
  int r_near_reported = 0;
  int r_star = 0;
  double acc_at_r_near = 0.0;
  double acc_at_r_star = 0.0;
  double speedup = 1.0;
  double diff_pct = 0.0;
};

StopMetrics compute_stop_metrics(const AccuracyTrace& val_trace, const AccuracyTrace& test_trace,
                                 int patience);

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const RunOptions& options = {});

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one value
};

struct Summary {
  std::string cell_id;
  std::string method;
  double alpha = 0.0;
  std::size_t samples_per_class = 0;
  int patience = 1;
  std::string generator;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::size_t no_stop = 0;
  MetricStats r_star, r_near, speedup, diff_pct, abs_diff_pct, acc_at_r_near, acc_at_r_star;
  long long r_star_rounded = 0;
  long long r_near_rounded = 0;
  double speedup_ratio_of_means = 1.0;
  std::string status = "ok";
  std::string error;
};

/// Seed-level means and deviations over the successful runs of one cell.
Summary aggregate(const std::vector<RunResult>& results);

/// Serialization. Doubles in CSV use 17 significant digits; JSON numbers
/// use the shortest form that round-trips exactly.
std::string records_to_csv(const std::vector<RoundRecord>& records);
nlohmann::json run_result_to_json(const RunResult& r);
nlohmann::json summary_to_json(const Summary& s);
std::string summary_csv_header();
std::string summary_csv_row(const Summary& s);

/// Writes <dir>/seed_<n>.csv and <dir>/seed_<n>.run.json.
void write_run(const RunResult& r, const std::filesystem::path& dir);

/// Runs every seed of the config into config.output_dir and writes
/// summary.json next to the runs.
Summary run_cell(const ExperimentConfig& config, const RunOptions& options = {});

struct SweepGrid {
  std::vector<double> alpha;
  std::vector<std::size_t> samples_per_class;
  std::vector<int> patience;
  std::vector<std::string> method;
  std::vector<std::string> generator;

  static SweepGrid from_json(const nlohmann::json& j);
  static SweepGrid load(const std::filesystem::path& path);
};

/// Expands the grid against a base config. Axes left empty keep the base
/// value. Order: method, alpha, eta, patience, generator.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base, const SweepGrid& grid);

struct SweepOptions {
  bool force = false;
  RunOptions run;
};

struct SweepResult {
  std::vector<Summary> rows;
  std::size_t skipped = 0;  // cells reused from disk
  std::size_t failed = 0;
};

/// One sub-directory per cell under base.output_dir plus sweep.csv.
/// Cells with an existing summary.json are loaded, not retrained.
SweepResult sweep(const ExperimentConfig& base, const SweepGrid& grid,
                  const SweepOptions& options = {});

struct RunCheck {
  std::string run_id;
  std::string method;
  bool consistent = false;
  double stored_speedup = 0.0, recomputed_speedup = 0.0;
  double stored_diff_pct = 0.0, recomputed_diff_pct = 0.0;
};

struct ReportResult {
  std::vector<RunCheck> runs;
  std::vector<std::string> problems;  // unreadable or inconsistent inputs
  std::string table;
  bool all_consistent() const;
};

/// Scans `dir` for *.run.json files, re-derives the stop metrics from each
/// run's CSV and writes report.md, report.json and traces/*.dat under
/// <dir>/report.
ReportResult report(const std::filesystem::path& dir);

/// Locates a run by id (path relative to dir without ".run.json").
std::filesystem::path run_json_path(const std::filesystem::path& dir, const std::string& run_id);

}  // namespace synstop
