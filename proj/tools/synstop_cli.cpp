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

// Command-line front end: run, sweep, report, trace.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "synstop/error.hpp"
#include "synstop/harness.hpp"
#include "synstop/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartialSweep = 3;

void print_summary(const synstop::Summary& s) {
  std::printf("%s: runs=%zu failed=%zu no_stop=%zu r*=%.1f r_near=%.1f speedup=x%.3f diff=%.3f%%\n",
              s.cell_id.c_str(), s.runs, s.failed, s.no_stop, s.r_star.mean, s.r_near.mean,
              s.speedup.mean, s.diff_pct.mean);
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, bool halt) {
  synstop::ExperimentConfig config = synstop::ExperimentConfig::load(config_path);
  if (seed) config.seeds = {*seed};
  const synstop::Summary s = synstop::run_cell(config, synstop::RunOptions{halt});
  print_summary(s);
  if (s.failed > 0) {
    std::fprintf(stderr, "error: %s\n", s.error.c_str());
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path, bool force, bool halt) {
  const synstop::ExperimentConfig base = synstop::ExperimentConfig::load(config_path);
  const synstop::SweepGrid grid = synstop::SweepGrid::load(grid_path);
  synstop::SweepOptions options;
  options.force = force;
  options.run.halt_at_stop = halt;
  const synstop::SweepResult result = synstop::sweep(base, grid, options);
  for (const auto& row : result.rows) print_summary(row);
  std::printf("%zu cells, %zu reused, %zu failed -> %s\n", result.rows.size(), result.skipped,
              result.failed, (base.output_dir / "sweep.csv").string().c_str());
  return result.failed > 0 ? kExitPartialSweep : kExitOk;
}

int cmd_report(const std::string& dir) {
  const synstop::ReportResult r = synstop::report(dir);
  std::fputs(r.table.c_str(), stdout);
  for (const auto& p : r.problems) std::fprintf(stderr, "%s\n", p.c_str());
  return r.all_consistent() ? kExitOk : kExitRuntime;
}

int cmd_trace(const std::string& dir, const std::string& run_id) {
  const std::filesystem::path json_path = synstop::run_json_path(dir, run_id);
  const auto j = nlohmann::json::parse(synstop::read_file(json_path));
  const auto csv = synstop::read_file(json_path.parent_path() / j.at("trace_csv").get<std::string>());
  std::fputs(csv.c_str(), stdout);
  std::printf("# r_star=%d r_near=%s speedup=%s diff_pct=%s\n", j.at("r_star").get<int>(),
              j.at("r_near").is_null() ? "none" : std::to_string(j.at("r_near").get<int>()).c_str(),
              synstop::format_double(j.at("speedup").get<double>()).c_str(),
              synstop::format_double(j.at("diff_pct").get<double>()).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with proxy-validation early stopping"};
  app.require_subcommand(1);

  std::string config_path, grid_path, dir, run_id;
  std::optional<std::uint64_t> seed;
  bool halt = false, force = false;

  auto* run = app.add_subcommand("run", "Run every seed of one configuration");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Run only this seed");
  run->add_flag("--halt-at-stop", halt, "Stop training when the monitor fires");

  auto* sw = app.add_subcommand("sweep", "Run a grid of configurations");
  sw->add_option("--config", config_path, "Base experiment config (JSON)")->required();
  sw->add_option("--grid", grid_path, "Grid file (JSON)")->required();
  sw->add_flag("--force", force, "Recompute cells that already have results");
  sw->add_flag("--halt-at-stop", halt, "Stop training when the monitor fires");

  auto* rep = app.add_subcommand("report", "Tabulate and cross-check run outputs");
  rep->add_option("--dir", dir, "Directory holding run outputs")->required();

  auto* tr = app.add_subcommand("trace", "Print the per-round trace of one run");
  tr->add_option("--dir", dir, "Directory holding run outputs")->required();
  tr->add_option("--run", run_id, "Run id, e.g. seed_0 or <cell>/seed_0")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, seed, halt);
    if (*sw) return cmd_sweep(config_path, grid_path, force, halt);
    if (*rep) return cmd_report(dir);
    if (*tr) return cmd_trace(dir, run_id);
  } catch (const synstop::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
