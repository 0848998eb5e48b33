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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "synstop/datagen.hpp"
#include "synstop/earlystop.hpp"
#include "synstop/fedcore.hpp"
#include "synstop/harness.hpp"
#include "synstop/io.hpp"
#include "synstop/math_model.hpp"

using namespace synstop;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

// A criterion passes only if its check holds within its time budget.
void criterion(int id, const std::string& name, double budget_secs, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= budget_secs) o.pass = false;
  std::printf("%s  C%d %s: %s (%.2fs, budget %.0fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs, budget_secs);
  std::fflush(stdout);
  failures += !o.pass;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

AccuracyTrace random_trace(std::mt19937_64& gen) {
  const std::size_t length = 1 + gen() % 150;
  const int levels = 1 + static_cast<int>(gen() % 700);
  std::uniform_int_distribution<int> level(0, levels);
  AccuracyTrace t;
  int cur = level(gen);
  for (std::size_t i = 0; i < length; ++i) {
    switch (gen() % 4) {
      case 0: cur = level(gen); break;
      case 1: cur = std::min(levels, cur + static_cast<int>(gen() % 3)); break;
      case 2: cur = std::max(0, cur - static_cast<int>(gen() % 3)); break;
      default: break;
    }
    t.values.push_back(static_cast<double>(cur) / levels);
  }
  return t;
}

// Independent linear-model SGD used as the oracle for the one-client case.
std::vector<double> oracle_gradient(const std::vector<double>& w, const std::vector<Example>& data,
                                    std::size_t d, std::size_t classes) {
  std::vector<double> g(w.size(), 0.0);
  for (const Example& ex : data)
    for (std::size_t c = 0; c < classes; ++c) {
      double z = w[classes * d + c];
      for (std::size_t j = 0; j < d; ++j) z += w[c * d + j] * ex.features[j];
      const double r = (1.0 / (1.0 + std::exp(-z)) - ex.labels[c]) / static_cast<double>(classes);
      for (std::size_t j = 0; j < d; ++j) g[c * d + j] += r * ex.features[j];
      g[classes * d + c] += r;
    }
  for (double& v : g) v /= static_cast<double>(data.size());
  return g;
}

std::string read_or_empty(const fs::path& p) {
  try {
    return read_file(p);
  } catch (const std::exception&) {
    return {};
  }
}

}  // namespace

int main() {
  const fs::path work = fs::current_path() / "acceptance_runs";
  fs::remove_all(work);
  fs::create_directories(work);
  ExperimentConfig defaults = ExperimentConfig::load(fs::path(SYNSTOP_CONFIG_DIR) / "default.json");

  criterion(1, "monitor equals the stopping-rule scan", 10, [] {
    std::mt19937_64 gen(2026);
    std::size_t mismatches = 0, stops = 0;
    for (int i = 0; i < 10000; ++i) {
      const AccuracyTrace t = random_trace(gen);
      for (int p : {1, 5, 10}) {
        const auto live = replay_monitor(t, p);
        mismatches += live != scan_stop_round(t, p);
        stops += live.has_value();
      }
    }
    return Outcome{mismatches == 0, fmt("30000 trace/patience pairs, %.0f mismatches, %.0f stops", mismatches, stops)};
  });

  criterion(2, "analytic gradients match finite differences", 5, [] {
    double worst_linear = 0.0, worst_mlp = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      worst_linear = std::max(worst_linear, grad_check({8, 0, 5}, seed));
      worst_mlp = std::max(worst_mlp, grad_check({8, 6, 5}, seed));
    }
    return Outcome{worst_linear < 1e-5 && worst_mlp < 1e-4,
                   fmt("worst relative error linear %.3g (< 1e-5), mlp %.3g (< 1e-4)", worst_linear, worst_mlp)};
  });

  criterion(3, "one-client FedAvg equals centralized SGD", 5, [] {
    const TaskSpec spec = TaskSpec::random(10, 4, 300, 50, 0.5, 0.0, 3);
    const TaskData data = make_task(spec, 4);
    const ProxyValSet proxy = make_proxy_valset(spec, generator_preset("roentgen", 5), 5);
    FedConfig c;
    c.num_clients = 1;
    c.clients_per_round = 1;
    c.max_rounds = 50;
    c.local_steps = 3;
    c.batch_size = data.train.size();
    c.lr = 0.5;
    const auto shards = dirichlet_partition(data.train, 1, 0.1, 0);
    const FederatedData fd{&data.train, shards, &proxy, &data.test};
    StrategyState state;
    ModelParams fed = init_params({10, 0, 4}, 7);
    std::vector<double> w = fed.values;
    double worst = 0.0;
    for (int r = 0; r < c.max_rounds; ++r) {
      fed = run_round(r, fed, fd, state, c, 11).global;
      for (int s = 0; s < c.local_steps; ++s) {
        const auto g = oracle_gradient(w, data.train.examples, 10, 4);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c.lr * g[i];
      }
      for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(w[i] - fed.values[i]));
    }
    return Outcome{worst <= 1e-12, fmt("50 rounds x 3 steps, max |w_fed - w_sgd| = %.3g (<= 1e-12)", worst)};
  });

  criterion(4, "Dirichlet partitions are sound and entropy grows with alpha", 10, [] {
    const TaskSpec spec = TaskSpec::random(32, 14, 10000, 10, 0.5, 0.0, 1);
    const TaskData data = make_task(spec, 2);
    std::vector<double> entropy;
    std::string detail = "mean pivot entropy:";
    for (double alpha : {0.001, 0.01, 0.1, 1.0}) {
      double sum = 0.0;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto shards = dirichlet_partition(data.train, 100, alpha, seed);
        check_partition(shards, data.train.size());
        sum += mean_pivot_entropy(shards);
      }
      entropy.push_back(sum / 5.0);
      detail += fmt(" a=%g:%.3f", alpha, entropy.back());
    }
    bool monotone = true;
    for (std::size_t i = 1; i < entropy.size(); ++i) monotone &= entropy[i - 1] <= entropy[i];
    return Outcome{monotone, "20 partitions disjoint, covering, non-empty; " + detail};
  });

  // Criteria 5, 6 and 8 share these runs.
  auto cell = [&](const std::string& method, const std::string& generator) {
    ExperimentConfig c = defaults;
    c.fed.method = parse_method(method);
    c.generator = generator_preset(generator, c.generator.samples_per_class);
    c.output_dir = work / "cells" / c.cell_id();
    return run_cell(c);
  };
  const std::vector<std::string> methods{"fedavg", "fedsam", "feddyn"};
  double roentgen_abs_diff = 0.0;

  criterion(5, "identity generator: speed-up >= 1.2 with |diff| <= 1.5 points", 300, [&] {
    double speedup = 0.0, abs_diff = 0.0;
    std::string detail;
    bool ok = true;
    for (const auto& m : methods) {
      const Summary s = cell(m, "roentgen");
      ok &= s.failed == 0;
      speedup += s.speedup.mean / methods.size();
      abs_diff += s.abs_diff_pct.mean / methods.size();
      detail += m + fmt(" x%.3f |diff| %.3f; ", s.speedup.mean, s.abs_diff_pct.mean);
    }
    roentgen_abs_diff = abs_diff;
    return Outcome{ok && speedup >= 1.2 && abs_diff <= 1.5,
                   detail + fmt("mean speed-up x%.3f, mean |diff| %.3f pts", speedup, abs_diff)};
  });

  criterion(6, "identity generator deviates no more than sd14", 300, [&] {
    double abs_diff = 0.0;
    for (const auto& m : methods) abs_diff += cell(m, "sd14").abs_diff_pct.mean / methods.size();
    return Outcome{roentgen_abs_diff <= abs_diff,
                   fmt("mean |diff| roentgen %.3f <= sd14 %.3f", roentgen_abs_diff, abs_diff)};
  });

  criterion(7, "repeat CLI runs are byte-identical", 60, [&] {
    ExperimentConfig c = defaults;
    c.seeds = {3};
    c.output_dir = work / "repeat";
    const fs::path config_path = work / "repeat.json";
    write_file_atomic(config_path, c.to_json().dump(2));
    const std::string cmd = std::string(SYNSTOP_CLI) + " run --config " + config_path.string() + " > /dev/null";
    std::vector<std::string> csv, json;
    for (int i = 0; i < 2; ++i) {
      fs::remove_all(c.output_dir);
      if (std::system(cmd.c_str()) != 0) return Outcome{false, "CLI run failed"};
      csv.push_back(read_or_empty(c.output_dir / "seed_3.csv"));
      json.push_back(read_or_empty(c.output_dir / "seed_3.run.json"));
    }
    const bool ok = !csv[0].empty() && !json[0].empty() && csv[0] == csv[1] && json[0] == json[1];
    return Outcome{ok, fmt("CSV %.0f bytes, JSON %.0f bytes, identical: ", csv[0].size(), json[0].size()) +
                           (ok ? "yes" : "no")};
  });

  criterion(8, "report recomputes every stored metric exactly", 5, [&] {
    const ReportResult r = report(work / "cells");
    std::size_t consistent = 0;
    for (const auto& run : r.runs) consistent += run.consistent;
    const bool ok = r.all_consistent() && r.runs.size() == 30 && r.problems.empty();
    return Outcome{ok, fmt("%.0f of %.0f runs consistent, %.0f problems", consistent, r.runs.size(),
                           r.problems.size())};
  });

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
