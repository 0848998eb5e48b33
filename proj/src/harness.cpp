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

#include "synstop/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>

#include "synstop/error.hpp"
#include "synstop/io.hpp"
#include "synstop/rng.hpp"

namespace synstop {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kPrototypeStream = 100;
constexpr std::uint64_t kTaskStream = 101;
constexpr std::uint64_t kPartitionStream = 102;
constexpr std::uint64_t kProxyStream = 103;
constexpr std::uint64_t kInitStream = 104;
constexpr std::uint64_t kFederationStream = 105;

constexpr const char* kCsvHeader = "round,val_acc_syn,test_acc,global_loss";

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

// Compact %g rendering for identifiers.
std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

MetricStats stats_of(const std::vector<double>& xs) {
  MetricStats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

json stats_to_json(const MetricStats& s) { return json{{"mean", s.mean}, {"std", s.stddev}}; }

MetricStats stats_from_json(const json& j) {
  return MetricStats{j.at("mean").get<double>(), j.at("std").get<double>()};
}

Summary summary_from_json(const json& j) {
  Summary s;
  s.cell_id = j.at("cell_id").get<std::string>();
  s.method = j.at("method").get<std::string>();
  s.alpha = j.at("alpha").get<double>();
  s.samples_per_class = j.at("samples_per_class").get<std::size_t>();
  s.patience = j.at("patience").get<int>();
  s.generator = j.at("generator").get<std::string>();
  s.runs = j.at("runs").get<std::size_t>();
  s.failed = j.at("failed").get<std::size_t>();
  s.no_stop = j.at("no_stop").get<std::size_t>();
  s.r_star = stats_from_json(j.at("r_star"));
  s.r_near = stats_from_json(j.at("r_near"));
  s.speedup = stats_from_json(j.at("speedup"));
  s.diff_pct = stats_from_json(j.at("diff_pct"));
  s.abs_diff_pct = stats_from_json(j.at("abs_diff_pct"));
  s.acc_at_r_near = stats_from_json(j.at("acc_at_r_near"));
  s.acc_at_r_star = stats_from_json(j.at("acc_at_r_star"));
  s.r_star_rounded = j.at("r_star_rounded").get<long long>();
  s.r_near_rounded = j.at("r_near_rounded").get<long long>();
  s.speedup_ratio_of_means = j.at("speedup_ratio_of_means").get<double>();
  s.status = j.at("status").get<std::string>();
  s.error = j.value("error", "");
  return s;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

// Renders rows as an aligned markdown table.
std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    out += "|";
    for (std::size_t c = 0; c < cells.size(); ++c) out += " " + pad(cells[c], width[c]) + " |";
    out += "\n";
  };
  line(header);
  out += "|";
  for (std::size_t w : width) out += std::string(w + 2, '-') + "|";
  out += "\n";
  for (const auto& row : rows) line(row);
  return out;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  check_keys(j, {"task", "fed", "generator", "patience", "alpha", "seeds", "metric_mode", "output_dir"},
             "config");
  ExperimentConfig c;

  if (j.contains("task")) {
    const json& t = j.at("task");
    check_keys(t, {"input_dim", "hidden_dim", "classes", "train_size", "test_size", "feature_noise", "bias"},
               "task");
    read_if(t, "input_dim", c.task.input_dim, "task");
    read_if(t, "hidden_dim", c.task.hidden_dim, "task");
    read_if(t, "classes", c.task.classes, "task");
    read_if(t, "train_size", c.task.train_size, "task");
    read_if(t, "test_size", c.task.test_size, "task");
    read_if(t, "feature_noise", c.task.feature_noise, "task");
    read_if(t, "bias", c.task.bias, "task");
  }

  if (j.contains("fed")) {
    const json& f = j.at("fed");
    check_keys(f, {"num_clients", "clients_per_round", "max_rounds", "local_steps", "batch_size", "lr",
                   "method", "method_params"},
               "fed");
    read_if(f, "num_clients", c.fed.num_clients, "fed");
    read_if(f, "clients_per_round", c.fed.clients_per_round, "fed");
    read_if(f, "max_rounds", c.fed.max_rounds, "fed");
    read_if(f, "local_steps", c.fed.local_steps, "fed");
    read_if(f, "batch_size", c.fed.batch_size, "fed");
    read_if(f, "lr", c.fed.lr, "fed");
    std::string method(to_string(c.fed.method));
    read_if(f, "method", method, "fed");
    try {
      c.fed.method = parse_method(method);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("fed.method: ") + e.what());
    }
    read_if(f, "method_params", c.fed.method_params, "fed");
  }

  if (j.contains("generator")) {
    const json& g = j.at("generator");
    check_keys(g, {"preset", "name", "feature_noise", "label_flip", "mean_shift", "samples_per_class"},
               "generator");
    std::size_t eta = c.generator.samples_per_class;
    read_if(g, "samples_per_class", eta, "generator");
    if (g.contains("preset")) {
      std::string preset;
      read_if(g, "preset", preset, "generator");
      try {
        c.generator = generator_preset(preset, eta);
      } catch (const ContractError& e) {
        throw ConfigError(std::string("generator.preset: ") + e.what());
      }
    } else {
      c.generator = GeneratorConfig{};
      c.generator.name = "custom";
    }
    c.generator.samples_per_class = eta;
    read_if(g, "name", c.generator.name, "generator");
    read_if(g, "feature_noise", c.generator.feature_noise, "generator");
    read_if(g, "label_flip", c.generator.label_flip, "generator");
    read_if(g, "mean_shift", c.generator.mean_shift, "generator");
  }

  read_if(j, "patience", c.patience, "config");
  read_if(j, "alpha", c.alpha, "config");
  read_if(j, "seeds", c.seeds, "config");
  if (j.contains("metric_mode")) {
    std::string mode;
    read_if(j, "metric_mode", mode, "config");
    try {
      c.metric_mode = parse_metric_mode(mode);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("metric_mode: ") + e.what());
    }
  }
  if (j.contains("output_dir")) {
    std::string dir;
    read_if(j, "output_dir", dir, "config");
    c.output_dir = dir;
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json gen{{"name", generator.name},
           {"feature_noise", generator.feature_noise},
           {"label_flip", generator.label_flip},
           {"mean_shift", generator.mean_shift},
           {"samples_per_class", generator.samples_per_class}};
  return json{
      {"task",
       {{"input_dim", task.input_dim},
        {"hidden_dim", task.hidden_dim},
        {"classes", task.classes},
        {"train_size", task.train_size},
        {"test_size", task.test_size},
        {"feature_noise", task.feature_noise},
        {"bias", task.bias}}},
      {"fed",
       {{"num_clients", fed.num_clients},
        {"clients_per_round", fed.clients_per_round},
        {"max_rounds", fed.max_rounds},
        {"local_steps", fed.local_steps},
        {"batch_size", fed.batch_size},
        {"lr", fed.lr},
        {"method", std::string(to_string(fed.method))},
        {"method_params", fed.method_params}}},
      {"generator", gen},
      {"patience", patience},
      {"alpha", alpha},
      {"seeds", seeds},
      {"metric_mode", std::string(to_string(metric_mode))},
      {"output_dir", output_dir.string()},
  };
}

void ExperimentConfig::validate() const {
  try {
    task.arch().validate();
    fed.validate();
    generator.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (task.train_size < 1 || task.test_size < 1) throw ConfigError("task sizes must be positive");
  if (!(task.feature_noise >= 0.0) || !std::isfinite(task.feature_noise))
    throw ConfigError("task.feature_noise must be finite and >= 0");
  if (!std::isfinite(task.bias)) throw ConfigError("task.bias must be finite");
  if (task.train_size < fed.num_clients)
    throw ConfigError("task.train_size must be at least fed.num_clients");
  if (!generator.mean_shift.empty() && generator.mean_shift.size() != task.input_dim)
    throw ConfigError("generator.mean_shift length must equal task.input_dim");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::string ExperimentConfig::cell_id() const {
  return std::string(to_string(fed.method)) + "_a" + short_number(alpha) + "_eta" +
         std::to_string(generator.samples_per_class) + "_p" + std::to_string(patience) + "_" +
         generator.name;
}

// ---------------------------------------------------------------------------
// Runs

StopMetrics compute_stop_metrics(const AccuracyTrace& val_trace, const AccuracyTrace& test_trace,
                                 int patience) {
  if (val_trace.values.size() != test_trace.values.size() || test_trace.values.empty())
    throw ContractError("compute_stop_metrics: traces must be non-empty and of equal length");
  StopMetrics m;
  m.r_star = oracle_best_round(test_trace);
  m.r_near = replay_monitor(val_trace, patience);
  m.no_stop = !m.r_near.has_value();
  m.r_near_reported = m.r_near.value_or(static_cast<int>(test_trace.values.size()) - 1);
  m.acc_at_r_near = test_trace.values[m.r_near_reported];
  m.acc_at_r_star = test_trace.values[m.r_star];
  m.speedup = m.r_near ? static_cast<double>(m.r_star) / static_cast<double>(*m.r_near) : 1.0;
  m.diff_pct = 100.0 * (m.acc_at_r_near - m.acc_at_r_star);
  return m;
}

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const RunOptions& options) {
  config.validate();
  RunResult result;
  result.cell_id = config.cell_id();
  result.seed = seed;
  result.method = std::string(to_string(config.fed.method));
  result.alpha = config.alpha;
  result.samples_per_class = config.generator.samples_per_class;
  result.patience = config.patience;
  result.generator = config.generator.name;
  result.metric_mode = config.metric_mode;
  result.max_rounds = config.fed.max_rounds;

  const TaskSpec spec =
      TaskSpec::random(config.task.input_dim, config.task.classes, config.task.train_size,
                       config.task.test_size, config.task.feature_noise, config.task.bias,
                       derive_seed(seed, {kPrototypeStream}));
  const TaskData data = make_task(spec, derive_seed(seed, {kTaskStream}));
  const std::vector<ClientShard> shards =
      dirichlet_partition(data.train, config.fed.num_clients, config.alpha,
                          derive_seed(seed, {kPartitionStream}));
  const ProxyValSet proxy = make_proxy_valset(spec, config.generator, derive_seed(seed, {kProxyStream}));
  ModelParams global = init_params(config.task.arch(), derive_seed(seed, {kInitStream}));
  const std::uint64_t fed_seed = derive_seed(seed, {kFederationStream});

  const FederatedData fd{&data.train, shards, &proxy, &data.test, config.metric_mode};
  StrategyState state;

  RoundRecord initial;
  initial.round = 0;
  initial.val_acc_syn = evaluate(proxy, global, config.metric_mode);
  initial.test_acc = accuracy(data.test.examples, global, config.metric_mode);
  initial.global_loss = global_loss(global, data.train, shards);
  result.records.push_back(initial);

  MonitorState monitor = monitor_init(config.patience, initial.val_acc_syn);
  bool stopped = false;
  for (int r = 0; r < config.fed.max_rounds; ++r) {
    RoundOutcome outcome;
    try {
      outcome = run_round(r, global, fd, state, config.fed, fed_seed);
    } catch (const DivergenceError& e) {
      result.status = RunStatus::diverged;
      result.error = e.what();
      break;
    }
    global = std::move(outcome.global);
    outcome.record.round = r + 1;
    result.records.push_back(std::move(outcome.record));

    if (!stopped) {
      const MonitorStep step = monitor_update(monitor, r, result.records.back().val_acc_syn);
      monitor = step.state;
      if (step.decision == Decision::stop) {
        stopped = true;
        result.r_near = monitor.stopped_at;
        if (options.halt_at_stop) {
          result.halted_at_stop = true;
          break;
        }
      }
    }
  }

  AccuracyTrace val, test;
  for (const RoundRecord& rec : result.records) {
    val.values.push_back(rec.val_acc_syn);
    test.values.push_back(rec.test_acc);
  }
  const StopMetrics m = compute_stop_metrics(val, test, config.patience);
  if (m.r_near != result.r_near)
    throw std::logic_error("replayed stop round disagrees with the live monitor");
  result.no_stop = m.no_stop;
  result.r_near_reported = m.r_near_reported;
  result.r_star = m.r_star;
  result.acc_at_r_near = m.acc_at_r_near;
  result.acc_at_r_star = m.acc_at_r_star;
  result.speedup = m.speedup;
  result.diff_pct = m.diff_pct;
  return result;
}

// ---------------------------------------------------------------------------
// Aggregation and serialization

Summary aggregate(const std::vector<RunResult>& results) {
  if (results.empty()) throw ContractError("aggregate: no results");
  const RunResult& first = results.front();
  for (const RunResult& r : results)
    if (r.cell_id != first.cell_id)
      throw ContractError("aggregate: mixed configurations '" + first.cell_id + "' and '" + r.cell_id + "'");

  Summary s;
  s.cell_id = first.cell_id;
  s.method = first.method;
  s.alpha = first.alpha;
  s.samples_per_class = first.samples_per_class;
  s.patience = first.patience;
  s.generator = first.generator;
  s.runs = results.size();

  std::vector<double> r_star, r_near, speedup, diff, abs_diff, acc_near, acc_star;
  for (const RunResult& r : results) {
    if (r.status != RunStatus::ok) {
      ++s.failed;
      if (s.error.empty()) s.error = r.error;
      continue;
    }
    s.no_stop += r.no_stop ? 1 : 0;
    r_star.push_back(r.r_star);
    r_near.push_back(r.r_near_reported);
    speedup.push_back(r.speedup);
    diff.push_back(r.diff_pct);
    abs_diff.push_back(std::abs(r.diff_pct));
    acc_near.push_back(r.acc_at_r_near);
    acc_star.push_back(r.acc_at_r_star);
  }
  if (r_star.empty()) {
    s.status = "failed";
    return s;
  }
  s.r_star = stats_of(r_star);
  s.r_near = stats_of(r_near);
  s.speedup = stats_of(speedup);
  s.diff_pct = stats_of(diff);
  s.abs_diff_pct = stats_of(abs_diff);
  s.acc_at_r_near = stats_of(acc_near);
  s.acc_at_r_star = stats_of(acc_star);
  s.r_star_rounded = std::llround(s.r_star.mean);
  s.r_near_rounded = std::llround(s.r_near.mean);
  s.speedup_ratio_of_means = s.r_near.mean > 0.0 ? s.r_star.mean / s.r_near.mean : 1.0;
  s.status = s.failed == 0 ? "ok" : "partial";
  return s;
}

std::string records_to_csv(const std::vector<RoundRecord>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const RoundRecord& r : records) {
    out += std::to_string(r.round) + "," + format_double(r.val_acc_syn) + "," +
           format_double(r.test_acc) + "," + format_double(r.global_loss) + "\n";
  }
  return out;
}

json run_result_to_json(const RunResult& r) {
  json j{
      {"cell_id", r.cell_id},
      {"seed", r.seed},
      {"status", r.status == RunStatus::ok ? "ok" : "diverged"},
      {"error", r.error},
      {"method", r.method},
      {"alpha", r.alpha},
      {"samples_per_class", r.samples_per_class},
      {"patience", r.patience},
      {"generator", r.generator},
      {"metric_mode", std::string(to_string(r.metric_mode))},
      {"max_rounds", r.max_rounds},
      {"halted_at_stop", r.halted_at_stop},
      {"rounds_recorded", r.records.size()},
      {"r_near", r.r_near ? json(*r.r_near) : json(nullptr)},
      {"no_stop", r.no_stop},
      {"r_near_reported", r.r_near_reported},
      {"r_star", r.r_star},
      {"acc_at_r_near", r.acc_at_r_near},
      {"acc_at_r_star", r.acc_at_r_star},
      {"speedup", r.speedup},
      {"diff_pct", r.diff_pct},
      {"trace_csv", "seed_" + std::to_string(r.seed) + ".csv"},
  };
  return j;
}

json summary_to_json(const Summary& s) {
  return json{
      {"cell_id", s.cell_id},
      {"method", s.method},
      {"alpha", s.alpha},
      {"samples_per_class", s.samples_per_class},
      {"patience", s.patience},
      {"generator", s.generator},
      {"runs", s.runs},
      {"failed", s.failed},
      {"no_stop", s.no_stop},
      {"r_star", stats_to_json(s.r_star)},
      {"r_near", stats_to_json(s.r_near)},
      {"speedup", stats_to_json(s.speedup)},
      {"diff_pct", stats_to_json(s.diff_pct)},
      {"abs_diff_pct", stats_to_json(s.abs_diff_pct)},
      {"acc_at_r_near", stats_to_json(s.acc_at_r_near)},
      {"acc_at_r_star", stats_to_json(s.acc_at_r_star)},
      {"r_star_rounded", s.r_star_rounded},
      {"r_near_rounded", s.r_near_rounded},
      {"speedup_mean_of_ratios", s.speedup.mean},
      {"speedup_ratio_of_means", s.speedup_ratio_of_means},
      {"status", s.status},
      {"error", s.error},
  };
}

std::string summary_csv_header() {
  return "cell_id,method,alpha,samples_per_class,patience,generator,runs,failed,no_stop,"
         "r_star_mean,r_star_std,r_near_mean,r_near_std,r_star_rounded,r_near_rounded,"
         "speedup_mean,speedup_std,speedup_ratio_of_means,diff_pct_mean,diff_pct_std,"
         "abs_diff_pct_mean,acc_at_r_near_mean,acc_at_r_star_mean,status";
}

std::string summary_csv_row(const Summary& s) {
  std::ostringstream o;
  o << s.cell_id << ',' << s.method << ',' << format_double(s.alpha) << ',' << s.samples_per_class
    << ',' << s.patience << ',' << s.generator << ',' << s.runs << ',' << s.failed << ','
    << s.no_stop << ',' << format_double(s.r_star.mean) << ',' << format_double(s.r_star.stddev)
    << ',' << format_double(s.r_near.mean) << ',' << format_double(s.r_near.stddev) << ','
    << s.r_star_rounded << ',' << s.r_near_rounded << ',' << format_double(s.speedup.mean) << ','
    << format_double(s.speedup.stddev) << ',' << format_double(s.speedup_ratio_of_means) << ','
    << format_double(s.diff_pct.mean) << ',' << format_double(s.diff_pct.stddev) << ','
    << format_double(s.abs_diff_pct.mean) << ',' << format_double(s.acc_at_r_near.mean) << ','
    << format_double(s.acc_at_r_star.mean) << ',' << s.status;
  return o.str();
}

void write_run(const RunResult& r, const fs::path& dir) {
  const std::string stem = "seed_" + std::to_string(r.seed);
  write_file_atomic(dir / (stem + ".csv"), records_to_csv(r.records));
  write_file_atomic(dir / (stem + ".run.json"), run_result_to_json(r).dump(2) + "\n");
}

Summary run_cell(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<RunResult> results;
  for (std::uint64_t seed : config.seeds) {
    results.push_back(run_experiment(config, seed, options));
    write_run(results.back(), config.output_dir);
  }
  Summary s = aggregate(results);
  write_file_atomic(config.output_dir / "config.json", config.to_json().dump(2) + "\n");
  write_file_atomic(config.output_dir / "summary.json", summary_to_json(s).dump(2) + "\n");
  return s;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepGrid SweepGrid::from_json(const json& j) {
  check_keys(j, {"alpha", "samples_per_class", "patience", "method", "generator"}, "grid");
  SweepGrid g;
  read_if(j, "alpha", g.alpha, "grid");
  read_if(j, "samples_per_class", g.samples_per_class, "grid");
  read_if(j, "patience", g.patience, "grid");
  read_if(j, "method", g.method, "grid");
  read_if(j, "generator", g.generator, "grid");
  return g;
}

SweepGrid SweepGrid::load(const fs::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base, const SweepGrid& grid) {
  const std::vector<std::string> methods =
      grid.method.empty() ? std::vector<std::string>{std::string(to_string(base.fed.method))} : grid.method;
  const std::vector<double> alphas = grid.alpha.empty() ? std::vector<double>{base.alpha} : grid.alpha;
  const std::vector<std::size_t> etas = grid.samples_per_class.empty()
                                            ? std::vector<std::size_t>{base.generator.samples_per_class}
                                            : grid.samples_per_class;
  const std::vector<int> patiences = grid.patience.empty() ? std::vector<int>{base.patience} : grid.patience;
  const bool keep_generator = grid.generator.empty();
  const std::vector<std::string> gens =
      keep_generator ? std::vector<std::string>{base.generator.name} : grid.generator;

  std::vector<ExperimentConfig> cells;
  for (const auto& m : methods)
    for (double a : alphas)
      for (std::size_t eta : etas)
        for (int p : patiences)
          for (const auto& gname : gens) {
            ExperimentConfig c = base;
            try {
              c.fed.method = parse_method(m);
              if (keep_generator) {
                c.generator.samples_per_class = eta;
              } else {
                c.generator = generator_preset(gname, eta);
              }
            } catch (const ContractError& e) {
              throw ConfigError(std::string("grid: ") + e.what());
            }
            c.alpha = a;
            c.patience = p;
            c.output_dir = base.output_dir / c.cell_id();
            c.validate();
            cells.push_back(std::move(c));
          }
  if (cells.empty()) throw ConfigError("grid expands to no cells");
  return cells;
}

SweepResult sweep(const ExperimentConfig& base, const SweepGrid& grid, const SweepOptions& options) {
  const std::vector<ExperimentConfig> cells = expand_grid(base, grid);
  SweepResult out;
  for (const ExperimentConfig& cell : cells) {
    const fs::path summary_path = cell.output_dir / "summary.json";
    if (!options.force && fs::exists(summary_path)) {
      try {
        out.rows.push_back(summary_from_json(json::parse(read_file(summary_path))));
        ++out.skipped;
        if (out.rows.back().status != "ok") ++out.failed;
        continue;
      } catch (const std::exception&) {
        // Unreadable summary: recompute the cell.
      }
    }
    try {
      out.rows.push_back(run_cell(cell, options.run));
      if (out.rows.back().status != "ok") ++out.failed;
    } catch (const std::exception& e) {
      Summary failed;
      failed.cell_id = cell.cell_id();
      failed.method = std::string(to_string(cell.fed.method));
      failed.alpha = cell.alpha;
      failed.samples_per_class = cell.generator.samples_per_class;
      failed.patience = cell.patience;
      failed.generator = cell.generator.name;
      failed.runs = cell.seeds.size();
      failed.failed = cell.seeds.size();
      failed.status = "failed";
      failed.error = e.what();
      out.rows.push_back(failed);
      ++out.failed;
    }
  }
  std::string csv = summary_csv_header() + "\n";
  for (const Summary& s : out.rows) csv += summary_csv_row(s) + "\n";
  write_file_atomic(base.output_dir / "sweep.csv", csv);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

bool ReportResult::all_consistent() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunCheck& c) { return c.consistent; });
}

fs::path run_json_path(const fs::path& dir, const std::string& run_id) {
  return dir / (run_id + ".run.json");
}

ReportResult report(const fs::path& dir) {
  ReportResult result;
  if (!fs::is_directory(dir)) {
    result.problems.push_back("not a directory: " + dir.string());
    return result;
  }

  std::vector<fs::path> run_files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".run.json";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      run_files.push_back(entry.path());
  }
  std::sort(run_files.begin(), run_files.end());
  if (run_files.empty()) result.problems.push_back("warning: no runs found under " + dir.string());

  const fs::path out_dir = dir / "report";
  std::map<std::string, std::vector<std::vector<std::string>>> by_method;
  json runs_json = json::array();

  for (const fs::path& path : run_files) {
    std::string run_id = fs::relative(path, dir).generic_string();
    run_id.resize(run_id.size() - std::string(".run.json").size());
    try {
      const json j = json::parse(read_file(path));
      const fs::path csv_path = path.parent_path() / j.at("trace_csv").get<std::string>();
      const auto rows = parse_csv(read_file(csv_path));
      if (rows.empty() || rows.front().size() != 4) throw std::runtime_error("bad CSV header in " + csv_path.string());
      AccuracyTrace val, test;
      std::string dat = "# round val_acc_syn test_acc\n";
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4) throw std::runtime_error("malformed CSV row in " + csv_path.string());
        if (parse_int(rows[i][0]) != static_cast<long long>(i - 1))
          throw std::runtime_error("non-consecutive rounds in " + csv_path.string());
        val.values.push_back(parse_double(rows[i][1]));
        test.values.push_back(parse_double(rows[i][2]));
        dat += rows[i][0] + " " + rows[i][1] + " " + rows[i][2] + "\n";
      }
      if (test.values.empty()) throw std::runtime_error("empty trace in " + csv_path.string());

      // Independent route: the batch scan, not the monitor used at run time.
      const int patience = j.at("patience").get<int>();
      const int r_star = oracle_best_round(test);
      const std::optional<int> r_near = scan_stop_round(val, patience);
      const int reported = r_near.value_or(static_cast<int>(test.values.size()) - 1);
      const double speedup = r_near ? static_cast<double>(r_star) / *r_near : 1.0;
      const double diff = 100.0 * (test.values[reported] - test.values[r_star]);

      RunCheck check;
      check.run_id = run_id;
      check.method = j.at("method").get<std::string>();
      check.stored_speedup = j.at("speedup").get<double>();
      check.stored_diff_pct = j.at("diff_pct").get<double>();
      check.recomputed_speedup = speedup;
      check.recomputed_diff_pct = diff;
      const json& stored_near = j.at("r_near");
      const std::optional<int> stored_r_near =
          stored_near.is_null() ? std::nullopt : std::optional<int>(stored_near.get<int>());
      check.consistent = check.stored_speedup == speedup && check.stored_diff_pct == diff &&
                         j.at("r_star").get<int>() == r_star && stored_r_near == r_near;
      if (!check.consistent) result.problems.push_back("inconsistent metrics: " + run_id);

      std::string dat_name = run_id;
      std::replace(dat_name.begin(), dat_name.end(), '/', '.');
      write_file_atomic(out_dir / "traces" / (dat_name + ".dat"), dat);

      by_method[check.method].push_back({run_id, short_number(j.at("alpha").get<double>()),
                                         std::to_string(j.at("samples_per_class").get<std::size_t>()),
                                         std::to_string(patience), j.at("generator").get<std::string>(),
                                         std::to_string(r_star),
                                         r_near ? std::to_string(*r_near) : std::to_string(reported) + " (no stop)",
                                         r_near ? "x" + fixed(speedup, 2) : "-", fixed(diff, 2),
                                         check.consistent ? "ok" : "MISMATCH"});
      runs_json.push_back(json{{"run_id", run_id},
                               {"method", check.method},
                               {"consistent", check.consistent},
                               {"stored_speedup", check.stored_speedup},
                               {"recomputed_speedup", speedup},
                               {"stored_diff_pct", check.stored_diff_pct},
                               {"recomputed_diff_pct", diff},
                               {"r_star", r_star},
                               {"r_near", r_near ? json(*r_near) : json(nullptr)}});
      result.runs.push_back(std::move(check));
    } catch (const std::exception& e) {
      result.problems.push_back("unreadable run " + run_id + ": " + e.what());
    }
  }

  const std::vector<std::string> header = {"run", "alpha", "eta", "p", "generator", "r*",
                                           "r_near", "speed-up", "diff (%)", "check"};
  for (const auto& [method, rows] : by_method)
    result.table += "## " + method + "\n\n" + render_table(header, rows) + "\n";

  std::string md = "# Early-stopping report\n\n" + result.table;
  if (!result.problems.empty()) {
    md += "## Problems\n\n";
    for (const auto& p : result.problems) md += "- " + p + "\n";
  }
  write_file_atomic(out_dir / "report.md", md);
  write_file_atomic(out_dir / "report.json",
                    json{{"runs", runs_json}, {"problems", result.problems},
                         {"all_consistent", result.all_consistent()}}
                            .dump(2) +
                        "\n");
  return result;
}

}  // namespace synstop
