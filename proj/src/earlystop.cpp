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

#include "synstop/earlystop.hpp"

#include <cmath>
#include <string>

#include "synstop/error.hpp"
#include "synstop/io.hpp"

namespace synstop {
namespace {

void check_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ContractError(std::string(what) + " must lie in [0, 1], got " + format_double(v));
}

}  // namespace

MetricMode parse_metric_mode(std::string_view name) {
  if (name == "exact_match") return MetricMode::exact_match;
  if (name == "per_label") return MetricMode::per_label;
  throw ContractError("unknown metric mode '" + std::string(name) + "'");
}

std::string_view to_string(MetricMode mode) {
  return mode == MetricMode::exact_match ? "exact_match" : "per_label";
}

double accuracy(std::span<const Example> examples, const ModelParams& params,
                MetricMode mode) {
  if (examples.empty()) throw ContractError("accuracy: empty example set");
  if (mode == MetricMode::exact_match) {
    std::size_t hits = 0;
    for (const Example& ex : examples)
      if (predict(params, ex.features) == ex.labels) ++hits;
    return static_cast<double>(hits) / static_cast<double>(examples.size());
  }
  // Integer count of matching bits keeps this order independent as well.
  std::size_t matches = 0, bits = 0;
  for (const Example& ex : examples) {
    const auto pred = predict(params, ex.features);
    if (pred.size() != ex.labels.size()) throw ContractError("accuracy: label length mismatch");
    for (std::size_t c = 0; c < pred.size(); ++c) matches += pred[c] == ex.labels[c];
    bits += pred.size();
  }
  return static_cast<double>(matches) / static_cast<double>(bits);
}

double evaluate(const ProxyValSet& proxy, const ModelParams& params, MetricMode mode) {
  if (proxy.examples.empty()) throw ContractError("evaluate: empty proxy validation set");
  return accuracy(proxy.examples, params, mode);
}

double relative_improvement(double prev, double next) {
  check_unit_interval(prev, "previous accuracy");
  check_unit_interval(next, "next accuracy");
  if (prev == 0.0) return next > 0.0 ? 1.0 : 0.0;
  return (next - prev) / prev;
}

MonitorState monitor_init(int patience, double initial_value) {
  if (patience < 1) throw ContractError("patience must be >= 1");
  check_unit_interval(initial_value, "initial accuracy");
  MonitorState s;
  s.patience = patience;
  s.last_value = initial_value;
  return s;
}

MonitorStep monitor_update(const MonitorState& state, int round_completed,
                           double next_value) {
  if (state.stopped_at)
    throw ContractError("monitor already stopped at round " + std::to_string(*state.stopped_at));
  if (round_completed != state.rounds_seen)
    throw ContractError("monitor expected round " + std::to_string(state.rounds_seen) +
                        ", got " + std::to_string(round_completed));
  check_unit_interval(next_value, "accuracy");

  MonitorStep step{state, Decision::proceed};
  MonitorState& s = step.state;
  if (next_value <= s.last_value)
    ++s.kappa;
  else
    s.kappa = 0;
  s.last_value = next_value;
  ++s.rounds_seen;
  if (round_completed + 1 >= s.patience && s.kappa == s.patience) {
    s.stopped_at = round_completed + 1;
    step.decision = Decision::stop;
  }
  return step;
}

std::optional<int> scan_stop_round(const AccuracyTrace& trace, int patience) {
  if (patience < 1) throw ContractError("patience must be >= 1");
  const auto& v = trace.values;
  const int last = static_cast<int>(v.size()) - 1;
  for (int r = patience; r <= last; ++r) {
    bool quiet = true;
    for (int tau = 1; tau <= patience && quiet; ++tau) {
      const int j = r + 1 - tau;
      quiet = relative_improvement(v[j - 1], v[j]) <= 0.0;
    }
    if (quiet) return r;
  }
  return std::nullopt;
}

std::optional<int> replay_monitor(const AccuracyTrace& trace, int patience) {
  if (trace.values.empty()) return std::nullopt;
  MonitorState s = monitor_init(patience, trace.values.front());
  for (std::size_t r = 0; r + 1 < trace.values.size(); ++r) {
    auto step = monitor_update(s, static_cast<int>(r), trace.values[r + 1]);
    s = step.state;
    if (step.decision == Decision::stop) return s.stopped_at;
  }
  return std::nullopt;
}

int oracle_best_round(const AccuracyTrace& trace) {
  if (trace.values.empty()) throw ContractError("oracle_best_round: empty trace");
  int best = 0;
  for (std::size_t r = 1; r < trace.values.size(); ++r)
    if (trace.values[r] > trace.values[best]) best = static_cast<int>(r);
  return best;
}

std::string trace_to_csv(const AccuracyTrace& trace) {
  std::string out = "round,value\n";
  for (std::size_t r = 0; r < trace.values.size(); ++r)
    out += std::to_string(r) + "," + format_double(trace.values[r]) + "\n";
  return out;
}

AccuracyTrace trace_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows.front().size() != 2 || rows.front()[0] != "round" ||
      rows.front()[1] != "value")
    throw ContractError("trace CSV must start with header 'round,value'");
  AccuracyTrace trace;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw ContractError("trace CSV row " + std::to_string(i) + " malformed");
    if (parse_int(rows[i][0]) != static_cast<long long>(i - 1))
      throw ContractError("trace CSV rounds must be consecutive from 0");
    const double v = parse_double(rows[i][1]);
    check_unit_interval(v, "trace value");
    trace.values.push_back(v);
  }
  return trace;
}

void write_trace_csv(const AccuracyTrace& trace, const std::filesystem::path& path) {
  write_file_atomic(path, trace_to_csv(trace));
}

AccuracyTrace read_trace_csv(const std::filesystem::path& path) {
  return trace_from_csv(read_file(path));
}

}  // namespace synstop
