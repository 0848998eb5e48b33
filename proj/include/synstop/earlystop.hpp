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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synstop/datagen.hpp"
#include "synstop/math_model.hpp"

namespace synstop {

/// How a predicted label vector is scored against the target.
///   exact_match: 1 iff every label matches (subset accuracy)
///   per_label:   fraction of matching labels
enum class MetricMode { exact_match, per_label };

MetricMode parse_metric_mode(std::string_view name);
std::string_view to_string(MetricMode mode);

/// Mean accuracy of params over examples under `mode`. Counts are integers
/// in exact-match mode, so the result is k / |examples| exactly.
double accuracy(std::span<const Example> examples, const ModelParams& params,
                MetricMode mode = MetricMode::exact_match);

/// Synthetic validation accuracy of params on the proxy set.
double evaluate(const ProxyValSet& proxy, const ModelParams& params,
                MetricMode mode = MetricMode::exact_match);

/// (next - prev) / prev, with the prev == 0 guard: +1 when next > 0, else 0.
double relative_improvement(double prev, double next);

enum class Decision { proceed, stop };

/// Patience state machine. `last_value` is the most recent accuracy,
/// `kappa` the run of consecutive non-improving rounds.
struct MonitorState {
  int patience = 1;
  double last_value = 0.0;
  int kappa = 0;
  int rounds_seen = 0;
  std::optional<int> stopped_at;
};

MonitorState monitor_init(int patience, double initial_value);

struct MonitorStep {
  MonitorState state;
  Decision decision = Decision::proceed;
};

/// Consumes the accuracy of the model produced by round `round_completed`.
/// A stop sets stopped_at = round_completed + 1; further updates throw.
MonitorStep monitor_update(const MonitorState& state, int round_completed,
                           double next_value);

/// Accuracy values indexed by model round, starting at the initial model.
struct AccuracyTrace {
  std::vector<double> values;
};

/// Batch form of the stopping rule: the smallest r >= p such that the
/// relative improvements at rounds r-p+1 .. r are all <= 0.
std::optional<int> scan_stop_round(const AccuracyTrace& trace, int patience);

/// Feeds the trace through the incremental monitor.
std::optional<int> replay_monitor(const AccuracyTrace& trace, int patience);

/// Argmax of the trace, earliest on ties.
int oracle_best_round(const AccuracyTrace& trace);

/// CSV with header "round,value".
std::string trace_to_csv(const AccuracyTrace& trace);
AccuracyTrace trace_from_csv(std::string_view text);
void write_trace_csv(const AccuracyTrace& trace, const std::filesystem::path& path);
AccuracyTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace synstop
