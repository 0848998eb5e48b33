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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synstop/datagen.hpp"
#include "synstop/earlystop.hpp"
#include "synstop/math_model.hpp"

namespace synstop {

/// Local/server update rule pair. New strategies slot in here plus a case
/// in edge_opt and server_opt.
enum class Method { fedavg, fedsam, feddyn };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

struct FedConfig {
  std::size_t num_clients = 100;
  std::size_t clients_per_round = 10;
  int max_rounds = 100;
  int local_steps = 5;
  std::size_t batch_size = 32;
  double lr = 1.0;
  Method method = Method::fedavg;
  // Named hyperparameters: "sam_rho" (fedsam), "feddyn_mu" (feddyn).
  std::map<std::string, double> method_params;

  double param(const std::string& name, double fallback) const;
  void validate() const;
};

/// Per-client and server-side vectors some strategies carry across rounds.
/// FedDyn: client_corrections[k] is lambda_k, server_state is h.
struct StrategyState {
  std::map<int, std::vector<double>> client_corrections;
  std::vector<double> server_state;
};

struct RoundRecord {
  int round = 0;  // the round executed; metrics describe the model it produced
  std::vector<int> participants;
  double val_acc_syn = 0.0;
  double test_acc = 0.0;
  double global_loss = 0.0;
  std::chrono::nanoseconds wall_time{0};
};

/// K distinct client ids drawn uniformly without replacement, sorted.
std::vector<int> sample_clients(std::size_t num_clients, std::size_t clients_per_round,
                                int round, std::uint64_t seed);

/// Identifies one client's work within a run, for RNG streams and errors.
struct ClientContext {
  int client_id = 0;
  int round = 0;
  std::uint64_t seed = 0;
};

/// Local training from the global model. Only state's slot for
/// ctx.client_id is read or written.
ModelParams edge_opt(Method method, const ModelParams& global,
                     std::span<const Example> shard, StrategyState& state,
                     const FedConfig& config, const ClientContext& ctx);

struct ClientUpdate {
  int client_id = 0;
  ModelParams params;
};

/// Aggregates client models. Updates are reduced in ascending client id
/// regardless of input order.
ModelParams server_opt(Method method, const ModelParams& global,
                       std::vector<ClientUpdate> locals, StrategyState& state,
                       const FedConfig& config);

/// Everything a round reads but does not modify.
struct FederatedData {
  const Dataset* train = nullptr;
  std::span<const ClientShard> shards;
  const ProxyValSet* proxy = nullptr;
  const Dataset* test = nullptr;
  MetricMode metric_mode = MetricMode::exact_match;
};

/// Materializes a shard's examples in index order.
std::vector<Example> shard_examples(const Dataset& train, const ClientShard& shard);

/// Uniform mean over clients of each client's local loss.
double global_loss(const ModelParams& params, const Dataset& train,
                   std::span<const ClientShard> shards);

struct RoundOutcome {
  ModelParams global;
  RoundRecord record;
};

RoundOutcome run_round(int round, const ModelParams& global, const FederatedData& data,
                       StrategyState& state, const FedConfig& config, std::uint64_t seed);

}  // namespace synstop
