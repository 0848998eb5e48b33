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

#include "synstop/fedcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synstop/error.hpp"
#include "synstop/rng.hpp"

namespace synstop {
namespace {

constexpr std::uint64_t kSampleStream = 11;
constexpr std::uint64_t kShuffleStream = 12;
constexpr double kSamDefaultRho = 0.05;
constexpr double kFedDynDefaultMu = 0.01;
constexpr double kSamNormGuard = 1e-12;

// Walks one per-round shuffle of the shard, wrapping around when a client
// takes more steps than it has full batches.
class BatchCursor {
 public:
  BatchCursor(std::size_t shard_size, std::size_t batch_size, std::uint64_t seed)
      : order_(shard_size), batch_(std::min(batch_size, shard_size)) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[rng.uniform_int(i)]);
  }

  // Positions into the shard, ascending so sums run in index order.
  std::vector<std::size_t> next() {
    std::vector<std::size_t> out(batch_);
    for (std::size_t& p : out) {
      p = order_[pos_];
      pos_ = (pos_ + 1) % order_.size();
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
};

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "fedavg") return Method::fedavg;
  if (name == "fedsam") return Method::fedsam;
  if (name == "feddyn") return Method::feddyn;
  throw ContractError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::fedavg: return "fedavg";
    case Method::fedsam: return "fedsam";
    case Method::feddyn: return "feddyn";
  }
  return "unknown";
}

double FedConfig::param(const std::string& name, double fallback) const {
  auto it = method_params.find(name);
  return it == method_params.end() ? fallback : it->second;
}

void FedConfig::validate() const {
  if (num_clients < 1) throw ContractError("num_clients must be >= 1");
  if (clients_per_round < 1 || clients_per_round > num_clients)
    throw ContractError("clients_per_round must lie in [1, num_clients]");
  if (max_rounds < 1) throw ContractError("max_rounds must be >= 1");
  if (local_steps < 0) throw ContractError("local_steps must be >= 0");
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractError("lr must be finite and >= 0");
  for (const auto& [name, value] : method_params) {
    if (name != "sam_rho" && name != "feddyn_mu")
      throw ContractError("unknown method parameter '" + name + "'");
    if (!std::isfinite(value) || value < 0.0)
      throw ContractError("method parameter '" + name + "' must be finite and >= 0");
  }
  if (method == Method::feddyn && !(param("feddyn_mu", kFedDynDefaultMu) > 0.0))
    throw ContractError("feddyn_mu must be positive");
}

std::vector<int> sample_clients(std::size_t num_clients, std::size_t clients_per_round,
                                int round, std::uint64_t seed) {
  if (clients_per_round < 1 || clients_per_round > num_clients)
    throw ContractError("sample_clients: need 1 <= K <= N, got K=" +
                        std::to_string(clients_per_round) + ", N=" + std::to_string(num_clients));
  std::vector<int> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, {kSampleStream, static_cast<std::uint64_t>(round)}));
  // Partial Fisher-Yates: the first K slots become the sample.
  for (std::size_t i = 0; i < clients_per_round; ++i)
    std::swap(ids[i], ids[i + rng.uniform_int(num_clients - i)]);
  ids.resize(clients_per_round);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ModelParams edge_opt(Method method, const ModelParams& global,
                     std::span<const Example> shard, StrategyState& state,
                     const FedConfig& config, const ClientContext& ctx) {
  if (shard.empty())
    throw ContractError("edge_opt: client " + std::to_string(ctx.client_id) + " has no data");
  global.validate();

  ModelParams local = global;
  BatchCursor cursor(shard.size(), config.batch_size,
                     derive_seed(ctx.seed, {kShuffleStream, static_cast<std::uint64_t>(ctx.round),
                                            static_cast<std::uint64_t>(ctx.client_id)}));
  std::vector<Example> batch;
  auto gather = [&] {
    batch.clear();
    for (std::size_t p : cursor.next()) batch.push_back(shard[p]);
  };
  auto check = [&](const ModelParams& p) {
    if (!p.all_finite())
      throw DivergenceError(ctx.round, ctx.client_id, "non-finite local parameters");
  };

  switch (method) {
    case Method::fedavg: {
      for (int s = 0; s < config.local_steps; ++s) {
        gather();
        axpy(-config.lr, local_gradient(local, batch), local.values);
        check(local);
      }
      break;
    }
    case Method::fedsam: {
      const double rho = config.param("sam_rho", kSamDefaultRho);
      ModelParams probe = local;
      for (int s = 0; s < config.local_steps; ++s) {
        gather();
        const std::vector<double> g = local_gradient(local, batch);
        const double norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
        probe.values = local.values;
        if (norm >= kSamNormGuard) axpy(rho / norm, g, probe.values);
        check(probe);
        axpy(-config.lr, local_gradient(probe, batch), local.values);
        check(local);
      }
      break;
    }
    case Method::feddyn: {
      const double mu = config.param("feddyn_mu", kFedDynDefaultMu);
      auto& lambda = state.client_corrections[ctx.client_id];
      if (lambda.empty()) lambda.assign(global.values.size(), 0.0);
      if (lambda.size() != global.values.size())
        throw ContractError("feddyn correction vector has the wrong length");
      for (int s = 0; s < config.local_steps; ++s) {
        gather();
        std::vector<double> g = local_gradient(local, batch);
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += -lambda[i] + mu * (local.values[i] - global.values[i]);
        axpy(-config.lr, g, local.values);
        check(local);
      }
      for (std::size_t i = 0; i < lambda.size(); ++i)
        lambda[i] -= mu * (local.values[i] - global.values[i]);
      break;
    }
  }
  return local;
}

ModelParams server_opt(Method method, const ModelParams& global,
                       std::vector<ClientUpdate> locals, StrategyState& state,
                       const FedConfig& config) {
  if (locals.empty()) throw ContractError("server_opt: no client updates");
  std::sort(locals.begin(), locals.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });
  const std::size_t n = global.values.size();
  for (const ClientUpdate& u : locals)
    if (u.params.values.size() != n || !(u.params.arch == global.arch))
      throw ContractError("server_opt: client " + std::to_string(u.client_id) +
                          " returned parameters of the wrong shape");

  // Mean as first + mean offset, so identical updates come back bit-exact.
  const std::vector<double>& first = locals.front().params.values;
  std::vector<double> offset(n, 0.0);
  for (const ClientUpdate& u : locals)
    for (std::size_t i = 0; i < n; ++i) offset[i] += u.params.values[i] - first[i];
  ModelParams out{global.arch, first};
  const double count = static_cast<double>(locals.size());
  for (std::size_t i = 0; i < n; ++i) out.values[i] += offset[i] / count;

  if (method == Method::feddyn) {
    const double mu = config.param("feddyn_mu", kFedDynDefaultMu);
    auto& h = state.server_state;
    if (h.empty()) h.assign(n, 0.0);
    if (h.size() != n) throw ContractError("feddyn server state has the wrong length");
    const double step = mu / static_cast<double>(config.num_clients);
    std::vector<double> drift(n, 0.0);
    for (const ClientUpdate& u : locals)
      for (std::size_t i = 0; i < n; ++i) drift[i] += u.params.values[i] - global.values[i];
    for (std::size_t i = 0; i < n; ++i) h[i] -= step * drift[i];
    for (std::size_t i = 0; i < n; ++i) out.values[i] -= h[i] / mu;
  }
  return out;
}

std::vector<Example> shard_examples(const Dataset& train, const ClientShard& shard) {
  std::vector<Example> out;
  out.reserve(shard.example_indices.size());
  for (std::size_t i : shard.example_indices) out.push_back(train.examples.at(i));
  return out;
}

double global_loss(const ModelParams& params, const Dataset& train,
                   std::span<const ClientShard> shards) {
  if (shards.empty()) throw ContractError("global_loss: no clients");
  double sum = 0.0;
  for (const ClientShard& s : shards) sum += local_loss(params, shard_examples(train, s));
  return sum / static_cast<double>(shards.size());
}

RoundOutcome run_round(int round, const ModelParams& global, const FederatedData& data,
                       StrategyState& state, const FedConfig& config, std::uint64_t seed) {
  if (!data.train || !data.proxy || !data.test) throw ContractError("run_round: missing data");
  if (data.shards.size() != config.num_clients)
    throw ContractError("run_round: shard count differs from num_clients");
  const auto start = std::chrono::steady_clock::now();

  RoundRecord record;
  record.round = round;
  record.participants = sample_clients(config.num_clients, config.clients_per_round, round, seed);

  std::vector<ClientUpdate> updates;
  updates.reserve(record.participants.size());
  for (int k : record.participants) {
    const std::vector<Example> shard = shard_examples(*data.train, data.shards[k]);
    updates.push_back(ClientUpdate{
        k, edge_opt(config.method, global, shard, state, config, ClientContext{k, round, seed})});
  }
  ModelParams next = server_opt(config.method, global, std::move(updates), state, config);
  if (!next.all_finite()) throw DivergenceError(round, -1, "non-finite aggregated parameters");

  record.val_acc_syn = evaluate(*data.proxy, next, data.metric_mode);
  record.test_acc = accuracy(data.test->examples, next, data.metric_mode);
  record.global_loss = global_loss(next, *data.train, data.shards);
  record.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now() - start);
  return RoundOutcome{std::move(next), std::move(record)};
}

}  // namespace synstop
