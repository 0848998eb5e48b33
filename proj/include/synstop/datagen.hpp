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
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "synstop/math_model.hpp"

namespace synstop {

/// Ground-truth multi-label task: label c fires when the latent projects
/// positively onto prototype c after its bias.
struct TaskSpec {
  std::size_t input_dim = 32;
  std::size_t classes = 14;
  std::vector<std::vector<double>> prototypes;  // classes x input_dim, unit norm
  std::vector<double> biases;                   // classes
  double feature_noise = 0.0;
  std::size_t train_size = 10000;
  std::size_t test_size = 2000;

  // Unit-norm prototypes drawn from seed, all biases equal to `bias`.
  static TaskSpec random(std::size_t input_dim, std::size_t classes,
                         std::size_t train_size, std::size_t test_size,
                         double feature_noise, double bias, std::uint64_t seed);

  void validate() const;
};

enum class DatasetRole { train, test, proxy_val };

struct Dataset {
  std::vector<Example> examples;
  DatasetRole role = DatasetRole::train;

  std::size_t size() const { return examples.size(); }
};

struct ClientShard {
  int client_id = 0;
  std::vector<std::size_t> example_indices;  // ascending
  std::vector<std::size_t> label_histogram;  // positive-label counts per class
  std::vector<std::size_t> pivot_histogram;  // pivot-class counts per class
};

/// Fidelity knobs for the parametric stand-in for a generative model.
struct GeneratorConfig {
  std::string name = "custom";
  double feature_noise = 0.0;     // extra isotropic noise on features
  double label_flip = 0.0;        // independent per-label flip probability
  std::vector<double> mean_shift;  // empty means zero shift
  std::size_t samples_per_class = 50;

  void validate() const;
};

/// Named presets, most to least faithful: roentgen, sdxl, sd20, sd15, sd14.
GeneratorConfig generator_preset(std::string_view name,
                                 std::size_t samples_per_class);
std::vector<std::string> generator_preset_names();

/// Fixed server-side validation set.
struct ProxyValSet {
  std::vector<Example> examples;
  GeneratorConfig config;
  std::uint64_t seed = 0;
};

struct TaskData {
  Dataset train;
  Dataset test;
};

TaskData make_task(const TaskSpec& spec, std::uint64_t seed);

/// Pivot class per example: uniform among its positive labels, or uniform
/// over all classes when it has none.
std::vector<std::size_t> assign_pivots(const Dataset& train,
                                       std::size_t classes,
                                       std::uint64_t seed);

std::vector<ClientShard> dirichlet_partition(const Dataset& train,
                                             std::size_t num_clients,
                                             double alpha, std::uint64_t seed);

/// Shannon entropy (nats) of each shard's pivot histogram, averaged.
double mean_pivot_entropy(const std::vector<ClientShard>& shards);

/// Throws ContractError unless shards are disjoint and cover [0, train_size).
void check_partition(const std::vector<ClientShard>& shards,
                     std::size_t train_size);

ProxyValSet make_proxy_valset(const TaskSpec& spec, const GeneratorConfig& config,
                              std::uint64_t seed);

/// One JSON object per line: {"features": [...], "labels": [...]}.
void write_jsonl(const std::vector<Example>& examples,
                 const std::filesystem::path& path);
std::vector<Example> read_jsonl(const std::filesystem::path& path);

}  // namespace synstop
