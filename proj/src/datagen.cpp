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

#include "synstop/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "synstop/error.hpp"
#include "synstop/io.hpp"
#include "synstop/rng.hpp"

namespace synstop {
namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kPivotStream = 3;
constexpr std::uint64_t kSplitStream = 4;
constexpr std::uint64_t kProxySampleStream = 5;
constexpr std::uint64_t kProxyPerturbStream = 6;
constexpr std::size_t kRetryBudgetPerSample = 1000;

struct Draw {
  std::vector<double> latent;
  std::vector<std::uint8_t> labels;
};

Draw draw_latent(const TaskSpec& spec, Rng& rng) {
  Draw d;
  d.latent.resize(spec.input_dim);
  for (double& z : d.latent) z = rng.normal();
  d.labels.resize(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    double s = spec.biases[c];
    for (std::size_t j = 0; j < spec.input_dim; ++j) s += spec.prototypes[c][j] * d.latent[j];
    d.labels[c] = s > 0.0 ? 1 : 0;
  }
  return d;
}

// Observed features: latent plus task-level feature noise. The noise is drawn
// even when sigma is zero so the stream layout does not depend on it.
std::vector<double> observe(const TaskSpec& spec, const std::vector<double>& latent,
                            Rng& rng) {
  std::vector<double> x(latent);
  for (double& v : x) v += spec.feature_noise * rng.normal();
  return x;
}

Dataset sample_dataset(const TaskSpec& spec, std::size_t n, DatasetRole role,
                       std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.role = role;
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Draw d = draw_latent(spec, rng);
    ds.examples.push_back(Example{observe(spec, d.latent, rng), std::move(d.labels)});
  }
  return ds;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

}  // namespace

TaskSpec TaskSpec::random(std::size_t input_dim, std::size_t classes,
                          std::size_t train_size, std::size_t test_size,
                          double feature_noise, double bias, std::uint64_t seed) {
  TaskSpec spec;
  spec.input_dim = input_dim;
  spec.classes = classes;
  spec.train_size = train_size;
  spec.test_size = test_size;
  spec.feature_noise = feature_noise;
  spec.biases.assign(classes, bias);
  Rng rng(seed);
  spec.prototypes.resize(classes);
  for (auto& p : spec.prototypes) {
    double norm = 0.0;
    do {
      p.resize(input_dim);
      for (double& v : p) v = rng.normal();
      norm = std::sqrt(std::inner_product(p.begin(), p.end(), p.begin(), 0.0));
    } while (norm < 1e-12);
    for (double& v : p) v /= norm;
  }
  spec.validate();
  return spec;
}

void TaskSpec::validate() const {
  if (input_dim < 1 || classes < 1) throw ContractError("task needs input_dim >= 1 and classes >= 1");
  if (train_size < 1 || test_size < 1) throw ContractError("task train_size and test_size must be positive");
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise))
    throw ContractError("task feature_noise must be finite and >= 0");
  if (prototypes.size() != classes || biases.size() != classes)
    throw ContractError("task needs one prototype and one bias per class");
  for (const auto& p : prototypes) {
    if (p.size() != input_dim) throw ContractError("prototype length differs from input_dim");
    const double norm = std::sqrt(std::inner_product(p.begin(), p.end(), p.begin(), 0.0));
    if (std::abs(norm - 1.0) > 1e-9) throw ContractError("prototypes must be unit norm");
  }
}

void GeneratorConfig::validate() const {
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise))
    throw ContractError("generator feature_noise must be finite and >= 0");
  if (!(label_flip >= 0.0 && label_flip <= 1.0))
    throw ContractError("generator label_flip must lie in [0, 1]");
  if (samples_per_class < 1) throw ContractError("generator samples_per_class must be positive");
  for (double v : mean_shift)
    if (!std::isfinite(v)) throw ContractError("generator mean_shift must be finite");
}

GeneratorConfig generator_preset(std::string_view name, std::size_t samples_per_class) {
  struct Preset {
    std::string_view name;
    double noise;
    double flip;
  };
  static constexpr Preset kPresets[] = {
      {"roentgen", 0.0, 0.0},  {"sdxl", 0.25, 0.05}, {"sd20", 0.5, 0.1},
      {"sd15", 0.75, 0.2},     {"sd14", 1.0, 0.3},
  };
  for (const Preset& p : kPresets) {
    if (p.name == name) {
      GeneratorConfig g;
      g.name = std::string(p.name);
      g.feature_noise = p.noise;
      g.label_flip = p.flip;
      g.samples_per_class = samples_per_class;
      return g;
    }
  }
  throw ContractError("unknown generator preset '" + std::string(name) + "'");
}

std::vector<std::string> generator_preset_names() {
  return {"roentgen", "sdxl", "sd20", "sd15", "sd14"};
}

TaskData make_task(const TaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  return TaskData{
      sample_dataset(spec, spec.train_size, DatasetRole::train, derive_seed(seed, {kTrainStream})),
      sample_dataset(spec, spec.test_size, DatasetRole::test, derive_seed(seed, {kTestStream})),
  };
}

std::vector<std::size_t> assign_pivots(const Dataset& train, std::size_t classes,
                                       std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kPivotStream}));
  std::vector<std::size_t> pivots(train.size());
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& labels = train.examples[i].labels;
    positives.clear();
    for (std::size_t c = 0; c < labels.size(); ++c)
      if (labels[c]) positives.push_back(c);
    pivots[i] = positives.empty() ? rng.uniform_int(classes)
                                  : positives[rng.uniform_int(positives.size())];
  }
  return pivots;
}

std::vector<ClientShard> dirichlet_partition(const Dataset& train, std::size_t num_clients,
                                             double alpha, std::uint64_t seed) {
  if (num_clients < 1) throw ContractError("dirichlet_partition: need at least one client");
  if (train.examples.empty()) throw ContractError("dirichlet_partition: empty train set");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ContractError("dirichlet_partition: alpha must be positive");
  if (num_clients > train.size())
    throw ContractError("dirichlet_partition: " + std::to_string(num_clients) +
                        " clients but only " + std::to_string(train.size()) + " examples");

  const std::size_t classes = train.examples.front().labels.size();
  const std::vector<std::size_t> pivots = assign_pivots(train, classes, seed);

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < pivots.size(); ++i) by_class[pivots[i]].push_back(i);

  std::vector<std::vector<std::size_t>> owned(num_clients);
  Rng rng(derive_seed(seed, {kSplitStream}));
  std::vector<double> logs(num_clients);
  for (std::size_t c = 0; c < classes; ++c) {
    auto& members = by_class[c];
    shuffle(members, rng);
    for (double& l : logs) l = rng.log_gamma_draw(alpha);
    const double top = *std::max_element(logs.begin(), logs.end());
    double total = 0.0;
    for (double l : logs) total += std::exp(l - top);

    const std::size_t n = members.size();
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < num_clients; ++k) {
      cumulative += std::exp(logs[k] - top) / total;
      std::size_t end = k + 1 == num_clients
                            ? n
                            : std::min(n, static_cast<std::size_t>(std::floor(cumulative * n)));
      end = std::max(end, begin);
      owned[k].insert(owned[k].end(), members.begin() + begin, members.begin() + end);
      begin = end;
    }
  }

  for (auto& o : owned) std::sort(o.begin(), o.end());
  // Repair: every client needs at least one example.
  for (std::size_t k = 0; k < num_clients; ++k) {
    if (!owned[k].empty()) continue;
    std::size_t largest = 0;
    for (std::size_t j = 1; j < num_clients; ++j)
      if (owned[j].size() > owned[largest].size()) largest = j;
    owned[k].push_back(owned[largest].back());
    owned[largest].pop_back();
  }

  std::vector<ClientShard> shards(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    ClientShard& s = shards[k];
    s.client_id = static_cast<int>(k);
    s.example_indices = std::move(owned[k]);
    s.label_histogram.assign(classes, 0);
    s.pivot_histogram.assign(classes, 0);
    for (std::size_t i : s.example_indices) {
      const auto& labels = train.examples[i].labels;
      for (std::size_t c = 0; c < classes; ++c) s.label_histogram[c] += labels[c];
      ++s.pivot_histogram[pivots[i]];
    }
  }
  return shards;
}

double mean_pivot_entropy(const std::vector<ClientShard>& shards) {
  if (shards.empty()) return 0.0;
  double sum = 0.0;
  for (const ClientShard& s : shards) {
    const double n = static_cast<double>(s.example_indices.size());
    if (n == 0.0) continue;
    double h = 0.0;
    for (std::size_t count : s.pivot_histogram) {
      if (count == 0) continue;
      const double q = static_cast<double>(count) / n;
      h -= q * std::log(q);
    }
    sum += h;
  }
  return sum / static_cast<double>(shards.size());
}

void check_partition(const std::vector<ClientShard>& shards, std::size_t train_size) {
  std::vector<int> owner(train_size, -1);
  for (const ClientShard& s : shards) {
    if (s.example_indices.empty())
      throw ContractError("client " + std::to_string(s.client_id) + " has an empty shard");
    for (std::size_t i : s.example_indices) {
      if (i >= train_size) throw ContractError("shard index out of range");
      if (owner[i] != -1)
        throw ContractError("example " + std::to_string(i) + " assigned to clients " +
                            std::to_string(owner[i]) + " and " + std::to_string(s.client_id));
      owner[i] = s.client_id;
    }
  }
  for (std::size_t i = 0; i < train_size; ++i)
    if (owner[i] == -1) throw ContractError("example " + std::to_string(i) + " not assigned");
}

ProxyValSet make_proxy_valset(const TaskSpec& spec, const GeneratorConfig& config,
                              std::uint64_t seed) {
  spec.validate();
  config.validate();
  if (!config.mean_shift.empty() && config.mean_shift.size() != spec.input_dim)
    throw ContractError("generator mean_shift length differs from input_dim");

  ProxyValSet proxy;
  proxy.config = config;
  proxy.seed = seed;
  proxy.examples.reserve(config.samples_per_class * spec.classes);
  const std::size_t budget = kRetryBudgetPerSample * config.samples_per_class;

  for (std::size_t c = 0; c < spec.classes; ++c) {
    Rng sample_rng(derive_seed(seed, {kProxySampleStream, c}));
    Rng perturb_rng(derive_seed(seed, {kProxyPerturbStream, c}));
    std::size_t draws = 0;
    for (std::size_t k = 0; k < config.samples_per_class; ++k) {
      Draw d;
      do {
        if (draws++ == budget)
          throw GenerationError("class " + std::to_string(c) +
                                " unreachable: no positive sample within " +
                                std::to_string(budget) + " draws");
        d = draw_latent(spec, sample_rng);
      } while (!d.labels[c]);

      Example ex{observe(spec, d.latent, sample_rng), std::move(d.labels)};
      for (std::size_t j = 0; j < spec.input_dim; ++j) {
        ex.features[j] += config.feature_noise * perturb_rng.normal();
        if (!config.mean_shift.empty()) ex.features[j] += config.mean_shift[j];
      }
      for (auto& y : ex.labels)
        if (perturb_rng.uniform() < config.label_flip) y = 1 - y;
      proxy.examples.push_back(std::move(ex));
    }
  }
  return proxy;
}

void write_jsonl(const std::vector<Example>& examples, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const Example& ex : examples) {
    nlohmann::json line;
    line["features"] = ex.features;
    line["labels"] = ex.labels;
    out << line.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<Example> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Example> examples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Example ex;
    ex.features = j.at("features").get<std::vector<double>>();
    ex.labels = j.at("labels").get<std::vector<std::uint8_t>>();
    examples.push_back(std::move(ex));
  }
  return examples;
}

}  // namespace synstop
