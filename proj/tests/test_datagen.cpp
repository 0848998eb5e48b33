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

#include <doctest.h>

#include <filesystem>
#include <set>

#include "synstop/datagen.hpp"
#include "synstop/error.hpp"

using namespace synstop;

namespace {

TaskSpec default_spec(std::size_t train = 10000, std::uint64_t seed = 1) {
  return TaskSpec::random(32, 14, train, 500, 0.5, 0.0, seed);
}

}  // namespace

TEST_CASE("make_task") {
  SUBCASE("a large negative bias switches every label off") {
    TaskSpec spec = TaskSpec::random(8, 5, 300, 100, 0.0, -10.0, 3);
    const TaskData data = make_task(spec, 4);
    for (const auto& ex : data.train.examples)
      for (auto y : ex.labels) CHECK(y == 0);
  }
  SUBCASE("deterministic in the seed") {
    const TaskSpec spec = default_spec(500);
    const TaskData a = make_task(spec, 9), b = make_task(spec, 9), c = make_task(spec, 10);
    CHECK(a.train.examples == b.train.examples);
    CHECK(a.test.examples == b.test.examples);
    CHECK(a.train.examples != c.train.examples);
    CHECK(a.train.examples != a.test.examples);
  }
  SUBCASE("class marginals are balanced with zero bias") {
    const TaskData data = make_task(default_spec(), 2);
    std::vector<double> freq(14, 0.0);
    for (const auto& ex : data.train.examples)
      for (std::size_t c = 0; c < 14; ++c) freq[c] += ex.labels[c];
    for (double f : freq) {
      CHECK(f / 10000.0 >= 0.2);
      CHECK(f / 10000.0 <= 0.8);
    }
  }
  SUBCASE("noise-free features reproduce labels through the prototypes") {
    TaskSpec spec = TaskSpec::random(6, 3, 200, 10, 0.0, 0.1, 5);
    for (const auto& ex : make_task(spec, 1).train.examples)
      for (std::size_t c = 0; c < 3; ++c) {
        double s = spec.biases[c];
        for (std::size_t j = 0; j < 6; ++j) s += spec.prototypes[c][j] * ex.features[j];
        CHECK(ex.labels[c] == (s > 0.0 ? 1 : 0));
      }
  }
  SUBCASE("invalid specs") {
    TaskSpec spec = default_spec(100);
    spec.prototypes[0][0] += 1.0;
    CHECK_THROWS_AS(make_task(spec, 0), ContractError);
    spec = default_spec(100);
    spec.feature_noise = -1.0;
    CHECK_THROWS_AS(make_task(spec, 0), ContractError);
  }
}

TEST_CASE("dirichlet_partition") {
  const TaskData data = make_task(default_spec(), 3);

  SUBCASE("one client owns everything") {
    const auto shards = dirichlet_partition(data.train, 1, 0.1, 0);
    REQUIRE(shards.size() == 1);
    CHECK(shards[0].example_indices.size() == 10000);
    check_partition(shards, 10000);
  }
  SUBCASE("near-uniform proportions at large alpha") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto shards = dirichlet_partition(data.train, 2, 1000.0, seed);
      check_partition(shards, 10000);
      for (std::size_t c = 0; c < 14; ++c) {
        const double total = static_cast<double>(shards[0].pivot_histogram[c] + shards[1].pivot_histogram[c]);
        for (const auto& s : shards) {
          const double share = s.pivot_histogram[c] / total;
          CHECK(share >= 0.45);
          CHECK(share <= 0.55);
        }
      }
    }
  }
  SUBCASE("extreme skew at tiny alpha") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto shards = dirichlet_partition(data.train, 100, 0.001, seed);
      check_partition(shards, 10000);
      double distinct = 0.0;
      for (const auto& s : shards)
        for (auto n : s.pivot_histogram) distinct += n > 0;
      CHECK(distinct / 100.0 <= 2.0);
    }
  }
  SUBCASE("entropy grows with alpha") {
    const std::vector<double> alphas{0.001, 0.01, 0.1, 1.0};
    std::vector<double> mean_entropy;
    for (double a : alphas) {
      double sum = 0.0;
      for (std::uint64_t seed = 0; seed < 5; ++seed)
        sum += mean_pivot_entropy(dirichlet_partition(data.train, 100, a, seed));
      mean_entropy.push_back(sum / 5.0);
    }
    for (std::size_t i = 1; i < mean_entropy.size(); ++i) CHECK(mean_entropy[i - 1] <= mean_entropy[i]);
  }
  SUBCASE("histograms match the assigned examples") {
    const auto shards = dirichlet_partition(data.train, 10, 0.5, 4);
    for (const auto& s : shards) {
      std::vector<std::size_t> labels(14, 0);
      std::size_t pivots = 0;
      for (auto i : s.example_indices)
        for (std::size_t c = 0; c < 14; ++c) labels[c] += data.train.examples[i].labels[c];
      for (auto n : s.pivot_histogram) pivots += n;
      CHECK(labels == s.label_histogram);
      CHECK(pivots == s.example_indices.size());
      CHECK(std::is_sorted(s.example_indices.begin(), s.example_indices.end()));
    }
  }
  SUBCASE("errors") {
    Dataset tiny;
    tiny.examples = {data.train.examples.begin(), data.train.examples.begin() + 3};
    CHECK_THROWS_AS(dirichlet_partition(tiny, 4, 1.0, 0), ContractError);
    CHECK_NOTHROW(check_partition(dirichlet_partition(tiny, 3, 0.001, 0), 3));
    CHECK_THROWS_AS(dirichlet_partition(Dataset{}, 1, 1.0, 0), ContractError);
    CHECK_THROWS_AS(dirichlet_partition(tiny, 0, 1.0, 0), ContractError);
    CHECK_THROWS_AS(dirichlet_partition(tiny, 2, 0.0, 0), ContractError);
  }
}

TEST_CASE("check_partition rejects overlap and gaps") {
  std::vector<ClientShard> shards(2);
  shards[0].example_indices = {0, 1};
  shards[1].client_id = 1;
  shards[1].example_indices = {1, 2};
  CHECK_THROWS_AS(check_partition(shards, 3), ContractError);
  shards[1].example_indices = {2};
  CHECK_NOTHROW(check_partition(shards, 3));
  CHECK_THROWS_AS(check_partition(shards, 4), ContractError);
}

TEST_CASE("make_proxy_valset") {
  const TaskSpec spec = default_spec(100);

  SUBCASE("identity generator is in distribution") {
    GeneratorConfig g = generator_preset("roentgen", 20);
    const ProxyValSet proxy = make_proxy_valset(spec, g, 7);
    REQUIRE(proxy.examples.size() == 20 * 14);
    for (std::size_t i = 0; i < proxy.examples.size(); ++i) CHECK(proxy.examples[i].labels[i / 20] == 1);
  }
  SUBCASE("size is samples_per_class times classes") {
    CHECK(make_proxy_valset(spec, generator_preset("sd14", 10), 0).examples.size() == 140);
  }
  SUBCASE("full flip inverts every label bit") {
    GeneratorConfig clean;
    clean.samples_per_class = 10;
    GeneratorConfig flipped = clean;
    flipped.label_flip = 1.0;
    const auto a = make_proxy_valset(spec, clean, 3), b = make_proxy_valset(spec, flipped, 3);
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
      CHECK(a.examples[i].features == b.examples[i].features);
      for (std::size_t c = 0; c < 14; ++c) CHECK(a.examples[i].labels[c] + b.examples[i].labels[c] == 1);
    }
  }
  SUBCASE("regeneration is bit-identical") {
    GeneratorConfig g = generator_preset("sd15", 10);
    g.mean_shift.assign(32, 0.25);
    CHECK(make_proxy_valset(spec, g, 11).examples == make_proxy_valset(spec, g, 11).examples);
    CHECK(make_proxy_valset(spec, g, 11).examples != make_proxy_valset(spec, g, 12).examples);
  }
  SUBCASE("lower flip rate keeps more labels intact") {
    GeneratorConfig base;
    base.samples_per_class = 100;
    const auto clean = make_proxy_valset(spec, base, 5);
    auto kept_fraction = [&](double rho) {
      GeneratorConfig g = base;
      g.label_flip = rho;
      const auto noisy = make_proxy_valset(spec, g, 5);
      std::size_t same = 0;
      for (std::size_t i = 0; i < clean.examples.size(); ++i) same += clean.examples[i].labels == noisy.examples[i].labels;
      return static_cast<double>(same) / clean.examples.size();
    };
    CHECK(kept_fraction(0.01) > kept_fraction(0.05));
    CHECK(kept_fraction(0.05) > kept_fraction(0.1));
    CHECK(kept_fraction(0.1) > kept_fraction(0.3));
    CHECK(kept_fraction(0.3) > kept_fraction(0.5));
  }
  SUBCASE("unreachable class is reported by index") {
    TaskSpec hard = TaskSpec::random(4, 3, 10, 10, 0.0, 0.0, 1);
    hard.biases[2] = -100.0;
    GeneratorConfig g;
    g.samples_per_class = 2;
    try {
      make_proxy_valset(hard, g, 0);
      FAIL("expected a GenerationError");
    } catch (const GenerationError& e) {
      CHECK(std::string(e.what()).find("class 2") != std::string::npos);
    }
  }
  SUBCASE("invalid configs") {
    GeneratorConfig g;
    g.label_flip = 1.5;
    CHECK_THROWS_AS(make_proxy_valset(spec, g, 0), ContractError);
    g = GeneratorConfig{};
    g.mean_shift = {1.0, 2.0};
    CHECK_THROWS_AS(make_proxy_valset(spec, g, 0), ContractError);
    CHECK_THROWS_AS(generator_preset("dalle", 10), ContractError);
  }
}

TEST_CASE("presets are ordered by fidelity") {
  const auto names = generator_preset_names();
  for (std::size_t i = 1; i < names.size(); ++i) {
    const auto better = generator_preset(names[i - 1], 10), worse = generator_preset(names[i], 10);
    CHECK(better.feature_noise < worse.feature_noise);
    CHECK(better.label_flip < worse.label_flip);
  }
  const auto roentgen = generator_preset("roentgen", 10);
  CHECK(roentgen.feature_noise == 0.0);
  CHECK(roentgen.label_flip == 0.0);
  CHECK(generator_preset("sd14", 10).label_flip == 0.3);
}

TEST_CASE("JSON-lines round trip") {
  const TaskData data = make_task(default_spec(50), 1);
  const auto path = std::filesystem::temp_directory_path() / "synstop_datagen_test.jsonl";
  write_jsonl(data.train.examples, path);
  CHECK(read_jsonl(path) == data.train.examples);
  std::filesystem::remove(path);
}
