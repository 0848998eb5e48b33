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
#include <span>
#include <vector>

namespace synstop {

/// Shape of a small multi-label classifier. hidden_dim == 0 selects the
/// linear model; otherwise a single tanh hidden layer is used.
struct ArchDescriptor {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;
  std::size_t classes = 1;

  bool is_linear() const { return hidden_dim == 0; }
  std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

/// Flat parameter vector. Layout, row-major:
///   linear: W[C][d], b[C]
///   mlp:    W1[h][d], b1[h], W2[C][h], b2[C]
struct ModelParams {
  ArchDescriptor arch;
  std::vector<double> values;

  static ModelParams zeros(const ArchDescriptor& arch);

  // Throws ContractError on a length mismatch or a non-finite entry.
  void validate() const;
  bool all_finite() const;
};

/// One labelled example; labels are 0/1 per class.
struct Example {
  std::vector<double> features;
  std::vector<std::uint8_t> labels;

  friend bool operator==(const Example&, const Example&) = default;
};

/// Uniform in [-1/sqrt(d), 1/sqrt(d)] per entry, deterministic in seed.
ModelParams init_params(const ArchDescriptor& arch, std::uint64_t seed);

std::vector<double> forward(const ModelParams& params,
                            std::span<const double> features);

/// Mean over classes of the numerically stable BCE-with-logits term.
double bce_with_logits(std::span<const double> logits,
                       std::span<const std::uint8_t> labels);

/// Mean of bce_with_logits over the examples, summed in index order.
double local_loss(const ModelParams& params, std::span<const Example> data);

/// Analytic gradient of local_loss with respect to params.values.
std::vector<double> local_gradient(const ModelParams& params,
                                   std::span<const Example> data);

/// Label c is predicted iff logit_c >= 0 (sigmoid >= 0.5, ties go to 1).
std::vector<std::uint8_t> predict(const ModelParams& params,
                                  std::span<const double> features);

/// Builds random params and data from seed and returns the largest relative
/// error between local_gradient and central finite differences.
/// `examples` must be positive.
double grad_check(const ArchDescriptor& arch, std::uint64_t seed,
                  std::size_t examples = 5);

/// Relative error used by grad_check: |a - b| / max(|a|, |b|, floor).
double relative_error(double analytic, double numeric);

}  // namespace synstop
