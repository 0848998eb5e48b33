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

#include "synstop/math_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "synstop/error.hpp"
#include "synstop/rng.hpp"

namespace synstop {
namespace {

constexpr double kFiniteDiffStep = 1e-5;
constexpr double kRelErrorFloor = 1e-6;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_example(const ArchDescriptor& arch, const Example& ex) {
  if (ex.features.size() != arch.input_dim)
    throw ContractError("example has " + std::to_string(ex.features.size()) +
                        " features, model expects " +
                        std::to_string(arch.input_dim));
  if (ex.labels.size() != arch.classes)
    throw ContractError("example has " + std::to_string(ex.labels.size()) +
                        " labels, model expects " +
                        std::to_string(arch.classes));
  for (auto y : ex.labels)
    if (y > 1) throw ContractError("example label entries must be 0 or 1");
}

// Hidden activations (empty for linear) and logits for one input.
struct Activations {
  std::vector<double> hidden;
  std::vector<double> logits;
};

Activations run_forward(const ModelParams& p, std::span<const double> x) {
  const auto& a = p.arch;
  const double* v = p.values.data();
  Activations act;
  act.logits.assign(a.classes, 0.0);
  if (a.is_linear()) {
    const double* w = v;
    const double* b = v + a.classes * a.input_dim;
    for (std::size_t c = 0; c < a.classes; ++c) {
      double z = b[c];
      for (std::size_t j = 0; j < a.input_dim; ++j) z += w[c * a.input_dim + j] * x[j];
      act.logits[c] = z;
    }
    return act;
  }
  const std::size_t d = a.input_dim, h = a.hidden_dim, C = a.classes;
  const double* w1 = v;
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + C * h;
  act.hidden.assign(h, 0.0);
  for (std::size_t k = 0; k < h; ++k) {
    double s = b1[k];
    for (std::size_t j = 0; j < d; ++j) s += w1[k * d + j] * x[j];
    act.hidden[k] = std::tanh(s);
  }
  for (std::size_t c = 0; c < C; ++c) {
    double z = b2[c];
    for (std::size_t k = 0; k < h; ++k) z += w2[c * h + k] * act.hidden[k];
    act.logits[c] = z;
  }
  return act;
}

}  // namespace

std::size_t ArchDescriptor::param_count() const {
  if (is_linear()) return input_dim * classes + classes;
  return input_dim * hidden_dim + hidden_dim + hidden_dim * classes + classes;
}

void ArchDescriptor::validate() const {
  if (input_dim < 1) throw ContractError("input_dim must be >= 1");
  if (classes < 1) throw ContractError("classes must be >= 1");
}

ModelParams ModelParams::zeros(const ArchDescriptor& arch) {
  arch.validate();
  return ModelParams{arch, std::vector<double>(arch.param_count(), 0.0)};
}

bool ModelParams::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double x) { return std::isfinite(x); });
}

void ModelParams::validate() const {
  arch.validate();
  if (values.size() != arch.param_count())
    throw ContractError("parameter vector has " + std::to_string(values.size()) +
                        " entries, architecture needs " +
                        std::to_string(arch.param_count()));
  if (!all_finite()) throw ContractError("parameter vector has non-finite entries");
}

ModelParams init_params(const ArchDescriptor& arch, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(arch);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(arch.input_dim));
  for (double& x : p.values) x = bound * (2.0 * rng.uniform() - 1.0);
  return p;
}

std::vector<double> forward(const ModelParams& params,
                            std::span<const double> features) {
  params.validate();
  if (features.size() != params.arch.input_dim)
    throw ContractError("forward: got " + std::to_string(features.size()) +
                        " features, expected " +
                        std::to_string(params.arch.input_dim));
  return run_forward(params, features).logits;
}

double bce_with_logits(std::span<const double> logits,
                       std::span<const std::uint8_t> labels) {
  if (logits.size() != labels.size())
    throw ContractError("bce_with_logits: logits and labels differ in length");
  if (logits.empty()) throw ContractError("bce_with_logits: empty input");
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double z = logits[c];
    const double y = labels[c];
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return sum / static_cast<double>(logits.size());
}

double local_loss(const ModelParams& params, std::span<const Example> data) {
  params.validate();
  if (data.empty()) throw ContractError("local_loss: empty data");
  double sum = 0.0;
  for (const Example& ex : data) {
    check_example(params.arch, ex);
    sum += bce_with_logits(run_forward(params, ex.features).logits, ex.labels);
  }
  return sum / static_cast<double>(data.size());
}

std::vector<double> local_gradient(const ModelParams& params,
                                   std::span<const Example> data) {
  params.validate();
  if (data.empty()) throw ContractError("local_gradient: empty data");
  const auto& a = params.arch;
  const std::size_t d = a.input_dim, h = a.hidden_dim, C = a.classes;
  std::vector<double> grad(params.values.size(), 0.0);
  const double scale = 1.0 / (static_cast<double>(C) * static_cast<double>(data.size()));
  std::vector<double> dz(C);

  for (const Example& ex : data) {
    check_example(a, ex);
    const Activations act = run_forward(params, ex.features);
    for (std::size_t c = 0; c < C; ++c)
      dz[c] = (sigmoid(act.logits[c]) - ex.labels[c]) * scale;

    if (a.is_linear()) {
      double* gw = grad.data();
      double* gb = gw + C * d;
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += dz[c] * ex.features[j];
        gb[c] += dz[c];
      }
      continue;
    }

    const double* w2 = params.values.data() + h * d + h;
    double* gw1 = grad.data();
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + C * h;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 0; k < h; ++k) gw2[c * h + k] += dz[c] * act.hidden[k];
      gb2[c] += dz[c];
    }
    for (std::size_t k = 0; k < h; ++k) {
      double back = 0.0;
      for (std::size_t c = 0; c < C; ++c) back += w2[c * h + k] * dz[c];
      back *= 1.0 - act.hidden[k] * act.hidden[k];
      for (std::size_t j = 0; j < d; ++j) gw1[k * d + j] += back * ex.features[j];
      gb1[k] += back;
    }
  }
  return grad;
}

std::vector<std::uint8_t> predict(const ModelParams& params,
                                  std::span<const double> features) {
  const std::vector<double> z = forward(params, features);
  std::vector<std::uint8_t> out(z.size());
  for (std::size_t c = 0; c < z.size(); ++c) out[c] = z[c] >= 0.0 ? 1 : 0;
  return out;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

double grad_check(const ArchDescriptor& arch, std::uint64_t seed,
                  std::size_t examples) {
  if (examples == 0) throw ContractError("grad_check: needs at least one example");
  arch.validate();
  Rng rng(derive_seed(seed, {0x67726164ULL}));
  ModelParams params = ModelParams::zeros(arch);
  for (double& x : params.values) x = 2.0 * rng.uniform() - 1.0;

  std::vector<Example> data(examples);
  for (Example& ex : data) {
    ex.features.resize(arch.input_dim);
    for (double& f : ex.features) f = rng.normal();
    ex.labels.resize(arch.classes);
    for (auto& y : ex.labels) y = rng.bernoulli(0.5) ? 1 : 0;
  }

  const std::vector<double> analytic = local_gradient(params, data);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    const double orig = params.values[i];
    params.values[i] = orig + kFiniteDiffStep;
    const double up = local_loss(params, data);
    params.values[i] = orig - kFiniteDiffStep;
    const double down = local_loss(params, data);
    params.values[i] = orig;
    const double numeric = (up - down) / (2.0 * kFiniteDiffStep);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace synstop
