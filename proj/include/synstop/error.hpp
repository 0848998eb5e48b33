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

#include <stdexcept>
#include <string>

namespace synstop {

// Precondition or shape violation on a library call.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Generation could not satisfy a request (e.g. unreachable class).
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A client update produced non-finite parameters.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int round, int client, const std::string& what)
      : std::runtime_error("divergence at round " + std::to_string(round) +
                           ", client " + std::to_string(client) + ": " + what),
        round_(round),
        client_(client) {}

  int round() const noexcept { return round_; }
  int client() const noexcept { return client_; }

 private:
  int round_;
  int client_;
};

}  // namespace synstop
