// Copyright 2026 The mixdpo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// Commands behind the mixdpo executable.

#ifndef MIXDPO_CLI_COMMANDS_HPP_
#define MIXDPO_CLI_COMMANDS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "mixdpo/io/config.hpp"

namespace mixdpo::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitNumeric = 3;

// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> algorithm;
  std::optional<std::string> mode;
  std::optional<int> epochs;
  std::optional<double> beta;
  // Constant Gumbel-Softmax temperature.
  std::optional<double> tau;
  std::optional<int> count;
  std::optional<std::string> dataset;
  std::optional<std::string> checkpoint;
  std::optional<std::string> ground_truth;
};

// Loads the config file (if any), applies the overrides, propagates seeds
// and validates.
io::RunConfig resolve_config(const Overrides& overrides);

int cmd_generate(const io::RunConfig& config, std::ostream& out);
int cmd_train(const io::RunConfig& config, std::ostream& out);
int cmd_eval(const io::RunConfig& config, std::ostream& out);
int cmd_verify(std::uint64_t seed, const std::string& fault, std::ostream& out);

}  // namespace mixdpo::cli

#endif  // MIXDPO_CLI_COMMANDS_HPP_
