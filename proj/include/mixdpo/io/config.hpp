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
// Run configuration shared by the command-line tools.

#ifndef MIXDPO_IO_CONFIG_HPP_
#define MIXDPO_IO_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mixdpo/em/init.hpp"
#include "mixdpo/em/trainer.hpp"
#include "mixdpo/io/serialize.hpp"
#include "mixdpo/mc/relax.hpp"
#include "mixdpo/reg/regularized.hpp"
#include "mixdpo/synth/ground_truth.hpp"

namespace mixdpo::io {

enum class Algorithm { kEm, kEmRegularized, kMc };

struct GenerateConfig {
  int num_experts = 3;
  int num_prompts = 30;
  int vocab_size = 8;
  double separation = 3.0;
  int count = 5000;
  synth::GroundTruthOptions options;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::kEm;
  // 0 uses the number of source labels in the dataset.
  int num_experts = 0;
  em::InitOptions init;
  em::TrainerConfig trainer;
  // Defaults to the standard three-phase schedule when absent.
  std::optional<reg::RegSchedule> schedule;
  mc::McConfig mc;
};

struct PathConfig {
  std::string out = "out";
  std::string dataset;
  std::string ground_truth;
  std::string checkpoint;
};

// Stream indices for derive_seed.
inline constexpr std::uint64_t kGroundTruthStream = 0;
inline constexpr std::uint64_t kSamplingStream = 1;
inline constexpr std::uint64_t kInitStream = 2;
inline constexpr std::uint64_t kTrainStream = 3;
inline constexpr std::uint64_t kVerifyStream = 4;

struct RunConfig {
  std::uint64_t seed = 0;
  GenerateConfig generate;
  TrainConfig train;
  PathConfig paths;

  // Path helpers resolve empty entries to files inside paths.out.
  std::filesystem::path dataset_path() const;
  std::filesystem::path ground_truth_path() const;
  std::filesystem::path checkpoint_path() const;
  std::filesystem::path metrics_path() const;

  // Copies the run seed into every component seed, and the mode, epoch count
  // and beta into the sections that repeat them.
  void propagate();
  void validate() const;
};

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);
std::string gating_mode_name(em::GatingMode m);
em::GatingMode parse_gating_mode(const std::string& name);

Json run_config_to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys and enum names throw.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mixdpo::io

#endif  // MIXDPO_IO_CONFIG_HPP_
