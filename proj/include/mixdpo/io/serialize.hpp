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
// JSON and CSV persistence for datasets, ground truth, models, checkpoints
// and metrics.

#ifndef MIXDPO_IO_SERIALIZE_HPP_
#define MIXDPO_IO_SERIALIZE_HPP_

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixdpo/core/dataset.hpp"
#include "mixdpo/core/types.hpp"
#include "mixdpo/em/trainer.hpp"
#include "mixdpo/synth/ground_truth.hpp"

namespace mixdpo::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Throws if obj has a key outside allowed.
void expect_keys(const Json& obj, std::initializer_list<const char*> allowed,
                 const std::string& context);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json optimizer_config_to_json(const em::OptimizerConfig& config);
em::OptimizerConfig optimizer_config_from_json(const Json& j);
std::string optimizer_kind_name(em::OptimizerKind kind);
em::OptimizerKind parse_optimizer_kind(const std::string& name);

Json ground_truth_options_to_json(const synth::GroundTruthOptions& options);
synth::GroundTruthOptions ground_truth_options_from_json(const Json& j);

Json model_to_json(const core::Model& model);
core::Model model_from_json(const Json& j);

Json ground_truth_to_json(const synth::GroundTruth& gt);
synth::GroundTruth ground_truth_from_json(const Json& j);

// Header line followed by one triplet per line.
std::string dataset_to_jsonl(const core::Dataset& dataset);
core::Dataset dataset_from_jsonl(const std::string& text);

// Writes to a sibling temporary file and renames it over path.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text);
std::string read_text(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& path,
                  const core::Dataset& dataset);
core::Dataset load_dataset(const std::filesystem::path& path);
void save_ground_truth(const std::filesystem::path& path,
                       const synth::GroundTruth& gt);
synth::GroundTruth load_ground_truth(const std::filesystem::path& path);

struct Checkpoint {
  core::Model model;
  long long iteration = 0;
  int epoch = 0;
  bool converged = false;
  std::string rng_state;
  std::vector<double> elbo_trace;
  std::vector<em::Optimizer> optimizers;
  Json config;
};

Checkpoint checkpoint_from_state(const em::TrainState& state,
                                 const Json& config);
Json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Columns: epoch, elbo, mbt_loss, gating_ce, beta, tau, the five lambdas,
// then q_s{s}_k{k} for every source and expert.
std::string metrics_csv(const std::vector<em::EpochMetrics>& metrics);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace mixdpo::io

#endif  // MIXDPO_IO_SERIALIZE_HPP_
