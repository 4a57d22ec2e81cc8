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
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "mixdpo/cli/commands.hpp"
#include "mixdpo/em/init.hpp"
#include "mixdpo/error.hpp"
#include "mixdpo/eval/eval.hpp"
#include "mixdpo/io/config.hpp"
#include "mixdpo/io/serialize.hpp"
#include "mixdpo/seed.hpp"
#include "mixdpo/synth/ground_truth.hpp"

namespace mixdpo {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mixdpo_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

core::Dataset small_dataset(std::uint64_t seed, bool user_tasks = false) {
  synth::GroundTruthOptions options;
  options.user_tasks = user_tasks;
  const synth::GroundTruth gt =
      synth::make_ground_truth(2, 4, 5, 2.0, seed, options);
  std::mt19937_64 rng(seed);
  return synth::make_dataset(gt, 50, rng);
}

TEST_CASE("max_weight_assignment") {
  Matrix w(3, 3);
  const double values[3][3] = {
      {0.1, 0.9, 0.0}, {0.8, 0.7, 0.1}, {0.2, 0.1, 0.6}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) w(i, j) = values[i][j];
  CHECK(eval::max_weight_assignment(w) == std::vector<int>{1, 0, 2});

  Matrix wide(2, 3);
  wide(0, 2) = 1.0;
  wide(1, 0) = 1.0;
  CHECK(eval::max_weight_assignment(wide) == std::vector<int>{2, 0});

  Matrix tall(3, 2);
  tall(0, 0) = 0.2;
  tall(1, 0) = 0.9;
  tall(2, 1) = 0.5;
  const std::vector<int> m = eval::max_weight_assignment(tall);
  CHECK(m[1] == 0);
  CHECK(m[2] == 1);
  CHECK(m[0] == -1);
}

TEST_CASE("dataset jsonl round trip") {
  for (bool user : {false, true}) {
    const core::Dataset d = small_dataset(11, user);
    CHECK(io::dataset_from_jsonl(io::dataset_to_jsonl(d)) == d);
  }
  CHECK_THROWS_AS(io::dataset_from_jsonl(""), Error);
}

TEST_CASE("ground truth and model round trip") {
  synth::GroundTruthOptions options;
  options.user_tasks = true;
  options.user_nuisance_dims = 2;
  const synth::GroundTruth gt =
      synth::make_ground_truth(3, 6, 4, 1.5, 5, options);
  CHECK(io::ground_truth_from_json(io::ground_truth_to_json(gt)) == gt);
  const core::Model model = synth::ground_truth_model(gt, 0.3);
  CHECK(io::model_from_json(io::model_to_json(model)) == model);
}

TEST_CASE("unknown keys are rejected") {
  io::Json j = io::run_config_to_json(io::RunConfig{});
  CHECK_NOTHROW(io::run_config_from_json(j));
  j["train"]["trainer"]["learning_rat"] = 1.0;
  CHECK_THROWS_AS(io::run_config_from_json(j), Error);
  io::Json top = io::run_config_to_json(io::RunConfig{});
  top["extra"] = 0;
  CHECK_THROWS_AS(io::run_config_from_json(top), Error);
}

TEST_CASE("config enum parsing") {
  CHECK(io::parse_algorithm("em-regularized") == io::Algorithm::kEmRegularized);
  CHECK(io::algorithm_name(io::Algorithm::kMc) == "mc");
  CHECK(io::parse_gating_mode("moe") == em::GatingMode::kMoe);
  CHECK_THROWS_AS(io::parse_algorithm("gibbs"), Error);
}

TEST_CASE("empty dataset request fails validation") {
  io::RunConfig c;
  c.generate.count = 0;
  CHECK_THROWS_WITH_AS(c.validate(), "empty dataset requested", Error);
}

TEST_CASE("checkpoint round trip") {
  const core::Dataset d = small_dataset(3);
  io::RunConfig config;
  config.train.trainer.epochs = 2;
  config.propagate();
  em::InitOptions init = config.train.init;
  init.num_experts = 2;
  const em::TrainState state =
      em::train(d, em::init_model(d, init), config.train.trainer);
  const io::Checkpoint cp =
      io::checkpoint_from_state(state, io::run_config_to_json(config));
  const io::Checkpoint back =
      io::checkpoint_from_json(io::checkpoint_to_json(cp));
  CHECK(back.model == cp.model);
  CHECK(back.epoch == 2);
  CHECK(back.elbo_trace == cp.elbo_trace);
  CHECK(io::checkpoint_to_json(back) == io::checkpoint_to_json(cp));
}

TEST_CASE("evaluate on the ground truth model") {
  const synth::GroundTruth gt = synth::make_ground_truth(2, 4, 6, 4.0, 9);
  std::mt19937_64 rng(9);
  const core::Dataset d = synth::make_dataset(gt, 400, rng);
  const eval::Report r =
      eval::evaluate(synth::ground_truth_model(gt, 1.0), d, &gt);
  CHECK(r.labelled == 400);
  CHECK(r.matching == std::vector<int>{0, 1});
  CHECK(r.matched_mean > 0.5);
  CHECK(r.recovery_tv < 0.5);

  core::Dataset wrong = d;
  wrong.space = core::ProblemSpace::make(5, 6, 2);
  wrong.reference = core::ReferencePolicy::uniform(5, 6);
  CHECK_THROWS_AS(
      eval::evaluate(synth::ground_truth_model(gt, 1.0), wrong, nullptr),
      Error);
}

TEST_CASE("cli generate, train and eval") {
  const fs::path dir = scratch_dir("cli");
  cli::Overrides o;
  o.seed = 4;
  o.out = dir.string();
  o.count = 300;
  o.epochs = 3;
  io::RunConfig config = cli::resolve_config(o);
  config.generate.num_prompts = 6;
  std::ostringstream log;
  REQUIRE(cli::cmd_generate(config, log) == cli::kExitOk);
  CHECK(fs::exists(config.dataset_path()));
  CHECK(fs::exists(config.ground_truth_path()));
  REQUIRE(cli::cmd_train(config, log) == cli::kExitOk);
  CHECK(fs::exists(config.checkpoint_path()));
  CHECK(fs::exists(config.metrics_path()));
  CHECK(cli::cmd_eval(config, log) == cli::kExitOk);
  CHECK(fs::exists(dir / "eval.json"));

  const std::string first = io::read_text(config.checkpoint_path());
  REQUIRE(cli::cmd_train(config, log) == cli::kExitOk);
  CHECK(io::read_text(config.checkpoint_path()) == first);
  fs::remove_all(dir);
}

TEST_CASE("cli rejects bad values") {
  cli::Overrides o;
  o.count = 0;
  CHECK_THROWS_WITH_AS(cli::resolve_config(o), "empty dataset requested",
                       Error);
  cli::Overrides a;
  a.algorithm = "gibbs";
  CHECK_THROWS_AS(cli::resolve_config(a), Error);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

}  // namespace
}  // namespace mixdpo
