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
// mixdpo: generate synthetic preference data, train mixture DPO models,
// evaluate them and run the property battery.

#include <iostream>

#include "CLI11.hpp"
#include "mixdpo/cli/commands.hpp"
#include "mixdpo/error.hpp"

namespace {

void add_common(CLI::App* app, mixdpo::cli::Overrides& o) {
  app->add_option("--config", o.config_path, "Run config file (JSON)");
  app->add_option("--seed", o.seed, "Run seed");
  app->add_option("--out", o.out, "Output directory");
}

void add_paths(CLI::App* app, mixdpo::cli::Overrides& o) {
  app->add_option("--dataset", o.dataset, "Dataset file");
  app->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  app->add_option("--ground-truth", o.ground_truth, "Ground-truth file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-of-experts direct preference optimization"};
  app.require_subcommand(1);
  mixdpo::cli::Overrides o;

  CLI::App* generate = app.add_subcommand(
      "generate", "Write a synthetic dataset and its ground truth");
  add_common(generate, o);
  add_paths(generate, o);
  generate->add_option("--count", o.count, "Number of triplets");

  CLI::App* train = app.add_subcommand(
      "train", "Train a model and write a checkpoint and metrics");
  add_common(train, o);
  add_paths(train, o);
  train->add_option("--algorithm", o.algorithm, "em, em-regularized or mc")
      ->check(CLI::IsMember({"em", "em-regularized", "mc"}));
  train->add_option("--mode", o.mode, "mix or moe")
      ->check(CLI::IsMember({"mix", "moe"}));
  train->add_option("--epochs", o.epochs, "Number of epochs")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--beta", o.beta, "KL strength")
      ->check(CLI::PositiveNumber);
  train->add_option("--tau", o.tau, "Constant Gumbel-Softmax temperature")
      ->check(CLI::PositiveNumber);

  CLI::App* evaluate =
      app.add_subcommand("eval", "Evaluate a checkpoint against a dataset");
  add_common(evaluate, o);
  add_paths(evaluate, o);

  CLI::App* verify = app.add_subcommand("verify", "Run the property battery");
  std::uint64_t verify_seed = 0;
  std::string fault = "none";
  verify->add_option("--seed", verify_seed, "Seed for the random instances");
  verify->add_option("--fault-inject", fault, "none or policy-exponent");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return mixdpo::cli::cmd_verify(verify_seed, fault, std::cout);
    const mixdpo::io::RunConfig config = mixdpo::cli::resolve_config(o);
    if (*generate) return mixdpo::cli::cmd_generate(config, std::cout);
    if (*train) return mixdpo::cli::cmd_train(config, std::cout);
    if (*evaluate) return mixdpo::cli::cmd_eval(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mixdpo::cli::kExitFailure;
  }
  return mixdpo::cli::kExitFailure;
}
