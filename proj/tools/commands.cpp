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
#include "mixdpo/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <random>

#include "mixdpo/em/init.hpp"
#include "mixdpo/em/trainer.hpp"
#include "mixdpo/error.hpp"
#include "mixdpo/eval/eval.hpp"
#include "mixdpo/io/serialize.hpp"
#include "mixdpo/mc/relax.hpp"
#include "mixdpo/reg/regularized.hpp"
#include "mixdpo/seed.hpp"
#include "mixdpo/synth/ground_truth.hpp"
#include "mixdpo/verify/battery.hpp"

namespace mixdpo::cli {
namespace {

// The config stored in checkpoints: everything except file locations, so
// that identical runs in different directories produce identical files.
io::Json embedded_config(const io::RunConfig& config) {
  io::Json j = io::run_config_to_json(config);
  j.erase("paths");
  return j;
}

em::TrainState run_algorithm(const io::RunConfig& config,
                             const core::Dataset& data, core::Model model) {
  const auto& t = config.train;
  switch (t.algorithm) {
    case io::Algorithm::kEm:
      return em::train(data, std::move(model), t.trainer);
    case io::Algorithm::kEmRegularized: {
      const reg::RegSchedule schedule =
          t.schedule ? *t.schedule
                     : reg::RegSchedule::default_schedule(t.trainer.epochs,
                                                          t.trainer.hyper.beta);
      return reg::train_regularized(data, std::move(model), t.trainer,
                                    schedule);
    }
    case io::Algorithm::kMc:
      return mc::mc_train(data, std::move(model), t.mc);
  }
  throw Error("unhandled algorithm");
}

}  // namespace

io::RunConfig resolve_config(const Overrides& o) {
  io::RunConfig c;
  if (o.config_path) c = io::load_run_config(*o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.paths.out = *o.out;
  if (o.algorithm) c.train.algorithm = io::parse_algorithm(*o.algorithm);
  if (o.mode) c.train.trainer.mode = io::parse_gating_mode(*o.mode);
  if (o.epochs) c.train.trainer.epochs = *o.epochs;
  if (o.beta) c.train.trainer.hyper.beta = *o.beta;
  if (o.tau) {
    c.train.trainer.hyper.tau = *o.tau;
    c.train.mc.tau_start = *o.tau;
    c.train.mc.tau_end = *o.tau;
    c.train.mc.anneal = mc::AnnealMode::kConstant;
  }
  if (o.count) c.generate.count = *o.count;
  if (o.dataset) c.paths.dataset = *o.dataset;
  if (o.checkpoint) c.paths.checkpoint = *o.checkpoint;
  if (o.ground_truth) c.paths.ground_truth = *o.ground_truth;
  c.propagate();
  c.validate();
  return c;
}

int cmd_generate(const io::RunConfig& config, std::ostream& out) {
  const auto& g = config.generate;
  require(g.count >= 1, "empty dataset requested");
  const synth::GroundTruth gt = synth::make_ground_truth(
      g.num_experts, g.num_prompts, g.vocab_size, g.separation,
      derive_seed(config.seed, io::kGroundTruthStream), g.options);
  std::mt19937_64 rng(derive_seed(config.seed, io::kSamplingStream));
  const core::Dataset data = synth::make_dataset(gt, g.count, rng);
  io::save_dataset(config.dataset_path(), data);
  io::save_ground_truth(config.ground_truth_path(), gt);

  const auto k = static_cast<std::size_t>(g.num_experts);
  std::vector<std::size_t> counts(k, 0);
  Vector expected(k, 0.0);
  Vector variance(k, 0.0);
  for (const auto& t : data.triplets) {
    ++counts[static_cast<std::size_t>(*t.source_label)];
    const Vector w = gt.weights_for(t);
    for (std::size_t j = 0; j < k; ++j) {
      expected[j] += w[j];
      variance[j] += w[j] * (1.0 - w[j]);
    }
  }
  out << "wrote " << data.triplets.size() << " triplets to "
      << config.dataset_path().string() << "\n";
  out << "wrote ground truth to " << config.ground_truth_path().string()
      << "\n";
  char line[160];
  for (std::size_t j = 0; j < k; ++j) {
    std::snprintf(line, sizeof(line),
                  "source %zu: %zu triplets (gating-implied %.1f +/- %.1f)\n",
                  j, counts[j], expected[j], std::sqrt(variance[j]));
    out << line;
  }
  return kExitOk;
}

int cmd_train(const io::RunConfig& config, std::ostream& out) {
  const core::Dataset data = io::load_dataset(config.dataset_path());
  em::InitOptions init = config.train.init;
  init.num_experts = config.train.num_experts > 0 ? config.train.num_experts
                                                  : data.num_sources();
  core::Model model = em::init_model(data, init);
  em::TrainState state;
  try {
    state = run_algorithm(config, data, std::move(model));
  } catch (const NumericError& e) {
    out << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  io::save_checkpoint(
      config.checkpoint_path(),
      io::checkpoint_from_state(state, embedded_config(config)));
  io::write_text_atomic(config.metrics_path(), io::metrics_csv(state.metrics));
  char line[200];
  std::snprintf(line, sizeof(line),
                "%s: %d epochs, %lld iterations, ELBO %.6f -> %.6f%s\n",
                io::algorithm_name(config.train.algorithm).c_str(), state.epoch,
                state.iteration, state.elbo_trace.front(),
                state.elbo_trace.back(), state.converged ? " (converged)" : "");
  out << line;
  out << "wrote " << config.checkpoint_path().string() << " and "
      << config.metrics_path().string() << "\n";
  return kExitOk;
}

int cmd_eval(const io::RunConfig& config, std::ostream& out) {
  const io::Checkpoint checkpoint =
      io::load_checkpoint(config.checkpoint_path());
  const core::Dataset data = io::load_dataset(config.dataset_path());
  std::optional<synth::GroundTruth> gt;
  if (std::filesystem::exists(config.ground_truth_path())) {
    gt = io::load_ground_truth(config.ground_truth_path());
  }
  const eval::Report report =
      eval::evaluate(checkpoint.model, data, gt ? &*gt : nullptr);
  const std::string text = eval::report_to_json(report).dump(2) + "\n";
  io::write_text_atomic(std::filesystem::path(config.paths.out) / "eval.json",
                        text);
  out << text;
  return kExitOk;
}

int cmd_verify(std::uint64_t seed, const std::string& fault,
               std::ostream& out) {
  const verify::Fault f = verify::parse_fault(fault);
  verify::print_manifest(out);
  out << "seed " << seed << ", fault " << verify::fault_name(f) << "\n";
  const auto results = verify::run_all(seed, f);
  verify::print_results(out, results);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.outcome.passed ? 0 : 1;
  out << (results.size() - failed) << "/" << results.size()
      << " properties passed\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

}  // namespace mixdpo::cli
