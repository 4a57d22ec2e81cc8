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
#include "mixdpo/reg/regularized.hpp"

#include <cmath>
#include <limits>

#include "mixdpo/core/model_ops.hpp"
#include "mixdpo/core/ops.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::reg {
namespace {

void require_positive_alpha(const core::Lambdas& lambdas) {
  if (!(lambdas.alpha() > 0.0)) {
    throw Error("ill-posed regularization (nonpositive effective temperature)");
  }
}

}  // namespace

RegSchedule RegSchedule::default_schedule(int epochs, double beta) {
  RegSchedule s;
  Phase early;
  early.start_epoch = 0;
  early.lambdas.ent = 0.5;
  early.lambdas.kl_unif = 1.0;
  early.lambdas.kl_w = 0.5;
  early.lambdas.kl_w_global = 0.1;
  early.beta = beta;
  Phase middle;
  middle.start_epoch = epochs / 3;
  middle.lambdas.conf = 1.0;
  middle.beta = beta;
  Phase late;
  late.start_epoch = 2 * epochs / 3;
  late.lambdas.conf = 0.25;
  late.lambdas.kl_w = 1.0;
  late.beta = 0.5 * beta;
  s.phases = {early, middle, late};
  return s;
}

const Phase& RegSchedule::active(int epoch) const {
  require(!phases.empty(), "empty schedule");
  const Phase* current = &phases.front();
  for (const Phase& p : phases) {
    if (p.start_epoch <= epoch) current = &p;
  }
  return *current;
}

void RegSchedule::validate() const {
  require(!phases.empty(), "schedule needs at least one phase");
  require(phases.front().start_epoch == 0, "first phase must start at epoch 0");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Phase& p = phases[i];
    if (i > 0) {
      require(p.start_epoch >= phases[i - 1].start_epoch,
              "phase start epochs must be non-decreasing");
    }
    p.lambdas.validate();
    require_positive_alpha(p.lambdas);
    require(p.beta > 0.0, "phase beta must be positive");
    if (!allow_both_entropy) {
      require(p.lambdas.ent == 0.0 || p.lambdas.conf == 0.0,
              "at most one of lambda_ent and lambda_conf may be nonzero");
    }
  }
}

core::Responsibilities regularized_posterior(std::span<const double> utilities,
                                             std::span<const double> weights,
                                             const core::Lambdas& lambdas) {
  require(utilities.size() == weights.size(), "length mismatch");
  require_positive_alpha(lambdas);
  const double alpha = lambdas.alpha();
  Vector log_mass(utilities.size());
  for (std::size_t k = 0; k < utilities.size(); ++k) {
    double prior = 0.0;
    if (lambdas.kl_w > 0.0) {
      prior = weights[k] > 0.0 ? (lambdas.kl_w / alpha) * std::log(weights[k])
                               : -std::numeric_limits<double>::infinity();
    }
    log_mass[k] = prior + utilities[k] / alpha;
  }
  return core::softmax(log_mass);
}

double global_weight_regularizer(const core::Model& model,
                                 std::span<const int> prompts) {
  require(!prompts.empty(), "empty prompt set");
  const int num_k = model.num_experts();
  const Vector uniform(num_k, 1.0 / num_k);
  double total = 0.0;
  for (int x : prompts) {
    total += core::kl_divergence(model.weights_at(x), uniform);
  }
  return total / static_cast<double>(prompts.size());
}

std::vector<core::Responsibilities> scheduled_e_step(
    std::span<const core::PreferenceTriplet> batch, const core::Model& model,
    const RegSchedule& schedule, int epoch) {
  const Phase& phase = schedule.active(epoch);
  std::vector<core::Responsibilities> out;
  out.reserve(batch.size());
  for (const auto& t : batch) {
    out.push_back(
        regularized_posterior(core::component_utilities(model, t, phase.beta),
                              model.weights_for(t), phase.lambdas));
  }
  return out;
}

em::TrainState train_regularized(const core::Dataset& dataset,
                                 core::Model model,
                                 const em::TrainerConfig& config,
                                 const RegSchedule& schedule) {
  schedule.validate();
  em::TrainHooks hooks;
  hooks.e_step = [&schedule](std::span<const core::PreferenceTriplet> batch,
                             const core::Model& m, int epoch) {
    return scheduled_e_step(batch, m, schedule, epoch);
  };
  hooks.beta = [&schedule](int epoch) { return schedule.active(epoch).beta; };
  hooks.lambdas = [&schedule](int epoch) {
    return schedule.active(epoch).lambdas;
  };
  em::TrainState state =
      em::make_train_state(dataset, std::move(model), config);
  state.metrics.front().lambdas = schedule.active(0).lambdas;
  state.metrics.front().beta = schedule.active(0).beta;
  em::run_training(state, dataset, config, hooks);
  return state;
}

}  // namespace mixdpo::reg
