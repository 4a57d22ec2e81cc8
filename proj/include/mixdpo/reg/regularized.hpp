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
// Regularized variational responsibilities and phase-scheduled training.

#ifndef MIXDPO_REG_REGULARIZED_HPP_
#define MIXDPO_REG_REGULARIZED_HPP_

#include <span>
#include <vector>

#include "mixdpo/core/dataset.hpp"
#include "mixdpo/core/types.hpp"
#include "mixdpo/em/trainer.hpp"

namespace mixdpo::reg {

struct Phase {
  int start_epoch = 0;
  core::Lambdas lambdas;
  double beta = 0.1;

  bool operator==(const Phase& other) const = default;
};

struct RegSchedule {
  std::vector<Phase> phases;
  // Permits nonzero lambda_ent and lambda_conf in the same phase.
  bool allow_both_entropy = false;

  // Exploration, specialization and stabilization phases starting at 0, E/3
  // and 2E/3.
  static RegSchedule default_schedule(int epochs, double beta);

  // Last phase whose start_epoch <= epoch.
  const Phase& active(int epoch) const;
  void validate() const;

  bool operator==(const RegSchedule& other) const = default;
};

// q_k proportional to w_k^(kl_w / alpha) exp(utility_k / alpha).
core::Responsibilities regularized_posterior(std::span<const double> utilities,
                                             std::span<const double> weights,
                                             const core::Lambdas& lambdas);

// Mean over the prompts of KL(w(x) || uniform).
double global_weight_regularizer(const core::Model& model,
                                 std::span<const int> prompts);

std::vector<core::Responsibilities> scheduled_e_step(
    std::span<const core::PreferenceTriplet> batch, const core::Model& model,
    const RegSchedule& schedule, int epoch);

// EM with scheduled E-steps, per-phase beta and the global weight penalty.
em::TrainState train_regularized(const core::Dataset& dataset,
                                 core::Model model,
                                 const em::TrainerConfig& config,
                                 const RegSchedule& schedule);

}  // namespace mixdpo::reg

#endif  // MIXDPO_REG_REGULARIZED_HPP_
