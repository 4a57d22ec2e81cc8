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
#ifndef MIXDPO_EM_INIT_HPP_
#define MIXDPO_EM_INIT_HPP_

#include <cstdint>

#include "mixdpo/core/dataset.hpp"
#include "mixdpo/core/types.hpp"
#include "mixdpo/em/trainer.hpp"

namespace mixdpo::em {

struct InitOptions {
  int num_experts = 2;
  GatingMode mode = GatingMode::kMix;
  double beta = 0.1;
  // Std. dev. of Gaussian noise added to log-reference logits per expert.
  double policy_noise = 0.1;
  // Std. dev. of the initial linear gating weights.
  double gating_noise = 0.1;
  // Start every expert from the same perturbed policy.
  bool tied = false;
  bool per_expert_reference = false;
  std::uint64_t seed = 0;

  bool operator==(const InitOptions& other) const = default;
};

// Policies near the reference, rewards set to beta log(pi_k / ref), uniform
// fixed gating (mix) or small random linear gating (moe).
core::Model init_model(const core::Dataset& dataset,
                       const InitOptions& options);

}  // namespace mixdpo::em

#endif  // MIXDPO_EM_INIT_HPP_
