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
// Operations that read a full Model: per-triplet likelihood terms, the
// per-expert loss, optimal expert policies and the training objective.

#ifndef MIXDPO_CORE_MODEL_OPS_HPP_
#define MIXDPO_CORE_MODEL_OPS_HPP_

#include <span>

#include "mixdpo/core/types.hpp"

namespace mixdpo::core {

// sigma_k = bt_sigma(r_k(x,y+), r_k(x,y-)) for every expert.
Vector expert_sigmas(const Model& model, const PreferenceTriplet& t);
Vector expert_log_sigmas(const Model& model, const PreferenceTriplet& t);

// log q_r_k computed in log space; -inf where w_k = 0.
Vector log_q_r(std::span<const double> weights,
               std::span<const double> expert_rewards);

// log A+ and log A- with A = (pi_k / ref_k)^beta * q_r_k.
struct PairLogWeights {
  double log_a_plus = 0.0;
  double log_a_minus = 0.0;
};

PairLogWeights pair_log_weights(const Model& model, int k,
                                const PreferenceTriplet& t,
                                std::span<const double> weights, double beta);

// log(A+ / (A+ + A-)).
double component_utility(const PairLogWeights& a);

// Utilities of all experts for one triplet.
Vector component_utilities(const Model& model, const PreferenceTriplet& t,
                           double beta);

// -q_k log(A+ / (A+ + A-)); zero when q_k = 0.
double per_expert_mbt_loss(const PreferenceTriplet& t, int k,
                           const Model& model, std::span<const double> q,
                           double beta);

// Corrected rewards r_k(x,y) - log(q_r_k(x,y) / w_k(x)) over y.
Vector corrected_rewards_row(const Model& model, int k, int x);

enum class PolicyExponent { kCorrected, kRaw };

// Closed-form optimal policy of expert k at prompt x. kRaw uses r_k in the
// exponent instead of the corrected reward.
Vector optimal_policy_for_expert(
    const Model& model, int k, int x, double beta,
    PolicyExponent exponent = PolicyExponent::kCorrected);

struct ObjectiveValue {
  double direct = 0.0;      // mixture reward minus weighted KL penalties
  double decomposed = 0.0;  // per-expert corrected-reward form
};

// Evaluates the objective by enumeration over X and Y in both forms, with
// uniform prompt distribution. Throws if the forms disagree by more than 1e-9.
ObjectiveValue moedpo_objective(const Model& model, double beta);

}  // namespace mixdpo::core

#endif  // MIXDPO_CORE_MODEL_OPS_HPP_
