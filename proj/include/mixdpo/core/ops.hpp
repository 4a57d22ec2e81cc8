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
// Closed-form operations on vectors over experts or responses. All functions
// are pure.

#ifndef MIXDPO_CORE_OPS_HPP_
#define MIXDPO_CORE_OPS_HPP_

#include <span>

#include "mixdpo/core/types.hpp"
#include "mixdpo/matrix.hpp"

namespace mixdpo::core {

// log(max(p, kProbFloor)).
double safe_log(double p);

// Stable log(sum(exp(values))). Throws on empty input.
double log_sum_exp(std::span<const double> values);

double sigmoid(double t);
double log_sigmoid(double t);

Vector softmax(std::span<const double> logits);
Vector log_softmax(std::span<const double> logits);

// Sum of p_k log(p_k / q_k) with 0 log 0 = 0; +inf if p_k > 0 = q_k.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double entropy(std::span<const double> p);

// Throws unless p is a probability vector within tol.
void check_simplex(std::span<const double> p, double tol, const char* what);

// Bradley-Terry probability that y+ beats y-.
double bt_sigma(double r_plus, double r_minus);
double log_bt_sigma(double r_plus, double r_minus);

// sum_k w_k sigma_k.
double mbt_marginal(std::span<const double> weights,
                    std::span<const double> sigmas);

// q_k proportional to w_k sigma_k.
Responsibilities mbt_posterior(std::span<const double> weights,
                               std::span<const double> sigmas);

// sum_k q_k log(w_k sigma_k / q_k); -inf if q_k > 0 where w_k sigma_k = 0.
double elbo(std::span<const double> q, std::span<const double> weights,
            std::span<const double> sigmas);

// log sum_k w_k exp(r_k).
double mixture_reward(std::span<const double> weights,
                      std::span<const double> expert_rewards);

// q_r_k proportional to w_k exp(r_k).
Responsibilities q_r_posterior(std::span<const double> weights,
                               std::span<const double> expert_rewards);

// q_pi_k proportional to w_k pi_k(y|x).
Responsibilities q_pi_posterior(std::span<const double> weights,
                                std::span<const double> expert_probs);

// r_k - log(q_r_k / w_k).
double corrected_reward(double r_k, double q_r_k, double w_k);

struct RewardDecomposition {
  double expectation_term = 0.0;
  double kl_term = 0.0;
};

// Splits the mixture reward into an expectation under q_pi and
// KL(q_pi || q_r).
RewardDecomposition reward_decomposition(std::span<const double> weights,
                                         std::span<const double> expert_rewards,
                                         std::span<const double> expert_probs);

// log sum_y ref(y) exp(corrected(y) / beta).
double log_partition(std::span<const double> reference_probs,
                     std::span<const double> corrected_rewards, double beta);

// ref(y) exp(corrected(y) / beta) / Z.
Vector optimal_expert_policy(std::span<const double> reference_probs,
                             std::span<const double> corrected_rewards,
                             double beta);

// beta log(pi Z / ref) + log(q_r / w_k) over y, with log Z supplied.
Vector reward_from_policy(std::span<const double> policy_probs,
                          std::span<const double> reference_probs,
                          std::span<const double> q_r_row, double w_k,
                          double beta, double log_partition_value);

// sum_y pi(y) corrected(y) - beta KL(pi || ref).
double per_expert_objective(std::span<const double> policy_probs,
                            std::span<const double> reference_probs,
                            std::span<const double> corrected_rewards,
                            double beta);

// KL(q || w).
double gating_kl_objective(std::span<const double> q,
                           std::span<const double> weights);

// Standard single-policy DPO loss from log-probabilities.
double dpo_loss(double beta, double log_pi_plus, double log_ref_plus,
                double log_pi_minus, double log_ref_minus);

}  // namespace mixdpo::core

#endif  // MIXDPO_CORE_OPS_HPP_
