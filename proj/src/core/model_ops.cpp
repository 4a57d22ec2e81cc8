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
#include "mixdpo/core/model_ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mixdpo/core/ops.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::core {

Vector expert_sigmas(const Model& model, const PreferenceTriplet& t) {
  Vector out(model.num_experts());
  for (int k = 0; k < model.num_experts(); ++k) {
    out[k] = bt_sigma(model.rewards[k](t.prompt_id, t.y_plus),
                      model.rewards[k](t.prompt_id, t.y_minus));
  }
  return out;
}

Vector expert_log_sigmas(const Model& model, const PreferenceTriplet& t) {
  Vector out(model.num_experts());
  for (int k = 0; k < model.num_experts(); ++k) {
    out[k] = log_bt_sigma(model.rewards[k](t.prompt_id, t.y_plus),
                          model.rewards[k](t.prompt_id, t.y_minus));
  }
  return out;
}

Vector log_q_r(std::span<const double> weights,
               std::span<const double> expert_rewards) {
  require(weights.size() == expert_rewards.size(), "length mismatch");
  Vector log_mass(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    log_mass[k] =
        (weights[k] > 0.0 ? std::log(weights[k])
                          : -std::numeric_limits<double>::infinity()) +
        expert_rewards[k];
  }
  const double total = log_sum_exp(log_mass);
  if (!std::isfinite(total)) throw Error("degenerate posterior");
  for (double& v : log_mass) v -= total;
  return log_mass;
}

PairLogWeights pair_log_weights(const Model& model, int k,
                                const PreferenceTriplet& t,
                                std::span<const double> weights, double beta) {
  const int x = t.prompt_id;
  const ExpertPolicy& pi = model.policies[k];
  const ReferencePolicy& ref = model.reference(k);
  const Vector log_pi = pi.log_probs(x);
  const Vector lqr_plus = log_q_r(weights, model.rewards_at(x, t.y_plus));
  const Vector lqr_minus = log_q_r(weights, model.rewards_at(x, t.y_minus));
  PairLogWeights a;
  a.log_a_plus =
      beta * (log_pi[t.y_plus] - ref.log_prob(x, t.y_plus)) + lqr_plus[k];
  a.log_a_minus =
      beta * (log_pi[t.y_minus] - ref.log_prob(x, t.y_minus)) + lqr_minus[k];
  return a;
}

double component_utility(const PairLogWeights& a) {
  return log_sigmoid(a.log_a_plus - a.log_a_minus);
}

Vector component_utilities(const Model& model, const PreferenceTriplet& t,
                           double beta) {
  const Vector w = model.weights_for(t);
  Vector out(model.num_experts());
  for (int k = 0; k < model.num_experts(); ++k) {
    out[k] = component_utility(pair_log_weights(model, k, t, w, beta));
  }
  return out;
}

double per_expert_mbt_loss(const PreferenceTriplet& t, int k,
                           const Model& model, std::span<const double> q,
                           double beta) {
  if (q[k] == 0.0) return 0.0;
  const Vector w = model.weights_for(t);
  const double u = component_utility(pair_log_weights(model, k, t, w, beta));
  if (!std::isfinite(u)) {
    throw NumericError("non-finite log-ratio in per-expert loss");
  }
  return -q[k] * u;
}

Vector corrected_rewards_row(const Model& model, int k, int x) {
  const Vector w = model.weights_at(x);
  if (!(w[k] > 0.0)) throw Error("zero responsibility in correction");
  Vector out(model.space.vocab_size);
  for (int y = 0; y < model.space.vocab_size; ++y) {
    const Vector lqr = log_q_r(w, model.rewards_at(x, y));
    out[y] = model.rewards[k](x, y) - (lqr[k] - std::log(w[k]));
  }
  return out;
}

Vector optimal_policy_for_expert(const Model& model, int k, int x, double beta,
                                 PolicyExponent exponent) {
  const Vector ref = model.reference(k).probs(x);
  if (exponent == PolicyExponent::kRaw) {
    const auto row = model.rewards[k].values.row(x);
    return optimal_expert_policy(ref, Vector(row.begin(), row.end()), beta);
  }
  return optimal_expert_policy(ref, corrected_rewards_row(model, k, x), beta);
}

ObjectiveValue moedpo_objective(const Model& model, double beta) {
  require(beta > 0.0, "beta must be positive");
  const int num_x = model.space.num_prompts;
  const int num_y = model.space.vocab_size;
  const int num_k = model.num_experts();
  const double px = 1.0 / num_x;
  ObjectiveValue value;
  for (int x = 0; x < num_x; ++x) {
    const Vector w = model.weights_at(x);
    std::vector<Vector> pi(num_k);
    std::vector<Vector> log_pi(num_k);
    for (int k = 0; k < num_k; ++k) {
      pi[k] = model.policies[k].probs(x);
      log_pi[k] = model.policies[k].log_probs(x);
    }
    for (int y = 0; y < num_y; ++y) {
      const Vector r = model.rewards_at(x, y);
      const double mix_reward = mixture_reward(w, r);
      const Vector lqr = log_q_r(w, r);
      double mix_prob = 0.0;
      for (int k = 0; k < num_k; ++k) mix_prob += w[k] * pi[k][y];
      value.direct += px * mix_prob * mix_reward;
      for (int k = 0; k < num_k; ++k) {
        if (w[k] <= 0.0 || pi[k][y] <= 0.0) continue;
        const double log_ratio =
            log_pi[k][y] - model.reference(k).log_prob(x, y);
        const double corrected = r[k] - (lqr[k] - std::log(w[k]));
        value.direct -= px * beta * w[k] * pi[k][y] * log_ratio;
        value.decomposed +=
            px * w[k] * pi[k][y] * (corrected - beta * log_ratio);
      }
    }
  }
  const double scale = std::max(1.0, std::abs(value.direct));
  if (std::abs(value.direct - value.decomposed) > 1e-9 * scale) {
    throw Error("objective forms disagree: " + std::to_string(value.direct) +
                " vs " + std::to_string(value.decomposed));
  }
  return value;
}

}  // namespace mixdpo::core
