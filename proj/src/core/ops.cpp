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
#include "mixdpo/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mixdpo/error.hpp"

namespace mixdpo::core {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("length mismatch: " + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()));
  }
}

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error("beta must be positive and finite");
  }
}

double log_or_neg_inf(double p) { return p > 0.0 ? std::log(p) : -kInf; }

// Normalizes log-masses into a probability vector.
Vector normalize_log(const Vector& log_mass) {
  const double total = log_sum_exp(log_mass);
  if (!std::isfinite(total)) throw Error("degenerate posterior");
  Vector out(log_mass.size());
  for (std::size_t k = 0; k < log_mass.size(); ++k) {
    out[k] = std::exp(log_mass[k] - total);
  }
  return out;
}

}  // namespace

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error("empty reduction");
  const double m = *std::max_element(values.begin(), values.end());
  if (std::isinf(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log_sigmoid(double t) {
  if (t >= 0.0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}

Vector softmax(std::span<const double> logits) {
  return normalize_log(Vector(logits.begin(), logits.end()));
}

Vector log_softmax(std::span<const double> logits) {
  const double total = log_sum_exp(logits);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - total;
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    if (q[k] <= 0.0) return kInf;
    kl += p[k] * (std::log(p[k]) - std::log(q[k]));
  }
  return kl;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

void check_simplex(std::span<const double> p, double tol, const char* what) {
  if (p.empty()) throw Error(std::string(what) + ": empty simplex");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(std::string(what) + ": entries must be finite and >= 0");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw Error(std::string(what) + ": entries sum to " + std::to_string(sum));
  }
}

double bt_sigma(double r_plus, double r_minus) {
  if (!std::isfinite(r_plus) || !std::isfinite(r_minus)) {
    throw NumericError("non-finite reward in bt_sigma");
  }
  return sigmoid(r_plus - r_minus);
}

double log_bt_sigma(double r_plus, double r_minus) {
  if (!std::isfinite(r_plus) || !std::isfinite(r_minus)) {
    throw NumericError("non-finite reward in log_bt_sigma");
  }
  return log_sigmoid(r_plus - r_minus);
}

double mbt_marginal(std::span<const double> weights,
                    std::span<const double> sigmas) {
  require_same_size(weights, sigmas);
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    total += weights[k] * sigmas[k];
  }
  return total;
}

Responsibilities mbt_posterior(std::span<const double> weights,
                               std::span<const double> sigmas) {
  require_same_size(weights, sigmas);
  Vector log_mass(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    log_mass[k] = log_or_neg_inf(weights[k]) + log_or_neg_inf(sigmas[k]);
  }
  return normalize_log(log_mass);
}

double elbo(std::span<const double> q, std::span<const double> weights,
            std::span<const double> sigmas) {
  require_same_size(q, weights);
  require_same_size(q, sigmas);
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] <= 0.0) continue;
    const double mass = weights[k] * sigmas[k];
    if (mass <= 0.0) return -kInf;
    total +=
        q[k] * (std::log(weights[k]) + std::log(sigmas[k]) - std::log(q[k]));
  }
  return total;
}

double mixture_reward(std::span<const double> weights,
                      std::span<const double> expert_rewards) {
  require_same_size(weights, expert_rewards);
  Vector terms;
  terms.reserve(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] > 0.0) {
      terms.push_back(std::log(weights[k]) + expert_rewards[k]);
    }
  }
  if (terms.empty()) throw Error("all mixture weights are zero");
  return log_sum_exp(terms);
}

Responsibilities q_r_posterior(std::span<const double> weights,
                               std::span<const double> expert_rewards) {
  require_same_size(weights, expert_rewards);
  Vector log_mass(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    log_mass[k] = log_or_neg_inf(weights[k]) + expert_rewards[k];
  }
  return normalize_log(log_mass);
}

Responsibilities q_pi_posterior(std::span<const double> weights,
                                std::span<const double> expert_probs) {
  require_same_size(weights, expert_probs);
  Vector log_mass(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    log_mass[k] = log_or_neg_inf(weights[k]) + log_or_neg_inf(expert_probs[k]);
  }
  return normalize_log(log_mass);
}

double corrected_reward(double r_k, double q_r_k, double w_k) {
  if (!(q_r_k > 0.0) || !(w_k > 0.0)) {
    throw Error("zero responsibility in correction");
  }
  return r_k - (std::log(q_r_k) - std::log(w_k));
}

RewardDecomposition reward_decomposition(std::span<const double> weights,
                                         std::span<const double> expert_rewards,
                                         std::span<const double> expert_probs) {
  const Vector q_pi = q_pi_posterior(weights, expert_probs);
  const Vector q_r = q_r_posterior(weights, expert_rewards);
  RewardDecomposition out;
  for (std::size_t k = 0; k < q_pi.size(); ++k) {
    if (q_pi[k] <= 0.0) continue;
    out.expectation_term +=
        q_pi[k] *
        (expert_rewards[k] + std::log(weights[k]) - std::log(q_pi[k]));
  }
  out.kl_term = kl_divergence(q_pi, q_r);
  return out;
}

double log_partition(std::span<const double> reference_probs,
                     std::span<const double> corrected_rewards, double beta) {
  require_beta(beta);
  require_same_size(reference_probs, corrected_rewards);
  Vector terms(reference_probs.size());
  for (std::size_t y = 0; y < terms.size(); ++y) {
    terms[y] = safe_log(reference_probs[y]) + corrected_rewards[y] / beta;
  }
  return log_sum_exp(terms);
}

Vector optimal_expert_policy(std::span<const double> reference_probs,
                             std::span<const double> corrected_rewards,
                             double beta) {
  require_beta(beta);
  require_same_size(reference_probs, corrected_rewards);
  Vector logits(reference_probs.size());
  for (std::size_t y = 0; y < logits.size(); ++y) {
    logits[y] = safe_log(reference_probs[y]) + corrected_rewards[y] / beta;
  }
  return softmax(logits);
}

Vector reward_from_policy(std::span<const double> policy_probs,
                          std::span<const double> reference_probs,
                          std::span<const double> q_r_row, double w_k,
                          double beta, double log_partition_value) {
  require_beta(beta);
  require_same_size(policy_probs, reference_probs);
  require_same_size(policy_probs, q_r_row);
  if (!(w_k > 0.0)) throw Error("zero responsibility in correction");
  Vector out(policy_probs.size());
  for (std::size_t y = 0; y < out.size(); ++y) {
    if (!(policy_probs[y] > 0.0) || !(reference_probs[y] > 0.0)) {
      throw Error("zero probability in reward_from_policy");
    }
    if (!(q_r_row[y] > 0.0)) throw Error("zero responsibility in correction");
    out[y] = beta * (std::log(policy_probs[y]) + log_partition_value -
                     std::log(reference_probs[y])) +
             std::log(q_r_row[y]) - std::log(w_k);
  }
  return out;
}

double per_expert_objective(std::span<const double> policy_probs,
                            std::span<const double> reference_probs,
                            std::span<const double> corrected_rewards,
                            double beta) {
  require_same_size(policy_probs, reference_probs);
  require_same_size(policy_probs, corrected_rewards);
  double value = 0.0;
  for (std::size_t y = 0; y < policy_probs.size(); ++y) {
    const double p = policy_probs[y];
    if (p <= 0.0) continue;
    value += p * corrected_rewards[y] -
             beta * p * (std::log(p) - safe_log(reference_probs[y]));
  }
  return value;
}

double gating_kl_objective(std::span<const double> q,
                           std::span<const double> weights) {
  return kl_divergence(q, weights);
}

double dpo_loss(double beta, double log_pi_plus, double log_ref_plus,
                double log_pi_minus, double log_ref_minus) {
  const double margin =
      beta * ((log_pi_plus - log_ref_plus) - (log_pi_minus - log_ref_minus));
  return -log_sigmoid(margin);
}

}  // namespace mixdpo::core
