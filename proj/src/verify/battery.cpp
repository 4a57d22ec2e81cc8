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
#include "mixdpo/verify/battery.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

#include "mixdpo/core/model_ops.hpp"
#include "mixdpo/core/ops.hpp"
#include "mixdpo/em/init.hpp"
#include "mixdpo/em/trainer.hpp"
#include "mixdpo/error.hpp"
#include "mixdpo/eval/eval.hpp"
#include "mixdpo/io/serialize.hpp"
#include "mixdpo/mc/relax.hpp"
#include "mixdpo/oracles/oracles.hpp"
#include "mixdpo/reg/regularized.hpp"
#include "mixdpo/seed.hpp"
#include "mixdpo/synth/ground_truth.hpp"

namespace mixdpo::verify {
namespace {

using core::Model;
using core::PreferenceTriplet;
using Rng = std::mt19937_64;

// Relative-error floor for finite-difference comparisons.
constexpr double kRelFloor = 1e-6;

// Tracks the largest violation seen across instances.
class Worst {
 public:
  explicit Worst(double tolerance) : tolerance_(tolerance) {}
  void observe(double deviation) {
    if (std::isnan(deviation))
      deviation = std::numeric_limits<double>::infinity();
    worst_ = std::max(worst_, deviation);
  }
  Outcome outcome(std::string note = {}) const {
    return Outcome{worst_ <= tolerance_, worst_, tolerance_, std::move(note)};
  }

 private:
  double tolerance_;
  double worst_ = 0.0;
};

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vector normal_vector(Rng& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

Vector random_simplex(Rng& rng, std::size_t n, double scale = 1.0) {
  return core::softmax(normal_vector(rng, n, scale));
}

Matrix normal_matrix(Rng& rng, std::size_t r, std::size_t c, double scale) {
  Matrix m(r, c);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& x : m.data()) x = normal(rng);
  return m;
}

Vector log_vec(const Vector& p) {
  Vector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

// max - min of a - b: distance from equality up to an additive constant.
double spread_of_difference(std::span<const double> a,
                            std::span<const double> b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lo = std::min(lo, a[i] - b[i]);
    hi = std::max(hi, a[i] - b[i]);
  }
  return hi - lo;
}

double max_relative_error(std::span<const double> a,
                          std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, oracles::relative_error(a[i], b[i], kRelFloor));
  }
  return worst;
}

double simplex_violation(std::span<const double> p) {
  double total = 0.0;
  double negative = 0.0;
  for (double v : p) {
    total += v;
    negative = std::max(negative, -v);
  }
  return std::max(negative, std::abs(total - 1.0));
}

struct ModelShape {
  int k = 2;
  int x = 3;
  int y = 4;
  bool moe = false;
  int user_dim = 0;
};

Model random_model(Rng& rng, const ModelShape& s, double reward_scale = 1.0) {
  Model m;
  m.space = core::ProblemSpace::make(s.x, s.y, s.k);
  m.user_feature_dim = s.user_dim;
  for (int k = 0; k < s.k; ++k) {
    m.policies.emplace_back(normal_matrix(rng, s.x, s.y, 1.0));
    m.rewards.push_back(
        core::RewardTable{normal_matrix(rng, s.x, s.y, reward_scale)});
  }
  m.references.push_back(
      core::ReferencePolicy::from_logits(normal_matrix(rng, s.x, s.y, 0.5)));
  if (s.moe) {
    m.gating =
        core::Gating::linear(normal_matrix(rng, s.k, s.x + s.user_dim, 1.0),
                             normal_vector(rng, s.k, 0.5));
  } else {
    m.gating = core::Gating::fixed(random_simplex(rng, s.k));
  }
  m.validate();
  return m;
}

std::vector<PreferenceTriplet> random_triplets(Rng& rng, const Model& m,
                                               int n) {
  std::vector<PreferenceTriplet> out;
  for (int i = 0; i < n; ++i) {
    PreferenceTriplet t;
    t.prompt_id = uniform_int(rng, 0, m.space.num_prompts - 1);
    t.y_plus = uniform_int(rng, 0, m.space.vocab_size - 1);
    do {
      t.y_minus = uniform_int(rng, 0, m.space.vocab_size - 1);
    } while (t.y_minus == t.y_plus);
    if (m.user_feature_dim > 0) {
      t.user_features =
          normal_vector(rng, static_cast<std::size_t>(m.user_feature_dim), 1.0);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<core::Responsibilities> random_q(Rng& rng, std::size_t n, int k) {
  std::vector<core::Responsibilities> q;
  for (std::size_t i = 0; i < n; ++i) q.push_back(random_simplex(rng, k, 1.5));
  return q;
}

// Small labelled synthetic dataset for trainer-level checks.
struct Synthetic {
  synth::GroundTruth gt;
  core::Dataset data;
};

Synthetic small_synthetic(Rng& rng, int k, int x, int y, int count,
                          double separation = 2.0) {
  Synthetic s;
  s.gt = synth::make_ground_truth(k, x, y, separation, rng());
  Rng sampler(rng());
  s.data = synth::make_dataset(s.gt, count, sampler);
  return s;
}

// Core: ELBO bound and tightness.

Outcome elbo_bound(Context& c) {
  Worst worst(1e-10);
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 5));
    const Vector w = random_simplex(c.rng, k, 1.5);
    const Vector rp = normal_vector(c.rng, k, 2.0);
    const Vector rm = normal_vector(c.rng, k, 2.0);
    Vector sig(k);
    for (std::size_t j = 0; j < k; ++j) sig[j] = core::bt_sigma(rp[j], rm[j]);
    const Vector q = random_simplex(c.rng, k, 2.0);
    worst.observe(core::elbo(q, w, sig) - oracles::log_marginal(w, rp, rm));
  }
  return worst.outcome("max of elbo(q) - log marginal");
}

Outcome elbo_tightness(Context& c) {
  Worst worst(1e-10);
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 5));
    const Vector w = random_simplex(c.rng, k, 1.5);
    const Vector rp = normal_vector(c.rng, k, 2.0);
    const Vector rm = normal_vector(c.rng, k, 2.0);
    Vector sig(k);
    for (std::size_t j = 0; j < k; ++j) sig[j] = core::bt_sigma(rp[j], rm[j]);
    const Vector q = core::mbt_posterior(w, sig);
    const double lm = oracles::log_marginal(w, rp, rm);
    worst.observe(std::abs(core::elbo(q, w, sig) - lm));
    worst.observe(std::abs(std::log(core::mbt_marginal(w, sig)) - lm));
    worst.observe(max_abs_diff(q, oracles::posterior(w, rp, rm)));
  }
  return worst.outcome("gap at the exact posterior");
}

Outcome variational_identity(Context& c) {
  Worst worst(1e-10);
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 6));
    Vector a = normal_vector(c.rng, k, 2.0);
    for (double& v : a) v = std::exp(v);
    const Vector q = random_simplex(c.rng, k, 2.0);
    const double total = std::accumulate(a.begin(), a.end(), 0.0);
    Vector normalized(k);
    double bound = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      normalized[j] = a[j] / total;
      bound += q[j] * std::log(a[j] / q[j]);
    }
    const double rhs = bound + core::kl_divergence(q, normalized);
    worst.observe(std::abs(core::log_sum_exp(log_vec(a)) - rhs));
  }
  return worst.outcome("log-sum identity residual");
}

Outcome decomposition(Context& c) {
  Worst worst(1e-10);
  double min_kl = 0.0;
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 5));
    const Vector w = random_simplex(c.rng, k, 1.5);
    const Vector r = normal_vector(c.rng, k, 2.0);
    Vector pi(k);
    for (double& p : pi) p = uniform(c.rng, 0.01, 1.0);
    const core::RewardDecomposition d = core::reward_decomposition(w, r, pi);
    worst.observe(std::abs(d.expectation_term + d.kl_term -
                           oracles::mixture_reward(w, r)));
    worst.observe(
        std::abs(core::mixture_reward(w, r) - oracles::mixture_reward(w, r)));
    min_kl = std::min(min_kl, d.kl_term);
  }
  Outcome out = worst.outcome("decomposition residual");
  if (min_kl < -1e-12) {
    out.passed = false;
    out.note += "; negative KL term";
  }
  return out;
}

core::PolicyExponent exponent_for(Fault fault) {
  return fault == Fault::kPolicyExponent ? core::PolicyExponent::kRaw
                                         : core::PolicyExponent::kCorrected;
}

Model policy_instance(Rng& rng) {
  ModelShape shape;
  shape.k = uniform_int(rng, 1, 4);
  shape.x = uniform_int(rng, 1, 2);
  shape.y = uniform_int(rng, 2, 8);
  return random_model(rng, shape, 1.5);
}

// Mixture reward row at prompt x: equals the corrected reward of every expert.
Vector mixture_reward_row(const Model& m, int x) {
  const Vector w = m.weights_at(x);
  Vector out(static_cast<std::size_t>(m.space.vocab_size));
  for (int y = 0; y < m.space.vocab_size; ++y) {
    out[static_cast<std::size_t>(y)] =
        oracles::mixture_reward(w, m.rewards_at(x, y));
  }
  return out;
}

Outcome optimal_policy(Context& c) {
  Worst worst(1e-12);
  double grad_norm = 0.0;
  const int perturbations = 1000;
  for (int i = 0; i < c.instances; ++i) {
    const Model m = policy_instance(c.rng);
    const double beta = uniform(c.rng, 0.05, 2.0);
    for (int k = 0; k < m.num_experts(); ++k) {
      for (int x = 0; x < m.space.num_prompts; ++x) {
        const Vector ref = m.reference(k).probs(x);
        const Vector target = mixture_reward_row(m, x);
        const Vector best = core::optimal_policy_for_expert(
            m, k, x, beta, exponent_for(c.fault));
        const double best_value =
            oracles::expert_objective(best, target, ref, beta);
        for (int p = 0; p < perturbations; ++p) {
          const double scale =
              std::exp(uniform(c.rng, std::log(1e-3), std::log(3.0)));
          Vector logits = log_vec(best);
          const Vector noise = normal_vector(c.rng, logits.size(), scale);
          for (std::size_t y = 0; y < logits.size(); ++y) logits[y] += noise[y];
          const Vector other = core::softmax(logits);
          worst.observe(oracles::expert_objective(other, target, ref, beta) -
                        best_value);
        }
        // Projected gradient on the simplex tangent space.
        Vector g(best.size());
        for (std::size_t y = 0; y < g.size(); ++y) {
          g[y] = target[y] - beta * (std::log(best[y] / ref[y]) + 1.0);
        }
        const double mean = std::accumulate(g.begin(), g.end(), 0.0) / g.size();
        double norm = 0.0;
        for (double v : g) norm += (v - mean) * (v - mean);
        grad_norm = std::max(grad_norm, std::sqrt(norm));
      }
    }
  }
  Outcome out = worst.outcome("max objective gain of a perturbation");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "; projected gradient norm %.3g", grad_norm);
  out.note += buf;
  if (!(grad_norm < 1e-6)) out.passed = false;
  return out;
}

Outcome round_trip(Context& c) {
  Worst worst(1e-8);
  for (int i = 0; i < c.instances; ++i) {
    Model m = policy_instance(c.rng);
    // beta >= 0.5 keeps every policy probability above the log floor.
    const double beta = uniform(c.rng, 0.5, 2.0);
    const Model original = m;
    for (int k = 0; k < m.num_experts(); ++k) {
      for (int x = 0; x < m.space.num_prompts; ++x) {
        const Vector pi = core::optimal_policy_for_expert(
            original, k, x, beta, exponent_for(c.fault));
        const Vector logits = log_vec(pi);
        std::copy(logits.begin(), logits.end(),
                  m.policies[static_cast<std::size_t>(k)]
                      .logits()
                      .row(static_cast<std::size_t>(x))
                      .begin());
      }
    }
    std::vector<int> prompts(static_cast<std::size_t>(m.space.num_prompts));
    std::iota(prompts.begin(), prompts.end(), 0);
    std::vector<int> responses(static_cast<std::size_t>(m.space.vocab_size));
    std::iota(responses.begin(), responses.end(), 0);
    const auto updated = em::reward_update(prompts, responses, m, beta,
                                           em::PartitionMode::kExact,
                                           em::RewardRule::kSinglePass);
    for (int k = 0; k < m.num_experts(); ++k) {
      for (int x = 0; x < m.space.num_prompts; ++x) {
        worst.observe(spread_of_difference(
            updated[static_cast<std::size_t>(k)].values.row(
                static_cast<std::size_t>(x)),
            original.rewards[static_cast<std::size_t>(k)].values.row(
                static_cast<std::size_t>(x))));
      }
    }
  }
  return worst.outcome("reward deviation modulo per-prompt constant");
}

Outcome k1_reduction(Context& c) {
  Worst worst(1e-10);
  for (int i = 0; i < c.instances; ++i) {
    ModelShape shape;
    shape.k = 1;
    shape.x = uniform_int(c.rng, 1, 3);
    shape.y = uniform_int(c.rng, 2, 6);
    const Model m = random_model(c.rng, shape);
    const double beta = uniform(c.rng, 0.05, 2.0);
    const auto ts = random_triplets(c.rng, m, 4);
    for (const auto& t : ts) {
      const Vector pi = m.policies[0].probs(t.prompt_id);
      const Vector ref = m.reference(0).probs(t.prompt_id);
      const double expected =
          oracles::dpo_loss(beta, pi[static_cast<std::size_t>(t.y_plus)],
                            ref[static_cast<std::size_t>(t.y_plus)],
                            pi[static_cast<std::size_t>(t.y_minus)],
                            ref[static_cast<std::size_t>(t.y_minus)]);
      const Vector one{1.0};
      worst.observe(
          std::abs(core::per_expert_mbt_loss(t, 0, m, one, beta) - expected));
      const Vector sig{core::bt_sigma(
          m.rewards[0].values(static_cast<std::size_t>(t.prompt_id),
                              static_cast<std::size_t>(t.y_plus)),
          m.rewards[0].values(static_cast<std::size_t>(t.prompt_id),
                              static_cast<std::size_t>(t.y_minus)))};
      worst.observe(std::abs(core::mbt_posterior(one, sig)[0] - 1.0));
    }
    for (int x = 0; x < shape.x; ++x) {
      const Vector corrected = core::corrected_rewards_row(m, 0, x);
      worst.observe(max_abs_diff(
          corrected, m.rewards[0].values.row(static_cast<std::size_t>(x))));
    }
    std::vector<int> prompts(static_cast<std::size_t>(shape.x));
    std::iota(prompts.begin(), prompts.end(), 0);
    std::vector<int> responses(static_cast<std::size_t>(shape.y));
    std::iota(responses.begin(), responses.end(), 0);
    const auto updated = em::reward_update(prompts, responses, m, beta);
    for (int x = 0; x < shape.x; ++x) {
      const Vector pi = m.policies[0].probs(x);
      const Vector ref = m.reference(0).probs(x);
      Vector canonical(pi.size());
      for (std::size_t y = 0; y < pi.size(); ++y)
        canonical[y] = beta * std::log(pi[y] / ref[y]);
      worst.observe(spread_of_difference(
          updated[0].values.row(static_cast<std::size_t>(x)), canonical));
    }
  }
  return worst.outcome("deviation from single-policy forms");
}

Outcome simplex_outputs(Context& c) {
  Worst worst(1e-12);
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 6));
    const Vector logits = normal_vector(c.rng, k, 20.0);
    const Vector w = random_simplex(c.rng, k, 3.0);
    const Vector r = normal_vector(c.rng, k, 5.0);
    Vector sig(k), pi(k);
    for (std::size_t j = 0; j < k; ++j) {
      sig[j] = core::bt_sigma(r[j], uniform(c.rng, -5.0, 5.0));
      pi[j] = uniform(c.rng, 1e-6, 1.0);
    }
    worst.observe(simplex_violation(core::softmax(logits)));
    worst.observe(simplex_violation(core::mbt_posterior(w, sig)));
    worst.observe(simplex_violation(core::q_r_posterior(w, r)));
    worst.observe(simplex_violation(core::q_pi_posterior(w, pi)));
    worst.observe(simplex_violation(
        core::optimal_expert_policy(w, r, uniform(c.rng, 0.01, 2.0))));
    core::Lambdas lam;
    lam.kl_w = uniform(c.rng, 0.0, 2.0);
    lam.conf = uniform(c.rng, 0.05, 2.0);
    worst.observe(simplex_violation(reg::regularized_posterior(r, w, lam)));
    const Vector z =
        mc::gumbel_softmax_sample(logits, uniform(c.rng, 0.01, 10.0), c.rng).z;
    worst.observe(simplex_violation(z));
  }
  return worst.outcome("negativity or sum error");
}

Outcome shift_invariance(Context& c) {
  Worst worst(1e-12);
  for (int i = 0; i < c.instances; ++i) {
    ModelShape shape;
    shape.k = uniform_int(c.rng, 1, 4);
    shape.x = 1;
    shape.y = uniform_int(c.rng, 2, 6);
    const Model m = random_model(c.rng, shape);
    Model shifted = m;
    const double delta = uniform(c.rng, -3.0, 3.0);
    for (auto& table : shifted.rewards) {
      for (double& v : table.values.data()) v += delta;
    }
    const Vector w = m.weights_at(0);
    for (int y = 0; y < shape.y; ++y) {
      const Vector r = m.rewards_at(0, y);
      const Vector rs = shifted.rewards_at(0, y);
      worst.observe(std::abs(core::mixture_reward(w, rs) -
                             core::mixture_reward(w, r) - delta));
      worst.observe(
          max_abs_diff(core::q_r_posterior(w, rs), core::q_r_posterior(w, r)));
    }
    PreferenceTriplet t{0, 0, 1, std::nullopt, {}};
    worst.observe(
        max_abs_diff(core::mbt_posterior(w, core::expert_sigmas(shifted, t)),
                     core::mbt_posterior(w, core::expert_sigmas(m, t))));
    const double beta = uniform(c.rng, 0.1, 2.0);
    for (int k = 0; k < shape.k; ++k) {
      worst.observe(
          max_abs_diff(core::optimal_policy_for_expert(shifted, k, 0, beta),
                       core::optimal_policy_for_expert(m, k, 0, beta)));
    }
  }
  return worst.outcome("change under a per-prompt reward shift");
}

Outcome objective_forms(Context& c) {
  Worst worst(1e-9);
  for (int i = 0; i < c.instances; ++i) {
    ModelShape shape;
    shape.k = uniform_int(c.rng, 1, 3);
    shape.x = uniform_int(c.rng, 1, 3);
    shape.y = uniform_int(c.rng, 2, 5);
    const Model m = random_model(c.rng, shape);
    const double beta = uniform(c.rng, 0.05, 2.0);
    const core::ObjectiveValue v = core::moedpo_objective(m, beta);
    double direct = 0.0;
    for (int x = 0; x < shape.x; ++x) {
      const Vector w = m.weights_at(x);
      const Vector target = mixture_reward_row(m, x);
      for (int k = 0; k < shape.k; ++k) {
        const Vector pi = m.policies[static_cast<std::size_t>(k)].probs(x);
        const Vector ref = m.reference(k).probs(x);
        direct += w[static_cast<std::size_t>(k)] *
                  oracles::expert_objective(pi, target, ref, beta) / shape.x;
      }
    }
    worst.observe(std::abs(v.direct - direct));
    worst.observe(std::abs(v.direct - v.decomposed));
  }
  return worst.outcome("difference between objective forms");
}

// em_trainer properties.

Outcome e_step_monotone(Context& c) {
  Worst worst(1e-9);
  for (int i = 0; i < c.instances; ++i) {
    const Synthetic s = small_synthetic(c.rng, 3, 6, 5, 300);
    em::InitOptions init;
    init.num_experts = 3;
    init.seed = c.rng();
    init.policy_noise = 0.5;
    init.beta = 0.5;
    const Model m = em::init_model(s.data, init);
    const auto q = random_q(c.rng, s.data.triplets.size(), 3);
    const double before = em::dataset_elbo(s.data.triplets, m, q);
    const auto post = em::e_step(s.data.triplets, m);
    worst.observe(before - em::dataset_elbo(s.data.triplets, m, post));

    em::TrainerConfig cfg;
    cfg.epochs = 5;
    cfg.hyper.beta = 0.5;
    cfg.seed = c.rng();
    const em::TrainState st = em::train(s.data, m, cfg);
    for (const auto& check : st.e_step_checks)
      worst.observe(check.before - check.after);
  }
  return worst.outcome("largest ELBO decrease from an E-step");
}

Outcome policy_gradient(Context& c) {
  Worst worst(1e-4);
  for (int i = 0; i < c.instances; ++i) {
    ModelShape shape;
    shape.k = uniform_int(c.rng, 1, 3);
    shape.x = 3;
    shape.y = 4;
    Model m = random_model(c.rng, shape);
    const double beta = uniform(c.rng, 0.1, 2.0);
    const auto batch = random_triplets(c.rng, m, 6);
    const auto q = random_q(c.rng, batch.size(), shape.k);
    for (int k = 0; k < shape.k; ++k) {
      const Matrix g = em::m_step_policy_gradient(batch, k, m, q, beta);
      Matrix& logits = m.policies[static_cast<std::size_t>(k)].logits();
      const oracles::Objective loss = [&](const oracles::Vec& theta) {
        const Matrix saved = logits;
        std::copy(theta.begin(), theta.end(), logits.data().begin());
        const double v = em::batch_policy_loss(batch, m, q, beta);
        logits = saved;
        return v;
      };
      const oracles::Vec fd =
          oracles::central_difference(loss, logits.data(), 1e-5);
      worst.observe(max_relative_error(g.data(), fd));
    }
  }
  return worst.outcome("max per-coordinate relative error");
}

Outcome gating_gradient(Context& c) {
  Worst worst(1e-4);
  for (int i = 0; i < c.instances; ++i) {
    ModelShape shape;
    shape.k = uniform_int(c.rng, 2, 4);
    shape.x = 3;
    shape.y = 4;
    shape.moe = true;
    shape.user_dim = uniform_int(c.rng, 0, 2);
    Model m = random_model(c.rng, shape);
    const auto batch = random_triplets(c.rng, m, 8);
    const auto q = random_q(c.rng, batch.size(), shape.k);
    const double lambda = uniform(c.rng, 0.0, 1.0);
    const em::GatingGradient g = em::gating_gradient(batch, q, m, lambda);
    auto& params = m.gating.linear_params();
    const std::size_t nw = params.weight.size();
    oracles::Vec theta(params.weight.data().begin(),
                       params.weight.data().end());
    theta.insert(theta.end(), params.bias.begin(), params.bias.end());
    const oracles::Objective loss = [&](const oracles::Vec& th) {
      const core::LinearGating saved = params;
      std::copy(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(nw),
                params.weight.data().begin());
      std::copy(th.begin() + static_cast<std::ptrdiff_t>(nw), th.end(),
                params.bias.begin());
      double v = em::gating_cross_entropy(batch, q, m);
      double kl = 0.0;
      const Vector uniform_w(static_cast<std::size_t>(shape.k), 1.0 / shape.k);
      for (const auto& t : batch)
        kl += core::kl_divergence(m.weights_for(t), uniform_w);
      v += lambda * kl / static_cast<double>(batch.size());
      params = saved;
      return v;
    };
    const oracles::Vec fd = oracles::central_difference(loss, theta, 1e-5);
    oracles::Vec analytic(g.weight.data().begin(), g.weight.data().end());
    analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());
    worst.observe(max_relative_error(analytic, fd));
  }
  return worst.outcome("max per-coordinate relative error");
}

Outcome gradient_descent_direction(Context& c) {
  Worst worst(0.0);
  for (int i = 0; i < c.instances; ++i) {
    ModelShape shape;
    shape.k = uniform_int(c.rng, 1, 3);
    Model m = random_model(c.rng, shape);
    const double beta = uniform(c.rng, 0.1, 2.0);
    const auto batch = random_triplets(c.rng, m, 6);
    const auto q = random_q(c.rng, batch.size(), shape.k);
    const double before = em::batch_policy_loss(batch, m, q, beta);
    for (int k = 0; k < shape.k; ++k) {
      const Matrix g = em::m_step_policy_gradient(batch, k, m, q, beta);
      Matrix& logits = m.policies[static_cast<std::size_t>(k)].logits();
      for (std::size_t j = 0; j < g.size(); ++j)
        logits.data()[j] -= 1e-6 * g.data()[j];
    }
    const double after = em::batch_policy_loss(batch, m, q, beta);
    // A positive value means the small step failed to lower the loss.
    worst.observe(after - before >= 0.0 ? after - before + 1e-300 : 0.0);
  }
  return worst.outcome("loss increase after a small descent step");
}

Outcome mix_closed_form(Context& c) {
  Worst worst(1e-6);
  for (int i = 0; i < c.instances; ++i) {
    const int k = uniform_int(c.rng, 1, 5);
    const int n = uniform_int(c.rng, 1, 20);
    const auto q = random_q(c.rng, static_cast<std::size_t>(n), k);
    const Vector previous(static_cast<std::size_t>(k), 1.0 / k);
    const Vector w = em::prior_update_mix(q, previous);
    const oracles::Objective objective = [&](const oracles::Vec& cand) {
      double total = 0.0;
      for (const auto& qi : q) {
        for (std::size_t j = 0; j < qi.size(); ++j)
          total += qi[j] * std::log(cand[j]);
      }
      return total / n;
    };
    worst.observe(max_abs_diff(w, oracles::maximize_on_simplex(
                                      objective, static_cast<std::size_t>(k))));
    // The KL-to-responsibilities objective is minimized at w = q.
    const Vector target = q.front();
    const oracles::Objective neg_kl = [&](const oracles::Vec& cand) {
      return -core::gating_kl_objective(target, cand);
    };
    worst.observe(max_abs_diff(
        target,
        oracles::maximize_on_simplex(neg_kl, static_cast<std::size_t>(k))));
  }
  return worst.outcome("distance to the numeric optimum");
}

Outcome trainer_determinism(Context& c) {
  Worst worst(0.0);
  for (int i = 0; i < c.instances; ++i) {
    const Synthetic s = small_synthetic(c.rng, 2, 4, 4, 120);
    em::InitOptions init;
    init.num_experts = 2;
    init.mode = i % 2 == 0 ? em::GatingMode::kMix : em::GatingMode::kMoe;
    init.seed = c.rng();
    const Model m = em::init_model(s.data, init);
    em::TrainerConfig cfg;
    cfg.mode = init.mode;
    cfg.epochs = 4;
    cfg.hyper.batch_size = 32;
    cfg.seed = c.rng();
    const em::TrainState a = em::train(s.data, m, cfg);
    const em::TrainState b = em::train(s.data, m, cfg);
    const bool same = a.model == b.model && a.elbo_trace == b.elbo_trace &&
                      a.q == b.q && a.iteration == b.iteration;
    worst.observe(same ? 0.0 : 1.0);
  }
  return worst.outcome("runs with differing state");
}

Outcome uniform_mix_update(Context& c) {
  Worst worst(1e-12);
  for (int i = 0; i < c.instances; ++i) {
    const Synthetic s = small_synthetic(c.rng, 3, 5, 4, 200);
    em::InitOptions init;
    init.num_experts = 3;
    init.seed = c.rng();
    init.policy_noise = 0.5;
    const Model m = em::init_model(s.data, init);
    em::TrainerConfig cfg;
    cfg.trainable_policies = false;
    cfg.epochs = 1;
    const em::TrainState st = em::train(s.data, m, cfg);
    const auto q = em::e_step(s.data.triplets, m);
    Vector mean(3, 0.0);
    for (const auto& qi : q) {
      for (std::size_t k = 0; k < 3; ++k)
        mean[k] += qi[k] / static_cast<double>(q.size());
    }
    const Vector& w = st.model.gating.fixed_params().weights;
    worst.observe(max_abs_diff(w, mean));
    worst.observe(simplex_violation(w));
  }
  return worst.outcome("difference from mean responsibilities");
}

// regularized properties.

core::Lambdas random_lambdas(Rng& rng) {
  core::Lambdas lam;
  const double alpha = std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
  lam.kl_w = uniform(rng, 0.0, alpha);
  const double rest = alpha - lam.kl_w;
  switch (uniform_int(rng, 0, 2)) {
    case 0:
      lam.conf = rest;
      break;
    case 1:
      lam.kl_unif = rest;
      break;
    default: {
      // Entropy bonus offset by a larger uniform pull.
      lam.ent = uniform(rng, 0.0, 1.0);
      lam.kl_unif = rest + lam.ent;
      break;
    }
  }
  return lam;
}

Outcome regularized_closed_form(Context& c) {
  Worst worst(1e-6);
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 5));
    Vector utilities(k);
    for (double& u : utilities) u = std::log(uniform(c.rng, 0.05, 0.95));
    const Vector w = random_simplex(c.rng, k, 1.0);
    const core::Lambdas lam = random_lambdas(c.rng);
    const double alpha = lam.conf - lam.ent + lam.kl_unif + lam.kl_w;
    const oracles::Objective objective = [&](const oracles::Vec& q) {
      double v = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        v += q[j] * utilities[j] + lam.kl_w * q[j] * std::log(w[j]) -
             alpha * q[j] * std::log(q[j]);
      }
      return v;
    };
    worst.observe(max_abs_diff(reg::regularized_posterior(utilities, w, lam),
                               oracles::maximize_on_simplex(objective, k)));
  }
  return worst.outcome("distance to the numeric maximizer");
}

Outcome regularized_limit(Context& c) {
  Worst worst(1e-3);
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 5));
    Vector utilities(k);
    for (double& u : utilities) u = std::log(uniform(c.rng, 0.05, 0.95));
    const Vector w = random_simplex(c.rng, k, 2.0);
    core::Lambdas lam = random_lambdas(c.rng);
    lam.kl_unif = 1e6;
    const Vector q = reg::regularized_posterior(utilities, w, lam);
    worst.observe(
        oracles::tv_distance(q, Vector(k, 1.0 / static_cast<double>(k))));
    for (double v : q) worst.observe(v > 0.0 ? 0.0 : 1.0);
  }
  return worst.outcome("TV distance to uniform at lambda_kl_unif = 1e6");
}

// mc_relax properties.

Outcome gumbel_interior(Context& c) {
  Worst worst(1e-12);
  for (int i = 0; i < c.instances; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(c.rng, 1, 6));
    const Vector logits = normal_vector(c.rng, k, 3.0);
    const double tau = std::exp(uniform(c.rng, std::log(1e-3), std::log(1e3)));
    const Vector z = mc::gumbel_softmax_sample(logits, tau, c.rng).z;
    worst.observe(simplex_violation(z));
    for (double v : z) worst.observe(v > 0.0 ? 0.0 : 1.0);
  }
  return worst.outcome("sum error or nonpositive coordinate");
}

Outcome gumbel_max(Context& c) {
  const std::size_t k = 4;
  const Vector logits = normal_vector(c.rng, k, 1.0);
  const Vector p = core::softmax(logits);
  std::vector<std::size_t> counts(k, 0);
  const std::size_t draws = static_cast<std::size_t>(c.instances);
  for (std::size_t i = 0; i < draws; ++i) {
    const Vector z = mc::gumbel_softmax_sample(logits, 0.5, c.rng).z;
    ++counts[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) -
                                      z.begin())];
  }
  double worst_sigmas = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double sd = std::sqrt(draws * p[j] * (1.0 - p[j]));
    worst_sigmas =
        std::max(worst_sigmas, std::abs(counts[j] - draws * p[j]) / sd);
  }
  return Outcome{worst_sigmas <= 3.0, worst_sigmas, 3.0,
                 "largest frequency deviation in binomial standard deviations"};
}

Outcome gumbel_sharpening(Context& c) {
  const std::size_t k = 3;
  Vector logits = normal_vector(c.rng, k, 0.5);
  // Top logit at least 1 above every other.
  const auto top = static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  for (std::size_t j = 0; j < k; ++j) {
    if (j != top) logits[j] = std::min(logits[j], logits[top] - 1.0);
  }
  double total = 0.0;
  for (int i = 0; i < c.instances; ++i) {
    const Vector z = mc::gumbel_softmax_sample(logits, 0.01, c.rng).z;
    total += *std::max_element(z.begin(), z.end());
  }
  const double mean = total / c.instances;
  return Outcome{mean > 0.99, 1.0 - mean, 0.01,
                 "1 - mean max coordinate at tau 0.01"};
}

Outcome mc_gradient(Context& c) {
  Worst worst(1e-3);
  for (int i = 0; i < c.instances; ++i) {
    ModelShape shape;
    shape.k = 2;
    shape.x = 3;
    shape.y = 4;
    shape.moe = i % 2 == 1;
    Model m = random_model(c.rng, shape);
    const auto batch = random_triplets(c.rng, m, 5);
    const int samples = 3;
    const auto noise = mc::draw_noise(batch.size(), samples, shape.k, c.rng);
    const double tau = uniform(c.rng, 0.3, 2.0);
    const double kl_weight = uniform(c.rng, 0.0, 1.5);
    const double beta = uniform(c.rng, 0.2, 1.5);
    for (auto param : {mc::RewardParam::kTable, mc::RewardParam::kPolicy}) {
      const Model anchor = m;
      const mc::McGradient g =
          mc::mc_gradient(batch, m, noise, tau, kl_weight, param, beta);
      Model probe = m;
      const auto objective = [&]() {
        return mc::mc_objective(batch, probe, noise, tau, kl_weight, param,
                                &anchor, beta);
      };
      for (int k = 0; k < shape.k; ++k) {
        Matrix& target =
            param == mc::RewardParam::kTable
                ? probe.rewards[static_cast<std::size_t>(k)].values
                : probe.policies[static_cast<std::size_t>(k)].logits();
        const oracles::Objective f = [&](const oracles::Vec& th) {
          const Matrix saved = target;
          std::copy(th.begin(), th.end(), target.data().begin());
          const double v = objective();
          target = saved;
          return v;
        };
        const oracles::Vec fd =
            oracles::central_difference(f, target.data(), 1e-5);
        worst.observe(max_relative_error(
            g.experts[static_cast<std::size_t>(k)].data(), fd));
      }
      if (m.gating.is_fixed()) {
        Vector logits = log_vec(m.gating.fixed_params().weights);
        const oracles::Objective f = [&](const oracles::Vec& th) {
          const Vector saved = probe.gating.fixed_params().weights;
          probe.gating.fixed_params().weights = core::softmax(th);
          const double v = objective();
          probe.gating.fixed_params().weights = saved;
          return v;
        };
        worst.observe(max_relative_error(
            g.fixed_logits, oracles::central_difference(f, logits, 1e-5)));
      } else {
        auto& params = probe.gating.linear_params();
        const oracles::Objective fw = [&](const oracles::Vec& th) {
          const Matrix saved = params.weight;
          std::copy(th.begin(), th.end(), params.weight.data().begin());
          const double v = objective();
          params.weight = saved;
          return v;
        };
        worst.observe(max_relative_error(
            g.gating_weight.data(),
            oracles::central_difference(fw, params.weight.data(), 1e-5)));
        const oracles::Objective fb = [&](const oracles::Vec& th) {
          const Vector saved = params.bias;
          params.bias = th;
          const double v = objective();
          params.bias = saved;
          return v;
        };
        worst.observe(max_relative_error(
            g.gating_bias, oracles::central_difference(fb, params.bias, 1e-5)));
      }
    }
  }
  return worst.outcome("max per-coordinate relative error with frozen noise");
}

Outcome mc_low_temperature(Context& c) {
  ModelShape shape;
  shape.k = 3;
  shape.x = 1;
  shape.y = 3;
  const Model m = random_model(c.rng, shape, 1.5);
  const PreferenceTriplet t{0, 0, 1, std::nullopt, {}};
  const Vector logits = mc::relaxed_logits(m, t);
  const Vector p = core::softmax(logits);
  const Vector log_sigma = core::expert_log_sigmas(m, t);
  double exact = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) exact -= p[k] * log_sigma[k];
  double sum = 0.0;
  double sum_sq = 0.0;
  const int draws = c.instances;
  std::vector<mc::RelaxedSample> one(1);
  for (int i = 0; i < draws; ++i) {
    one[0] = mc::gumbel_softmax_sample(logits, 0.01, c.rng);
    const double v = mc::relaxed_mbt_loss(t, m, one);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double var = std::max(0.0, sum_sq / draws - mean * mean);
  const double se = std::sqrt(var / draws);
  const double z =
      se > 0.0 ? std::abs(mean - exact) / se : std::abs(mean - exact) * 1e300;
  return Outcome{z <= 3.0, z, 3.0,
                 "deviation from the exact weighting in standard errors"};
}

// synth_data properties.

Outcome synth_determinism(Context& c) {
  Worst worst(0.0);
  for (int i = 0; i < c.instances; ++i) {
    const std::uint64_t seed = c.rng();
    const std::uint64_t sample_seed = c.rng();
    synth::GroundTruthOptions opt;
    opt.user_tasks = i % 2 == 1;
    const auto a = synth::make_ground_truth(3, 5, 4, 2.0, seed, opt);
    const auto b = synth::make_ground_truth(3, 5, 4, 2.0, seed, opt);
    Rng ra(sample_seed), rb(sample_seed);
    const auto da = synth::make_dataset(a, 100, ra);
    const auto db = synth::make_dataset(b, 100, rb);
    const bool same =
        a == b && io::dataset_to_jsonl(da) == io::dataset_to_jsonl(db);
    worst.observe(same ? 0.0 : 1.0);
  }
  return worst.outcome("regenerations that differ");
}

Outcome synth_frequencies(Context& c) {
  // Tiny space: 2 prompts, 3 responses, 2 experts, about 10^4 draws per pair.
  const auto gt = synth::make_ground_truth(2, 2, 3, 1.5, c.rng());
  Rng sampler(c.rng());
  const int pairs = 2 * 3;
  const auto triplets =
      synth::sample_triplets(gt, c.instances * pairs, sampler);
  // wins(x, a, b): a preferred over b, with a < b.
  std::map<std::tuple<int, int, int>, std::pair<std::size_t, std::size_t>>
      counts;
  for (const auto& t : triplets) {
    const int a = std::min(t.y_plus, t.y_minus);
    const int b = std::max(t.y_plus, t.y_minus);
    auto& entry = counts[{t.prompt_id, a, b}];
    ++entry.second;
    if (t.y_plus == a) ++entry.first;
  }
  double worst_sigmas = 0.0;
  for (const auto& [key, value] : counts) {
    const auto [x, a, b] = key;
    const Vector w = gt.weights_at(x);
    Vector sig(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      sig[k] = core::bt_sigma(gt.rewards[k](static_cast<std::size_t>(x),
                                            static_cast<std::size_t>(a)),
                              gt.rewards[k](static_cast<std::size_t>(x),
                                            static_cast<std::size_t>(b)));
    }
    const double p = core::mbt_marginal(w, sig);
    const double n = static_cast<double>(value.second);
    const double sd = std::sqrt(n * p * (1.0 - p));
    worst_sigmas = std::max(worst_sigmas, std::abs(value.first - n * p) / sd);
  }
  return Outcome{
      worst_sigmas <= 3.0, worst_sigmas, 3.0,
      "largest preference-rate deviation in binomial standard deviations"};
}

Outcome synth_no_leakage(Context& c) {
  // With zero separation the label must be independent of the preference
  // direction at each prompt: compare label rates between the orientations.
  const int num_x = 3;
  const auto gt = synth::make_ground_truth(2, num_x, 4, 0.0, c.rng());
  Rng sampler(c.rng());
  const auto triplets = synth::sample_triplets(gt, c.instances, sampler);
  std::vector<std::array<double, 4>> counts(num_x, {0.0, 0.0, 0.0, 0.0});
  for (const auto& t : triplets) {
    const std::size_t up = t.y_plus < t.y_minus ? 0 : 1;
    auto& row = counts[static_cast<std::size_t>(t.prompt_id)];
    row[up] += 1.0;
    if (*t.source_label == 1) row[2 + up] += 1.0;
  }
  double worst = 0.0;
  for (const auto& [n_up, n_down, k_up, k_down] : counts) {
    const double pooled = (k_up + k_down) / (n_up + n_down);
    const double se =
        std::sqrt(pooled * (1.0 - pooled) * (1.0 / n_up + 1.0 / n_down));
    worst = std::max(worst, std::abs(k_up / n_up - k_down / n_down) / se);
  }
  return Outcome{
      worst <= 3.0, worst, 3.0,
      "label-rate difference between orientations in standard errors"};
}

// cli properties.

Outcome checkpoint_round_trip(Context& c) {
  Worst worst(0.0);
  for (int i = 0; i < c.instances; ++i) {
    const Synthetic s = small_synthetic(c.rng, 2, 4, 4, 150);
    em::InitOptions init;
    init.num_experts = 2;
    init.mode = i % 2 == 0 ? em::GatingMode::kMix : em::GatingMode::kMoe;
    init.seed = c.rng();
    em::TrainerConfig cfg;
    cfg.mode = init.mode;
    cfg.epochs = 3;
    cfg.seed = c.rng();
    cfg.optimizer.kind = em::OptimizerKind::kAdam;
    const em::TrainState st =
        em::train(s.data, em::init_model(s.data, init), cfg);
    const io::Checkpoint saved =
        io::checkpoint_from_state(st, io::Json::object());
    const std::string text = io::checkpoint_to_json(saved).dump(1);
    const io::Checkpoint loaded =
        io::checkpoint_from_json(io::Json::parse(text));
    const core::Dataset data =
        io::dataset_from_jsonl(io::dataset_to_jsonl(s.data));
    const synth::GroundTruth gt =
        io::ground_truth_from_json(io::ground_truth_to_json(s.gt));
    const std::string before =
        eval::report_to_json(eval::evaluate(st.model, s.data, &s.gt)).dump();
    const std::string after =
        eval::report_to_json(eval::evaluate(loaded.model, data, &gt)).dump();
    const bool same = before == after && loaded.model == st.model &&
                      io::checkpoint_to_json(loaded).dump(1) == text;
    worst.observe(same ? 0.0 : 1.0);
  }
  return worst.outcome("round trips with differing output");
}

std::vector<Property> build_properties() {
  return {
      {"elbo_bound", "core", "ELBO bound", 1000, elbo_bound},
      {"elbo_tightness", "core", "ELBO tightness", 1000, elbo_tightness},
      {"variational_identity", "core", "Variational identity", 1000,
       variational_identity},
      {"reward_decomposition", "core", "Mixture-reward decomposition equality",
       1000, decomposition},
      {"optimal_policy", "core", "Closed-form expert policy optimality", 100,
       optimal_policy},
      {"reward_round_trip", "core", "Round-trip reward recovery", 100,
       round_trip},
      {"single_expert_reduction", "core", "K=1 reduction", 200, k1_reduction},
      {"simplex_outputs", "core", "All simplex outputs valid", 1000,
       simplex_outputs},
      {"shift_invariance", "core", "Shift invariance", 500, shift_invariance},
      {"objective_forms", "core", "Direct and per-expert objective forms agree",
       200, objective_forms},
      {"e_step_monotone", "em_trainer", "E-step monotonicity", 3,
       e_step_monotone},
      {"policy_gradient", "em_trainer", "Gradient correctness (policy)", 20,
       policy_gradient},
      {"gating_gradient", "em_trainer", "Gradient correctness (gating)", 20,
       gating_gradient},
      {"gradient_loss_consistency", "em_trainer", "Gradient-loss consistency",
       50, gradient_descent_direction},
      {"mix_closed_form", "em_trainer", "Mix-DPO closed-form optimality", 100,
       mix_closed_form},
      {"trainer_determinism", "em_trainer", "Determinism", 4,
       trainer_determinism},
      {"uniform_mix_update", "em_trainer",
       "Full-batch weight update equals mean responsibilities", 3,
       uniform_mix_update},
      {"regularized_closed_form", "regularized",
       "Closed form vs numeric maximizer", 100, regularized_closed_form},
      {"regularized_uniform_limit", "regularized",
       "Limit behavior; output is a valid simplex", 100, regularized_limit},
      {"gumbel_interior", "mc_relax", "Samples are interior simplex points",
       2000, gumbel_interior},
      {"gumbel_max", "mc_relax", "Gumbel-max distribution", 100000, gumbel_max},
      {"gumbel_sharpening", "mc_relax", "Sharpening at low temperature", 10000,
       gumbel_sharpening},
      {"mc_gradient", "mc_relax",
       "Reparameterization gradient with frozen noise", 20, mc_gradient},
      {"mc_low_temperature", "mc_relax",
       "Relaxed loss approaches exact weighting", 100000, mc_low_temperature},
      {"synth_determinism", "synth_data", "Reproducible generation", 4,
       synth_determinism},
      {"synth_preference_rates", "synth_data",
       "Preference frequencies match the marginal", 10000, synth_frequencies},
      {"synth_no_leakage", "synth_data", "Labels act only through the gating",
       40000, synth_no_leakage},
      {"checkpoint_round_trip", "cli",
       "Checkpoint round trip reproduces evaluation", 2, checkpoint_round_trip},
  };
}

std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Fault parse_fault(const std::string& name) {
  if (name.empty() || name == "none") return Fault::kNone;
  if (name == "policy-exponent") return Fault::kPolicyExponent;
  throw Error("unknown fault \"" + name +
              "\" (expected none or policy-exponent)");
}

std::string fault_name(Fault fault) {
  return fault == Fault::kPolicyExponent ? "policy-exponent" : "none";
}

const std::vector<Property>& properties() {
  static const std::vector<Property> all = build_properties();
  return all;
}

const Property& find_property(const std::string& name) {
  for (const auto& p : properties()) {
    if (p.name == name) return p;
  }
  throw Error("unknown property \"" + name + "\"");
}

Result run_property(const Property& property, std::uint64_t seed, Fault fault,
                    int instances) {
  Context ctx;
  ctx.rng.seed(derive_seed(seed, name_hash(property.name)));
  ctx.instances = instances > 0 ? instances : property.default_instances;
  ctx.fault = fault;
  Result result;
  result.property = &property;
  const auto start = std::chrono::steady_clock::now();
  try {
    result.outcome = property.run(ctx);
  } catch (const std::exception& e) {
    result.outcome = Outcome{false, std::numeric_limits<double>::infinity(),
                             0.0, std::string("exception: ") + e.what()};
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

std::vector<Result> run_all(std::uint64_t seed, Fault fault) {
  std::vector<Result> out;
  for (const auto& p : properties())
    out.push_back(run_property(p, seed, fault));
  return out;
}

void print_manifest(std::ostream& out) {
  out << "coverage manifest (module / invariant -> property)\n";
  for (const auto& p : properties()) {
    out << "  " << p.module << " / " << p.invariant << " -> " << p.name << '\n';
  }
}

void print_results(std::ostream& out, const std::vector<Result>& results) {
  char line[512];
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line),
                  "%-4s %-26s dev=%-11.4g tol=%-9.3g %6.2fs  %s\n",
                  r.outcome.passed ? "PASS" : "FAIL", r.property->name.c_str(),
                  r.outcome.deviation, r.outcome.tolerance, r.seconds,
                  r.outcome.note.c_str());
    out << line;
  }
}

}  // namespace mixdpo::verify
