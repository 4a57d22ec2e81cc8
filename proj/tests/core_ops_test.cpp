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
#include <cmath>
#include <limits>

#include "doctest.h"
#include "mixdpo/core/ops.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::core {
namespace {

using doctest::Approx;

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp(Vector{0.0, 0.0}) == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(log_sum_exp(Vector{-3.25}) == -3.25);
  CHECK(log_sum_exp(Vector{1000.0, 1000.0}) ==
        Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp(Vector{ninf, 0.0}) == 0.0);
  CHECK_THROWS_WITH_AS(log_sum_exp(Vector{}), "empty reduction", Error);
}

TEST_CASE("bt_sigma") {
  CHECK(bt_sigma(2.5, 2.5) == 0.5);
  CHECK(bt_sigma(std::log(3.0), 0.0) == Approx(0.75).epsilon(1e-15));
  CHECK(bt_sigma(1.0, 0.0) == Approx(0.73106).epsilon(1e-5));
  CHECK(bt_sigma(800.0, -800.0) <= 1.0);
  CHECK(log_bt_sigma(-800.0, 800.0) == Approx(-1600.0));
}

TEST_CASE("mbt_marginal") {
  CHECK(mbt_marginal(Vector{0.5, 0.5}, Vector{0.8, 0.6}) == Approx(0.7));
  CHECK(mbt_marginal(Vector{1.0}, Vector{0.3}) == 0.3);
  CHECK(mbt_marginal(Vector{0.0, 1.0, 0.0}, Vector{0.1, 0.4, 0.9}) == 0.4);
  CHECK_THROWS_AS(mbt_marginal(Vector{0.5, 0.5}, Vector{0.5}), Error);
}

TEST_CASE("mbt_posterior") {
  const Vector a = mbt_posterior(Vector{0.5, 0.5}, Vector{0.8, 0.2});
  CHECK(a[0] == Approx(0.8));
  CHECK(a[1] == Approx(0.2));
  const Vector b = mbt_posterior(Vector{0.75, 0.25}, Vector{0.2, 0.6});
  CHECK(b[0] == Approx(0.5));
  CHECK(b[1] == Approx(0.5));
  CHECK(mbt_posterior(Vector{1.0}, Vector{0.37}) == Vector{1.0});
  CHECK_THROWS_WITH_AS(mbt_posterior(Vector{1.0, 0.0}, Vector{0.0, 0.5}),
                       "degenerate posterior", Error);
}

TEST_CASE("elbo") {
  const Vector w{0.5, 0.5};
  const Vector s{0.8, 0.6};
  CHECK(elbo(mbt_posterior(w, s), w, s) ==
        Approx(std::log(0.7)).epsilon(1e-14));
  CHECK(elbo(Vector{1.0}, Vector{1.0}, Vector{0.3}) == Approx(std::log(0.3)));
  const double one_hot = elbo(Vector{1.0, 0.0}, w, s);
  CHECK(one_hot == Approx(-0.916290731874155).epsilon(1e-12));
  CHECK(one_hot <= std::log(0.7));
  // Mass where the joint vanishes gives the sentinel.
  CHECK(elbo(Vector{0.5, 0.5}, Vector{1.0, 0.0}, s) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("mixture_reward") {
  CHECK(mixture_reward(Vector{0.2, 0.3, 0.5}, Vector{1.5, 1.5, 1.5}) ==
        Approx(1.5));
  CHECK(mixture_reward(Vector{0.0, 1.0}, Vector{7.0, -2.0}) == -2.0);
  CHECK(mixture_reward(Vector{0.5, 0.5}, Vector{0.0, std::log(3.0)}) ==
        Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(mixture_reward(Vector{0.0, 0.0}, Vector{1.0, 2.0}), Error);
}

TEST_CASE("q_r_posterior and q_pi_posterior") {
  const Vector w{0.1, 0.6, 0.3};
  const Vector tie = q_r_posterior(w, Vector{2.0, 2.0, 2.0});
  for (std::size_t k = 0; k < 3; ++k) CHECK(tie[k] == Approx(w[k]));
  const Vector q = q_r_posterior(Vector{0.5, 0.5}, Vector{std::log(3.0), 0.0});
  CHECK(q[0] == Approx(0.75));
  CHECK(q[1] == Approx(0.25));
  CHECK(q_r_posterior(Vector{0.0, 1.0}, Vector{9.0, 0.0}) == Vector{0.0, 1.0});

  const Vector same = q_pi_posterior(w, Vector{0.2, 0.2, 0.2});
  for (std::size_t k = 0; k < 3; ++k) CHECK(same[k] == Approx(w[k]));
  CHECK(q_pi_posterior(Vector{1.0}, Vector{0.4}) == Vector{1.0});
  const Vector p = q_pi_posterior(Vector{0.5, 0.5}, Vector{0.4, 0.1});
  CHECK(p[0] == Approx(0.8));
  CHECK(p[1] == Approx(0.2));
  CHECK_THROWS_WITH_AS(q_pi_posterior(Vector{0.5, 0.5}, Vector{0.0, 0.0}),
                       "degenerate posterior", Error);
}

TEST_CASE("corrected_reward") {
  CHECK(corrected_reward(1.25, 0.4, 0.4) == 1.25);
  CHECK(corrected_reward(0.0, 0.5, 0.25) ==
        Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(corrected_reward(-0.5, 1.0, 1.0) == -0.5);
  CHECK_THROWS_WITH_AS(corrected_reward(0.0, 0.0, 0.5),
                       "zero responsibility in correction", Error);
}

TEST_CASE("reward_decomposition") {
  const Vector w{0.3, 0.7};
  const RewardDecomposition matched =
      reward_decomposition(w, Vector{0.4, 0.4}, Vector{0.2, 0.2});
  CHECK(matched.kl_term == Approx(0.0).scale(1.0));
  CHECK(matched.expectation_term + matched.kl_term ==
        Approx(mixture_reward(w, Vector{0.4, 0.4})));
  const RewardDecomposition single =
      reward_decomposition(Vector{1.0}, Vector{-1.5}, Vector{0.3});
  CHECK(single.kl_term == 0.0);
  CHECK(single.expectation_term == Approx(-1.5));
  const Vector w3{0.2, 0.5, 0.3};
  const Vector r3{0.9, -1.1, 2.3};
  const RewardDecomposition d =
      reward_decomposition(w3, r3, Vector{0.05, 0.6, 0.3});
  CHECK(std::abs(d.expectation_term + d.kl_term - mixture_reward(w3, r3)) <
        1e-12);
  CHECK(d.kl_term > 0.0);
}

TEST_CASE("optimal_expert_policy") {
  const Vector ref{0.1, 0.2, 0.7};
  const Vector flat = optimal_expert_policy(ref, Vector{3.0, 3.0, 3.0}, 0.4);
  for (std::size_t y = 0; y < 3; ++y) CHECK(flat[y] == Approx(ref[y]));
  const double beta = 0.3;
  const Vector two = optimal_expert_policy(
      Vector{0.5, 0.5}, Vector{beta * std::log(3.0), 0.0}, beta);
  CHECK(two[0] == Approx(0.75));
  CHECK(two[1] == Approx(0.25));
  CHECK_THROWS_AS(optimal_expert_policy(ref, Vector{0.0, 0.0, 0.0}, 0.0),
                  Error);
}

TEST_CASE("reward_from_policy") {
  const Vector ref{0.25, 0.25, 0.5};
  const double beta = 0.7;
  const double log_z = 0.3;
  // Policy equal to the reference with aligned posteriors: constant beta log Z.
  const Vector r =
      reward_from_policy(ref, ref, Vector{0.4, 0.4, 0.4}, 0.4, beta, log_z);
  for (double v : r) CHECK(v == Approx(beta * log_z));
  // Single expert: canonical transform.
  const Vector pi{0.2, 0.3, 0.5};
  const Vector one =
      reward_from_policy(pi, ref, Vector{1.0, 1.0, 1.0}, 1.0, beta, 0.0);
  for (std::size_t y = 0; y < 3; ++y) {
    CHECK(one[y] == Approx(beta * std::log(pi[y] / ref[y])));
  }
  CHECK_THROWS_AS(reward_from_policy(Vector{0.0, 1.0}, Vector{0.5, 0.5},
                                     Vector{1.0, 1.0}, 1.0, beta, 0.0),
                  Error);
}

TEST_CASE("gating_kl_objective") {
  const Vector q{0.3, 0.7};
  CHECK(gating_kl_objective(q, q) == 0.0);
  CHECK(gating_kl_objective(Vector{1.0, 0.0}, Vector{0.5, 0.5}) ==
        Approx(std::log(2.0)));
  CHECK(gating_kl_objective(Vector{0.5, 0.5}, Vector{1.0, 0.0}) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("dpo_loss") {
  CHECK(dpo_loss(0.1, -1.0, -1.0, -2.0, -2.0) == Approx(std::log(2.0)));
  const double margin = 0.5 * ((-1.0 + 1.5) - (-2.0 + 1.0));
  CHECK(dpo_loss(0.5, -1.0, -1.5, -2.0, -1.0) ==
        Approx(std::log1p(std::exp(-margin))));
}

TEST_CASE("softmax, entropy and KL") {
  const Vector p = softmax(Vector{1000.0, 1000.0, -1000.0});
  CHECK(p[0] == Approx(0.5));
  CHECK(p[2] == 0.0);
  CHECK(entropy(Vector{1.0, 0.0}) == 0.0);
  CHECK(entropy(Vector{0.5, 0.5}) == Approx(std::log(2.0)));
  CHECK(kl_divergence(Vector{0.0, 1.0}, Vector{0.5, 0.5}) ==
        Approx(std::log(2.0)));
  CHECK_THROWS_AS(check_simplex(Vector{0.5, 0.6}, 1e-9, "w"), Error);
  CHECK_NOTHROW(check_simplex(Vector{0.5, 0.5}, 1e-9, "w"));
}

}  // namespace
}  // namespace mixdpo::core
