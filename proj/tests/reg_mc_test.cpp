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
#include <random>
#include <vector>

#include "doctest.h"
#include "mixdpo/core/types.hpp"
#include "mixdpo/error.hpp"
#include "mixdpo/mc/relax.hpp"
#include "mixdpo/reg/regularized.hpp"

namespace mixdpo {
namespace {

using doctest::Approx;

core::Model fixed_model(const Vector& w, int num_prompts, int vocab) {
  core::Model m;
  m.space =
      core::ProblemSpace::make(num_prompts, vocab, static_cast<int>(w.size()));
  for (std::size_t k = 0; k < w.size(); ++k) {
    m.policies.emplace_back(Matrix(num_prompts, vocab));
    m.rewards.push_back(core::RewardTable{Matrix(num_prompts, vocab)});
  }
  m.gating = core::Gating::fixed(w);
  m.references.push_back(core::ReferencePolicy::uniform(num_prompts, vocab));
  return m;
}

TEST_CASE("regularized_posterior") {
  core::Lambdas conf_only;
  conf_only.conf = 1.0;
  const Vector u{std::log(3.0), 0.0};
  const Vector a = reg::regularized_posterior(u, Vector{0.9, 0.1}, conf_only);
  CHECK(a[0] == Approx(0.75));
  CHECK(a[1] == Approx(0.25));

  core::Lambdas standard;
  standard.kl_w = 1.0;
  const Vector w{0.25, 0.75};
  const Vector b = reg::regularized_posterior(u, w, standard);
  CHECK(b[0] == Approx(0.5));
  CHECK(b[1] == Approx(0.5));

  core::Lambdas flat;
  flat.kl_unif = 1e6;
  const Vector c = reg::regularized_posterior(Vector{5.0, -5.0, 0.0},
                                              Vector{0.2, 0.3, 0.5}, flat);
  for (double v : c) CHECK(v == Approx(1.0 / 3.0).epsilon(1e-4));

  core::Lambdas bad;
  bad.ent = 1.0;
  CHECK_THROWS_WITH_AS(
      reg::regularized_posterior(u, w, bad),
      "ill-posed regularization (nonpositive effective temperature)", Error);
}

TEST_CASE("global_weight_regularizer") {
  const std::vector<int> prompts{0, 1};
  CHECK(reg::global_weight_regularizer(fixed_model({0.5, 0.5}, 2, 3),
                                       prompts) == Approx(0.0).scale(1.0));
  CHECK(reg::global_weight_regularizer(fixed_model({1.0, 0.0, 0.0}, 2, 3),
                                       prompts) == Approx(std::log(3.0)));
  const double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(reg::global_weight_regularizer(fixed_model({0.75, 0.25}, 2, 3),
                                       prompts) == Approx(expected));
  CHECK(expected == Approx(0.1308).epsilon(1e-3));
}

TEST_CASE("default schedule phases") {
  const reg::RegSchedule s = reg::RegSchedule::default_schedule(30, 0.1);
  REQUIRE(s.phases.size() == 3);
  CHECK(s.phases[1].start_epoch == 10);
  CHECK(s.phases[2].start_epoch == 20);
  CHECK(&s.active(0) == &s.phases[0]);
  CHECK(&s.active(15) == &s.phases[1]);
  CHECK(&s.active(99) == &s.phases[2]);
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("relaxed_kl_estimate") {
  const Vector w{0.5, 0.5};
  std::vector<mc::RelaxedSample> same{{w, {}}};
  CHECK(mc::relaxed_kl_estimate(same, w) == Approx(0.0).scale(1.0));
  std::vector<mc::RelaxedSample> one{{Vector{1.0}, {}}};
  CHECK(mc::relaxed_kl_estimate(one, Vector{1.0}) == 0.0);
  std::vector<mc::RelaxedSample> skew{{Vector{0.8, 0.2}, {}}};
  const double expected = 0.8 * std::log(1.6) + 0.2 * std::log(0.4);
  CHECK(mc::relaxed_kl_estimate(skew, w) == Approx(expected));
  CHECK(expected == Approx(0.1927).epsilon(1e-3));
}

TEST_CASE("relaxed samples") {
  const mc::RelaxedSample s =
      mc::relaxed_sample_from_noise(Vector{0.0, 0.0}, Vector{1.0, 0.0}, 1.0);
  CHECK(s.z[0] == Approx(1.0 / (1.0 + std::exp(-1.0))));
  const mc::RelaxedSample sharp =
      mc::relaxed_sample_from_noise(Vector{0.0, 0.0}, Vector{1.0, 0.0}, 1e-4);
  CHECK(sharp.z[1] > 0.0);
  CHECK(sharp.z[0] == Approx(1.0));
  std::mt19937_64 rng(7);
  const mc::RelaxedSample g =
      mc::gumbel_softmax_sample(Vector{0.1, -0.4, 2.0}, 0.5, rng);
  double total = 0.0;
  for (double v : g.z) total += v;
  CHECK(total == Approx(1.0));
}

TEST_CASE("tau_schedule") {
  mc::McConfig c;
  c.tau_start = 1.0;
  c.tau_end = 0.01;
  c.epochs = 100;
  CHECK(mc::tau_schedule(0, c) == Approx(1.0));
  CHECK(mc::tau_schedule(50, c) == Approx(0.1));
  CHECK(mc::tau_schedule(100, c) == Approx(0.01));
  c.anneal = mc::AnnealMode::kConstant;
  CHECK(mc::tau_schedule(70, c) == 1.0);
}

TEST_CASE("mc_train_step with zero learning rate leaves the model") {
  core::Model m = fixed_model({0.3, 0.7}, 2, 3);
  m.rewards[0].values(0, 1) = 0.4;
  const core::Model before = m;
  std::vector<core::PreferenceTriplet> batch{{0, 1, 2, {}, {}},
                                             {1, 0, 2, {}, {}}};
  mc::McConfig c;
  std::mt19937_64 rng(3);
  mc::mc_train_step(batch, m, c, 0.5, 0.0, 0.0, rng);
  CHECK(m == before);
}

}  // namespace
}  // namespace mixdpo
