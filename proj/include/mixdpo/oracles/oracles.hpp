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
// Reference implementations used to check the library: direct formulas,
// finite differences and a numeric simplex optimizer. Nothing here calls the
// library's own math.

#ifndef MIXDPO_ORACLES_ORACLES_HPP_
#define MIXDPO_ORACLES_ORACLES_HPP_

#include <cstddef>
#include <functional>
#include <vector>

namespace mixdpo::oracles {

using Vec = std::vector<double>;
using Objective = std::function<double(const Vec&)>;

// log sum_k w_k / (1 + exp(r-_k - r+_k)).
double log_marginal(const Vec& w, const Vec& r_plus, const Vec& r_minus);
Vec posterior(const Vec& w, const Vec& r_plus, const Vec& r_minus);
double elbo(const Vec& q, const Vec& w, const Vec& r_plus, const Vec& r_minus);

// log sum_k w_k exp(r_k), evaluated without shifting.
double mixture_reward(const Vec& w, const Vec& r);

// sum_y pi(y) corrected(y) - beta sum_y pi(y) log(pi(y) / ref(y)).
double expert_objective(const Vec& pi, const Vec& corrected, const Vec& ref,
                        double beta);

// -log sigmoid(beta (log(pi+/ref+) - log(pi-/ref-))) from probabilities.
double dpo_loss(double beta, double pi_plus, double ref_plus, double pi_minus,
                double ref_minus);

double tv_distance(const Vec& p, const Vec& q);

// Central differences of f at x with step eps.
Vec central_difference(const Objective& f, const Vec& x, double eps);

struct SimplexSolveOptions {
  int max_iters = 200;
  double grad_tol = 1e-11;
  double fd_step = 1e-4;
};

// Maximizer of a smooth concave f over the interior of the K-simplex found
// by damped Newton steps on logits (last logit pinned at 0) with
// finite-difference derivatives.
Vec maximize_on_simplex(const Objective& f, std::size_t k,
                        const SimplexSolveOptions& options = {});

// |count - n p| <= sigmas * sqrt(n p (1 - p)).
bool binomial_within(std::size_t count, std::size_t n, double p, double sigmas);

// Relative error |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor);

}  // namespace mixdpo::oracles

#endif  // MIXDPO_ORACLES_ORACLES_HPP_
