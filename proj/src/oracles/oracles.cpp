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
#include "mixdpo/oracles/oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace mixdpo::oracles {
namespace {

Vec probs_from_free(const Vec& theta) {
  Vec q(theta.size() + 1, 0.0);
  double top = 0.0;
  for (double t : theta) top = std::max(top, t);
  double total = std::exp(-top);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    q[i] = std::exp(theta[i] - top);
    total += q[i];
  }
  q.back() = std::exp(-top);
  for (double& v : q) v /= total;
  return q;
}

}  // namespace

double log_marginal(const Vec& w, const Vec& r_plus, const Vec& r_minus) {
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    total += w[k] / (1.0 + std::exp(r_minus[k] - r_plus[k]));
  }
  return std::log(total);
}

Vec posterior(const Vec& w, const Vec& r_plus, const Vec& r_minus) {
  Vec q(w.size());
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    q[k] = w[k] / (1.0 + std::exp(r_minus[k] - r_plus[k]));
    total += q[k];
  }
  for (double& v : q) v /= total;
  return q;
}

double elbo(const Vec& q, const Vec& w, const Vec& r_plus, const Vec& r_minus) {
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] == 0.0) continue;
    const double joint = w[k] / (1.0 + std::exp(r_minus[k] - r_plus[k]));
    total += q[k] * std::log(joint / q[k]);
  }
  return total;
}

double mixture_reward(const Vec& w, const Vec& r) {
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) total += w[k] * std::exp(r[k]);
  return std::log(total);
}

double expert_objective(const Vec& pi, const Vec& corrected, const Vec& ref,
                        double beta) {
  double total = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) {
    if (pi[y] == 0.0) continue;
    total += pi[y] * (corrected[y] - beta * std::log(pi[y] / ref[y]));
  }
  return total;
}

double dpo_loss(double beta, double pi_plus, double ref_plus, double pi_minus,
                double ref_minus) {
  const double margin =
      beta * (std::log(pi_plus / ref_plus) - std::log(pi_minus / ref_minus));
  return std::log1p(std::exp(-margin));
}

double tv_distance(const Vec& p, const Vec& q) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - q[i]);
  return 0.5 * total;
}

Vec central_difference(const Objective& f, const Vec& x, double eps) {
  Vec grad(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

Vec maximize_on_simplex(const Objective& f, std::size_t k,
                        const SimplexSolveOptions& options) {
  if (k == 1) return Vec{1.0};
  const std::size_t n = k - 1;
  const auto g = [&](const Vec& theta) { return f(probs_from_free(theta)); };
  const double h = options.fd_step;
  Vec theta(n, 0.0);
  double value = g(theta);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    const Vec grad = central_difference(g, theta, 1e-6);
    Eigen::VectorXd gv(static_cast<Eigen::Index>(n));
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gv[static_cast<Eigen::Index>(i)] = grad[i];
      norm = std::max(norm, std::abs(grad[i]));
    }
    if (norm < options.grad_tol) break;
    Eigen::MatrixXd hess(static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        Vec t = theta;
        auto at = [&](double di, double dj) {
          t = theta;
          t[i] += di;
          t[j] += dj;
          return g(t);
        };
        const double v =
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        hess(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    }
    // Ascent direction from the negated Hessian with eigenvalues replaced by
    // their magnitudes (floored), which keeps the step an ascent direction.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hess);
    Eigen::VectorXd lambda = eig.eigenvalues().cwiseAbs().cwiseMax(1e-8);
    Eigen::VectorXd newton =
        eig.eigenvectors() *
        (eig.eigenvectors().transpose() * gv).cwiseQuotient(lambda);
    Eigen::VectorXd steepest = gv;
    // Backtracking line search along a direction capped at length 5.
    const auto try_direction = [&](Eigen::VectorXd dir) {
      const double len = dir.cwiseAbs().maxCoeff();
      if (len > 5.0) dir *= 5.0 / len;
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls) {
        Vec cand = theta;
        for (std::size_t i = 0; i < n; ++i) {
          cand[i] += t * dir[static_cast<Eigen::Index>(i)];
        }
        const double cv = g(cand);
        if (cv > value) {
          theta = cand;
          value = cv;
          return true;
        }
        t *= 0.5;
      }
      return false;
    };
    if (!try_direction(newton) && !try_direction(steepest)) break;
  }
  return probs_from_free(theta);
}

bool binomial_within(std::size_t count, std::size_t n, double p,
                     double sigmas) {
  const double mean = static_cast<double>(n) * p;
  const double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
  return std::abs(static_cast<double>(count) - mean) <= sigmas * sd;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace mixdpo::oracles
