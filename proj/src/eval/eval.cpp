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
#include "mixdpo/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixdpo/core/ops.hpp"
#include "mixdpo/em/trainer.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::eval {
namespace {

// Minimum-cost assignment for an n x m cost matrix with n <= m.
std::vector<int> min_cost_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace

std::vector<int> max_weight_assignment(const Matrix& weights) {
  const std::size_t n = weights.rows();
  const std::size_t m = weights.cols();
  require(n > 0 && m > 0, "assignment needs a nonempty matrix");
  for (double w : weights.data()) {
    require(std::isfinite(w), "assignment weights must be finite");
  }
  if (n <= m) {
    Matrix cost(n, m);
    for (std::size_t i = 0; i < n * m; ++i) cost.data()[i] = -weights.data()[i];
    return min_cost_assignment(cost);
  }
  Matrix cost(m, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) cost(c, r) = -weights(r, c);
  }
  const std::vector<int> col_to_row = min_cost_assignment(cost);
  std::vector<int> row_to_col(n, -1);
  for (std::size_t c = 0; c < m; ++c) {
    row_to_col[static_cast<std::size_t>(col_to_row[c])] = static_cast<int>(c);
  }
  return row_to_col;
}

std::vector<core::Responsibilities> posteriors(const core::Dataset& dataset,
                                               const core::Model& model) {
  return em::e_step(dataset.triplets, model);
}

double gating_accuracy(std::span<const core::PreferenceTriplet> triplets,
                       const core::Model& model,
                       std::span<const int> matching) {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& t : triplets) {
    if (!t.source_label) continue;
    const Vector w = model.weights_for(t);
    const int top =
        static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
    const auto s = static_cast<std::size_t>(*t.source_label);
    ++total;
    if (s < matching.size() && matching[s] == top) ++hits;
  }
  require(total > 0, "gating accuracy needs labelled triplets");
  return static_cast<double>(hits) / static_cast<double>(total);
}

Matrix greedy_reward_matrix(const synth::GroundTruth& gt,
                            const core::Model& model) {
  const int num_sources = gt.num_experts();
  const int num_k = model.space.num_experts;
  const int num_x = gt.space.num_prompts;
  Matrix out(static_cast<std::size_t>(num_sources),
             static_cast<std::size_t>(num_k));
  for (int k = 0; k < num_k; ++k) {
    const Matrix& logits = model.policies[static_cast<std::size_t>(k)].logits();
    for (int x = 0; x < num_x; ++x) {
      const auto row = logits.row(static_cast<std::size_t>(x));
      const auto y = static_cast<std::size_t>(
          std::max_element(row.begin(), row.end()) - row.begin());
      for (int s = 0; s < num_sources; ++s) {
        out(static_cast<std::size_t>(s), static_cast<std::size_t>(k)) +=
            gt.rewards[static_cast<std::size_t>(s)](static_cast<std::size_t>(x),
                                                    y) /
            num_x;
      }
    }
  }
  return out;
}

double recovery_tv(std::span<const core::PreferenceTriplet> triplets,
                   std::span<const core::Responsibilities> q,
                   const synth::GroundTruth& gt,
                   std::span<const int> matching) {
  require(triplets.size() == q.size(), "one posterior per triplet required");
  require(!triplets.empty(), "recovery distance needs triplets");
  double total = 0.0;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const Vector truth = synth::exact_bayes_posterior(gt, triplets[i]);
    // Mass of experts matched to no source is counted against the model.
    double diff = 0.0;
    double matched_mass = 0.0;
    for (std::size_t s = 0; s < truth.size(); ++s) {
      const double model_mass =
          matching[s] >= 0 ? q[i][static_cast<std::size_t>(matching[s])] : 0.0;
      matched_mass += model_mass;
      diff += std::abs(truth[s] - model_mass);
    }
    diff += std::max(0.0, 1.0 - matched_mass);
    total += 0.5 * diff;
  }
  return total / static_cast<double>(triplets.size());
}

Report evaluate(const core::Model& model, const core::Dataset& dataset,
                const synth::GroundTruth* gt) {
  model.validate();
  dataset.validate();
  require(model.space.num_prompts == dataset.space.num_prompts &&
              model.space.vocab_size == dataset.space.vocab_size,
          "dimension mismatch between checkpoint and dataset");
  require(model.user_feature_dim == dataset.user_feature_dim,
          "user feature dimension mismatch between checkpoint and dataset");
  if (gt) {
    require(gt->space.num_prompts == dataset.space.num_prompts &&
                gt->space.vocab_size == dataset.space.vocab_size &&
                gt->num_experts() == dataset.space.num_experts,
            "dimension mismatch between ground truth and dataset");
  }
  Report report;
  const int num_sources = dataset.num_sources();
  const int num_k = model.space.num_experts;
  const auto q = posteriors(dataset, model);
  report.source_responsibility =
      em::source_responsibilities(dataset.triplets, q, num_sources, num_k);
  report.matching = max_weight_assignment(report.source_responsibility);

  report.matched_per_source.assign(static_cast<std::size_t>(num_sources), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_sources), 0);
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& t = dataset.triplets[i];
    if (!t.source_label) continue;
    const auto s = static_cast<std::size_t>(*t.source_label);
    const int k = report.matching[s];
    const double v = k >= 0 ? q[i][static_cast<std::size_t>(k)] : 0.0;
    report.matched_per_source[s] += v;
    ++counts[s];
    total += v;
    ++report.labelled;
  }
  require(report.labelled > 0, "evaluation needs labelled triplets");
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s] > 0) report.matched_per_source[s] /= counts[s];
  }
  report.matched_mean = total / static_cast<double>(report.labelled);
  report.gating_accuracy =
      gating_accuracy(dataset.triplets, model, report.matching);
  if (gt) {
    report.greedy_reward = greedy_reward_matrix(*gt, model);
    report.recovery_tv = recovery_tv(dataset.triplets, q, *gt, report.matching);
  } else {
    report.recovery_tv = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

io::Json report_to_json(const Report& r) {
  io::Json j{
      {"labelled_triplets", r.labelled},
      {"source_responsibility", io::matrix_to_json(r.source_responsibility)},
      {"matching", r.matching},
      {"matched_responsibility_per_source", r.matched_per_source},
      {"matched_responsibility_mean", r.matched_mean},
      {"gating_accuracy", r.gating_accuracy}};
  if (!r.greedy_reward.empty()) {
    j["greedy_reward"] = io::matrix_to_json(r.greedy_reward);
    j["recovery_tv"] = r.recovery_tv;
  }
  return j;
}

}  // namespace mixdpo::eval
