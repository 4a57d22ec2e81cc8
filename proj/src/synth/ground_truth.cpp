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
#include "mixdpo/synth/ground_truth.hpp"

#include <algorithm>
#include <cmath>

#include "mixdpo/core/model_ops.hpp"
#include "mixdpo/core/ops.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::synth {

void GroundTruthOptions::validate() const {
  require(own_mass > 0.0 && own_mass <= 1.0, "own_mass must be in (0, 1]");
  require(base_scale >= 0.0 && style_noise >= 0.0 && reference_scale >= 0.0,
          "scales must be >= 0");
  require(feature_noise >= 0.0 && nuisance_scale >= 0.0,
          "feature noise must be >= 0");
  require(nuisance_dims >= 0, "nuisance_dims must be >= 0");
  require(user_signal > 0.0 && user_noise >= 0.0,
          "invalid user feature scales");
  require(user_nuisance_dims >= 0, "user_nuisance_dims must be >= 0");
}

Vector GroundTruth::weights_at(int x) const {
  const auto row = gating.row(x);
  return Vector(row.begin(), row.end());
}

Vector GroundTruth::weights_for(const core::PreferenceTriplet& t) const {
  if (!user_gate) return weights_at(t.prompt_id);
  require(t.user_features.size() == user_gate->weight.cols(),
          "user feature dimension mismatch");
  return core::Gating::linear(user_gate->weight, user_gate->bias)
      .weights(t.user_features);
}

Vector GroundTruth::rewards_at(int x, int y) const {
  Vector out(rewards.size());
  for (std::size_t k = 0; k < rewards.size(); ++k) out[k] = rewards[k](x, y);
  return out;
}

GroundTruth make_ground_truth(int num_experts, int num_prompts, int vocab_size,
                              double separation, std::uint64_t seed,
                              const GroundTruthOptions& options) {
  require(num_experts >= 1, "need at least one expert");
  require(num_prompts >= 1, "need at least one prompt");
  require(vocab_size >= 2, "need at least two responses");
  require(separation >= 0.0 && std::isfinite(separation),
          "separation must be >= 0");
  options.validate();
  const int num_k = num_experts;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  GroundTruth gt;
  gt.seed = seed;
  gt.separation = separation;
  gt.options = options;
  gt.prompt_group.resize(num_prompts);
  for (int x = 0; x < num_prompts; ++x) gt.prompt_group[x] = x % num_k;

  Matrix base(num_prompts, vocab_size);
  for (double& v : base.data()) v = options.base_scale * normal(rng);
  Matrix style(num_k, vocab_size);
  for (double& v : style.data()) v = normal(rng);
  std::vector<Matrix> dev(num_k, Matrix(num_prompts, vocab_size));
  for (int k = 0; k < num_k; ++k) {
    for (int x = 0; x < num_prompts; ++x) {
      for (int y = 0; y < vocab_size; ++y) {
        dev[k](x, y) = style(k, y) + options.style_noise * normal(rng);
      }
    }
  }
  for (int x = 0; x < num_prompts; ++x) {
    for (int y = 0; y < vocab_size; ++y) {
      double mean = 0.0;
      for (int k = 0; k < num_k; ++k) mean += dev[k](x, y);
      mean /= num_k;
      for (int k = 0; k < num_k; ++k) dev[k](x, y) -= mean;
    }
  }
  gt.rewards.assign(num_k, base);
  for (int k = 0; k < num_k; ++k) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      gt.rewards[k].data()[i] += separation * dev[k].data()[i];
    }
  }

  gt.gating = Matrix(num_prompts, num_k);
  if (options.user_tasks) {
    Matrix weight(num_k, options.user_feature_dim(num_k));
    if (num_k > 1) {
      const double own = std::min(options.own_mass, 1.0 - 1e-9);
      const double kappa =
          std::log(own * (num_k - 1) / (1.0 - own)) / options.user_signal;
      for (int k = 0; k < num_k; ++k) weight(k, k) = kappa;
    }
    gt.user_gate = core::LinearGating{std::move(weight), Vector(num_k, 0.0)};
  }
  for (int x = 0; x < num_prompts; ++x) {
    for (int k = 0; k < num_k; ++k) {
      if (num_k == 1 || options.user_tasks) {
        gt.gating(x, k) = 1.0 / num_k;
      } else {
        gt.gating(x, k) = k == gt.prompt_group[x]
                              ? options.own_mass
                              : (1.0 - options.own_mass) / (num_k - 1);
      }
    }
  }

  Matrix ref_logits(num_prompts, vocab_size);
  for (double& v : ref_logits.data()) v = options.reference_scale * normal(rng);
  gt.reference = core::ReferencePolicy::from_logits(ref_logits);

  const int dim = num_k + options.nuisance_dims;
  gt.space.num_prompts = num_prompts;
  gt.space.vocab_size = vocab_size;
  gt.space.num_experts = num_k;
  gt.space.prompt_features = Matrix(num_prompts, dim);
  for (int x = 0; x < num_prompts; ++x) {
    for (int j = 0; j < num_k; ++j) {
      gt.space.prompt_features(x, j) =
          (j == gt.prompt_group[x] ? options.feature_signal : 0.0) +
          options.feature_noise * normal(rng);
    }
    for (int j = num_k; j < dim; ++j) {
      gt.space.prompt_features(x, j) = options.nuisance_scale * normal(rng);
    }
  }
  gt.space.validate();
  return gt;
}

std::vector<core::PreferenceTriplet> sample_triplets(const GroundTruth& gt,
                                                     int count,
                                                     std::mt19937_64& rng) {
  if (count < 1) throw Error("empty dataset requested");
  const int num_x = gt.space.num_prompts;
  const int num_y = gt.space.vocab_size;
  require(num_y >= 2, "need at least two responses");
  std::uniform_int_distribution<int> pick_x(0, num_x - 1);
  std::uniform_int_distribution<int> pick_a(0, num_y - 1);
  std::uniform_int_distribution<int> pick_b(0, num_y - 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_group(0, gt.num_experts() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const GroundTruthOptions& opt = gt.options;
  std::vector<core::PreferenceTriplet> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int x = pick_x(rng);
    int a = 0;
    int b = 0;
    if (gt.options.pair_sampling == PairSampling::kUniform) {
      a = pick_a(rng);
      b = pick_b(rng);
      if (b >= a) ++b;
    } else {
      const Vector probs = gt.reference.probs(x);
      std::discrete_distribution<int> pick_ref(probs.begin(), probs.end());
      a = pick_ref(rng);
      do {
        b = pick_ref(rng);
      } while (b == a);
    }
    core::PreferenceTriplet t;
    t.prompt_id = x;
    if (opt.user_tasks) {
      const int group = pick_group(rng);
      const int k_count = gt.num_experts();
      t.user_features.resize(opt.user_feature_dim(k_count));
      for (int j = 0; j < k_count; ++j) {
        t.user_features[j] =
            (j == group ? opt.user_signal : 0.0) + opt.user_noise * normal(rng);
      }
      for (std::size_t j = k_count; j < t.user_features.size(); ++j) {
        t.user_features[j] = opt.nuisance_scale * normal(rng);
      }
    }
    const Vector w = gt.weights_for(t);
    std::discrete_distribution<int> pick_z(w.begin(), w.end());
    const int z = pick_z(rng);
    const double p_a = core::bt_sigma(gt.rewards[z](x, a), gt.rewards[z](x, b));
    if (unit(rng) < p_a) {
      t.y_plus = a;
      t.y_minus = b;
    } else {
      t.y_plus = b;
      t.y_minus = a;
    }
    t.source_label = z;
    out.push_back(std::move(t));
  }
  return out;
}

core::Dataset make_dataset(const GroundTruth& gt, int count,
                           std::mt19937_64& rng) {
  core::Dataset data;
  data.space = gt.space;
  data.reference = gt.reference;
  data.user_feature_dim = gt.options.user_feature_dim(gt.num_experts());
  data.triplets = sample_triplets(gt, count, rng);
  return data;
}

core::Responsibilities exact_bayes_posterior(const GroundTruth& gt,
                                             const core::PreferenceTriplet& t) {
  require(t.prompt_id >= 0 && t.prompt_id < gt.space.num_prompts,
          "prompt_id out of range");
  require(t.y_plus >= 0 && t.y_plus < gt.space.vocab_size && t.y_minus >= 0 &&
              t.y_minus < gt.space.vocab_size,
          "response index out of range");
  Vector sigmas(gt.num_experts());
  for (int k = 0; k < gt.num_experts(); ++k) {
    sigmas[k] = core::bt_sigma(gt.rewards[k](t.prompt_id, t.y_plus),
                               gt.rewards[k](t.prompt_id, t.y_minus));
  }
  return core::mbt_posterior(gt.weights_for(t), sigmas);
}

core::Model ground_truth_model(const GroundTruth& gt, double beta) {
  const int num_k = gt.num_experts();
  const int num_x = gt.space.num_prompts;
  const int num_y = gt.space.vocab_size;
  core::Model model;
  model.space = core::ProblemSpace::make(num_x, num_y, num_k);
  model.references = {gt.reference};
  const int user_dim = gt.options.user_feature_dim(num_k);
  model.user_feature_dim = user_dim;
  Matrix weight(num_k, num_x + user_dim);
  for (int k = 0; k < num_k; ++k) {
    if (gt.user_gate) {
      for (int j = 0; j < user_dim; ++j) {
        weight(k, num_x + j) = gt.user_gate->weight(k, j);
      }
    } else {
      for (int x = 0; x < num_x; ++x) {
        weight(k, x) = core::safe_log(gt.gating(x, k));
      }
    }
  }
  model.gating = core::Gating::linear(std::move(weight), Vector(num_k, 0.0));
  for (int k = 0; k < num_k; ++k) {
    model.rewards.push_back(core::RewardTable{gt.rewards[k]});
    model.policies.emplace_back(Matrix(num_x, num_y));
  }
  for (int k = 0; k < num_k; ++k) {
    Matrix logits(num_x, num_y);
    for (int x = 0; x < num_x; ++x) {
      const Vector pi = core::optimal_policy_for_expert(model, k, x, beta);
      for (int y = 0; y < num_y; ++y) logits(x, y) = core::safe_log(pi[y]);
    }
    model.policies[k] = core::ExpertPolicy(std::move(logits));
  }
  model.validate();
  return model;
}

}  // namespace mixdpo::synth
