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
#include "mixdpo/em/init.hpp"

#include <random>

#include "mixdpo/error.hpp"

namespace mixdpo::em {

core::Model init_model(const core::Dataset& dataset,
                       const InitOptions& options) {
  require(options.num_experts >= 1, "need at least one expert");
  require(options.beta > 0.0, "beta must be positive");
  dataset.space.validate();
  const int num_k = options.num_experts;
  const int num_x = dataset.space.num_prompts;
  const int num_y = dataset.space.vocab_size;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  core::Model model;
  model.space = dataset.space;
  model.space.num_experts = num_k;
  model.user_feature_dim = dataset.user_feature_dim;
  const int refs = options.per_expert_reference ? num_k : 1;
  model.references.assign(refs, dataset.reference);

  Matrix shared(num_x, num_y);
  for (double& v : shared.data()) v = options.policy_noise * noise(rng);
  for (int k = 0; k < num_k; ++k) {
    const core::ReferencePolicy& ref = model.reference(k);
    Matrix logits(num_x, num_y);
    for (int x = 0; x < num_x; ++x) {
      for (int y = 0; y < num_y; ++y) {
        const double eps =
            options.tied ? shared(x, y) : options.policy_noise * noise(rng);
        logits(x, y) = ref.log_prob(x, y) + eps;
      }
    }
    model.policies.emplace_back(std::move(logits));
    core::RewardTable reward{Matrix(num_x, num_y)};
    for (int x = 0; x < num_x; ++x) {
      const Vector log_pi = model.policies[k].log_probs(x);
      for (int y = 0; y < num_y; ++y) {
        reward.values(x, y) = options.beta * (log_pi[y] - ref.log_prob(x, y));
      }
    }
    model.rewards.push_back(std::move(reward));
  }

  if (options.mode == GatingMode::kMix) {
    model.gating = core::Gating::uniform(num_k);
  } else {
    const int dim = dataset.space.feature_dim() + dataset.user_feature_dim;
    Matrix weight(num_k, dim);
    for (double& v : weight.data()) v = options.gating_noise * noise(rng);
    model.gating = core::Gating::linear(std::move(weight), Vector(num_k, 0.0));
  }
  model.validate();
  return model;
}

}  // namespace mixdpo::em
