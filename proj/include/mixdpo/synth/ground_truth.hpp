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
// Synthetic mixture-of-Bradley-Terry ground truth and triplet sampling.

#ifndef MIXDPO_SYNTH_GROUND_TRUTH_HPP_
#define MIXDPO_SYNTH_GROUND_TRUTH_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mixdpo/core/dataset.hpp"
#include "mixdpo/core/types.hpp"

namespace mixdpo::synth {

enum class PairSampling { kUniform, kReference };

struct GroundTruthOptions {
  // Gating mass on a prompt's own group; the rest is spread evenly.
  double own_mass = 0.8;
  // Scale of the reward component shared by all experts.
  double base_scale = 0.5;
  // Prompt-specific jitter added to each expert's response style.
  double style_noise = 0.3;
  // Std. dev. of the reference policy logits.
  double reference_scale = 0.5;
  // Group one-hot amplitude and noise of the prompt features.
  double feature_signal = 1.0;
  double feature_noise = 0.2;
  // Extra pure-noise feature dimensions.
  int nuisance_dims = 0;
  double nuisance_scale = 1.0;
  PairSampling pair_sampling = PairSampling::kUniform;
  // Task chosen per triplet from user features instead of the prompt group.
  // Each triplet draws a user group uniformly; its user features are the
  // group one-hot times user_signal plus noise, followed by nuisance dims.
  bool user_tasks = false;
  double user_signal = 1.0;
  double user_noise = 0.3;
  int user_nuisance_dims = 0;

  int user_feature_dim(int num_experts) const {
    return user_tasks ? num_experts + user_nuisance_dims : 0;
  }
  void validate() const;
  bool operator==(const GroundTruthOptions& other) const = default;
};

struct GroundTruth {
  core::ProblemSpace space;
  std::vector<Matrix> rewards;  // K tables of shape |X| x |Y|
  Matrix gating;                // |X| x K, row x is w*(x)
  // With user tasks: w*(u) = softmax(user_gate * u); gating is unused.
  std::optional<core::LinearGating> user_gate;
  core::ReferencePolicy reference;
  std::vector<int> prompt_group;
  std::uint64_t seed = 0;
  double separation = 0.0;
  GroundTruthOptions options;

  int num_experts() const { return static_cast<int>(rewards.size()); }
  Vector weights_at(int x) const;
  Vector weights_for(const core::PreferenceTriplet& t) const;
  Vector rewards_at(int x, int y) const;

  bool operator==(const GroundTruth& other) const = default;
};

// r*_k = base + separation * dev_k where dev_k is a per-expert response style
// plus prompt jitter, centered across experts. Prompts are split into K
// groups with block gating, or with user tasks the gate is linear in the user
// features with own-group mass own_mass at the group centers.
GroundTruth make_ground_truth(int num_experts, int num_prompts, int vocab_size,
                              double separation, std::uint64_t seed,
                              const GroundTruthOptions& options = {});

// Draws x, a pair, a latent expert z ~ w*(x) and the BT outcome under r*_z.
std::vector<core::PreferenceTriplet> sample_triplets(const GroundTruth& gt,
                                                     int count,
                                                     std::mt19937_64& rng);

core::Dataset make_dataset(const GroundTruth& gt, int count,
                           std::mt19937_64& rng);

// Posterior over z given the observed preference under the true model.
core::Responsibilities exact_bayes_posterior(const GroundTruth& gt,
                                             const core::PreferenceTriplet& t);

// The ground truth as a Model: one-hot prompt features with linear gating
// reproducing w*, true rewards and the closed-form optimal policies.
core::Model ground_truth_model(const GroundTruth& gt, double beta);

}  // namespace mixdpo::synth

#endif  // MIXDPO_SYNTH_GROUND_TRUTH_HPP_
