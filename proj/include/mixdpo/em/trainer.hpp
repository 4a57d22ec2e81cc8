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
// Variational EM for mixtures of DPO experts: E-step responsibilities,
// analytic policy gradients, reward recalibration and prior updates.

#ifndef MIXDPO_EM_TRAINER_HPP_
#define MIXDPO_EM_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mixdpo/core/dataset.hpp"
#include "mixdpo/core/types.hpp"
#include "mixdpo/em/optimizer.hpp"

namespace mixdpo::em {

enum class GatingMode { kMix, kMoe };
enum class PartitionMode { kExact, kMinibatch };
enum class WeightUpdate { kMinibatchAverage, kEma };

// kSinglePass applies the reward-from-policy map with the current q_r and w.
// kCanonical drops the log(q_r / w) term and sets r_k = beta log(pi_k Z / ref).
enum class RewardRule { kSinglePass, kCanonical };

struct TrainerConfig {
  GatingMode mode = GatingMode::kMix;
  bool trainable_policies = true;
  bool trainable_weights = true;
  OptimizerConfig optimizer;
  core::Hyperparams hyper;
  core::LearningRate gating_learning_rate{core::LrKind::kConstant, 1.0, 0.0};
  int epochs = 100;
  std::uint64_t seed = 0;
  PartitionMode partition_mode = PartitionMode::kExact;
  WeightUpdate weight_update = WeightUpdate::kMinibatchAverage;
  double ema_decay = 0.9;
  RewardRule reward_rule = RewardRule::kCanonical;

  void validate() const;
};

// Full-dataset ELBO immediately before and after one E-step.
struct EStepCheck {
  long long iteration = 0;
  double before = 0.0;
  double after = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  double elbo = 0.0;
  double mbt_loss = 0.0;
  double gating_ce = 0.0;
  double beta = 0.0;
  double tau = 0.0;
  core::Lambdas lambdas;
  Matrix source_responsibility;  // sources x K
};

struct TrainState {
  core::Model model;
  long long iteration = 0;
  int epoch = 0;
  // Entry 0 is the ELBO before training, then one entry per epoch.
  std::vector<double> elbo_trace;
  std::vector<EStepCheck> e_step_checks;
  std::vector<Matrix> responsibility_log;
  std::vector<EpochMetrics> metrics;
  // Stored responsibilities for every dataset triplet.
  std::vector<core::Responsibilities> q;
  std::vector<Optimizer> policy_optimizers;
  std::mt19937_64 rng;
  int stable_epochs = 0;
  bool converged = false;
};

// Extension points used by the regularized trainer.
struct TrainHooks {
  std::function<std::vector<core::Responsibilities>(
      std::span<const core::PreferenceTriplet>, const core::Model&, int epoch)>
      e_step;
  std::function<double(int epoch)> beta;
  std::function<core::Lambdas(int epoch)> lambdas;
};

// Standard posterior responsibilities for each triplet.
std::vector<core::Responsibilities> e_step(
    std::span<const core::PreferenceTriplet> batch, const core::Model& model);

// Descent gradient of the mean per-expert loss over the logits of expert k.
Matrix m_step_policy_gradient(std::span<const core::PreferenceTriplet> batch,
                              int k, const core::Model& model,
                              std::span<const core::Responsibilities> q,
                              double beta);

// Mean over the batch of sum_k per_expert_mbt_loss.
double batch_policy_loss(std::span<const core::PreferenceTriplet> batch,
                         const core::Model& model,
                         std::span<const core::Responsibilities> q,
                         double beta);

// Recomputes r_k(x, .) for every expert and every listed prompt. In minibatch
// partition mode Z_k sums only over batch_responses.
std::vector<core::RewardTable> reward_update(
    std::span<const int> prompts, std::span<const int> batch_responses,
    const core::Model& model, double beta,
    PartitionMode partition_mode = PartitionMode::kExact,
    RewardRule rule = RewardRule::kSinglePass);

// Batch-mean responsibilities, or an EMA blend with the previous weights.
Vector prior_update_mix(std::span<const core::Responsibilities> q,
                        std::span<const double> previous,
                        WeightUpdate mode = WeightUpdate::kMinibatchAverage,
                        double ema_decay = 0.9);

struct GatingGradient {
  Matrix weight;
  Vector bias;
};

// -(1/n) sum_i sum_k q_ik log w_k(x_i).
double gating_cross_entropy(std::span<const core::PreferenceTriplet> batch,
                            std::span<const core::Responsibilities> q,
                            const core::Model& model);

// Gradient of the gating cross-entropy plus lambda_global times the mean
// KL(w(x_i) || uniform) over the batch.
GatingGradient gating_gradient(std::span<const core::PreferenceTriplet> batch,
                               std::span<const core::Responsibilities> q,
                               const core::Model& model,
                               double lambda_global = 0.0);

// One gradient step on the gating cross-entropy.
core::LinearGating prior_update_gating(
    std::span<const core::PreferenceTriplet> batch,
    std::span<const core::Responsibilities> q, const core::Model& model,
    double lr, double lambda_global = 0.0);

// Mean ELBO over the dataset with the supplied responsibilities.
double dataset_elbo(std::span<const core::PreferenceTriplet> triplets,
                    const core::Model& model,
                    std::span<const core::Responsibilities> q);

// Mean negative log marginal likelihood.
double dataset_mbt_loss(std::span<const core::PreferenceTriplet> triplets,
                        const core::Model& model);

// Mean responsibility per source label; rows without data are uniform.
Matrix source_responsibilities(
    std::span<const core::PreferenceTriplet> triplets,
    std::span<const core::Responsibilities> q, int num_sources, int num_k);

// Fresh state with q set to the prior weights.
TrainState make_train_state(const core::Dataset& dataset, core::Model model,
                            const TrainerConfig& config);

// Runs epochs until the configured count, max_iters or convergence.
void run_training(TrainState& state, const core::Dataset& dataset,
                  const TrainerConfig& config, const TrainHooks& hooks = {});

TrainState train(const core::Dataset& dataset, core::Model model,
                 const TrainerConfig& config, const TrainHooks& hooks = {});

// Throws NumericError if any model parameter is not finite.
void check_model_finite(const core::Model& model, long long iteration,
                        int epoch);

}  // namespace mixdpo::em

#endif  // MIXDPO_EM_TRAINER_HPP_
