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
// Gumbel-Softmax relaxation of the latent expert assignment with analytic
// reparameterization gradients.

#ifndef MIXDPO_MC_RELAX_HPP_
#define MIXDPO_MC_RELAX_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mixdpo/core/dataset.hpp"
#include "mixdpo/core/types.hpp"
#include "mixdpo/em/trainer.hpp"

namespace mixdpo::mc {

struct RelaxedSample {
  Vector z;
  Vector gumbels;
};

enum class AnnealMode { kConstant, kExponential };

// kTable trains reward tables directly. kPolicy trains policy logits with
// rewards tied to the policies; q_r and Z are held fixed within a step and
// the rewards are recomputed from the policies afterwards.
enum class RewardParam { kTable, kPolicy };

struct McConfig {
  double tau_start = 1.0;
  double tau_end = 0.1;
  AnnealMode anneal = AnnealMode::kExponential;
  int samples = 8;
  double kl_weight = 1.0;
  RewardParam reward_param = RewardParam::kTable;
  bool trainable_rewards = true;
  bool trainable_gating = true;
  core::LearningRate learning_rate{core::LrKind::kConstant, 1.0, 0.0};
  core::LearningRate gating_learning_rate{core::LrKind::kConstant, 1.0, 0.0};
  int epochs = 100;
  int batch_size = 0;
  std::uint64_t seed = 0;
  double beta = 0.1;
  em::RewardRule reward_rule = em::RewardRule::kCanonical;

  void validate() const;
};

// Noise per triplet: samples x K Gumbel draws.
using TripletNoise = std::vector<Vector>;

Vector sample_gumbels(int num_experts, std::mt19937_64& rng);

// z = softmax((logits + gumbels) / tau).
RelaxedSample relaxed_sample_from_noise(std::span<const double> logits,
                                        std::span<const double> gumbels,
                                        double tau);

RelaxedSample gumbel_softmax_sample(std::span<const double> logits, double tau,
                                    std::mt19937_64& rng);

// log w_k + log sigma_k.
Vector relaxed_logits(const core::Model& model,
                      const core::PreferenceTriplet& t);

// -(1/L) sum_l sum_k z_k log sigma_k.
double relaxed_mbt_loss(const core::PreferenceTriplet& t,
                        const core::Model& model,
                        std::span<const RelaxedSample> samples);

// (1/L) sum_l sum_k z_k log(z_k / w_k).
double relaxed_kl_estimate(std::span<const RelaxedSample> samples,
                           std::span<const double> weights);

double tau_schedule(int epoch, const McConfig& config);

struct McGradient {
  // Per expert: gradient over reward tables (kTable) or logits (kPolicy).
  std::vector<Matrix> experts;
  Vector fixed_logits;  // fixed gating, w = softmax(fixed_logits)
  Matrix gating_weight;
  Vector gating_bias;
};

// Mean over the batch of the relaxed loss plus kl_weight times the KL
// estimate, with frozen noise. In kPolicy mode the reward differences are
// taken from anchor and moved by beta times the change in policy log-ratios
// between anchor and model.
double mc_objective(std::span<const core::PreferenceTriplet> batch,
                    const core::Model& model,
                    std::span<const TripletNoise> noise, double tau,
                    double kl_weight, RewardParam param = RewardParam::kTable,
                    const core::Model* anchor = nullptr, double beta = 0.1);

// Analytic gradient of mc_objective at model == anchor.
McGradient mc_gradient(std::span<const core::PreferenceTriplet> batch,
                       const core::Model& model,
                       std::span<const TripletNoise> noise, double tau,
                       double kl_weight,
                       RewardParam param = RewardParam::kTable,
                       double beta = 0.1);

std::vector<TripletNoise> draw_noise(std::size_t count, int samples,
                                     int num_experts, std::mt19937_64& rng);

// One descent step on a batch; draws fresh noise from rng.
void mc_train_step(std::span<const core::PreferenceTriplet> batch,
                   core::Model& model, const McConfig& config, double tau,
                   double lr, double gating_lr, std::mt19937_64& rng);

em::TrainState mc_train(const core::Dataset& dataset, core::Model model,
                        const McConfig& config);

}  // namespace mixdpo::mc

#endif  // MIXDPO_MC_RELAX_HPP_
