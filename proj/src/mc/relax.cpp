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
#include "mixdpo/mc/relax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "mixdpo/core/model_ops.hpp"
#include "mixdpo/core/ops.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::mc {
namespace {

using core::PreferenceTriplet;

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error("tau must be positive and finite");
  }
}

double log_or_neg_inf(double p) {
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

// Reward differences d_k = r_k(x,y+) - r_k(x,y-) under the chosen
// parameterization.
Vector reward_differences(const PreferenceTriplet& t, const core::Model& model,
                          RewardParam param, const core::Model* anchor,
                          double beta) {
  const int num_k = model.num_experts();
  Vector d(num_k);
  const bool tied = param == RewardParam::kPolicy && anchor != nullptr;
  const core::Model& base = tied ? *anchor : model;
  for (int k = 0; k < num_k; ++k) {
    d[k] = base.rewards[k](t.prompt_id, t.y_plus) -
           base.rewards[k](t.prompt_id, t.y_minus);
    if (tied) {
      const Vector now = model.policies[k].log_probs(t.prompt_id);
      const Vector then = anchor->policies[k].log_probs(t.prompt_id);
      d[k] += beta * ((now[t.y_plus] - now[t.y_minus]) -
                      (then[t.y_plus] - then[t.y_minus]));
    }
  }
  return d;
}

struct TripletTerms {
  Vector log_w;
  Vector d;
  Vector log_sigma;
};

TripletTerms triplet_terms(const PreferenceTriplet& t, const core::Model& model,
                           RewardParam param, const core::Model* anchor,
                           double beta) {
  TripletTerms terms;
  if (model.gating.is_fixed()) {
    for (double w : model.gating.fixed_params().weights) {
      terms.log_w.push_back(log_or_neg_inf(w));
    }
  } else {
    terms.log_w = model.gating.log_weights(
        model.gate_input(t.prompt_id, t.user_features));
  }
  terms.d = reward_differences(t, model, param, anchor, beta);
  terms.log_sigma.resize(terms.d.size());
  for (std::size_t k = 0; k < terms.d.size(); ++k) {
    terms.log_sigma[k] = core::log_sigmoid(terms.d[k]);
  }
  return terms;
}

void check_noise(std::span<const PreferenceTriplet> batch,
                 std::span<const TripletNoise> noise) {
  require(noise.size() == batch.size(), "noise must match the batch");
  for (const auto& n : noise) require(!n.empty(), "need at least one sample");
}

}  // namespace

void McConfig::validate() const {
  if (!(tau_end > 0.0) || !(tau_start >= tau_end) ||
      !std::isfinite(tau_start)) {
    throw Error("invalid temperature bounds");
  }
  require(samples >= 1, "samples must be >= 1");
  require(kl_weight >= 0.0, "kl_weight must be >= 0");
  learning_rate.validate();
  gating_learning_rate.validate();
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 0, "batch_size must be >= 0");
  require(beta > 0.0, "beta must be positive");
}

Vector sample_gumbels(int num_experts, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector g(num_experts);
  for (double& v : g) {
    double u = 0.0;
    do {
      u = unit(rng);
    } while (u <= 0.0);
    v = -std::log(-std::log(u));
  }
  return g;
}

RelaxedSample relaxed_sample_from_noise(std::span<const double> logits,
                                        std::span<const double> gumbels,
                                        double tau) {
  require_tau(tau);
  require(logits.size() == gumbels.size(), "length mismatch");
  Vector u(logits.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    u[k] = (logits[k] + gumbels[k]) / tau;
  }
  Vector z = core::softmax(u);
  // Keeps the sample interior when tiny temperatures underflow a coordinate.
  for (double& v : z) v = std::max(v, std::numeric_limits<double>::min());
  return RelaxedSample{std::move(z), Vector(gumbels.begin(), gumbels.end())};
}

RelaxedSample gumbel_softmax_sample(std::span<const double> logits, double tau,
                                    std::mt19937_64& rng) {
  require_tau(tau);
  const Vector g = sample_gumbels(static_cast<int>(logits.size()), rng);
  return relaxed_sample_from_noise(logits, g, tau);
}

Vector relaxed_logits(const core::Model& model, const PreferenceTriplet& t) {
  const TripletTerms terms =
      triplet_terms(t, model, RewardParam::kTable, nullptr, 0.0);
  Vector out(terms.d.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = terms.log_w[k] + terms.log_sigma[k];
  }
  return out;
}

double relaxed_mbt_loss(const PreferenceTriplet& t, const core::Model& model,
                        std::span<const RelaxedSample> samples) {
  require(!samples.empty(), "need at least one sample");
  const Vector log_sigma = core::expert_log_sigmas(model, t);
  double total = 0.0;
  for (const auto& s : samples) {
    require(s.z.size() == log_sigma.size(), "sample length mismatch");
    for (std::size_t k = 0; k < log_sigma.size(); ++k) {
      total -= s.z[k] * log_sigma[k];
    }
  }
  return total / static_cast<double>(samples.size());
}

double relaxed_kl_estimate(std::span<const RelaxedSample> samples,
                           std::span<const double> weights) {
  require(!samples.empty(), "need at least one sample");
  double total = 0.0;
  for (const auto& s : samples) {
    const double kl = core::kl_divergence(s.z, weights);
    if (std::isinf(kl)) return kl;
    total += kl;
  }
  return total / static_cast<double>(samples.size());
}

double tau_schedule(int epoch, const McConfig& config) {
  if (!(config.tau_end > 0.0) || !(config.tau_start >= config.tau_end)) {
    throw Error("invalid temperature bounds");
  }
  if (config.anneal == AnnealMode::kConstant) return config.tau_start;
  const double ratio =
      config.epochs > 0
          ? std::clamp(static_cast<double>(epoch) / config.epochs, 0.0, 1.0)
          : 0.0;
  const double tau =
      config.tau_start * std::pow(config.tau_end / config.tau_start, ratio);
  return std::max(tau, config.tau_end);
}

double mc_objective(std::span<const PreferenceTriplet> batch,
                    const core::Model& model,
                    std::span<const TripletNoise> noise, double tau,
                    double kl_weight, RewardParam param,
                    const core::Model* anchor, double beta) {
  require_tau(tau);
  check_noise(batch, noise);
  require(!batch.empty(), "empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TripletTerms terms =
        triplet_terms(batch[i], model, param, anchor, beta);
    const std::size_t num_k = terms.d.size();
    Vector logits(num_k);
    for (std::size_t k = 0; k < num_k; ++k) {
      logits[k] = terms.log_w[k] + terms.log_sigma[k];
    }
    double per_triplet = 0.0;
    for (const Vector& g : noise[i]) {
      const Vector z = relaxed_sample_from_noise(logits, g, tau).z;
      for (std::size_t k = 0; k < num_k; ++k) {
        per_triplet -= z[k] * terms.log_sigma[k];
        if (z[k] > 0.0) {
          per_triplet += kl_weight * z[k] * (std::log(z[k]) - terms.log_w[k]);
        }
      }
    }
    total += per_triplet / static_cast<double>(noise[i].size());
  }
  return total / static_cast<double>(batch.size());
}

McGradient mc_gradient(std::span<const PreferenceTriplet> batch,
                       const core::Model& model,
                       std::span<const TripletNoise> noise, double tau,
                       double kl_weight, RewardParam param, double beta) {
  require_tau(tau);
  check_noise(batch, noise);
  require(!batch.empty(), "empty batch");
  const int num_k = model.num_experts();
  McGradient grad;
  grad.experts.assign(num_k,
                      Matrix(model.space.num_prompts, model.space.vocab_size));
  if (model.gating.is_fixed()) {
    grad.fixed_logits.assign(num_k, 0.0);
  } else {
    const auto& lin = model.gating.linear_params();
    grad.gating_weight = Matrix(lin.weight.rows(), lin.weight.cols());
    grad.gating_bias.assign(num_k, 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double chain = param == RewardParam::kPolicy ? beta : 1.0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PreferenceTriplet& t = batch[i];
    const TripletTerms terms =
        triplet_terms(t, model, RewardParam::kTable, nullptr, beta);
    Vector logits(num_k);
    for (int k = 0; k < num_k; ++k) {
      logits[k] = terms.log_w[k] + terms.log_sigma[k];
    }
    Vector d_log_sigma(num_k, 0.0);
    Vector d_log_w(num_k, 0.0);
    const double inv_l = 1.0 / static_cast<double>(noise[i].size());
    for (const Vector& g : noise[i]) {
      const Vector z = relaxed_sample_from_noise(logits, g, tau).z;
      // df/dz_k, then back through the tempered softmax.
      Vector h(num_k);
      double zh = 0.0;
      for (int k = 0; k < num_k; ++k) {
        h[k] = -terms.log_sigma[k] +
               kl_weight * (core::safe_log(z[k]) + 1.0 - terms.log_w[k]);
        zh += z[k] * h[k];
      }
      for (int k = 0; k < num_k; ++k) {
        const double du = z[k] * (h[k] - zh) / tau;
        d_log_sigma[k] += inv_l * (-z[k] + du);
        d_log_w[k] += inv_l * (-kl_weight * z[k] + du);
      }
    }
    for (int k = 0; k < num_k; ++k) {
      const double dd =
          inv_n * d_log_sigma[k] * (1.0 - core::sigmoid(terms.d[k])) * chain;
      grad.experts[k](t.prompt_id, t.y_plus) += dd;
      grad.experts[k](t.prompt_id, t.y_minus) -= dd;
    }
    // Through log-softmax of the gating logits.
    const Vector w = model.weights_for(t);
    const double total = std::accumulate(d_log_w.begin(), d_log_w.end(), 0.0);
    Vector dv(num_k);
    for (int k = 0; k < num_k; ++k) dv[k] = inv_n * (d_log_w[k] - w[k] * total);
    if (model.gating.is_fixed()) {
      for (int k = 0; k < num_k; ++k) grad.fixed_logits[k] += dv[k];
    } else {
      const Vector input = model.gate_input(t.prompt_id, t.user_features);
      for (int k = 0; k < num_k; ++k) {
        grad.gating_bias[k] += dv[k];
        auto row = grad.gating_weight.row(k);
        for (std::size_t j = 0; j < input.size(); ++j)
          row[j] += dv[k] * input[j];
      }
    }
  }
  return grad;
}

std::vector<TripletNoise> draw_noise(std::size_t count, int samples,
                                     int num_experts, std::mt19937_64& rng) {
  std::vector<TripletNoise> noise(count);
  for (auto& n : noise) {
    n.reserve(samples);
    for (int l = 0; l < samples; ++l)
      n.push_back(sample_gumbels(num_experts, rng));
  }
  return noise;
}

void mc_train_step(std::span<const PreferenceTriplet> batch, core::Model& model,
                   const McConfig& config, double tau, double lr,
                   double gating_lr, std::mt19937_64& rng) {
  const std::vector<TripletNoise> noise =
      draw_noise(batch.size(), config.samples, model.num_experts(), rng);
  const McGradient grad =
      mc_gradient(batch, model, noise, tau, config.kl_weight,
                  config.reward_param, config.beta);
  if (config.trainable_rewards && lr != 0.0) {
    for (int k = 0; k < model.num_experts(); ++k) {
      Vector& params = config.reward_param == RewardParam::kTable
                           ? model.rewards[k].values.data()
                           : model.policies[k].logits().data();
      const Vector& g = grad.experts[k].data();
      for (std::size_t j = 0; j < params.size(); ++j) params[j] -= lr * g[j];
    }
    if (config.reward_param == RewardParam::kPolicy) {
      std::set<int> prompts;
      std::set<int> responses;
      for (const auto& t : batch) {
        prompts.insert(t.prompt_id);
        responses.insert(t.y_plus);
        responses.insert(t.y_minus);
      }
      model.rewards = em::reward_update(
          std::vector<int>(prompts.begin(), prompts.end()),
          std::vector<int>(responses.begin(), responses.end()), model,
          config.beta, em::PartitionMode::kExact, config.reward_rule);
    }
  }
  if (config.trainable_gating && gating_lr != 0.0) {
    if (model.gating.is_fixed()) {
      const Vector& w = model.gating.fixed_params().weights;
      Vector logits(w.size());
      for (std::size_t k = 0; k < w.size(); ++k) {
        logits[k] = core::safe_log(w[k]) - gating_lr * grad.fixed_logits[k];
      }
      model.gating = core::Gating::fixed(core::softmax(logits));
    } else {
      core::LinearGating lin = model.gating.linear_params();
      for (std::size_t j = 0; j < lin.weight.size(); ++j) {
        lin.weight.data()[j] -= gating_lr * grad.gating_weight.data()[j];
      }
      for (std::size_t k = 0; k < lin.bias.size(); ++k) {
        lin.bias[k] -= gating_lr * grad.gating_bias[k];
      }
      model.gating =
          core::Gating::linear(std::move(lin.weight), std::move(lin.bias));
    }
  }
}

namespace {

void record_epoch(em::TrainState& state, const core::Dataset& data, int epoch,
                  double tau, double beta) {
  state.q = em::e_step(data.triplets, state.model);
  em::EpochMetrics m;
  m.epoch = epoch;
  m.elbo = em::dataset_elbo(data.triplets, state.model, state.q);
  m.mbt_loss = em::dataset_mbt_loss(data.triplets, state.model);
  m.gating_ce = em::gating_cross_entropy(data.triplets, state.q, state.model);
  m.beta = beta;
  m.tau = tau;
  m.source_responsibility = em::source_responsibilities(
      data.triplets, state.q, data.num_sources(), state.model.num_experts());
  state.elbo_trace.push_back(m.elbo);
  state.responsibility_log.push_back(m.source_responsibility);
  state.metrics.push_back(std::move(m));
}

}  // namespace

em::TrainState mc_train(const core::Dataset& dataset, core::Model model,
                        const McConfig& config) {
  config.validate();
  dataset.validate();
  model.validate();
  require(!dataset.triplets.empty(), "empty dataset");
  em::TrainState state;
  state.model = std::move(model);
  state.rng.seed(config.seed);
  record_epoch(state, dataset, 0, tau_schedule(0, config), config.beta);

  const std::size_t n_total = dataset.triplets.size();
  const std::size_t n_batch =
      (config.batch_size <= 0 ||
       static_cast<std::size_t>(config.batch_size) >= n_total)
          ? n_total
          : static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n_total);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double tau = tau_schedule(epoch, config);
    if (n_batch < n_total) std::shuffle(order.begin(), order.end(), state.rng);
    for (std::size_t start = 0; start < n_total; start += n_batch) {
      const std::size_t end = std::min(n_total, start + n_batch);
      std::vector<PreferenceTriplet> batch;
      batch.reserve(end - start);
      for (std::size_t j = start; j < end; ++j) {
        batch.push_back(dataset.triplets[order[j]]);
      }
      mc_train_step(batch, state.model, config, tau,
                    config.learning_rate.at(state.iteration),
                    config.gating_learning_rate.at(state.iteration), state.rng);
      ++state.iteration;
      em::check_model_finite(state.model, state.iteration, epoch);
    }
    state.epoch = epoch + 1;
    record_epoch(state, dataset, state.epoch, tau, config.beta);
  }
  return state;
}

}  // namespace mixdpo::mc
