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
#include "mixdpo/em/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "mixdpo/core/model_ops.hpp"
#include "mixdpo/core/ops.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::em {
namespace {

using core::PreferenceTriplet;
using core::Responsibilities;

double log_or_neg_inf(double p) {
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

// Fixed weights minimizing KL(qbar || w) + lambda KL(w || uniform).
Vector regularized_mix_weights(const Vector& qbar, double lambda) {
  const std::size_t k_count = qbar.size();
  Vector logits(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    logits[k] = core::safe_log(qbar[k]);
  }
  for (int it = 0; it < 2000; ++it) {
    const Vector w = core::softmax(logits);
    double neg_entropy = 0.0;
    for (double v : w) neg_entropy += v > 0.0 ? v * std::log(v) : 0.0;
    double norm = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double g = (w[k] - qbar[k]) +
                       lambda * w[k] * (core::safe_log(w[k]) - neg_entropy);
      logits[k] -= g;
      norm += g * g;
    }
    if (norm < 1e-30) break;
  }
  return core::softmax(logits);
}

std::vector<PreferenceTriplet> gather(std::span<const PreferenceTriplet> all,
                                      std::span<const std::size_t> idx) {
  std::vector<PreferenceTriplet> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

EpochMetrics epoch_metrics(const TrainState& state, const core::Dataset& data,
                           int epoch, double beta, const core::Lambdas& lambdas,
                           int num_sources) {
  EpochMetrics m;
  m.epoch = epoch;
  m.elbo = dataset_elbo(data.triplets, state.model, state.q);
  m.mbt_loss = dataset_mbt_loss(data.triplets, state.model);
  m.gating_ce = gating_cross_entropy(data.triplets, state.q, state.model);
  m.beta = beta;
  m.lambdas = lambdas;
  m.source_responsibility = source_responsibilities(
      data.triplets, state.q, num_sources, state.model.num_experts());
  return m;
}

}  // namespace

void TrainerConfig::validate() const {
  hyper.validate();
  gating_learning_rate.validate();
  require(epochs >= 0, "epochs must be >= 0");
  require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must be in [0, 1)");
}

std::vector<Responsibilities> e_step(std::span<const PreferenceTriplet> batch,
                                     const core::Model& model) {
  std::vector<Responsibilities> out;
  out.reserve(batch.size());
  for (const auto& t : batch) {
    out.push_back(core::mbt_posterior(model.weights_for(t),
                                      core::expert_sigmas(model, t)));
  }
  return out;
}

Matrix m_step_policy_gradient(std::span<const PreferenceTriplet> batch, int k,
                              const core::Model& model,
                              std::span<const Responsibilities> q,
                              double beta) {
  require(q.size() == batch.size(), "responsibilities must match the batch");
  Matrix grad(model.space.num_prompts, model.space.vocab_size);
  if (batch.empty()) return grad;
  const double scale = beta / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double qk = q[i][k];
    if (qk == 0.0) continue;
    const PreferenceTriplet& t = batch[i];
    const core::PairLogWeights a =
        core::pair_log_weights(model, k, t, model.weights_for(t), beta);
    // A- / (A+ + A-).
    const double share_minus = core::sigmoid(a.log_a_minus - a.log_a_plus);
    const double c = scale * qk * share_minus;
    if (!std::isfinite(c)) {
      throw NumericError("non-finite policy gradient at triplet " +
                         std::to_string(i));
    }
    // The softmax terms of grad log pi(y-) - grad log pi(y+) cancel.
    grad(t.prompt_id, t.y_minus) += c;
    grad(t.prompt_id, t.y_plus) -= c;
  }
  return grad;
}

double batch_policy_loss(std::span<const PreferenceTriplet> batch,
                         const core::Model& model,
                         std::span<const Responsibilities> q, double beta) {
  require(q.size() == batch.size(), "responsibilities must match the batch");
  require(!batch.empty(), "empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int k = 0; k < model.num_experts(); ++k) {
      total += core::per_expert_mbt_loss(batch[i], k, model, q[i], beta);
    }
  }
  return total / static_cast<double>(batch.size());
}

std::vector<core::RewardTable> reward_update(
    std::span<const int> prompts, std::span<const int> batch_responses,
    const core::Model& model, double beta, PartitionMode partition_mode,
    RewardRule rule) {
  require(beta > 0.0, "beta must be positive");
  const int num_y = model.space.vocab_size;
  const int num_k = model.num_experts();
  std::vector<int> support;
  if (partition_mode == PartitionMode::kExact) {
    support.resize(num_y);
    std::iota(support.begin(), support.end(), 0);
  } else {
    support.assign(batch_responses.begin(), batch_responses.end());
    require(!support.empty(), "minibatch partition needs batch responses");
  }
  std::vector<core::RewardTable> out = model.rewards;
  for (int x : prompts) {
    const Vector w = model.weights_at(x);
    std::vector<Vector> lqr(num_y);
    for (int y = 0; y < num_y; ++y) {
      lqr[y] = core::log_q_r(w, model.rewards_at(x, y));
    }
    for (int k = 0; k < num_k; ++k) {
      if (!(w[k] > 0.0)) throw Error("zero responsibility in correction");
      const double log_w = std::log(w[k]);
      const auto log_ref = model.reference(k).log_row(x);
      // log(q_r / w) over y; r minus this is the corrected reward.
      Vector log_ratio(num_y);
      for (int y = 0; y < num_y; ++y) log_ratio[y] = lqr[y][k] - log_w;
      Vector terms;
      terms.reserve(support.size());
      for (int y : support) {
        terms.push_back(log_ref[y] +
                        (model.rewards[k](x, y) - log_ratio[y]) / beta);
      }
      const double log_z = core::log_sum_exp(terms);
      const Vector log_pi = model.policies[k].log_probs(x);
      for (int y = 0; y < num_y; ++y) {
        double r = beta * (log_pi[y] - log_ref[y] + log_z);
        if (rule == RewardRule::kSinglePass) r += log_ratio[y];
        if (!std::isfinite(r)) {
          throw NumericError("non-finite reward update at prompt " +
                             std::to_string(x) + ", expert " +
                             std::to_string(k));
        }
        out[k].values(x, y) = r;
      }
    }
  }
  return out;
}

Vector prior_update_mix(std::span<const Responsibilities> q,
                        std::span<const double> previous, WeightUpdate mode,
                        double ema_decay) {
  if (q.empty()) throw Error("empty batch");
  const std::size_t k_count = q.front().size();
  Vector w(k_count, 0.0);
  for (const auto& qi : q) {
    require(qi.size() == k_count, "responsibility length mismatch");
    for (std::size_t k = 0; k < k_count; ++k) w[k] += qi[k];
  }
  for (double& v : w) v /= static_cast<double>(q.size());
  if (mode == WeightUpdate::kEma) {
    require(previous.size() == k_count, "previous weights length mismatch");
    for (std::size_t k = 0; k < k_count; ++k) {
      w[k] = ema_decay * previous[k] + (1.0 - ema_decay) * w[k];
    }
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

double gating_cross_entropy(std::span<const PreferenceTriplet> batch,
                            std::span<const Responsibilities> q,
                            const core::Model& model) {
  require(q.size() == batch.size(), "responsibilities must match the batch");
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vector w = model.weights_for(batch[i]);
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (q[i][k] > 0.0) total -= q[i][k] * log_or_neg_inf(w[k]);
    }
  }
  return total / static_cast<double>(batch.size());
}

GatingGradient gating_gradient(std::span<const PreferenceTriplet> batch,
                               std::span<const Responsibilities> q,
                               const core::Model& model, double lambda_global) {
  require(model.gating.is_linear(), "gating gradient needs linear gating");
  require(q.size() == batch.size(), "responsibilities must match the batch");
  const core::LinearGating& lin = model.gating.linear_params();
  GatingGradient g{Matrix(lin.weight.rows(), lin.weight.cols()),
                   Vector(lin.bias.size(), 0.0)};
  if (batch.empty()) return g;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vector input =
        model.gate_input(batch[i].prompt_id, batch[i].user_features);
    const Vector w = model.gating.weights(input);
    double neg_entropy = 0.0;
    for (double v : w) neg_entropy += v > 0.0 ? v * std::log(v) : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      double d = w[k] - q[i][k];
      if (lambda_global > 0.0 && w[k] > 0.0) {
        d += lambda_global * w[k] * (std::log(w[k]) - neg_entropy);
      }
      d *= inv_n;
      g.bias[k] += d;
      auto row = g.weight.row(k);
      for (std::size_t j = 0; j < input.size(); ++j) row[j] += d * input[j];
    }
  }
  return g;
}

core::LinearGating prior_update_gating(std::span<const PreferenceTriplet> batch,
                                       std::span<const Responsibilities> q,
                                       const core::Model& model, double lr,
                                       double lambda_global) {
  const GatingGradient g = gating_gradient(batch, q, model, lambda_global);
  core::LinearGating lin = model.gating.linear_params();
  for (std::size_t i = 0; i < lin.weight.size(); ++i) {
    lin.weight.data()[i] -= lr * g.weight.data()[i];
  }
  for (std::size_t k = 0; k < lin.bias.size(); ++k)
    lin.bias[k] -= lr * g.bias[k];
  return lin;
}

double dataset_elbo(std::span<const PreferenceTriplet> triplets,
                    const core::Model& model,
                    std::span<const Responsibilities> q) {
  require(q.size() == triplets.size(), "responsibilities must match the data");
  require(!triplets.empty(), "empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const Vector w = model.weights_for(triplets[i]);
    const Vector log_sigma = core::expert_log_sigmas(model, triplets[i]);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double qk = q[i][k];
      if (qk <= 0.0) continue;
      total += qk * (log_or_neg_inf(w[k]) + log_sigma[k] - std::log(qk));
    }
  }
  return total / static_cast<double>(triplets.size());
}

double dataset_mbt_loss(std::span<const PreferenceTriplet> triplets,
                        const core::Model& model) {
  require(!triplets.empty(), "empty dataset");
  double total = 0.0;
  for (const auto& t : triplets) {
    const Vector w = model.weights_for(t);
    Vector terms = core::expert_log_sigmas(model, t);
    for (std::size_t k = 0; k < w.size(); ++k) terms[k] += log_or_neg_inf(w[k]);
    total -= core::log_sum_exp(terms);
  }
  return total / static_cast<double>(triplets.size());
}

Matrix source_responsibilities(std::span<const PreferenceTriplet> triplets,
                               std::span<const Responsibilities> q,
                               int num_sources, int num_k) {
  Matrix out(num_sources, num_k, 0.0);
  std::vector<int> counts(num_sources, 0);
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& label = triplets[i].source_label;
    if (!label || *label >= num_sources) continue;
    ++counts[*label];
    for (int k = 0; k < num_k; ++k) out(*label, k) += q[i][k];
  }
  for (int s = 0; s < num_sources; ++s) {
    for (int k = 0; k < num_k; ++k) {
      out(s, k) = counts[s] > 0 ? out(s, k) / counts[s] : 1.0 / num_k;
    }
  }
  return out;
}

void check_model_finite(const core::Model& model, long long iteration,
                        int epoch) {
  auto check = [&](const Vector& values, const char* what) {
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite ") + what +
                           " at iteration " + std::to_string(iteration) +
                           ", epoch " + std::to_string(epoch));
      }
    }
  };
  for (const auto& p : model.policies)
    check(p.logits().data(), "policy logits");
  for (const auto& r : model.rewards) check(r.values.data(), "rewards");
  if (model.gating.is_fixed()) {
    check(model.gating.fixed_params().weights, "gating weights");
  } else {
    check(model.gating.linear_params().weight.data(), "gating weights");
    check(model.gating.linear_params().bias, "gating bias");
  }
}

TrainState make_train_state(const core::Dataset& dataset, core::Model model,
                            const TrainerConfig& config) {
  config.validate();
  dataset.validate();
  model.validate();
  require(!dataset.triplets.empty(), "empty dataset");
  require(model.space.num_prompts == dataset.space.num_prompts &&
              model.space.vocab_size == dataset.space.vocab_size,
          "model and dataset dimensions differ");
  require(model.gating.is_fixed() == (config.mode == GatingMode::kMix),
          "mix mode needs fixed gating and moe mode needs linear gating");
  TrainState state;
  state.model = std::move(model);
  state.rng.seed(config.seed);
  state.q.reserve(dataset.triplets.size());
  for (const auto& t : dataset.triplets) {
    state.q.push_back(state.model.weights_for(t));
  }
  const std::size_t table =
      static_cast<std::size_t>(dataset.space.num_prompts) *
      dataset.space.vocab_size;
  state.policy_optimizers.assign(state.model.num_experts(),
                                 Optimizer(config.optimizer, table));
  EpochMetrics m = epoch_metrics(state, dataset, 0, config.hyper.beta,
                                 config.hyper.lambdas, dataset.num_sources());
  state.elbo_trace.push_back(m.elbo);
  state.responsibility_log.push_back(m.source_responsibility);
  state.metrics.push_back(std::move(m));
  return state;
}

void run_training(TrainState& state, const core::Dataset& dataset,
                  const TrainerConfig& config, const TrainHooks& hooks) {
  const auto& all = dataset.triplets;
  const std::size_t n_total = all.size();
  const int bs = config.hyper.batch_size;
  const std::size_t n_batch =
      (bs <= 0 || static_cast<std::size_t>(bs) >= n_total)
          ? n_total
          : static_cast<std::size_t>(bs);
  const bool full_batch = n_batch == n_total;
  const int num_sources = dataset.num_sources();
  core::Model& model = state.model;
  std::vector<std::size_t> order(n_total);
  std::iota(order.begin(), order.end(), 0);

  auto posterior = [&](std::span<const PreferenceTriplet> batch, int epoch) {
    return hooks.e_step ? hooks.e_step(batch, model, epoch)
                        : e_step(batch, model);
  };
  auto run_e_step = [&](std::span<const PreferenceTriplet> batch,
                        std::span<const std::size_t> idx, int epoch) {
    const double before = full_batch ? dataset_elbo(all, model, state.q) : 0.0;
    std::vector<Responsibilities> q = posterior(batch, epoch);
    for (std::size_t j = 0; j < idx.size(); ++j) state.q[idx[j]] = q[j];
    if (full_batch) {
      state.e_step_checks.push_back(
          {state.iteration, before, dataset_elbo(all, model, state.q)});
    }
    return q;
  };

  bool stop = false;
  while (!stop && !state.converged && state.epoch < config.epochs) {
    const int epoch = state.epoch;
    const double beta = hooks.beta ? hooks.beta(epoch) : config.hyper.beta;
    const core::Lambdas lambdas =
        hooks.lambdas ? hooks.lambdas(epoch) : config.hyper.lambdas;
    if (!full_batch) std::shuffle(order.begin(), order.end(), state.rng);
    bool did_work = false;
    for (std::size_t start = 0; start < n_total; start += n_batch) {
      if (config.hyper.max_iters > 0 &&
          state.iteration >= config.hyper.max_iters) {
        stop = true;
        break;
      }
      did_work = true;
      const std::size_t end = std::min(n_total, start + n_batch);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const std::vector<PreferenceTriplet> batch = gather(all, idx);
      const double lr = config.hyper.learning_rate.at(state.iteration);

      if (config.trainable_policies) {
        const auto q = run_e_step(batch, idx, epoch);
        for (int k = 0; k < model.num_experts(); ++k) {
          const Matrix grad = m_step_policy_gradient(batch, k, model, q, beta);
          state.policy_optimizers[k].step(model.policies[k].logits().data(),
                                          grad.data(), lr);
        }
        std::set<int> prompts;
        std::set<int> responses;
        for (const auto& t : batch) {
          prompts.insert(t.prompt_id);
          responses.insert(t.y_plus);
          responses.insert(t.y_minus);
        }
        const std::vector<int> prompt_list(prompts.begin(), prompts.end());
        const std::vector<int> response_list(responses.begin(),
                                             responses.end());
        model.rewards =
            reward_update(prompt_list, response_list, model, beta,
                          config.partition_mode, config.reward_rule);
      }

      if (config.trainable_weights) {
        const auto q = run_e_step(batch, idx, epoch);
        if (config.mode == GatingMode::kMix) {
          const Vector& previous = model.gating.fixed_params().weights;
          Vector w;
          if (lambdas.kl_w_global > 0.0) {
            w = regularized_mix_weights(prior_update_mix(q, previous),
                                        lambdas.kl_w_global);
            if (config.weight_update == WeightUpdate::kEma) {
              for (std::size_t k = 0; k < w.size(); ++k) {
                w[k] = config.ema_decay * previous[k] +
                       (1.0 - config.ema_decay) * w[k];
              }
            }
          } else {
            w = prior_update_mix(q, previous, config.weight_update,
                                 config.ema_decay);
          }
          model.gating = core::Gating::fixed(std::move(w));
        } else {
          const double glr = config.gating_learning_rate.at(state.iteration);
          core::LinearGating lin =
              prior_update_gating(batch, q, model, glr, lambdas.kl_w_global);
          model.gating =
              core::Gating::linear(std::move(lin.weight), std::move(lin.bias));
        }
      }
      ++state.iteration;
      check_model_finite(model, state.iteration, epoch);
    }
    if (!did_work) break;
    state.epoch = epoch + 1;
    EpochMetrics m =
        epoch_metrics(state, dataset, state.epoch, beta, lambdas, num_sources);
    const double previous = state.elbo_trace.back();
    state.elbo_trace.push_back(m.elbo);
    state.responsibility_log.push_back(m.source_responsibility);
    state.metrics.push_back(std::move(m));
    if (std::abs(state.elbo_trace.back() - previous) < config.hyper.elbo_tol) {
      ++state.stable_epochs;
    } else {
      state.stable_epochs = 0;
    }
    if (state.stable_epochs >= 3) state.converged = true;
  }
}

TrainState train(const core::Dataset& dataset, core::Model model,
                 const TrainerConfig& config, const TrainHooks& hooks) {
  TrainState state = make_train_state(dataset, std::move(model), config);
  run_training(state, dataset, config, hooks);
  return state;
}

}  // namespace mixdpo::em
