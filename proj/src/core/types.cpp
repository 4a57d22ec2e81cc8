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
#include "mixdpo/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mixdpo/core/ops.hpp"
#include "mixdpo/error.hpp"

namespace mixdpo::core {
namespace {

void require_finite(const Vector& values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v))
      throw NumericError(std::string(what) + " not finite");
  }
}

}  // namespace

ProblemSpace ProblemSpace::make(int num_prompts, int vocab_size,
                                int num_experts) {
  ProblemSpace space;
  space.num_prompts = num_prompts;
  space.vocab_size = vocab_size;
  space.num_experts = num_experts;
  if (num_prompts > 0) {
    space.prompt_features = Matrix(num_prompts, num_prompts);
    for (int x = 0; x < num_prompts; ++x) space.prompt_features(x, x) = 1.0;
  }
  space.validate();
  return space;
}

void ProblemSpace::validate() const {
  require(num_prompts >= 1, "need at least one prompt");
  require(vocab_size >= 2, "need at least two responses");
  require(num_experts >= 1, "need at least one expert");
  require(static_cast<int>(prompt_features.rows()) == num_prompts,
          "prompt feature rows must match the number of prompts");
  require(prompt_features.cols() >= 1, "prompt features need dimension >= 1");
  require_finite(prompt_features.data(), "prompt features");
}

ExpertPolicy::ExpertPolicy(Matrix logits) : logits_(std::move(logits)) {}

Vector ExpertPolicy::probs(int x) const { return softmax(logits_.row(x)); }

Vector ExpertPolicy::log_probs(int x) const {
  Vector out = log_softmax(logits_.row(x));
  const double floor = std::log(kProbFloor);
  for (double& v : out) v = std::max(v, floor);
  return out;
}

double ExpertPolicy::log_prob(int x, int y) const {
  const double value = logits_(x, y) - log_sum_exp(logits_.row(x));
  return std::max(value, std::log(kProbFloor));
}

void ExpertPolicy::validate() const {
  require(!logits_.empty(), "empty policy table");
  require_finite(logits_.data(), "policy logits");
}

ReferencePolicy ReferencePolicy::uniform(int num_prompts, int vocab_size) {
  ReferencePolicy ref;
  ref.log_probs_ = Matrix(num_prompts, vocab_size, -std::log(vocab_size));
  return ref;
}

ReferencePolicy ReferencePolicy::from_logits(const Matrix& logits) {
  require_finite(logits.data(), "reference logits");
  ReferencePolicy ref;
  ref.log_probs_ = Matrix(logits.rows(), logits.cols());
  for (std::size_t x = 0; x < logits.rows(); ++x) {
    const Vector row = log_softmax(logits.row(x));
    for (std::size_t y = 0; y < row.size(); ++y) {
      require(row[y] >= std::log(kProbFloor),
              "reference probability below floor");
      ref.log_probs_(x, y) = row[y];
    }
  }
  return ref;
}

ReferencePolicy ReferencePolicy::from_probs(const Matrix& probs) {
  ReferencePolicy ref;
  ref.log_probs_ = Matrix(probs.rows(), probs.cols());
  for (std::size_t x = 0; x < probs.rows(); ++x) {
    check_simplex(probs.row(x), kSimplexTol, "reference row");
    double total = 0.0;
    for (double p : probs.row(x)) total += p;
    for (std::size_t y = 0; y < probs.cols(); ++y) {
      require(probs(x, y) >= kProbFloor, "reference probability below floor");
      ref.log_probs_(x, y) = std::log(probs(x, y) / total);
    }
  }
  return ref;
}

ReferencePolicy ReferencePolicy::from_log_probs(Matrix log_probs) {
  for (std::size_t x = 0; x < log_probs.rows(); ++x) {
    const auto row = log_probs.row(x);
    require(std::abs(log_sum_exp(row)) < kSimplexTol,
            "reference rows must be normalized");
    for (double v : row) {
      require(v >= std::log(kProbFloor), "reference probability below floor");
    }
  }
  ReferencePolicy ref;
  ref.log_probs_ = std::move(log_probs);
  return ref;
}

Vector ReferencePolicy::probs(int x) const {
  Vector out(log_probs_.cols());
  for (std::size_t y = 0; y < out.size(); ++y) {
    out[y] = std::exp(log_probs_(x, y));
  }
  return out;
}

Gating Gating::fixed(Vector weights) {
  check_simplex(weights, kSimplexTol, "fixed gating weights");
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  Gating g;
  g.params_ = FixedGating{std::move(weights)};
  return g;
}

Gating Gating::uniform(int num_experts) {
  require(num_experts >= 1, "need at least one expert");
  return fixed(Vector(num_experts, 1.0 / num_experts));
}

Gating Gating::linear(Matrix weight, Vector bias) {
  require(weight.rows() == bias.size(), "gating bias length must equal K");
  require(weight.rows() >= 1 && weight.cols() >= 1, "empty gating matrix");
  Gating g;
  g.params_ = LinearGating{std::move(weight), std::move(bias)};
  return g;
}

int Gating::num_experts() const {
  if (is_fixed()) return static_cast<int>(fixed_params().weights.size());
  return static_cast<int>(linear_params().bias.size());
}

int Gating::input_dim() const {
  if (is_fixed()) return 0;
  return static_cast<int>(linear_params().weight.cols());
}

Vector Gating::logits(std::span<const double> input) const {
  if (is_fixed()) {
    const Vector& w = fixed_params().weights;
    Vector out(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      out[k] = w[k] > 0.0 ? std::log(w[k])
                          : -std::numeric_limits<double>::infinity();
    }
    return out;
  }
  const LinearGating& lin = linear_params();
  if (input.size() != lin.weight.cols()) {
    throw Error("gating feature dimension mismatch: expected " +
                std::to_string(lin.weight.cols()) + ", got " +
                std::to_string(input.size()));
  }
  Vector out(lin.bias);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto row = lin.weight.row(k);
    for (std::size_t j = 0; j < input.size(); ++j) out[k] += row[j] * input[j];
  }
  return out;
}

Vector Gating::weights(std::span<const double> input) const {
  if (is_fixed()) return fixed_params().weights;
  return softmax(logits(input));
}

Vector Gating::log_weights(std::span<const double> input) const {
  return log_softmax(logits(input));
}

void Gating::validate() const {
  if (is_fixed()) {
    check_simplex(fixed_params().weights, kSimplexTol, "fixed gating weights");
    return;
  }
  require_finite(linear_params().weight.data(), "gating weights");
  require_finite(linear_params().bias, "gating bias");
}

void Lambdas::validate() const {
  for (double v : {ent, conf, kl_unif, kl_w, kl_w_global}) {
    require(std::isfinite(v) && v >= 0.0, "regularizer weights must be >= 0");
  }
}

double LearningRate::at(long long t) const {
  if (kind == LrKind::kConstant) return eta0;
  return eta0 / (1.0 + static_cast<double>(t) * decay);
}

void LearningRate::validate() const {
  require(std::isfinite(eta0) && eta0 >= 0.0, "learning rate must be >= 0");
  require(std::isfinite(decay) && decay >= 0.0, "decay must be >= 0");
}

void Hyperparams::validate() const {
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive");
  require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  require(mc_samples >= 1, "mc_samples must be >= 1");
  learning_rate.validate();
  lambdas.validate();
  require(batch_size >= 0, "batch_size must be >= 0");
  require(max_iters >= 0, "max_iters must be >= 0");
  require(elbo_tol >= 0.0, "elbo_tol must be >= 0");
}

Vector Model::gate_input(int x, std::span<const double> user_features) const {
  const auto row = space.prompt_features.row(x);
  Vector input(row.begin(), row.end());
  if (user_feature_dim > 0) {
    if (user_features.empty()) {
      input.resize(input.size() + user_feature_dim, 0.0);
    } else {
      if (static_cast<int>(user_features.size()) != user_feature_dim) {
        throw Error("user feature dimension mismatch");
      }
      input.insert(input.end(), user_features.begin(), user_features.end());
    }
  }
  return input;
}

Vector Model::weights_at(int x) const {
  if (gating.is_fixed()) return gating.fixed_params().weights;
  return gating.weights(gate_input(x, {}));
}

Vector Model::weights_for(const PreferenceTriplet& t) const {
  if (gating.is_fixed()) return gating.fixed_params().weights;
  return gating.weights(gate_input(t.prompt_id, t.user_features));
}

Vector Model::rewards_at(int x, int y) const {
  Vector out(rewards.size());
  for (std::size_t k = 0; k < rewards.size(); ++k) out[k] = rewards[k](x, y);
  return out;
}

void Model::validate() const {
  space.validate();
  const int k_count = num_experts();
  require(k_count == space.num_experts, "policy count must equal K");
  require(static_cast<int>(rewards.size()) == k_count,
          "reward table count must equal K");
  require(gating.num_experts() == k_count, "gating size must equal K");
  require(
      references.size() == 1 || static_cast<int>(references.size()) == k_count,
      "need one shared reference or one per expert");
  for (const auto& p : policies) {
    p.validate();
    require(p.num_prompts() == space.num_prompts &&
                p.vocab_size() == space.vocab_size,
            "policy shape mismatch");
  }
  for (const auto& r : rewards) {
    require(static_cast<int>(r.values.rows()) == space.num_prompts &&
                static_cast<int>(r.values.cols()) == space.vocab_size,
            "reward shape mismatch");
    require_finite(r.values.data(), "rewards");
  }
  for (const auto& ref : references) {
    require(ref.num_prompts() == space.num_prompts &&
                ref.vocab_size() == space.vocab_size,
            "reference shape mismatch");
  }
  gating.validate();
  if (gating.is_linear()) {
    require(gating.input_dim() == space.feature_dim() + user_feature_dim,
            "gating feature dimension mismatch");
  }
}

void Model::validate_triplet(const PreferenceTriplet& t) const {
  require(t.prompt_id >= 0 && t.prompt_id < space.num_prompts,
          "prompt_id out of range");
  require(t.y_plus >= 0 && t.y_plus < space.vocab_size, "y_plus out of range");
  require(t.y_minus >= 0 && t.y_minus < space.vocab_size,
          "y_minus out of range");
  require(t.y_plus != t.y_minus, "y_plus must differ from y_minus");
}

}  // namespace mixdpo::core
