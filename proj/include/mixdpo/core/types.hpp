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
// Domain types for mixtures of Bradley-Terry experts over finite prompt and
// response spaces.

#ifndef MIXDPO_CORE_TYPES_HPP_
#define MIXDPO_CORE_TYPES_HPP_

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mixdpo/matrix.hpp"

namespace mixdpo::core {

// Probabilities are clamped to this floor before any logarithm.
inline constexpr double kProbFloor = 1e-12;

// Tolerance used when validating that a vector lies on the simplex.
inline constexpr double kSimplexTol = 1e-9;

// Sizes of the prompt, response and expert index sets plus gating features.
struct ProblemSpace {
  int num_prompts = 0;
  int vocab_size = 0;
  int num_experts = 0;
  Matrix prompt_features;  // num_prompts x d

  // One-hot prompt features.
  static ProblemSpace make(int num_prompts, int vocab_size, int num_experts);

  int feature_dim() const { return static_cast<int>(prompt_features.cols()); }
  void validate() const;

  bool operator==(const ProblemSpace& other) const = default;
};

// Row-softmax table of logits; pi(y|x) = softmax(logits.row(x))[y].
class ExpertPolicy {
 public:
  ExpertPolicy() = default;
  explicit ExpertPolicy(Matrix logits);

  int num_prompts() const { return static_cast<int>(logits_.rows()); }
  int vocab_size() const { return static_cast<int>(logits_.cols()); }

  const Matrix& logits() const { return logits_; }
  Matrix& logits() { return logits_; }

  Vector probs(int x) const;
  // Log-probabilities, clamped at log(kProbFloor).
  Vector log_probs(int x) const;
  double log_prob(int x, int y) const;

  void validate() const;

  bool operator==(const ExpertPolicy& other) const = default;

 private:
  Matrix logits_;
};

// Frozen anchor policy with full support, stored as normalized log-probs.
class ReferencePolicy {
 public:
  ReferencePolicy() = default;

  static ReferencePolicy uniform(int num_prompts, int vocab_size);
  static ReferencePolicy from_logits(const Matrix& logits);
  // Rows must sum to one and every entry must be at least kProbFloor.
  static ReferencePolicy from_probs(const Matrix& probs);
  // Stores already-normalized log-probabilities as given.
  static ReferencePolicy from_log_probs(Matrix log_probs);

  int num_prompts() const { return static_cast<int>(log_probs_.rows()); }
  int vocab_size() const { return static_cast<int>(log_probs_.cols()); }

  double log_prob(int x, int y) const { return log_probs_(x, y); }
  std::span<const double> log_row(int x) const { return log_probs_.row(x); }
  Vector probs(int x) const;
  const Matrix& log_probs() const { return log_probs_; }

  bool operator==(const ReferencePolicy& other) const = default;

 private:
  Matrix log_probs_;
};

// Per-expert reward table r_k(x, y).
struct RewardTable {
  Matrix values;

  double operator()(int x, int y) const { return values(x, y); }
  bool operator==(const RewardTable& other) const = default;
};

struct FixedGating {
  Vector weights;
  bool operator==(const FixedGating& other) const = default;
};

// w(x) = softmax(weight * input + bias) with weight of shape K x input_dim.
struct LinearGating {
  Matrix weight;
  Vector bias;
  bool operator==(const LinearGating& other) const = default;
};

// Prior over experts: a global simplex vector or a linear-softmax function.
class Gating {
 public:
  Gating() = default;

  static Gating fixed(Vector weights);
  static Gating uniform(int num_experts);
  static Gating linear(Matrix weight, Vector bias);

  bool is_fixed() const { return std::holds_alternative<FixedGating>(params_); }
  bool is_linear() const {
    return std::holds_alternative<LinearGating>(params_);
  }

  int num_experts() const;
  // Expected input length for linear gating; 0 for fixed gating.
  int input_dim() const;

  FixedGating& fixed_params() { return std::get<FixedGating>(params_); }
  const FixedGating& fixed_params() const {
    return std::get<FixedGating>(params_);
  }
  LinearGating& linear_params() { return std::get<LinearGating>(params_); }
  const LinearGating& linear_params() const {
    return std::get<LinearGating>(params_);
  }

  // Unnormalized log-weights; the input is ignored for fixed gating.
  Vector logits(std::span<const double> input) const;
  Vector weights(std::span<const double> input) const;
  Vector log_weights(std::span<const double> input) const;

  void validate() const;

  bool operator==(const Gating& other) const = default;

 private:
  std::variant<FixedGating, LinearGating> params_;
};

struct PreferenceTriplet {
  int prompt_id = 0;
  int y_plus = 0;
  int y_minus = 1;
  std::optional<int> source_label;
  Vector user_features;

  bool operator==(const PreferenceTriplet& other) const = default;
};

// Posterior over the K experts attached to one triplet.
using Responsibilities = Vector;

// Regularizer weights of the regularized variational objective.
struct Lambdas {
  double ent = 0.0;
  double conf = 0.0;
  double kl_unif = 0.0;
  double kl_w = 0.0;
  double kl_w_global = 0.0;

  // Effective temperature of the regularized posterior.
  double alpha() const { return conf - ent + kl_unif + kl_w; }
  void validate() const;

  bool operator==(const Lambdas& other) const = default;
};

enum class LrKind { kConstant, kRobbinsMonro };

// eta_t = eta0 for kConstant, eta0 / (1 + t * decay) for kRobbinsMonro.
struct LearningRate {
  LrKind kind = LrKind::kRobbinsMonro;
  double eta0 = 0.1;
  double decay = 1e-3;

  double at(long long t) const;
  void validate() const;

  bool operator==(const LearningRate& other) const = default;
};

struct Hyperparams {
  double beta = 0.1;
  double tau = 1.0;
  int mc_samples = 8;
  LearningRate learning_rate;
  Lambdas lambdas;
  int batch_size = 0;       // 0 selects full batch
  long long max_iters = 0;  // 0 means unlimited
  double elbo_tol = 1e-8;

  void validate() const;
};

// Full parameter set: policies, rewards, gating and references.
struct Model {
  ProblemSpace space;
  std::vector<ExpertPolicy> policies;
  std::vector<RewardTable> rewards;
  Gating gating;
  // One shared reference or one per expert.
  std::vector<ReferencePolicy> references;
  int user_feature_dim = 0;

  int num_experts() const { return static_cast<int>(policies.size()); }
  bool shared_reference() const { return references.size() == 1; }
  const ReferencePolicy& reference(int k) const {
    return references.size() == 1 ? references.front() : references[k];
  }

  // Prompt features followed by user features (zeros when absent).
  Vector gate_input(int x, std::span<const double> user_features) const;
  // Prompt-level weights with a zero user vector.
  Vector weights_at(int x) const;
  Vector weights_for(const PreferenceTriplet& t) const;
  // (r_1(x,y), ..., r_K(x,y)).
  Vector rewards_at(int x, int y) const;

  void validate() const;
  void validate_triplet(const PreferenceTriplet& t) const;

  bool operator==(const Model& other) const = default;
};

}  // namespace mixdpo::core

#endif  // MIXDPO_CORE_TYPES_HPP_
