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
#ifndef MIXDPO_EM_OPTIMIZER_HPP_
#define MIXDPO_EM_OPTIMIZER_HPP_

#include <cstddef>
#include <span>

#include "mixdpo/matrix.hpp"

namespace mixdpo::em {

enum class OptimizerKind { kSgd, kMomentum, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerConfig& other) const = default;
};

// First-order optimizer over one flat parameter block.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig config, std::size_t size);

  // Descends along grad with step size lr.
  void step(std::span<double> params, std::span<const double> grad, double lr);

  const OptimizerConfig& config() const { return config_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }
  long long steps() const { return steps_; }
  void set_state(Vector m, Vector v, long long steps);

  bool operator==(const Optimizer& other) const = default;

 private:
  OptimizerConfig config_;
  Vector m_;
  Vector v_;
  long long steps_ = 0;
};

}  // namespace mixdpo::em

#endif  // MIXDPO_EM_OPTIMIZER_HPP_
