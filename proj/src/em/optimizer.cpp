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
#include "mixdpo/em/optimizer.hpp"

#include <cmath>

#include "mixdpo/error.hpp"

namespace mixdpo::em {

Optimizer::Optimizer(OptimizerConfig config, std::size_t size)
    : config_(config) {
  if (config_.kind != OptimizerKind::kSgd) m_.assign(size, 0.0);
  if (config_.kind == OptimizerKind::kAdam) v_.assign(size, 0.0);
}

void Optimizer::step(std::span<double> params, std::span<const double> grad,
                     double lr) {
  require(params.size() == grad.size(), "gradient size mismatch");
  ++steps_;
  switch (config_.kind) {
    case OptimizerKind::kSgd:
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= lr * grad[i];
      }
      break;
    case OptimizerKind::kMomentum:
      require(m_.size() == params.size(), "optimizer state size mismatch");
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.momentum * m_[i] + grad[i];
        params[i] -= lr * m_[i];
      }
      break;
    case OptimizerKind::kAdam: {
      require(m_.size() == params.size(), "optimizer state size mismatch");
      const double c1 = 1.0 - std::pow(config_.beta1, steps_);
      const double c2 = 1.0 - std::pow(config_.beta2, steps_);
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
        v_[i] =
            config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        params[i] -=
            lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
      }
      break;
    }
  }
}

void Optimizer::set_state(Vector m, Vector v, long long steps) {
  m_ = std::move(m);
  v_ = std::move(v);
  steps_ = steps;
}

}  // namespace mixdpo::em
