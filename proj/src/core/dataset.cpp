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
#include "mixdpo/core/dataset.hpp"

#include <algorithm>

#include "mixdpo/error.hpp"

namespace mixdpo::core {

int Dataset::num_sources() const {
  int count = 0;
  for (const auto& t : triplets) {
    if (t.source_label) count = std::max(count, *t.source_label + 1);
  }
  return count;
}

void Dataset::validate() const {
  space.validate();
  require(reference.num_prompts() == space.num_prompts &&
              reference.vocab_size() == space.vocab_size,
          "reference shape does not match the problem space");
  require(user_feature_dim >= 0, "user feature dimension must be >= 0");
  for (const auto& t : triplets) {
    require(t.prompt_id >= 0 && t.prompt_id < space.num_prompts,
            "prompt_id out of range");
    require(t.y_plus >= 0 && t.y_plus < space.vocab_size,
            "y_plus out of range");
    require(t.y_minus >= 0 && t.y_minus < space.vocab_size,
            "y_minus out of range");
    require(t.y_plus != t.y_minus, "y_plus must differ from y_minus");
    require(!t.source_label || *t.source_label >= 0,
            "source labels must be >= 0");
    require(t.user_features.empty() ||
                static_cast<int>(t.user_features.size()) == user_feature_dim,
            "user feature dimension mismatch");
  }
}

}  // namespace mixdpo::core
