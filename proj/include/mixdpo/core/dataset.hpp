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
#ifndef MIXDPO_CORE_DATASET_HPP_
#define MIXDPO_CORE_DATASET_HPP_

#include <vector>

#include "mixdpo/core/types.hpp"

namespace mixdpo::core {

// Preference triplets together with the prompt space and reference policy
// they were collected under.
struct Dataset {
  ProblemSpace space;
  ReferencePolicy reference;
  int user_feature_dim = 0;
  std::vector<PreferenceTriplet> triplets;

  // 1 + largest source label, or 0 when no triplet is labelled.
  int num_sources() const;
  void validate() const;

  bool operator==(const Dataset& other) const = default;
};

}  // namespace mixdpo::core

#endif  // MIXDPO_CORE_DATASET_HPP_
