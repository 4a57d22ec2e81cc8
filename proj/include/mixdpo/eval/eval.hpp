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
// Evaluation of a trained model against labelled data and the ground truth.

#ifndef MIXDPO_EVAL_EVAL_HPP_
#define MIXDPO_EVAL_EVAL_HPP_

#include <span>
#include <vector>

#include "mixdpo/core/dataset.hpp"
#include "mixdpo/core/types.hpp"
#include "mixdpo/io/serialize.hpp"
#include "mixdpo/matrix.hpp"
#include "mixdpo/synth/ground_truth.hpp"

namespace mixdpo::eval {

// Maximum-weight assignment of rows to columns (Hungarian method). Entry r is
// the column assigned to row r, or -1 when rows outnumber columns.
std::vector<int> max_weight_assignment(const Matrix& weights);

struct Report {
  // S x K mean responsibility of each expert on each source.
  Matrix source_responsibility;
  // Expert matched to each source.
  std::vector<int> matching;
  // Mean responsibility of the matched expert, per source and overall
  // (averaged over labelled triplets).
  Vector matched_per_source;
  double matched_mean = 0.0;
  // Fraction of triplets whose highest-weight expert is matched to its source.
  double gating_accuracy = 0.0;
  // S x K mean over prompts of r*_s(x, argmax_y pi_k(y|x)); empty without a
  // ground truth.
  Matrix greedy_reward;
  // Mean TV distance between the model posterior (experts reordered by the
  // matching) and the exact Bayes posterior; NaN without a ground truth.
  double recovery_tv = 0.0;
  std::size_t labelled = 0;
};

// Exact posteriors of every triplet under the model.
std::vector<core::Responsibilities> posteriors(const core::Dataset& dataset,
                                               const core::Model& model);

double gating_accuracy(std::span<const core::PreferenceTriplet> triplets,
                       const core::Model& model, std::span<const int> matching);

Matrix greedy_reward_matrix(const synth::GroundTruth& gt,
                            const core::Model& model);

double recovery_tv(std::span<const core::PreferenceTriplet> triplets,
                   std::span<const core::Responsibilities> q,
                   const synth::GroundTruth& gt, std::span<const int> matching);

// Throws on any dimension mismatch between model, dataset and ground truth.
Report evaluate(const core::Model& model, const core::Dataset& dataset,
                const synth::GroundTruth* gt);

io::Json report_to_json(const Report& report);

}  // namespace mixdpo::eval

#endif  // MIXDPO_EVAL_EVAL_HPP_
