// Copyright 2026 The anonaudit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "anonaudit/embedding_store.hpp"
#include "anonaudit/kernels.hpp"

namespace anonaudit {

constexpr double kDefaultTau = 0.75;

/// Joint embedding set of all models for one prompt. Points are stored
/// flattened in (model, position) order.
class PromptPool {
 public:
  /// Requires >= 2 models, each with >= 2 embeddings of a common dimension.
  PromptPool(PromptId prompt, const std::vector<std::vector<std::vector<float>>>& per_model);

  static PromptPool from_dataset(const Dataset& ds, PromptId prompt);

  PromptId prompt() const { return prompt_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_models() const { return offsets_.size() - 1; }
  std::size_t size() const { return labels_.size(); }
  std::size_t count(ModelId model) const;
  ModelId label(std::size_t flat_index) const { return labels_[flat_index]; }
  std::size_t flat_index(ModelId model, std::size_t position) const;
  kernels::MatrixView<float> points() const { return {points_, labels_.size(), dim_}; }

  PromptPool normalized() const;

 private:
  PromptPool() = default;

  PromptId prompt_{};
  std::size_t dim_ = 0;
  std::vector<float> points_;
  std::vector<ModelId> labels_;
  std::vector<std::size_t> offsets_;  // model m occupies [offsets_[m], offsets_[m+1])
};

struct DistinguishabilityScore {
  PromptId prompt{};
  std::vector<double> frac;  // indexed by model id
  double d = 0.0;
  double tau = kDefaultTau;
};

/// Model label of the leave-one-out nearest neighbour of (model, position).
ModelId nn_label(ModelId model, std::size_t position, const PromptPool& pool, bool normalize = false);

double frac(ModelId model, const PromptPool& pool, bool normalize = false);

/// frac for every model of the pool, computed from one leave-one-out pass.
std::vector<double> frac_all(const PromptPool& pool, bool normalize = false);

/// D = #{models with frac > tau} / n_models.
DistinguishabilityScore prompt_distinguishability(const PromptPool& pool, double tau = kDefaultTau,
                                                  bool normalize = false);

struct PromptError {
  PromptId prompt{};
  std::string message;
};

struct PromptRanking {
  std::vector<DistinguishabilityScore> scores;  // descending D, ties by prompt id
  std::vector<PromptError> errors;              // prompts whose pool was invalid
};

PromptRanking rank_prompts(const Dataset& ds, double tau = kDefaultTau, bool normalize = false);

/// Prompts with D >= min_score, descending D.
std::vector<PromptId> select_prompts(const Dataset& ds, double min_score, double tau = kDefaultTau,
                                     bool normalize = false);

/// CSV rows: prompt_id,D,frac_<model name>...
void write_scores_csv(std::ostream& os, const std::vector<DistinguishabilityScore>& scores,
                      const std::vector<ModelEntry>& models);

}  // namespace anonaudit
