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
#include <span>
#include <vector>

#include "anonaudit/embedding_store.hpp"
#include "anonaudit/kernels.hpp"

namespace anonaudit {

struct CentroidEntry {
  ModelId model{};
  std::vector<double> centroid;
  std::size_t k = 0;  // reference embeddings averaged
};

/// Per-model mean reference embedding for one prompt, ordered by model id.
struct CentroidTable {
  PromptId prompt{};
  std::vector<CentroidEntry> entries;

  std::size_t dim() const { return entries.empty() ? 0 : entries.front().centroid.size(); }
  const CentroidEntry* find(ModelId model) const;
  /// Centroids packed row-major, in entry order.
  std::vector<double> packed() const;
};

struct RankedEntry {
  ModelId model{};
  double distance = 0.0;
};

/// Every model of a table, ascending by distance, ties by ascending model id.
using RankedPrediction = std::vector<RankedEntry>;

/// Acceptance radius of one model's cluster: nearest-rank alpha-quantile of
/// the reference distances to their own centroid.
struct ClusterThreshold {
  PromptId prompt{};
  ModelId model{};
  std::vector<double> centroid;
  double alpha = 1.0;
  double lambda = 0.0;
};

std::vector<double> compute_centroid(std::span<const std::span<const float>> embs);
std::vector<double> compute_centroid(const std::vector<std::vector<float>>& embs);

CentroidTable build_centroid_table(const Dataset& reference, PromptId prompt);

RankedPrediction rank_models(std::span<const float> e_star, const CentroidTable& table, bool normalize = false);

enum class Execution { serial, parallel };

/// Rankings for many queries at once. Queries are used as given; normalize
/// them beforehand if needed. Both execution modes give identical results.
std::vector<RankedPrediction> rank_models_batch(kernels::MatrixView<float> queries, const CentroidTable& table,
                                                Execution exec = Execution::parallel);

/// Sorts one row of squared distances into a ranking over `table`'s models.
RankedPrediction ranking_from_squared(std::span<const double> sq, const CentroidTable& table);

ModelId classify(std::span<const float> e_star, const CentroidTable& table, bool normalize = false);

/// Case 1: true iff the nearest centroid belongs to `target`.
bool one_vs_rest_full(std::span<const float> e_star, const CentroidTable& table, ModelId target,
                      bool normalize = false);

/// Case 2 fit. Requires alpha in (0, 1] and at least two reference embeddings.
ClusterThreshold fit_threshold(std::span<const std::span<const float>> reference_embs, double alpha,
                               PromptId prompt = {}, ModelId model = {});
ClusterThreshold fit_threshold(const std::vector<std::vector<float>>& reference_embs, double alpha);

/// Nearest-rank quantile: the ceil(alpha * n)-th smallest value.
double nearest_rank_quantile(std::vector<double> values, double alpha);

double distance_to_centroid(std::span<const float> z, std::span<const double> centroid);

/// Case 2: accept iff ||z - c|| <= lambda (inclusive).
bool one_vs_rest_limited(std::span<const float> z, const ClusterThreshold& th);

}  // namespace anonaudit
