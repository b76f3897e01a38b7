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

#include "anonaudit/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "anonaudit/error.hpp"

namespace anonaudit {

const CentroidEntry* CentroidTable::find(ModelId model) const {
  for (const auto& e : entries)
    if (e.model == model) return &e;
  return nullptr;
}

std::vector<double> CentroidTable::packed() const {
  std::vector<double> out;
  out.reserve(entries.size() * dim());
  for (const auto& e : entries) out.insert(out.end(), e.centroid.begin(), e.centroid.end());
  return out;
}

std::vector<double> compute_centroid(std::span<const std::span<const float>> embs) {
  if (embs.empty()) throw ValidationError("cannot compute the centroid of an empty set");
  const std::size_t d = embs.front().size();
  std::vector<double> sum(d, 0.0);
  for (const auto& e : embs) {
    if (e.size() != d) throw ValidationError("embeddings have inconsistent dimensions");
    for (std::size_t i = 0; i < d; ++i) sum[i] += e[i];
  }
  const double inv = 1.0 / static_cast<double>(embs.size());
  for (auto& x : sum) x *= inv;
  return sum;
}

std::vector<double> compute_centroid(const std::vector<std::vector<float>>& embs) {
  std::vector<std::span<const float>> views(embs.begin(), embs.end());
  return compute_centroid(views);
}

CentroidTable build_centroid_table(const Dataset& reference, PromptId prompt) {
  if (to_index(prompt) >= reference.num_prompts()) throw ValidationError("unknown prompt");
  CentroidTable table;
  table.prompt = prompt;
  const auto cells = prompt_cells(reference, prompt);
  for (std::size_t m = 0; m < cells.size(); ++m) {
    if (cells[m].empty())
      throw ValidationError("model " + std::to_string(m) + " has no reference records for prompt " +
                            std::to_string(to_index(prompt)));
    table.entries.push_back({static_cast<ModelId>(m), compute_centroid(cells[m]), cells[m].size()});
  }
  return table;
}

RankedPrediction ranking_from_squared(std::span<const double> sq, const CentroidTable& table) {
  RankedPrediction out(table.entries.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = {table.entries[j].model, std::sqrt(sq[j])};
  std::sort(out.begin(), out.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.model < b.model;
  });
  return out;
}

RankedPrediction rank_models(std::span<const float> e_star, const CentroidTable& table, bool normalize) {
  if (table.entries.empty()) throw ValidationError("empty centroid table");
  if (e_star.size() != table.dim()) throw ValidationError("query dimension does not match centroid table");
  std::vector<float> q(e_star.begin(), e_star.end());
  if (normalize) q = l2_normalize(std::span<const float>(q));
  const auto centers = table.packed();
  std::vector<double> sq(table.entries.size());
  kernels::serial::squared_distances({q, 1, q.size()}, {centers, table.entries.size(), table.dim()}, sq);
  return ranking_from_squared(sq, table);
}

std::vector<RankedPrediction> rank_models_batch(kernels::MatrixView<float> queries, const CentroidTable& table,
                                                Execution exec) {
  if (table.entries.empty()) throw ValidationError("empty centroid table");
  if (queries.cols != table.dim()) throw ValidationError("query dimension does not match centroid table");
  const auto centers = table.packed();
  const std::size_t c = table.entries.size();
  std::vector<double> sq(queries.rows * c);
  if (exec == Execution::parallel)
    kernels::parallel::squared_distances(queries, {centers, c, table.dim()}, sq);
  else
    kernels::serial::squared_distances(queries, {centers, c, table.dim()}, sq);
  std::vector<RankedPrediction> out(queries.rows);
  for (std::size_t i = 0; i < queries.rows; ++i)
    out[i] = ranking_from_squared(std::span<const double>(sq).subspan(i * c, c), table);
  return out;
}

ModelId classify(std::span<const float> e_star, const CentroidTable& table, bool normalize) {
  return rank_models(e_star, table, normalize).front().model;
}

bool one_vs_rest_full(std::span<const float> e_star, const CentroidTable& table, ModelId target, bool normalize) {
  if (table.find(target) == nullptr) throw ValidationError("target model is not in the centroid table");
  return classify(e_star, table, normalize) == target;
}

double nearest_rank_quantile(std::vector<double> values, double alpha) {
  if (values.empty()) throw ValidationError("quantile of an empty set");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  const double n = static_cast<double>(values.size());
  // Guard against alpha * n landing a hair above an integer (e.g. 0.8 * 5).
  auto rank = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

double distance_to_centroid(std::span<const float> z, std::span<const double> centroid) {
  if (z.size() != centroid.size()) throw ValidationError("dimension mismatch against centroid");
  double sq = 0.0;
  kernels::serial::squared_distances({z, 1, z.size()}, {centroid, 1, centroid.size()}, {&sq, 1});
  return std::sqrt(sq);
}

ClusterThreshold fit_threshold(std::span<const std::span<const float>> reference_embs, double alpha, PromptId prompt,
                               ModelId model) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  if (reference_embs.size() < 2) throw ValidationError("threshold fitting needs at least 2 reference embeddings");
  ClusterThreshold th;
  th.prompt = prompt;
  th.model = model;
  th.alpha = alpha;
  th.centroid = compute_centroid(reference_embs);
  std::vector<double> dists;
  dists.reserve(reference_embs.size());
  for (const auto& x : reference_embs) dists.push_back(distance_to_centroid(x, th.centroid));
  th.lambda = nearest_rank_quantile(std::move(dists), alpha);
  return th;
}

ClusterThreshold fit_threshold(const std::vector<std::vector<float>>& reference_embs, double alpha) {
  std::vector<std::span<const float>> views(reference_embs.begin(), reference_embs.end());
  return fit_threshold(views, alpha);
}

bool one_vs_rest_limited(std::span<const float> z, const ClusterThreshold& th) {
  return distance_to_centroid(z, th.centroid) <= th.lambda;
}

}  // namespace anonaudit
