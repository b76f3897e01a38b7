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

#include "anonaudit/distinguishability.hpp"

#include <algorithm>
#include <ostream>

#include "anonaudit/error.hpp"

namespace anonaudit {

PromptPool::PromptPool(PromptId prompt, const std::vector<std::vector<std::vector<float>>>& per_model)
    : prompt_(prompt) {
  if (per_model.size() < 2) throw ValidationError("a prompt pool needs at least 2 models");
  offsets_.push_back(0);
  for (std::size_t m = 0; m < per_model.size(); ++m) {
    if (per_model[m].size() < 2)
      throw ValidationError("model " + std::to_string(m) + " contributes fewer than 2 embeddings");
    for (const auto& v : per_model[m]) {
      if (dim_ == 0) dim_ = v.size();
      if (v.empty() || v.size() != dim_) throw ValidationError("pool embeddings have inconsistent dimensions");
      points_.insert(points_.end(), v.begin(), v.end());
      labels_.push_back(static_cast<ModelId>(m));
    }
    offsets_.push_back(labels_.size());
  }
}

PromptPool PromptPool::from_dataset(const Dataset& ds, PromptId prompt) {
  std::vector<std::vector<std::vector<float>>> per_model(ds.num_models());
  for (const auto& m : ds.models())
    for (std::size_t r : ds.cell(m.id, prompt)) per_model[to_index(m.id)].push_back(ds.records()[r].vector);
  return PromptPool(prompt, per_model);
}

std::size_t PromptPool::count(ModelId model) const {
  const std::size_t m = to_index(model);
  if (m >= num_models()) throw ValidationError("model not in pool");
  return offsets_[m + 1] - offsets_[m];
}

std::size_t PromptPool::flat_index(ModelId model, std::size_t position) const {
  if (position >= count(model)) throw ValidationError("position out of range for model");
  return offsets_[to_index(model)] + position;
}

PromptPool PromptPool::normalized() const {
  PromptPool out = *this;
  for (std::size_t i = 0; i < size(); ++i) {
    auto row = std::span<float>(out.points_).subspan(i * dim_, dim_);
    const auto unit = l2_normalize(std::span<const float>(row));
    std::copy(unit.begin(), unit.end(), row.begin());
  }
  return out;
}

ModelId nn_label(ModelId model, std::size_t position, const PromptPool& pool, bool normalize) {
  const std::size_t q = pool.flat_index(model, position);
  if (normalize) {
    const auto p = pool.normalized();
    return p.label(kernels::serial::nearest_other(p.points(), q));
  }
  return pool.label(kernels::serial::nearest_other(pool.points(), q));
}

std::vector<double> frac_all(const PromptPool& pool, bool normalize) {
  if (normalize) return frac_all(pool.normalized(), false);
  const auto nn = kernels::parallel::leave_one_out_nearest(pool.points());
  std::vector<std::size_t> hits(pool.num_models(), 0);
  for (std::size_t i = 0; i < nn.size(); ++i)
    if (pool.label(nn[i]) == pool.label(i)) ++hits[to_index(pool.label(i))];
  std::vector<double> out(pool.num_models());
  for (std::size_t m = 0; m < out.size(); ++m)
    out[m] = static_cast<double>(hits[m]) / static_cast<double>(pool.count(static_cast<ModelId>(m)));
  return out;
}

double frac(ModelId model, const PromptPool& pool, bool normalize) {
  if (to_index(model) >= pool.num_models()) throw ValidationError("unknown model");
  return frac_all(pool, normalize)[to_index(model)];
}

DistinguishabilityScore prompt_distinguishability(const PromptPool& pool, double tau, bool normalize) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  DistinguishabilityScore s;
  s.prompt = pool.prompt();
  s.tau = tau;
  s.frac = frac_all(pool, normalize);
  const auto separable = std::count_if(s.frac.begin(), s.frac.end(), [tau](double f) { return f > tau; });
  s.d = static_cast<double>(separable) / static_cast<double>(s.frac.size());
  return s;
}

PromptRanking rank_prompts(const Dataset& ds, double tau, bool normalize) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  PromptRanking out;
  for (const auto& p : ds.prompts()) {
    try {
      out.scores.push_back(prompt_distinguishability(PromptPool::from_dataset(ds, p.id), tau, normalize));
    } catch (const ValidationError& e) {
      out.errors.push_back({p.id, e.what()});
    }
  }
  std::stable_sort(out.scores.begin(), out.scores.end(),
                   [](const auto& a, const auto& b) { return a.d > b.d; });
  return out;
}

std::vector<PromptId> select_prompts(const Dataset& ds, double min_score, double tau, bool normalize) {
  if (!(min_score >= 0.0 && min_score <= 1.0)) throw ValidationError("min_score must lie in [0, 1]");
  std::vector<PromptId> out;
  for (const auto& s : rank_prompts(ds, tau, normalize).scores)
    if (s.d >= min_score) out.push_back(s.prompt);
  return out;
}

void write_scores_csv(std::ostream& os, const std::vector<DistinguishabilityScore>& scores,
                      const std::vector<ModelEntry>& models) {
  os << "prompt_id,D";
  for (const auto& m : models) os << ",frac_" << m.name;
  os << '\n';
  for (const auto& s : scores) {
    os << to_index(s.prompt) << ',' << s.d;
    for (double f : s.frac) os << ',' << f;
    os << '\n';
  }
}

}  // namespace anonaudit
