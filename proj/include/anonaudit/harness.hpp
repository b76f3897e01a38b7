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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anonaudit/embedding_store.hpp"
#include "json.hpp"

namespace anonaudit {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std across repetitions
};

struct TopKSummary {
  MeanStd over_repetitions;
  double std_over_prompts = 0.0;  // per-repetition std of per-prompt accuracy, averaged over repetitions
};

struct OneVsRestRow {
  ModelId model{};
  std::string model_name;
  std::optional<double> alpha;  // set for the limited-access variant
  MeanStd accuracy, auc, fpr, fnr, tpr_at_1pct, tpr_at_5pct;
};

struct ExperimentInfo {
  std::string kind;
  std::uint64_t dataset_hash = 0;
  std::size_t n_models = 0;
  std::size_t n_prompts = 0;
  std::size_t k_ref = 0;
  std::size_t repetitions = 0;
  std::uint64_t seed = 0;
  bool normalize = false;
  std::vector<double> alphas;
  std::vector<std::uint64_t> repetition_seeds;
};

struct EvalReport {
  ExperimentInfo experiment;
  std::map<int, TopKSummary> topk_accuracy;  // k in {1, 2, 3, 5}
  std::vector<OneVsRestRow> one_vs_rest;
  std::optional<double> runtime_seconds;  // only when timing is requested

  nlohmann::json to_json() const;
};

inline constexpr int kTopK[] = {1, 2, 3, 5};

/// Repeated reference/holdout splits (seed + r); nearest-centroid ranking of
/// every holdout embedding against per-prompt centroid tables.
EvalReport run_multiclass(const Dataset& ds, std::size_t k_ref, std::size_t repetitions, std::uint64_t seed,
                          bool normalize);

/// Case 1 for each target (all models when `target` is empty). Score for
/// AUC / TPR@FPR is the margin: nearest other centroid distance minus the
/// target centroid distance.
EvalReport run_one_vs_rest_full(const Dataset& ds, std::optional<ModelId> target, std::size_t k_ref,
                                std::size_t repetitions, std::uint64_t seed, bool normalize);

/// Case 2 for each target and alpha. Score for AUC / TPR@FPR is -distance to
/// the target centroid, pooled over prompts.
EvalReport run_one_vs_rest_limited(const Dataset& ds, std::optional<ModelId> target,
                                   const std::vector<double>& alphas, std::size_t k_ref, std::size_t repetitions,
                                   std::uint64_t seed, bool normalize);

struct PromptOutcome {
  PromptId prompt{};
  double d = 0.0;          // distinguishability on the reference split
  std::size_t hits = 0;    // top-1 hits on the holdout split
  std::size_t items = 0;
  double success() const { return items ? static_cast<double>(hits) / static_cast<double>(items) : 0.0; }
};

struct SuccessBucket {
  double lo = 0.0;
  double hi = 0.0;
  double mean_success = 0.0;
  std::size_t n_prompts = 0;
};

struct SuccessCurve {
  std::vector<SuccessBucket> buckets;
  std::vector<PromptOutcome> prompts;  // ascending prompt id
  double spearman = 0.0;               // rho(D, per-prompt top-1)
  double tau = 0.0;

  /// Pooled top-1 over prompts with D >= min_score; nullopt if none qualify.
  std::optional<double> selected_accuracy(double min_score) const;
  nlohmann::json to_json() const;
};

/// One split: D per prompt from the reference split, top-1 per prompt from
/// the holdout split, prompts bucketed into `bins` equal-width D ranges.
SuccessCurve success_vs_distinguishability(const Dataset& ds, double tau, std::size_t bins, std::size_t k_ref,
                                           std::uint64_t seed, bool normalize);

struct CostModel {
  std::vector<double> prices;  // per image, one entry per model
  std::size_t images = 1;      // generations per model

  void validate() const;
};

/// images * sum(prices)
double attack_cost(const CostModel& cm);

/// Canonical serialization: sorted keys, two-space indent, trailing newline.
std::string canonical_dump(const nlohmann::json& j);

// ---- toy-encoder defense evaluation ----------------------------------------

/// A synthetic leaderboard in pixel space: one prompt, each model adds its
/// own fixed pattern to shared content; a fixed attacker encoder runs the
/// nearest-centroid attack; a disjoint ensemble of surrogate encoders runs
/// the defense.
struct DefenseEvalConfig {
  std::size_t side = 16;
  std::size_t n_models = 8;
  std::size_t k_ref = 10;
  std::size_t n_test = 100;
  double content_std = 0.1;
  double pattern_std = 0.005;
  double noise_std = 0.01;
  std::size_t encoder_dim = 64;
  std::size_t ensemble_size = 3;
  std::uint64_t attacker_seed = 1000003;
  std::uint64_t seed = 0;
  std::vector<double> epsilons = {0.0, 2.0, 4.0, 8.0};
  std::vector<double> undo_sigmas;  // 8-bit counts
  double eta = 0.1;
  double tau_temp = 0.1;
  std::size_t iterations = 100;

  void validate() const;
};

struct DefenseEvalRow {
  double epsilon = 0.0;
  std::map<int, double> topk;  // k in {1, 2, 3}
  double max_linf = 0.0;       // over all defended images, [0,1] units
  std::size_t budget_violations = 0;
  std::map<double, double> undo_top1;  // sigma (counts) -> top-1 after noising
};

struct DefenseEvalReport {
  std::vector<DefenseEvalRow> rows;
  nlohmann::json to_json() const;
};

DefenseEvalReport run_defense_eval(const DefenseEvalConfig& config);

}  // namespace anonaudit
