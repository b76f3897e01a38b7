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

namespace anonaudit {

/// Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg), from exact pair counts.
double auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// TPR at the smallest threshold that lets at most fpr_target of the
/// negatives score strictly above it. Never exceeds the target FPR.
double tpr_at_fpr(std::span<const double> pos_scores, std::span<const double> neg_scores, double fpr_target);

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> values);

/// Pearson correlation of midranks. Returns 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> xs);

struct BinaryOutcome {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  double accuracy() const;
  double fpr() const;
  double fnr() const;
};

}  // namespace anonaudit
