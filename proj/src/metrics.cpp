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

#include "anonaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "anonaudit/error.hpp"

namespace anonaudit {

double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) throw ValidationError("AUC needs positive and negative scores");
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::sort(neg.begin(), neg.end());
  // Twice the Mann-Whitney U, kept integral so the ratio is exact.
  std::uint64_t twice_u = 0;
  for (double p : pos_scores) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    twice_u += 2 * static_cast<std::uint64_t>(lo - neg.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(pos_scores.size()) * static_cast<double>(neg.size());
  return static_cast<double>(twice_u) / (2.0 * pairs);
}

double tpr_at_fpr(std::span<const double> pos_scores, std::span<const double> neg_scores, double fpr_target) {
  if (pos_scores.empty() || neg_scores.empty()) throw ValidationError("TPR@FPR needs positive and negative scores");
  if (!(fpr_target >= 0.0 && fpr_target <= 1.0)) throw ValidationError("FPR target must lie in [0, 1]");
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::sort(neg.begin(), neg.end(), std::greater<>());
  const auto allowed =
      static_cast<std::size_t>(std::floor(fpr_target * static_cast<double>(neg.size()) + 1e-9));
  if (allowed >= neg.size()) return 1.0;
  const double threshold = neg[allowed];
  const auto above = std::count_if(pos_scores.begin(), pos_scores.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(above) / static_cast<double>(pos_scores.size());
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("Spearman needs two equal-length series, n >= 2");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double BinaryOutcome::accuracy() const {
  const auto total = tp + fp + tn + fn;
  return total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
}

double BinaryOutcome::fpr() const { return fp + tn ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0; }

double BinaryOutcome::fnr() const { return fn + tp ? static_cast<double>(fn) / static_cast<double>(fn + tp) : 0.0; }

}  // namespace anonaudit
