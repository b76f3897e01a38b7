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

#include <cmath>
#include <random>

#include "anonaudit/error.hpp"
#include "anonaudit/metrics.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace anonaudit;

TEST_CASE("auc by hand") {
  CHECK(auc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.5, 0.1}) == 0.75);
  CHECK(auc(std::vector<double>{1, 2}, std::vector<double>{0, 0}) == 1.0);
  CHECK(auc(std::vector<double>{0}, std::vector<double>{1}) == 0.0);
  CHECK(auc(std::vector<double>{1}, std::vector<double>{1}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{}, std::vector<double>{1}), ValidationError);
}

TEST_CASE("auc and tpr@fpr against exhaustive oracles") {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> sz(1, 60), coarse(0, 9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> pos(static_cast<std::size_t>(sz(rng))), neg(static_cast<std::size_t>(sz(rng)));
    // Coarse values force plenty of ties.
    const bool tied = trial % 2 == 0;
    for (auto& v : pos) v = tied ? coarse(rng) + 1 : g(rng) + 1.0;
    for (auto& v : neg) v = tied ? coarse(rng) : g(rng);
    CHECK(auc(pos, neg) == doctest::Approx(oracle::pairwise_auc(pos, neg)).epsilon(1e-12));
    for (double f : {0.0, 0.01, 0.05, 0.1, 0.5}) {
      const double t = tpr_at_fpr(pos, neg, f);
      const double best = oracle::sweep_tpr_at_fpr(pos, neg, f);
      CHECK(t <= best + 1e-12);
      // Without ties the conservative threshold is the optimal one.
      if (!tied) CHECK(t == doctest::Approx(best));
    }
  }
}

TEST_CASE("tpr@fpr edge cases") {
  const std::vector<double> pos = {3, 4, 5}, neg = {1, 2, 3, 4};
  CHECK(tpr_at_fpr(pos, neg, 0.0) == doctest::Approx(1.0 / 3.0));
  CHECK(tpr_at_fpr(pos, neg, 0.25) == doctest::Approx(2.0 / 3.0));
  CHECK(tpr_at_fpr(pos, neg, 0.5) == 1.0);
  CHECK(tpr_at_fpr(pos, neg, 1.0) == 1.0);
  CHECK_THROWS_AS(tpr_at_fpr(pos, neg, -0.1), ValidationError);
}

TEST_CASE("midranks and spearman") {
  CHECK(midranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 4, 9, 16}) == doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5}) == 0.0);
  // Tied example checked against the textbook Pearson-on-ranks value.
  const std::vector<double> x = {1, 2, 2, 3}, y = {1, 3, 2, 4};
  const double rx[] = {1, 2.5, 2.5, 4}, ry[] = {1, 3, 2, 4};
  double mx = 2.5, my = 2.5, sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  CHECK(spearman(x, y) == doctest::Approx(sxy / std::sqrt(sxx * syy)));
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1}), ValidationError);
}

TEST_CASE("mean, sample_std and binary outcomes") {
  CHECK(mean(std::vector<double>{1, 2, 3, 4}) == 2.5);
  CHECK(sample_std(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(sample_std(std::vector<double>{3}) == 0.0);
  const BinaryOutcome o{8, 2, 88, 2};
  CHECK(o.accuracy() == doctest::Approx(0.96));
  CHECK(o.fpr() == doctest::Approx(2.0 / 90.0));
  CHECK(o.fnr() == doctest::Approx(0.2));
}
