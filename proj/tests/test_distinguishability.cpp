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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "anonaudit/distinguishability.hpp"
#include "anonaudit/error.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace anonaudit;

namespace {

using Cloud = std::vector<std::vector<float>>;

Cloud cluster(std::mt19937_64& rng, std::vector<float> center, double sigma, std::size_t n) {
  std::normal_distribution<double> g(0.0, sigma);
  Cloud out(n, center);
  for (auto& v : out)
    for (auto& x : v) x = static_cast<float>(x + g(rng));
  return out;
}

SynthConfig small_config(double sep, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.dim = 16;
  cfg.n_models = 8;
  cfg.n_prompts = 6;
  cfg.k_per_cell = 20;
  cfg.inter_sep = sep;
  cfg.intra_std = 1.0;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("PromptPool validation") {
  CHECK_THROWS_AS(PromptPool(PromptId{0}, {{{1.0f}, {2.0f}}}), ValidationError);
  CHECK_THROWS_AS(PromptPool(PromptId{0}, {{{1.0f}}, {{2.0f}, {3.0f}}}), ValidationError);
  CHECK_THROWS_AS(PromptPool(PromptId{0}, {{{1.0f}, {2.0f}}, {{2.0f, 1.0f}, {3.0f, 1.0f}}}), ValidationError);
  const PromptPool pool(PromptId{3}, {{{1.0f}, {2.0f}}, {{5.0f}, {6.0f}, {7.0f}}});
  CHECK(pool.size() == 5);
  CHECK(pool.count(ModelId{1}) == 3);
  CHECK(pool.flat_index(ModelId{1}, 0) == 2);
  CHECK(pool.label(4) == ModelId{1});
}

TEST_CASE("nn_label examples") {
  SUBCASE("twin at distance zero") {
    const PromptPool pool(PromptId{0}, {{{0, 0}, {0, 0}}, {{0.1f, 0}, {9, 9}}});
    CHECK(nn_label(ModelId{0}, 0, pool) == ModelId{0});
    CHECK(nn_label(ModelId{0}, 1, pool) == ModelId{0});
  }
  SUBCASE("exact duplicate across models: smaller flat index wins") {
    const PromptPool pool(PromptId{0}, {{{5, 5}, {9, 9}}, {{0, 0}, {0, 0}}});
    CHECK(nn_label(ModelId{1}, 0, pool) == ModelId{1});
    const PromptPool swapped(PromptId{0}, {{{0, 0}, {9, 9}}, {{0, 0}, {5, 5}}});
    CHECK(nn_label(ModelId{1}, 0, swapped) == ModelId{0});
  }
}

TEST_CASE("frac matches a leave-one-out oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Cloud> per_model;
    for (int m = 0; m < 5; ++m) per_model.push_back(cluster(rng, std::vector<float>(6, static_cast<float>(m)), 1.5, 12));
    const PromptPool pool(PromptId{0}, per_model);
    Cloud flat;
    std::vector<std::size_t> labels;
    for (std::size_t m = 0; m < per_model.size(); ++m)
      for (const auto& v : per_model[m]) {
        flat.push_back(v);
        labels.push_back(m);
      }
    const auto nn = oracle::brute_loo_nn(flat);
    const auto fr = frac_all(pool);
    for (std::size_t m = 0; m < 5; ++m) {
      std::size_t same = 0;
      for (std::size_t i = 0; i < flat.size(); ++i)
        if (labels[i] == m && labels[nn[i]] == m) ++same;
      CHECK(fr[m] == doctest::Approx(static_cast<double>(same) / 12.0));
      CHECK(frac(ModelId(m), pool) == fr[m]);
    }
  }
}

TEST_CASE("frac extremes") {
  std::mt19937_64 rng(5);
  SUBCASE("well separated clusters give frac = 1 and D = 1") {
    std::vector<Cloud> per_model;
    for (int m = 0; m < 6; ++m) {
      std::vector<float> c(8, 0.0f);
      c[static_cast<std::size_t>(m)] = 1e3f;
      per_model.push_back(cluster(rng, c, 1.0, 10));
    }
    const PromptPool pool(PromptId{0}, per_model);
    for (double f : frac_all(pool)) CHECK(f == 1.0);
    CHECK(prompt_distinguishability(pool).d == 1.0);
  }
  SUBCASE("one shared distribution gives chance level") {
    const std::size_t n_models = 11;
    double total = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
      std::vector<Cloud> per_model;
      for (std::size_t m = 0; m < n_models; ++m) per_model.push_back(cluster(rng, std::vector<float>(8, 0.0f), 1.0, 20));
      const auto fr = frac_all(PromptPool(PromptId{0}, per_model));
      for (double f : fr) total += f;
    }
    // Each point sees 19 same-label neighbours out of 219 others.
    const double mean = total / (trials * static_cast<double>(n_models));
    CHECK(std::abs(mean - 19.0 / 219.0) < 0.05);
    CHECK(std::abs(mean - 1.0 / 11.0) < 0.05);
  }
}

TEST_CASE("D counts frac strictly above tau") {
  // Two models, four points each, built so that exactly 3 of 4 points in model 0
  // have a same-label nearest neighbour (frac = 0.75) and model 1 has frac = 1.
  const PromptPool pool(PromptId{0}, {{{0}, {1}, {2}, {17}}, {{20}, {21}, {22}, {23}}});
  const auto fr = frac_all(pool);
  REQUIRE(fr[0] == 0.75);
  REQUIRE(fr[1] == 1.0);
  CHECK(prompt_distinguishability(pool, 0.75).d == 0.5);
  CHECK(prompt_distinguishability(pool, 0.7).d == 1.0);
  CHECK(prompt_distinguishability(pool, 0.99).d == 0.5);
  CHECK_THROWS_AS(prompt_distinguishability(pool, 0.0), ValidationError);
  CHECK_THROWS_AS(prompt_distinguishability(pool, 1.0), ValidationError);
}

TEST_CASE("relabeling permutes frac") {
  std::mt19937_64 rng(6);
  std::vector<Cloud> per_model;
  for (int m = 0; m < 4; ++m) per_model.push_back(cluster(rng, std::vector<float>(3, 2.0f * static_cast<float>(m)), 1.5, 15));
  const auto base = frac_all(PromptPool(PromptId{0}, per_model));
  std::vector<std::size_t> perm = {2, 0, 3, 1};
  std::vector<Cloud> permuted(4);
  for (std::size_t m = 0; m < 4; ++m) permuted[perm[m]] = per_model[m];
  const auto fr = frac_all(PromptPool(PromptId{0}, permuted));
  for (std::size_t m = 0; m < 4; ++m) CHECK(fr[perm[m]] == doctest::Approx(base[m]));
}

TEST_CASE("D increases with separation on average") {
  auto mean_d = [](double sep) {
    double s = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = rank_prompts(generate_synthetic(small_config(sep, seed)));
      for (const auto& sc : r.scores) s += sc.d;
    }
    return s / 30.0;
  };
  const double d1 = mean_d(1.0), d3 = mean_d(3.0), d8 = mean_d(8.0);
  CHECK(d1 < d3);
  CHECK(d3 < d8);
  CHECK(d8 > 0.95);
}

TEST_CASE("rank_prompts ordering, normalization and selection") {
  SynthConfig cfg = small_config(3.0, 11);
  cfg.per_prompt_sep = {0.5, 10.0, 3.0};
  const auto ds = generate_synthetic(cfg);
  const auto r = rank_prompts(ds);
  REQUIRE(r.scores.size() == 6);
  CHECK(r.errors.empty());
  for (std::size_t i = 1; i < r.scores.size(); ++i) {
    CHECK(r.scores[i - 1].d >= r.scores[i].d);
    if (r.scores[i - 1].d == r.scores[i].d) CHECK(to_index(r.scores[i - 1].prompt) < to_index(r.scores[i].prompt));
  }
  CHECK(r.scores.front().d == 1.0);

  const auto chosen = select_prompts(ds, 0.9);
  for (const auto& sc : r.scores) {
    const bool in = std::find(chosen.begin(), chosen.end(), sc.prompt) != chosen.end();
    CHECK(in == (sc.d >= 0.9));
  }
  CHECK(select_prompts(ds, 0.0).size() == 6);
  CHECK_THROWS_AS(select_prompts(ds, 1.5), ValidationError);

  // Normalizing inside the scorer equals scoring a normalized dataset.
  const auto a = rank_prompts(ds, kDefaultTau, true);
  const auto b = rank_prompts(normalize_dataset(ds), kDefaultTau, false);
  for (std::size_t i = 0; i < a.scores.size(); ++i) CHECK(a.scores[i].frac == b.scores[i].frac);
}

TEST_CASE("rank_prompts reports invalid pools") {
  std::vector<EmbeddingRecord> recs = {
      {ModelId{0}, PromptId{0}, 0, {0.0f}}, {ModelId{0}, PromptId{0}, 1, {1.0f}},
      {ModelId{1}, PromptId{0}, 0, {5.0f}}, {ModelId{1}, PromptId{0}, 1, {6.0f}},
      {ModelId{0}, PromptId{1}, 0, {0.0f}}, {ModelId{1}, PromptId{1}, 0, {5.0f}},
  };
  const Dataset ds(1, {{ModelId{0}, "a"}, {ModelId{1}, "b"}}, {{PromptId{0}, "x"}, {PromptId{1}, "y"}}, recs);
  const auto r = rank_prompts(ds);
  CHECK(r.scores.size() == 1);
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors.front().prompt == PromptId{1});
}

TEST_CASE("scores CSV") {
  const std::vector<ModelEntry> models = {{ModelId{0}, "sd"}, {ModelId{1}, "dalle"}};
  std::ostringstream os;
  write_scores_csv(os, {{PromptId{4}, {1.0, 0.5}, 0.5, 0.75}}, models);
  CHECK(os.str() == "prompt_id,D,frac_sd,frac_dalle\n4,0.5,1,0.5\n");
}
