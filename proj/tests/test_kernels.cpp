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

#include <random>
#include <vector>

#include "anonaudit/kernels.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace anonaudit::kernels;

namespace {

std::vector<float> random_floats(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<float> g;
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("squared_distances: serial and parallel agree bit for bit") {
  std::mt19937_64 rng(1);
  const std::size_t nq = 300, nc = 22, d = 37;
  const auto q = random_floats(rng, nq * d);
  std::vector<double> c(nc * d);
  for (auto& x : c) x = std::normal_distribution<double>(0, 3)(rng);
  std::vector<double> a(nq * nc), b(nq * nc);
  serial::squared_distances({q, nq, d}, {c, nc, d}, a);
  parallel::squared_distances({q, nq, d}, {c, nc, d}, b);
  CHECK(a == b);
  for (std::size_t i = 0; i < nq; i += 17)
    for (std::size_t j = 0; j < nc; ++j) {
      const auto ref = static_cast<double>(
          oracle::sq_dist(std::span<const float>(q).subspan(i * d, d), std::span<const double>(c).subspan(j * d, d)));
      CHECK(a[i * nc + j] == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("leave_one_out_nearest matches the pairwise oracle") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {2u, 3u, 50u, 257u}) {
    const std::size_t d = 5;
    const auto flat = random_floats(rng, n * d);
    std::vector<std::vector<float>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i].assign(flat.begin() + i * d, flat.begin() + (i + 1) * d);
    const auto s = serial::leave_one_out_nearest({flat, n, d});
    const auto p = parallel::leave_one_out_nearest({flat, n, d});
    CHECK(s == p);
    CHECK(s == oracle::brute_loo_nn(pts));
    for (std::size_t i = 0; i < n; i += 7) CHECK(serial::nearest_other({flat, n, d}, i) == s[i]);
  }
}

TEST_CASE("leave_one_out_nearest: duplicates resolve to the smaller index") {
  const std::vector<float> flat = {0, 0, 5, 5, 0, 0, 0, 0};
  const auto nn = serial::leave_one_out_nearest({flat, 4, 2});
  CHECK(nn == std::vector<std::size_t>{2, 0, 0, 0});
  CHECK(parallel::leave_one_out_nearest({flat, 4, 2}) == nn);
}

TEST_CASE("median3x3 matches the sorting oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 3}, {7, 4}, {64, 33}}) {
    std::vector<double> in(w * h);
    for (auto& x : in) x = u(rng);
    std::vector<double> s(in.size()), p(in.size());
    serial::median3x3(in, w, h, s);
    parallel::median3x3(in, w, h, p);
    CHECK(s == p);
    CHECK(s == oracle::naive_median3x3(in, w, h));
  }
}

TEST_CASE("max_threads is positive") { CHECK(max_threads() >= 1); }
