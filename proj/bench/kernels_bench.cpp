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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "anonaudit/kernels.hpp"

using namespace anonaudit::kernels;

namespace {

std::vector<float> points(std::size_t n, std::size_t d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  std::vector<float> v(n * d);
  for (auto& x : v) x = g(rng);
  return v;
}

template <auto Fn>
void BM_SquaredDistances(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0));
  const std::size_t nc = 22, d = 512;
  const auto q = points(nq, d);
  const auto cf = points(nc, d);
  const std::vector<double> c(cf.begin(), cf.end());
  std::vector<double> out(nq * nc);
  for (auto _ : state) {
    Fn(MatrixView<float>{q, nq, d}, MatrixView<double>{c, nc, d}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * nq));
}

template <auto Fn>
void BM_LeaveOneOut(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64;
  const auto p = points(n, d);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(MatrixView<float>{p, n, d}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <auto Fn>
void BM_Median3x3(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  std::vector<double> in(side * side), out(side * side);
  for (auto& v : in) v = u(rng);
  for (auto _ : state) {
    Fn(in, side, side, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * side * side));
}

}  // namespace

BENCHMARK(BM_SquaredDistances<serial::squared_distances>)->Name("squared_distances/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_SquaredDistances<parallel::squared_distances>)->Name("squared_distances/parallel")->Arg(1000)->Arg(10000)->UseRealTime();
BENCHMARK(BM_LeaveOneOut<serial::leave_one_out_nearest>)->Name("leave_one_out/serial")->Arg(660)->Arg(2000);
BENCHMARK(BM_LeaveOneOut<parallel::leave_one_out_nearest>)->Name("leave_one_out/parallel")->Arg(660)->Arg(2000)->UseRealTime();
BENCHMARK(BM_Median3x3<serial::median3x3>)->Name("median3x3/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_Median3x3<parallel::median3x3>)->Name("median3x3/parallel")->Arg(256)->Arg(1024)->UseRealTime();

BENCHMARK_MAIN();
