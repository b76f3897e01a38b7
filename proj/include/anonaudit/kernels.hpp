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

// Data-parallel inner loops. Every kernel has a serial reference version and
// an OpenMP version; both evaluate each output element with the same
// arithmetic, so their results are bit-identical.

#include <cstddef>
#include <span>
#include <vector>

namespace anonaudit::kernels {

/// Row-major matrix view.
template <class T>
struct MatrixView {
  std::span<const T> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const T> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

namespace serial {

/// out[i * centers.rows + j] = ||queries[i] - centers[j]||^2.
void squared_distances(MatrixView<float> queries, MatrixView<double> centers, std::span<double> out);

/// For each point, the index of its nearest other point (ties -> smaller index).
std::vector<std::size_t> leave_one_out_nearest(MatrixView<float> points);

/// Nearest other point of a single query row.
std::size_t nearest_other(MatrixView<float> points, std::size_t query);

/// 3x3 median filter with edge-replicate padding.
void median3x3(std::span<const double> in, std::size_t width, std::size_t height, std::span<double> out);

}  // namespace serial

namespace parallel {

void squared_distances(MatrixView<float> queries, MatrixView<double> centers, std::span<double> out);
std::vector<std::size_t> leave_one_out_nearest(MatrixView<float> points);
void median3x3(std::span<const double> in, std::size_t width, std::size_t height, std::span<double> out);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 when built without OpenMP).
int max_threads();

}  // namespace anonaudit::kernels
