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

#include "anonaudit/kernels.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "anonaudit/error.hpp"

namespace anonaudit::kernels {

namespace {

inline double sqdist(std::span<const float> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = static_cast<double>(a[k]) - b[k];
    acc += diff * diff;
  }
  return acc;
}

inline double sqdist(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc += diff * diff;
  }
  return acc;
}

inline std::size_t nearest_other(MatrixView<float> points, std::size_t i) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d = std::numeric_limits<double>::infinity();
  const auto q = points.row(i);
  for (std::size_t j = 0; j < points.rows; ++j) {
    if (j == i) continue;
    const double d = sqdist(q, points.row(j));
    if (d < best_d) {  // strict: earlier (smaller) index wins ties
      best_d = d;
      best = j;
    }
  }
  return best;
}

inline double median_at(std::span<const double> in, std::size_t width, std::size_t height, std::size_t x,
                        std::size_t y) {
  std::array<double, 9> w{};
  std::size_t n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    const auto yy = static_cast<std::size_t>(
        std::clamp<std::int64_t>(static_cast<std::int64_t>(y) + dy, 0, static_cast<std::int64_t>(height) - 1));
    for (int dx = -1; dx <= 1; ++dx) {
      const auto xx = static_cast<std::size_t>(
          std::clamp<std::int64_t>(static_cast<std::int64_t>(x) + dx, 0, static_cast<std::int64_t>(width) - 1));
      w[n++] = in[yy * width + xx];
    }
  }
  std::nth_element(w.begin(), w.begin() + 4, w.end());
  return w[4];
}

void check_distances(MatrixView<float> q, MatrixView<double> c, std::span<double> out) {
  if (q.cols != c.cols) throw ValidationError("dimension mismatch between queries and centers");
  if (out.size() != q.rows * c.rows) throw ValidationError("distance output has wrong size");
}

void check_median(std::span<const double> in, std::size_t width, std::size_t height, std::span<double> out) {
  if (in.size() != width * height || out.size() != in.size()) throw ValidationError("median filter size mismatch");
}

}  // namespace

namespace serial {

void squared_distances(MatrixView<float> queries, MatrixView<double> centers, std::span<double> out) {
  check_distances(queries, centers, out);
  for (std::size_t i = 0; i < queries.rows; ++i)
    for (std::size_t j = 0; j < centers.rows; ++j) out[i * centers.rows + j] = sqdist(queries.row(i), centers.row(j));
}

std::size_t nearest_other(MatrixView<float> points, std::size_t query) {
  if (points.rows < 2) throw ValidationError("leave-one-out search needs at least 2 points");
  if (query >= points.rows) throw ValidationError("query index out of range");
  return kernels::nearest_other(points, query);
}

std::vector<std::size_t> leave_one_out_nearest(MatrixView<float> points) {
  if (points.rows < 2) throw ValidationError("leave-one-out search needs at least 2 points");
  std::vector<std::size_t> nn(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) nn[i] = nearest_other(points, i);
  return nn;
}

void median3x3(std::span<const double> in, std::size_t width, std::size_t height, std::span<double> out) {
  check_median(in, width, height, out);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) out[y * width + x] = median_at(in, width, height, x, y);
}

}  // namespace serial

namespace parallel {

void squared_distances(MatrixView<float> queries, MatrixView<double> centers, std::span<double> out) {
  check_distances(queries, centers, out);
  const auto n = static_cast<std::int64_t>(queries.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < centers.rows; ++j)
      out[ui * centers.rows + j] = sqdist(queries.row(ui), centers.row(j));
  }
}

std::vector<std::size_t> leave_one_out_nearest(MatrixView<float> points) {
  if (points.rows < 2) throw ValidationError("leave-one-out search needs at least 2 points");
  std::vector<std::size_t> nn(points.rows);
  const auto n = static_cast<std::int64_t>(points.rows);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) nn[static_cast<std::size_t>(i)] = nearest_other(points, static_cast<std::size_t>(i));
  return nn;
}

void median3x3(std::span<const double> in, std::size_t width, std::size_t height, std::span<double> out) {
  check_median(in, width, height, out);
  const auto h = static_cast<std::int64_t>(height);
#pragma omp parallel for schedule(static)
  for (std::int64_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < width; ++x)
      out[static_cast<std::size_t>(y) * width + x] = median_at(in, width, height, x, static_cast<std::size_t>(y));
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace anonaudit::kernels
