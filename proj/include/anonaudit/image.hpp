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
#include <filesystem>
#include <span>
#include <vector>

namespace anonaudit {

/// Grayscale image, row-major, every pixel in [0, 1].
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(std::size_t width, std::size_t height, std::vector<double> data);

  static ImageGrid filled(std::size_t width, std::size_t height, double value);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  double at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// Real-valued image-shaped field; not clamped.
struct Field {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;
};

/// Binary PGM (P5) with maxval 255; pixel v maps to v / 255.
ImageGrid load_pgm(const std::filesystem::path& path);
/// Writes P5, maxval 255, each pixel rounded to the nearest 8-bit level.
void write_pgm(const ImageGrid& img, const std::filesystem::path& path);

/// 3x3 median filter, edge-replicate padding. Needs width, height >= 3.
ImageGrid denoise(const ImageGrid& img);

/// img - denoise(img).
Field residual(const ImageGrid& img);

/// Largest centered square.
ImageGrid center_crop_square(const ImageGrid& img);

/// Copies values into an ImageGrid, clamping each to [0, 1].
ImageGrid clamp_to_image(std::size_t width, std::size_t height, std::span<const double> values);

}  // namespace anonaudit
