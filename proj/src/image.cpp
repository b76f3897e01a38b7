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

#include "anonaudit/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "anonaudit/error.hpp"
#include "anonaudit/kernels.hpp"

namespace anonaudit {

ImageGrid::ImageGrid(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width_ == 0 || height_ == 0) throw ValidationError("image dimensions must be positive");
  if (data_.size() != width_ * height_) throw ValidationError("image data length does not match width*height");
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("image pixel outside [0, 1]");
  }
}

ImageGrid ImageGrid::filled(std::size_t width, std::size_t height, double value) {
  return ImageGrid(width, height, std::vector<double>(width * height, value));
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
  return tok;
}

std::size_t parse_dim(const std::string& tok, const std::filesystem::path& path) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); }))
    throw IoError("malformed PGM header in '" + path.string() + "'");
  return std::stoul(tok);
}

}  // namespace

ImageGrid load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const std::string magic = header_token(buf, pos);
  if (magic != "P5") throw IoError("P5 required: '" + path.string() + "' has magic '" + magic + "'");
  const std::size_t width = parse_dim(header_token(buf, pos), path);
  const std::size_t height = parse_dim(header_token(buf, pos), path);
  const std::size_t maxval = parse_dim(header_token(buf, pos), path);
  if (maxval != 255) throw IoError("maxval must be 255 in '" + path.string() + "'");
  if (width == 0 || height == 0) throw IoError("empty PGM raster in '" + path.string() + "'");
  ++pos;  // single whitespace byte before the raster
  if (pos > buf.size() || buf.size() - pos < width * height) throw IoError("truncated raster in '" + path.string() + "'");
  std::vector<double> data(width * height);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = buf[pos + i] / 255.0;
  return ImageGrid(width, height, std::move(data));
}

void write_pgm(const ImageGrid& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raster(img.size());
  for (std::size_t i = 0; i < raster.size(); ++i)
    raster[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ImageGrid denoise(const ImageGrid& img) {
  if (img.width() < 3 || img.height() < 3) throw ValidationError("image too small for 3x3 denoising");
  std::vector<double> out(img.size());
  kernels::parallel::median3x3(img.data(), img.width(), img.height(), out);
  return ImageGrid(img.width(), img.height(), std::move(out));
}

Field residual(const ImageGrid& img) {
  const ImageGrid smooth = denoise(img);
  Field f{img.width(), img.height(), std::vector<double>(img.size())};
  for (std::size_t i = 0; i < img.size(); ++i) f.data[i] = img.data()[i] - smooth.data()[i];
  return f;
}

ImageGrid center_crop_square(const ImageGrid& img) {
  const std::size_t side = std::min(img.width(), img.height());
  const std::size_t x0 = (img.width() - side) / 2;
  const std::size_t y0 = (img.height() - side) / 2;
  std::vector<double> out;
  out.reserve(side * side);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) out.push_back(img.at(x0 + x, y0 + y));
  return ImageGrid(side, side, std::move(out));
}

ImageGrid clamp_to_image(std::size_t width, std::size_t height, std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
  return ImageGrid(width, height, std::move(out));
}

}  // namespace anonaudit
