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
#include <cstdint>
#include <span>
#include <vector>

#include "anonaudit/embedding_store.hpp"
#include "anonaudit/image.hpp"

namespace anonaudit {

/// One (model, score) pair of a baseline ranking. The score is a correlation
/// for the residual method and a distance for the spectral method.
struct Attribution {
  ModelId model{};
  double score = 0.0;
};

// ---- noise-residual fingerprints -------------------------------------------

struct ResidualFingerprint {
  ModelId model{};
  Field residual;
  std::size_t n_images = 0;
};

/// Mean residual over a model's images. Residuals are computed in parallel and
/// summed in input order.
ResidualFingerprint marra_fingerprint(std::span<const ImageGrid> images, ModelId model);

/// Pearson correlation of the query residual with each fingerprint,
/// descending, ties by model id.
std::vector<Attribution> marra_attribute(const ImageGrid& img, std::span<const ResidualFingerprint> fingerprints);

/// Mean-centered normalized correlation. Throws when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// ---- spectral decay ---------------------------------------------------------

struct FrequencyBin {
  double frequency = 0.0;  // cycles per pixel
  double power = 0.0;      // mean |F|^2 over the annulus
};

struct ReducedSpectrum {
  double dc_power = 0.0;
  std::vector<FrequencyBin> bins;  // floor(side/2) bins, frequency r/side for r = 1..side/2
};

/// |DFT|^2 of a square image (unnormalized forward transform), row-major.
std::vector<double> power_spectrum_2d(const ImageGrid& img);

/// Azimuthal average of the power spectrum. Frequency (kx, ky) falls into the
/// bin round(sqrt(kx^2 + ky^2)); radii beyond side/2 are dropped.
ReducedSpectrum reduced_spectrum(const ImageGrid& img);

struct FrequencyBand {
  double lo = 0.25;  // exclusive
  double hi = 0.5;   // inclusive
};

/// power(f) = a * f^(-b)
struct PowerLaw {
  double a = 0.0;
  double b = 0.0;
};

/// Least squares in log-log space over the bins with lo < f <= hi and power > 0.
PowerLaw fit_power_law(std::span<const FrequencyBin> spectrum, FrequencyBand band = {});

struct SpectralSignature {
  ModelId model{};
  double a = 0.0;
  double b = 0.0;
  FrequencyBand band;
};

/// Geometric mean of a and arithmetic mean of b over a model's images.
SpectralSignature dzanic_signature(std::span<const ImageGrid> images, ModelId model, FrequencyBand band = {});

/// Distance in (log a, b) space to each signature, ascending, ties by model id.
std::vector<Attribution> dzanic_attribute(const ImageGrid& img, std::span<const SpectralSignature> signatures);

// ---- synthetic corpora ------------------------------------------------------

/// Per model: n_per_model images = 0.5 + low-frequency content + s * pattern_m
/// + white noise (std noise_std), clamped to [0, 1]; s is chosen so that the
/// pattern-to-noise std ratio equals `snr`.
std::vector<std::vector<ImageGrid>> planted_pattern_corpus(std::size_t n_models, std::size_t side,
                                                           std::size_t n_per_model, double snr,
                                                           std::uint64_t seed, double noise_std = 0.1);

/// White noise shaped to power ~ f^(-beta), affinely mapped onto [0, 1].
ImageGrid power_law_image(std::size_t side, double beta, std::uint64_t seed);

}  // namespace anonaudit
