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

#include "anonaudit/baselines.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <random>

#include "anonaudit/error.hpp"

namespace anonaudit {

namespace {

// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> fft2(std::vector<std::complex<double>> data, std::size_t side, int sign) {
  std::vector<std::complex<double>> out(data.size());
  auto* in_ptr = reinterpret_cast<fftw_complex*>(data.data());
  auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan = nullptr;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(side), static_cast<int>(side), in_ptr, out_ptr, sign, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw ValidationError("FFT planning failed");
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Signed integer frequency of DFT index k on a grid of n samples.
long signed_frequency(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

void require_square(const ImageGrid& img) {
  if (img.width() != img.height()) throw ValidationError("spectral analysis needs a square image");
  if (img.width() < 8) throw ValidationError("spectral analysis needs side >= 8");
}

bool by_model(const Attribution& a, const Attribution& b) { return a.model < b.model; }

}  // namespace

ResidualFingerprint marra_fingerprint(std::span<const ImageGrid> images, ModelId model) {
  if (images.empty()) throw ValidationError("fingerprint needs at least one image");
  const std::size_t w = images.front().width();
  const std::size_t h = images.front().height();
  for (const auto& im : images)
    if (im.width() != w || im.height() != h) throw ValidationError("fingerprint images differ in shape");

  std::vector<Field> residuals(images.size());
  const auto n = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) residuals[static_cast<std::size_t>(i)] = residual(images[static_cast<std::size_t>(i)]);

  ResidualFingerprint fp{model, Field{w, h, std::vector<double>(w * h, 0.0)}, images.size()};
  for (const auto& r : residuals)
    for (std::size_t i = 0; i < r.data.size(); ++i) fp.residual.data[i] += r.data[i];
  const double inv = 1.0 / static_cast<double>(images.size());
  for (auto& v : fp.residual.data) v *= inv;
  return fp;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("correlation inputs differ in length");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw ValidationError("undefined correlation (zero variance)");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<Attribution> marra_attribute(const ImageGrid& img, std::span<const ResidualFingerprint> fingerprints) {
  if (fingerprints.empty()) throw ValidationError("no fingerprints to attribute against");
  const Field r = residual(img);
  std::vector<Attribution> out;
  for (const auto& fp : fingerprints) {
    if (fp.residual.width != r.width || fp.residual.height != r.height)
      throw ValidationError("fingerprint shape does not match the query image");
    out.push_back({fp.model, pearson(r.data, fp.residual.data)});
  }
  std::sort(out.begin(), out.end(), by_model);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

std::vector<double> power_spectrum_2d(const ImageGrid& img) {
  if (img.width() != img.height()) throw ValidationError("spectral analysis needs a square image");
  const std::size_t side = img.width();
  std::vector<std::complex<double>> in(img.data().begin(), img.data().end());
  const auto f = fft2(std::move(in), side, FFTW_FORWARD);
  std::vector<double> power(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) power[i] = std::norm(f[i]);
  return power;
}

ReducedSpectrum reduced_spectrum(const ImageGrid& img) {
  require_square(img);
  const std::size_t side = img.width();
  const std::size_t nbins = side / 2;
  const auto power = power_spectrum_2d(img);
  std::vector<double> sum(nbins + 1, 0.0);
  std::vector<std::size_t> count(nbins + 1, 0);
  for (std::size_t ky = 0; ky < side; ++ky) {
    const double fy = static_cast<double>(signed_frequency(ky, side));
    for (std::size_t kx = 0; kx < side; ++kx) {
      const double fx = static_cast<double>(signed_frequency(kx, side));
      const auto r = static_cast<std::size_t>(std::lround(std::sqrt(fx * fx + fy * fy)));
      if (r > nbins) continue;
      sum[r] += power[ky * side + kx];
      ++count[r];
    }
  }
  ReducedSpectrum out;
  out.dc_power = sum[0];
  for (std::size_t r = 1; r <= nbins; ++r) {
    out.bins.push_back({static_cast<double>(r) / static_cast<double>(side),
                        count[r] ? sum[r] / static_cast<double>(count[r]) : 0.0});
  }
  return out;
}

PowerLaw fit_power_law(std::span<const FrequencyBin> spectrum, FrequencyBand band) {
  if (!(band.lo >= 0.0 && band.lo < band.hi && band.hi <= 0.5)) throw ValidationError("invalid frequency band");
  std::vector<double> xs, ys;
  for (const auto& b : spectrum) {
    if (b.frequency > band.lo && b.frequency <= band.hi && b.power > 0.0) {
      xs.push_back(std::log(b.frequency));
      ys.push_back(std::log(b.power));
    }
  }
  if (xs.size() < 3) throw ValidationError("power-law fit needs at least 3 positive bins in the band");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  return {std::exp(my - slope * mx), -slope};
}

SpectralSignature dzanic_signature(std::span<const ImageGrid> images, ModelId model, FrequencyBand band) {
  if (images.empty()) throw ValidationError("signature needs at least one image");
  std::vector<PowerLaw> fits(images.size());
  const auto n = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto s = reduced_spectrum(images[static_cast<std::size_t>(i)]);
    fits[static_cast<std::size_t>(i)] = fit_power_law(s.bins, band);
  }
  double log_a = 0.0, b = 0.0;
  for (const auto& f : fits) {
    log_a += std::log(f.a);
    b += f.b;
  }
  log_a /= static_cast<double>(fits.size());
  b /= static_cast<double>(fits.size());
  return {model, std::exp(log_a), b, band};
}

std::vector<Attribution> dzanic_attribute(const ImageGrid& img, std::span<const SpectralSignature> signatures) {
  if (signatures.empty()) throw ValidationError("no spectral signatures to attribute against");
  const FrequencyBand band = signatures.front().band;
  for (const auto& s : signatures)
    if (s.band.lo != band.lo || s.band.hi != band.hi) throw ValidationError("signatures use different fit bands");
  const PowerLaw fit = fit_power_law(reduced_spectrum(img).bins, band);
  std::vector<Attribution> out;
  for (const auto& s : signatures)
    out.push_back({s.model, std::hypot(std::log(fit.a) - std::log(s.a), fit.b - s.b)});
  std::sort(out.begin(), out.end(), by_model);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  return out;
}

std::vector<std::vector<ImageGrid>> planted_pattern_corpus(std::size_t n_models, std::size_t side,
                                                           std::size_t n_per_model, double snr, std::uint64_t seed,
                                                           double noise_std) {
  if (n_models == 0 || n_per_model == 0 || side < 3) throw ValidationError("invalid planted-pattern corpus shape");
  if (!(snr > 0.0) || !(noise_std > 0.0)) throw ValidationError("snr and noise_std must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t npx = side * side;
  const double strength = snr * noise_std;

  std::vector<std::vector<double>> patterns(n_models, std::vector<double>(npx));
  for (auto& p : patterns)
    for (auto& v : p) v = normal(rng);

  std::vector<std::vector<ImageGrid>> corpus(n_models);
  std::vector<double> px(npx);
  for (std::size_t m = 0; m < n_models; ++m) {
    for (std::size_t i = 0; i < n_per_model; ++i) {
      const double fx = 1.0 + std::floor(3.0 * unif(rng));
      const double fy = 1.0 + std::floor(3.0 * unif(rng));
      const double phase = 2.0 * std::numbers::pi * unif(rng);
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          const double arg = 2.0 * std::numbers::pi * (fx * x + fy * y) / static_cast<double>(side) + phase;
          const std::size_t k = y * side + x;
          px[k] = 0.5 + 0.1 * std::sin(arg) + strength * patterns[m][k] + noise_std * normal(rng);
        }
      }
      corpus[m].push_back(clamp_to_image(side, side, px));
    }
  }
  return corpus;
}

ImageGrid power_law_image(std::size_t side, double beta, std::uint64_t seed) {
  if (side < 8) throw ValidationError("side must be >= 8");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::complex<double>> noise(side * side);
  for (auto& v : noise) v = normal(rng);
  auto spec = fft2(std::move(noise), side, FFTW_FORWARD);
  for (std::size_t ky = 0; ky < side; ++ky) {
    const double fy = static_cast<double>(signed_frequency(ky, side)) / static_cast<double>(side);
    for (std::size_t kx = 0; kx < side; ++kx) {
      const double fx = static_cast<double>(signed_frequency(kx, side)) / static_cast<double>(side);
      const double f = std::hypot(fx, fy);
      spec[ky * side + kx] *= f > 0.0 ? std::pow(f, -beta / 2.0) : 0.0;
    }
  }
  const auto field = fft2(std::move(spec), side, FFTW_BACKWARD);
  std::vector<double> px(field.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = field[i].real();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  const double lo_v = *lo;
  const double range = *hi - *lo;
  for (auto& v : px) v = range > 0.0 ? std::clamp((v - lo_v) / range, 0.0, 1.0) : 0.5;
  return ImageGrid(side, side, std::move(px));
}

}  // namespace anonaudit
