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

#include "anonaudit/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "anonaudit/error.hpp"

namespace anonaudit {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// d S(z, e) / d z for cosine similarity.
void add_cosine_gradient(std::span<const double> z, std::span<const double> e, double weight,
                         std::vector<double>& out) {
  const double nz = norm(z);
  const double ne = norm(e);
  const double s = dot(z, e) / (nz * ne);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] += weight * (e[i] / (nz * ne) - s * z[i] / (nz * nz));
}

}  // namespace

ToyEncoder::ToyEncoder(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t m)
    : name_("toy-" + std::to_string(seed)), width_(width), height_(height), m_(m) {
  if (m < 2) throw ValidationError("toy encoder output dimension must be >= 2");
  if (width == 0 || height == 0) throw ValidationError("toy encoder input shape must be positive");
  const std::size_t pixels = width * height;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(m * pixels)));
  weights_.resize(m * pixels);
  for (auto& w : weights_) w = normal(rng);
}

void ToyEncoder::check_shape(const ImageGrid& img) const {
  if (img.width() != width_ || img.height() != height_)
    throw ValidationError("image shape does not match encoder '" + name_ + "'");
}

std::vector<double> ToyEncoder::hidden(const ImageGrid& img) const {
  check_shape(img);
  const std::size_t pixels = width_ * height_;
  const auto x = img.data();
  std::vector<double> h(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    const double* row = weights_.data() + i * pixels;
    double u = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) u += row[p] * x[p];
    h[i] = std::tanh(u);
  }
  return h;
}

std::vector<double> ToyEncoder::forward(const ImageGrid& img) const {
  auto h = hidden(img);
  const double n = norm(h);
  if (!(n > 0.0)) throw ValidationError("encoder pre-activation is zero");
  for (auto& v : h) v /= n;
  return h;
}

std::vector<double> ToyEncoder::gradient(const ImageGrid& img, std::span<const double> cotangent) const {
  if (cotangent.size() != m_) throw ValidationError("cotangent dimension does not match encoder output");
  const auto h = hidden(img);
  const double n = norm(h);
  if (!(n > 0.0)) throw ValidationError("encoder pre-activation is zero");
  // z = h / |h|: dL/dh = (g - (g.z) z) / |h|; then through tanh.
  double gz = 0.0;
  for (std::size_t i = 0; i < m_; ++i) gz += cotangent[i] * h[i] / n;
  std::vector<double> du(m_);
  for (std::size_t i = 0; i < m_; ++i) du[i] = (cotangent[i] - gz * h[i] / n) / n * (1.0 - h[i] * h[i]);

  const std::size_t pixels = width_ * height_;
  std::vector<double> dx(pixels, 0.0);
  for (std::size_t i = 0; i < m_; ++i) {
    const double* row = weights_.data() + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) dx[p] += row[p] * du[i];
  }
  return dx;
}

EncoderPtr toy_encoder(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t m) {
  return std::make_shared<ToyEncoder>(seed, width, height, m);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine similarity of vectors with different dimensions");
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw ValidationError("cosine similarity of a zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

std::size_t select_positive_target(std::span<const double> e_star,
                                   const std::vector<std::pair<ModelId, std::vector<double>>>& candidates) {
  if (candidates.empty()) throw ValidationError("no candidate generations");
  std::size_t best = 0;
  double best_s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = cosine_similarity(e_star, candidates[i].second);
    if (s < best_s || (s == best_s && candidates[i].first < candidates[best].first)) {
      best_s = s;
      best = i;
    }
  }
  return best;
}

LossGradient contrastive_loss(std::span<const double> z, std::span<const double> e_pos,
                              std::span<const double> e_neg, double tau_temp) {
  if (!(tau_temp > 0.0)) throw ValidationError("temperature must be positive");
  const double s_pos = cosine_similarity(z, e_pos);
  const double s_neg = cosine_similarity(z, e_neg);
  const double a = s_pos / tau_temp;
  const double b = s_neg / tau_temp;
  const double mx = std::max(a, b);
  const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
  const double log_p_pos = a - lse;
  const double log_p_neg = b - lse;

  LossGradient out;
  out.loss = -log_p_pos + log_p_neg;
  // The normalizer cancels: loss = (s- - s+) / tau.
  out.grad.assign(z.size(), 0.0);
  add_cosine_gradient(z, e_pos, -1.0 / tau_temp, out.grad);
  add_cosine_gradient(z, e_neg, 1.0 / tau_temp, out.grad);
  return out;
}

ImageGrid project_linf(const ImageGrid& original, std::span<const double> perturbed, double eps01) {
  if (perturbed.size() != original.size()) throw ValidationError("perturbation shape does not match the image");
  if (!(eps01 >= 0.0)) throw ValidationError("epsilon must be >= 0");
  std::vector<double> out(original.size());
  const auto o = original.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double lo = o[i] - eps01;
    double hi = o[i] + eps01;
    while (o[i] - lo > eps01) lo = std::nextafter(lo, o[i]);
    while (hi - o[i] > eps01) hi = std::nextafter(hi, o[i]);
    const double p = std::isnan(perturbed[i]) ? o[i] : perturbed[i];
    out[i] = std::clamp(std::clamp(p, lo, hi), 0.0, 1.0);
  }
  return ImageGrid(original.width(), original.height(), std::move(out));
}

void DefenseConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be >= 0");
  if (!(eta > 0.0)) throw ValidationError("eta must be > 0");
  if (!(tau_temp > 0.0)) throw ValidationError("tau_temp must be > 0");
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (encoders.empty()) throw ValidationError("defense needs at least one encoder");
  for (const auto& e : encoders)
    if (!e) throw ValidationError("null encoder in ensemble");
}

namespace {

double ensemble_loss(const std::vector<EncoderPtr>& encoders, const ImageGrid& current,
                     const std::vector<std::vector<double>>& pos, const std::vector<std::vector<double>>& neg,
                     double tau_temp, std::vector<double>* grad) {
  const double w = 1.0 / static_cast<double>(encoders.size());
  double loss = 0.0;
  if (grad) grad->assign(current.size(), 0.0);
  for (std::size_t k = 0; k < encoders.size(); ++k) {
    const auto z = encoders[k]->forward(current);
    const auto lg = contrastive_loss(z, pos[k], neg[k], tau_temp);
    loss += w * lg.loss;
    if (grad) {
      const auto gx = encoders[k]->gradient(current, lg.grad);
      for (std::size_t i = 0; i < gx.size(); ++i) (*grad)[i] += w * gx[i];
    }
  }
  return loss;
}

}  // namespace

double ensemble_similarity(const std::vector<EncoderPtr>& encoders, const ImageGrid& a, const ImageGrid& b) {
  if (encoders.empty()) throw ValidationError("empty encoder ensemble");
  double s = 0.0;
  for (const auto& e : encoders) s += cosine_similarity(e->forward(a), e->forward(b));
  return s / static_cast<double>(encoders.size());
}

DefenseResult defend(const ImageGrid& target, const ImageGrid& positive, const DefenseConfig& config) {
  config.validate();
  if (positive.width() != target.width() || positive.height() != target.height())
    throw ValidationError("positive image shape does not match the target image");
  const double eps01 = config.epsilon01();

  std::vector<std::vector<double>> pos, neg;
  for (const auto& e : config.encoders) {
    pos.push_back(e->forward(positive));
    neg.push_back(e->forward(target));
  }

  DefenseResult result;
  result.loss_trace.reserve(config.iterations);
  ImageGrid current = target;
  std::vector<double> grad;
  std::vector<double> step(target.size());
  for (std::size_t t = 0; t < config.iterations; ++t) {
    const double loss = ensemble_loss(config.encoders, current, pos, neg, config.tau_temp, &grad);
    if (!std::isfinite(loss))
      throw NonFiniteLoss("non-finite defense loss at iteration " + std::to_string(t), result.loss_trace);
    result.loss_trace.push_back(loss);
    const auto x = current.data();
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = x[i] - config.eta * grad[i];
    current = project_linf(target, step, eps01);
  }
  result.final_loss = ensemble_loss(config.encoders, current, pos, neg, config.tau_temp, nullptr);
  if (!std::isfinite(result.final_loss)) throw NonFiniteLoss("non-finite final defense loss", result.loss_trace);
  for (std::size_t i = 0; i < current.size(); ++i)
    result.linf = std::max(result.linf, std::abs(current.data()[i] - target.data()[i]));
  result.image = std::move(current);
  return result;
}

ImageGrid gaussian_noise_undo(const ImageGrid& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be >= 0");
  if (sigma == 0.0) return img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> out(img.data().begin(), img.data().end());
  for (auto& v : out) v = std::clamp(v + normal(rng), 0.0, 1.0);
  return ImageGrid(img.width(), img.height(), std::move(out));
}

}  // namespace anonaudit
