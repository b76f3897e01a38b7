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
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "anonaudit/embedding_store.hpp"
#include "anonaudit/image.hpp"

namespace anonaudit {

/// Image encoder with a vector-Jacobian product. Implementations must be
/// safe to share read-only across threads.
class DifferentiableEncoder {
 public:
  virtual ~DifferentiableEncoder() = default;

  virtual const std::string& name() const = 0;
  virtual std::size_t output_dim() const = 0;
  /// Unit-norm embedding.
  virtual std::vector<double> forward(const ImageGrid& img) const = 0;
  /// Per-pixel gradient of <cotangent, forward(img)>.
  virtual std::vector<double> gradient(const ImageGrid& img, std::span<const double> cotangent) const = 0;
};

using EncoderPtr = std::shared_ptr<const DifferentiableEncoder>;

/// forward(x) = normalize(tanh(W x)), W fixed from `seed` with entries drawn
/// from N(0, sd = 1/sqrt(m * pixels)).
class ToyEncoder final : public DifferentiableEncoder {
 public:
  ToyEncoder(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t m);

  const std::string& name() const override { return name_; }
  std::size_t output_dim() const override { return m_; }
  std::vector<double> forward(const ImageGrid& img) const override;
  std::vector<double> gradient(const ImageGrid& img, std::span<const double> cotangent) const override;

 private:
  void check_shape(const ImageGrid& img) const;
  std::vector<double> hidden(const ImageGrid& img) const;  // tanh(W x)

  std::string name_;
  std::size_t width_;
  std::size_t height_;
  std::size_t m_;
  std::vector<double> weights_;  // m x pixels, row-major
};

EncoderPtr toy_encoder(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t m);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Index of the least similar candidate embedding; ties -> smaller model id.
std::size_t select_positive_target(std::span<const double> e_star,
                                   const std::vector<std::pair<ModelId, std::vector<double>>>& candidates);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d z
};

/// -log p+ + log p- with p+- the two-way softmax of cosine similarities
/// s+ = S(z, e_pos), s- = S(z, e_neg) at temperature tau_temp.
LossGradient contrastive_loss(std::span<const double> z, std::span<const double> e_pos,
                              std::span<const double> e_neg, double tau_temp);

/// Clamps each pixel to [original - eps01, original + eps01] and then [0, 1].
/// The result never exceeds eps01 away from `original`, including rounding.
ImageGrid project_linf(const ImageGrid& original, std::span<const double> perturbed, double eps01);

struct DefenseConfig {
  double epsilon = 8.0;  // l-infinity budget in 8-bit counts
  double eta = 0.1;
  double tau_temp = 0.1;
  std::size_t iterations = 100;
  std::vector<EncoderPtr> encoders;

  void validate() const;
  double epsilon01() const { return epsilon / 255.0; }
};

struct DefenseResult {
  ImageGrid image;
  double final_loss = 0.0;
  std::vector<double> loss_trace;  // loss at the start of each iteration
  double linf = 0.0;               // max |defended - original|
};

/// Thrown when the ensemble loss becomes non-finite; carries the trace so far.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Projected gradient descent on the ensemble-mean contrastive loss, pulling
/// `target` toward `positive` and away from its own embedding.
DefenseResult defend(const ImageGrid& target, const ImageGrid& positive, const DefenseConfig& config);

/// Ensemble-mean cosine similarity, used to pick the positive image.
double ensemble_similarity(const std::vector<EncoderPtr>& encoders, const ImageGrid& a, const ImageGrid& b);

/// img + N(0, sigma^2) per pixel, clamped to [0, 1].
ImageGrid gaussian_noise_undo(const ImageGrid& img, double sigma, std::uint64_t seed);

}  // namespace anonaudit
