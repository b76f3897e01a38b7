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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace anonaudit {

enum class ModelId : std::uint32_t {};
enum class PromptId : std::uint32_t {};

constexpr std::size_t to_index(ModelId id) { return static_cast<std::size_t>(id); }
constexpr std::size_t to_index(PromptId id) { return static_cast<std::size_t>(id); }

struct ModelEntry {
  ModelId id{};
  std::string name;
};

struct PromptEntry {
  PromptId id{};
  std::string text;
};

struct EmbeddingRecord {
  ModelId model{};
  PromptId prompt{};
  std::uint32_t seed_index = 0;
  std::vector<float> vector;
};

/// All generations of every model over a set of prompts, embedded in a common
/// d-dimensional space. Model and prompt ids are dense and equal to their
/// position in `models` / `prompts`.
class Dataset {
 public:
  Dataset() = default;

  /// Validates dense ids, unique model names, dimensions and finiteness, and
  /// that every (model, prompt) pair has at least one record.
  Dataset(std::size_t dim, std::vector<ModelEntry> models, std::vector<PromptEntry> prompts,
          std::vector<EmbeddingRecord> records, bool l2_normalized = false);

  std::size_t dim() const { return dim_; }
  const std::vector<ModelEntry>& models() const { return models_; }
  const std::vector<PromptEntry>& prompts() const { return prompts_; }
  const std::vector<EmbeddingRecord>& records() const { return records_; }
  std::size_t num_models() const { return models_.size(); }
  std::size_t num_prompts() const { return prompts_.size(); }
  bool l2_normalized() const { return l2_normalized_; }

  /// Record indices of one (model, prompt) cell, in record order.
  const std::vector<std::size_t>& cell(ModelId model, PromptId prompt) const;

  /// Stable 64-bit FNV-1a digest over dimension, labels and vector bytes.
  std::uint64_t content_hash() const;

 private:
  std::size_t dim_ = 0;
  std::vector<ModelEntry> models_;
  std::vector<PromptEntry> prompts_;
  std::vector<EmbeddingRecord> records_;
  bool l2_normalized_ = false;
  // cells_[prompt * num_models + model]
  std::vector<std::vector<std::size_t>> cells_;
};

bool operator==(const Dataset& a, const Dataset& b);

struct SynthConfig {
  std::size_t dim = 64;
  std::size_t n_models = 22;
  std::size_t n_prompts = 50;
  std::size_t k_per_cell = 30;
  double inter_sep = 8.0;  // expected distance between two cluster centers of one prompt
  double intra_std = 1.0;  // per-coordinate std within a cluster
  std::uint64_t rng_seed = 0;
  // When non-empty, prompt p uses per_prompt_sep[p % size] instead of inter_sep.
  std::vector<double> per_prompt_sep;

  void validate() const;
};

// EMB1: "EMB1", u32 LE dim, u32 LE count, count*dim f32 LE, row-major.
void write_embedding_file(std::span<const std::vector<float>> rows, const std::filesystem::path& path);
std::vector<std::vector<float>> read_embedding_file(const std::filesystem::path& path);

Dataset load_manifest(const std::filesystem::path& path);

/// Writes one EMB1 file per cell under `dir` plus `dir/manifest.json`.
/// Returns the manifest path.
std::filesystem::path write_manifest(const Dataset& ds, const std::filesystem::path& dir);

Dataset generate_synthetic(const SynthConfig& config);

/// Mean distance between two independent uniform points on the unit sphere in R^d.
double mean_unit_sphere_chord(std::size_t dim);

std::vector<float> l2_normalize(std::span<const float> v);
std::vector<double> l2_normalize(std::span<const double> v);

/// Copy of `ds` with every record L2-normalized.
Dataset normalize_dataset(const Dataset& ds);

/// Per cell, draws `k_ref` records without replacement into the reference
/// split; the remainder forms the holdout split.
std::pair<Dataset, Dataset> split_reference_holdout(const Dataset& ds, std::size_t k_ref,
                                                    std::uint64_t rng_seed);

/// Records of one prompt, grouped by model id.
std::vector<std::vector<std::span<const float>>> prompt_cells(const Dataset& ds, PromptId prompt);

}  // namespace anonaudit
