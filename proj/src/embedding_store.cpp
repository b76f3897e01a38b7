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

#include "anonaudit/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "anonaudit/error.hpp"
#include "json.hpp"

namespace anonaudit {

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', '1'};
constexpr std::size_t kHeaderBytes = 12;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      const unsigned char b = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
      bytes(&b, 1);
    }
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string cell_label(std::size_t model, std::size_t prompt) {
  std::ostringstream os;
  os << "(model " << model << ", prompt " << prompt << ")";
  return os.str();
}

}  // namespace

Dataset::Dataset(std::size_t dim, std::vector<ModelEntry> models, std::vector<PromptEntry> prompts,
                 std::vector<EmbeddingRecord> records, bool l2_normalized)
    : dim_(dim),
      models_(std::move(models)),
      prompts_(std::move(prompts)),
      records_(std::move(records)),
      l2_normalized_(l2_normalized) {
  if (dim_ == 0) throw ValidationError("dataset dimension must be > 0");
  if (models_.empty()) throw ValidationError("dataset has no models");
  if (prompts_.empty()) throw ValidationError("dataset has no prompts");
  std::set<std::string> names;
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (to_index(models_[i].id) != i) throw ValidationError("model ids must be dense 0..n-1");
    if (!names.insert(models_[i].name).second)
      throw ValidationError("duplicate model name '" + models_[i].name + "'");
  }
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    if (to_index(prompts_[i].id) != i) throw ValidationError("prompt ids must be dense 0..p-1");
  }
  cells_.assign(models_.size() * prompts_.size(), {});
  for (std::size_t r = 0; r < records_.size(); ++r) {
    const auto& rec = records_[r];
    const std::size_t m = to_index(rec.model);
    const std::size_t p = to_index(rec.prompt);
    if (m >= models_.size() || p >= prompts_.size())
      throw ValidationError("record references unknown model or prompt");
    if (rec.vector.size() != dim_) throw ValidationError("record dimension does not match dataset");
    for (float x : rec.vector) {
      if (!std::isfinite(x)) throw ValidationError("non-finite embedding component");
    }
    cells_[p * models_.size() + m].push_back(r);
  }
  for (std::size_t p = 0; p < prompts_.size(); ++p) {
    for (std::size_t m = 0; m < models_.size(); ++m) {
      if (cells_[p * models_.size() + m].empty())
        throw ValidationError("cell " + cell_label(m, p) + " has no records");
    }
  }
}

const std::vector<std::size_t>& Dataset::cell(ModelId model, PromptId prompt) const {
  const std::size_t m = to_index(model);
  const std::size_t p = to_index(prompt);
  if (m >= models_.size() || p >= prompts_.size()) throw ValidationError("cell out of range");
  return cells_[p * models_.size() + m];
}

std::uint64_t Dataset::content_hash() const {
  Fnv1a h;
  h.u64(dim_);
  h.u64(l2_normalized_ ? 1 : 0);
  h.u64(models_.size());
  for (const auto& m : models_) h.str(m.name);
  h.u64(prompts_.size());
  for (const auto& p : prompts_) h.str(p.text);
  h.u64(records_.size());
  for (const auto& r : records_) {
    h.u64(to_index(r.model));
    h.u64(to_index(r.prompt));
    h.u64(r.seed_index);
    for (float x : r.vector) h.u64(std::bit_cast<std::uint32_t>(x));
  }
  return h.value();
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim() || a.l2_normalized() != b.l2_normalized()) return false;
  if (a.models().size() != b.models().size() || a.prompts().size() != b.prompts().size() ||
      a.records().size() != b.records().size())
    return false;
  for (std::size_t i = 0; i < a.models().size(); ++i) {
    if (a.models()[i].id != b.models()[i].id || a.models()[i].name != b.models()[i].name) return false;
  }
  for (std::size_t i = 0; i < a.prompts().size(); ++i) {
    if (a.prompts()[i].id != b.prompts()[i].id || a.prompts()[i].text != b.prompts()[i].text) return false;
  }
  for (std::size_t i = 0; i < a.records().size(); ++i) {
    const auto& x = a.records()[i];
    const auto& y = b.records()[i];
    if (x.model != y.model || x.prompt != y.prompt || x.seed_index != y.seed_index || x.vector != y.vector)
      return false;
  }
  return true;
}

void SynthConfig::validate() const {
  if (dim < 1 || n_models < 1 || n_prompts < 1 || k_per_cell < 1)
    throw ValidationError("synthetic config counts must be >= 1");
  if (!(inter_sep >= 0.0) || !std::isfinite(inter_sep)) throw ValidationError("inter_sep must be >= 0");
  if (!(intra_std > 0.0) || !std::isfinite(intra_std)) throw ValidationError("intra_std must be > 0");
  for (double s : per_prompt_sep) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("per-prompt separations must be >= 0");
  }
}

void write_embedding_file(std::span<const std::vector<float>> rows, const std::filesystem::path& path) {
  if (rows.empty()) throw ValidationError("no rows");
  const std::size_t dim = rows.front().size();
  if (dim == 0) throw ValidationError("embedding dimension must be >= 1");
  for (const auto& r : rows) {
    if (r.size() != dim) throw ValidationError("dimension mismatch among rows");
  }
  if (dim > UINT32_MAX || rows.size() > UINT32_MAX) throw ValidationError("embedding file too large");

  std::vector<unsigned char> buf;
  buf.reserve(kHeaderBytes + rows.size() * dim * 4);
  buf.insert(buf.end(), kMagic.begin(), kMagic.end());
  put_u32(buf, static_cast<std::uint32_t>(dim));
  put_u32(buf, static_cast<std::uint32_t>(rows.size()));
  for (const auto& r : rows) {
    for (float x : r) put_u32(buf, std::bit_cast<std::uint32_t>(x));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::vector<float>> read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < kHeaderBytes) throw IoError("truncated header in '" + path.string() + "'");
  if (!std::equal(kMagic.begin(), kMagic.end(), buf.begin())) throw IoError("bad magic in '" + path.string() + "'");
  const std::uint64_t dim = get_u32(buf.data() + 4);
  const std::uint64_t count = get_u32(buf.data() + 8);
  if (dim == 0) throw IoError("zero dimension in '" + path.string() + "'");
  const std::uint64_t payload = dim * count * 4;
  if (payload > buf.size() - kHeaderBytes) throw IoError("truncated payload in '" + path.string() + "'");
  if (payload < buf.size() - kHeaderBytes) throw IoError("trailing bytes in '" + path.string() + "'");

  std::vector<std::vector<float>> rows(count, std::vector<float>(dim));
  const unsigned char* p = buf.data() + kHeaderBytes;
  for (auto& row : rows) {
    for (auto& x : row) {
      x = std::bit_cast<float>(get_u32(p));
      p += 4;
      if (!std::isfinite(x)) throw IoError("non-finite value in '" + path.string() + "'");
    }
  }
  return rows;
}

Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed manifest '" + path.string() + "': " + e.what());
  }

  std::size_t dim = 0;
  std::vector<ModelEntry> models;
  std::vector<PromptEntry> prompts;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  std::vector<std::string> cell_paths;
  bool normalized = false;
  try {
    dim = doc.at("dim").get<std::size_t>();
    const auto& jm = doc.at("models");
    for (std::size_t i = 0; i < jm.size(); ++i)
      models.push_back({static_cast<ModelId>(i), jm[i].get<std::string>()});
    std::vector<PromptEntry> raw;
    for (const auto& jp : doc.at("prompts"))
      raw.push_back({static_cast<PromptId>(jp.at("id").get<std::uint32_t>()), jp.value("text", std::string{})});
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    prompts = std::move(raw);
    for (const auto& jc : doc.at("cells")) {
      cells.emplace_back(jc.at("model").get<std::size_t>(), jc.at("prompt").get<std::size_t>());
      cell_paths.push_back(jc.at("path").get<std::string>());
    }
    normalized = doc.value("l2_normalized", false);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid manifest schema in '" + path.string() + "': " + e.what());
  }

  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<EmbeddingRecord> records;
  const auto base = path.parent_path();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto [m, p] = cells[c];
    if (m >= models.size() || p >= prompts.size())
      throw ValidationError("manifest cell " + cell_label(m, p) + " references an unknown model or prompt");
    if (!seen.insert(cells[c]).second) throw ValidationError("duplicate manifest cell " + cell_label(m, p));
    const auto file = base / cell_paths[c];
    if (!std::filesystem::exists(file)) throw IoError("missing embedding file '" + file.string() + "'");
    auto rows = read_embedding_file(file);
    if (rows.front().size() != dim) {
      throw ValidationError("dimension mismatch: manifest dim " + std::to_string(dim) + " but '" + file.string() +
                            "' has dim " + std::to_string(rows.front().size()));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      records.push_back({static_cast<ModelId>(m), static_cast<PromptId>(p), static_cast<std::uint32_t>(i),
                         std::move(rows[i])});
    }
  }
  return Dataset(dim, std::move(models), std::move(prompts), std::move(records), normalized);
}

std::filesystem::path write_manifest(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "cells", ec);
  if (ec) throw IoError("cannot create '" + (dir / "cells").string() + "': " + ec.message());

  nlohmann::json doc;
  doc["dim"] = ds.dim();
  doc["l2_normalized"] = ds.l2_normalized();
  doc["models"] = nlohmann::json::array();
  for (const auto& m : ds.models()) doc["models"].push_back(m.name);
  doc["prompts"] = nlohmann::json::array();
  for (const auto& p : ds.prompts()) doc["prompts"].push_back({{"id", to_index(p.id)}, {"text", p.text}});
  doc["cells"] = nlohmann::json::array();
  for (const auto& p : ds.prompts()) {
    for (const auto& m : ds.models()) {
      std::ostringstream name;
      name << "cells/m" << std::setw(3) << std::setfill('0') << to_index(m.id) << "_p" << std::setw(4)
           << to_index(p.id) << ".emb";
      std::vector<std::vector<float>> rows;
      for (std::size_t r : ds.cell(m.id, p.id)) rows.push_back(ds.records()[r].vector);
      write_embedding_file(rows, dir / name.str());
      doc["cells"].push_back({{"model", to_index(m.id)}, {"prompt", to_index(p.id)}, {"path", name.str()}});
    }
  }
  const auto manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + manifest.string() + "'");
  out << doc.dump(2) << '\n';
  return manifest;
}

double mean_unit_sphere_chord(std::size_t dim) {
  if (dim == 0) throw ValidationError("dimension must be >= 1");
  const double d = static_cast<double>(dim);
  const double log_mean = (d - 1.0) * std::numbers::ln2 + 2.0 * std::lgamma(d / 2.0) -
                          0.5 * std::log(std::numbers::pi) - std::lgamma(d - 0.5);
  return std::exp(log_mean);
}

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double chord = mean_unit_sphere_chord(d);

  std::vector<ModelEntry> models;
  for (std::size_t m = 0; m < config.n_models; ++m) models.push_back({static_cast<ModelId>(m), "model_" + std::to_string(m)});
  std::vector<PromptEntry> prompts;
  for (std::size_t p = 0; p < config.n_prompts; ++p) prompts.push_back({static_cast<PromptId>(p), ""});

  std::vector<EmbeddingRecord> records;
  records.reserve(config.n_models * config.n_prompts * config.k_per_cell);
  std::vector<double> base(d), dir(d), center(d);
  for (std::size_t p = 0; p < config.n_prompts; ++p) {
    const double sep = config.per_prompt_sep.empty() ? config.inter_sep
                                                     : config.per_prompt_sep[p % config.per_prompt_sep.size()];
    const double radius = sep / chord;
    for (auto& x : base) x = normal(rng);
    for (std::size_t m = 0; m < config.n_models; ++m) {
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (auto& x : dir) {
          x = normal(rng);
          norm2 += x * x;
        }
      } while (norm2 == 0.0);
      const double scale = radius / std::sqrt(norm2);
      for (std::size_t i = 0; i < d; ++i) center[i] = base[i] + scale * dir[i];
      for (std::size_t s = 0; s < config.k_per_cell; ++s) {
        EmbeddingRecord rec{static_cast<ModelId>(m), static_cast<PromptId>(p), static_cast<std::uint32_t>(s),
                            std::vector<float>(d)};
        for (std::size_t i = 0; i < d; ++i)
          rec.vector[i] = static_cast<float>(center[i] + config.intra_std * normal(rng));
        records.push_back(std::move(rec));
      }
    }
  }
  return Dataset(d, std::move(models), std::move(prompts), std::move(records));
}

std::vector<float> l2_normalize(std::span<const float> v) {
  double n2 = 0.0;
  for (float x : v) n2 += static_cast<double>(x) * x;
  if (!(n2 > 0.0)) throw ValidationError("cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (!(n2 > 0.0)) throw ValidationError("cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

Dataset normalize_dataset(const Dataset& ds) {
  std::vector<EmbeddingRecord> records = ds.records();
  for (auto& r : records) r.vector = l2_normalize(std::span<const float>(r.vector));
  return Dataset(ds.dim(), ds.models(), ds.prompts(), std::move(records), true);
}

std::pair<Dataset, Dataset> split_reference_holdout(const Dataset& ds, std::size_t k_ref, std::uint64_t rng_seed) {
  if (k_ref == 0) throw ValidationError("k_ref must be >= 1");
  std::mt19937_64 rng(rng_seed);
  std::vector<char> in_reference(ds.records().size(), 0);
  for (const auto& p : ds.prompts()) {
    for (const auto& m : ds.models()) {
      std::vector<std::size_t> idx = ds.cell(m.id, p.id);
      if (idx.size() <= k_ref) {
        throw ValidationError("cell " + cell_label(to_index(m.id), to_index(p.id)) + " has " +
                              std::to_string(idx.size()) + " records; need more than k_ref=" + std::to_string(k_ref));
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < k_ref; ++i) in_reference[idx[i]] = 1;
    }
  }
  std::vector<EmbeddingRecord> ref, hold;
  for (std::size_t r = 0; r < ds.records().size(); ++r) (in_reference[r] ? ref : hold).push_back(ds.records()[r]);
  return {Dataset(ds.dim(), ds.models(), ds.prompts(), std::move(ref), ds.l2_normalized()),
          Dataset(ds.dim(), ds.models(), ds.prompts(), std::move(hold), ds.l2_normalized())};
}

std::vector<std::vector<std::span<const float>>> prompt_cells(const Dataset& ds, PromptId prompt) {
  std::vector<std::vector<std::span<const float>>> out(ds.num_models());
  for (const auto& m : ds.models()) {
    for (std::size_t r : ds.cell(m.id, prompt)) out[to_index(m.id)].emplace_back(ds.records()[r].vector);
  }
  return out;
}

}  // namespace anonaudit
