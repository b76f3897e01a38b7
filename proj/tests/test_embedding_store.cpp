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

#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "anonaudit/embedding_store.hpp"
#include "anonaudit/error.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/temp_dir.hpp"

using namespace anonaudit;

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump();
}

}  // namespace

TEST_CASE("EMB1 layout of a single vector") {
  TempDir tmp;
  const std::vector<std::vector<float>> rows = {{1.0f, 2.0f}};
  write_embedding_file(rows, tmp / "a.emb");
  const auto bytes = slurp(tmp / "a.emb");
  REQUIRE(bytes.size() == 20);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "EMB1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 1);
  // 1.0f = 0x3F800000 little-endian
  CHECK(bytes[12] == 0x00);
  CHECK(bytes[15] == 0x3F);
  CHECK(bytes[14] == 0x80);
}

TEST_CASE("EMB1 writer rejects degenerate input") {
  TempDir tmp;
  CHECK_THROWS_WITH_AS(write_embedding_file(std::vector<std::vector<float>>{}, tmp / "x.emb"), "no rows",
                       ValidationError);
  const std::vector<std::vector<float>> ragged = {{1.0f, 2.0f}, {1.0f}};
  CHECK_THROWS_AS(write_embedding_file(ragged, tmp / "x.emb"), ValidationError);
}

TEST_CASE("EMB1 round trip is bit exact") {
  TempDir tmp;
  std::mt19937 rng(3);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::vector<std::vector<float>> rows(100, std::vector<float>(17));
  for (auto& r : rows) {
    for (auto& x : r) {
      do {
        x = std::bit_cast<float>(bits(rng));
      } while (!std::isfinite(x));
    }
  }
  write_embedding_file(rows, tmp / "r.emb");
  const auto back = read_embedding_file(tmp / "r.emb");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      CHECK(std::bit_cast<std::uint32_t>(back[i][k]) == std::bit_cast<std::uint32_t>(rows[i][k]));
}

TEST_CASE("EMB1 reader errors") {
  TempDir tmp;
  const std::vector<std::vector<float>> rows(10, std::vector<float>(4, 0.5f));
  write_embedding_file(rows, tmp / "ok.emb");
  auto bytes = slurp(tmp / "ok.emb");

  SUBCASE("bad magic") {
    auto bad = bytes;
    std::fill(bad.begin(), bad.begin() + 4, 'X');
    write_bytes(tmp / "bad.emb", bad);
    CHECK_THROWS_WITH_AS(read_embedding_file(tmp / "bad.emb"), doctest::Contains("bad magic"), IoError);
  }
  SUBCASE("truncated payload") {
    auto cut = bytes;
    cut.resize(12 + 5 * 4 * 4);  // header says 10 rows, only 5 present
    write_bytes(tmp / "cut.emb", cut);
    CHECK_THROWS_WITH_AS(read_embedding_file(tmp / "cut.emb"), doctest::Contains("truncated"), IoError);
  }
  SUBCASE("non-finite value") {
    auto nan = bytes;
    const auto bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    for (int i = 0; i < 4; ++i) nan[12 + i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    write_bytes(tmp / "nan.emb", nan);
    CHECK_THROWS_WITH_AS(read_embedding_file(tmp / "nan.emb"), doctest::Contains("non-finite"), IoError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_embedding_file(tmp / "nope.emb"), IoError); }
}

TEST_CASE("manifest loading") {
  TempDir tmp;
  const std::vector<std::vector<float>> a = {{1, 2}, {3, 4}, {5, 6}};
  const std::vector<std::vector<float>> b = {{7, 8}, {9, 10}, {11, 12}};
  write_embedding_file(a, tmp / "a.emb");
  write_embedding_file(b, tmp / "b.emb");
  nlohmann::json m = {{"dim", 2},
                      {"models", {"alpha", "beta"}},
                      {"prompts", {{{"id", 0}, {"text", "a cat"}}}},
                      {"cells",
                       {{{"model", 0}, {"prompt", 0}, {"path", "a.emb"}},
                        {{"model", 1}, {"prompt", 0}, {"path", "b.emb"}}}}};

  SUBCASE("2 models x 1 prompt x 3 vectors") {
    write_json(tmp / "manifest.json", m);
    const auto ds = load_manifest(tmp / "manifest.json");
    CHECK(ds.records().size() == 6);
    CHECK(ds.dim() == 2);
    CHECK(ds.models()[1].name == "beta");
    CHECK(ds.prompts()[0].text == "a cat");
    CHECK(ds.cell(ModelId{1}, PromptId{0}).size() == 3);
  }
  SUBCASE("dimension mismatch") {
    m["dim"] = 512;
    write_json(tmp / "manifest.json", m);
    CHECK_THROWS_WITH_AS(load_manifest(tmp / "manifest.json"), doctest::Contains("dimension mismatch"),
                         ValidationError);
  }
  SUBCASE("missing path is named") {
    m["cells"][1]["path"] = "gone.emb";
    write_json(tmp / "manifest.json", m);
    CHECK_THROWS_WITH_AS(load_manifest(tmp / "manifest.json"), doctest::Contains("gone.emb"), IoError);
  }
  SUBCASE("missing cell") {
    m["cells"].erase(1);
    write_json(tmp / "manifest.json", m);
    CHECK_THROWS_AS(load_manifest(tmp / "manifest.json"), ValidationError);
  }
}

TEST_CASE("write_manifest and load_manifest agree") {
  TempDir tmp;
  SynthConfig cfg;
  cfg.dim = 5;
  cfg.n_models = 3;
  cfg.n_prompts = 2;
  cfg.k_per_cell = 4;
  cfg.rng_seed = 11;
  const auto ds = generate_synthetic(cfg);
  const auto path = write_manifest(ds, tmp.path());
  const auto back = load_manifest(path);
  CHECK(back == ds);
  CHECK(back.content_hash() == ds.content_hash());
}

TEST_CASE("synthetic generator") {
  SynthConfig cfg;
  cfg.dim = 8;
  cfg.n_models = 4;
  cfg.n_prompts = 3;
  cfg.k_per_cell = 5;
  cfg.rng_seed = 42;

  SUBCASE("deterministic") {
    CHECK(generate_synthetic(cfg) == generate_synthetic(cfg));
    auto other = cfg;
    other.rng_seed = 43;
    CHECK_FALSE(generate_synthetic(other) == generate_synthetic(cfg));
  }
  SUBCASE("zero-noise limit collapses cells") {
    cfg.intra_std = 1e-9;
    const auto ds = generate_synthetic(cfg);
    for (const auto& p : ds.prompts()) {
      for (const auto& m : ds.models()) {
        const auto& cell = ds.cell(m.id, p.id);
        const auto& first = ds.records()[cell.front()].vector;
        for (std::size_t r : cell)
          for (std::size_t k = 0; k < first.size(); ++k) CHECK(std::abs(ds.records()[r].vector[k] - first[k]) < 1e-6);
      }
    }
  }
  SUBCASE("invalid configs") {
    auto bad = cfg;
    bad.intra_std = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad), ValidationError);
    bad = cfg;
    bad.n_models = 0;
    CHECK_THROWS_AS(generate_synthetic(bad), ValidationError);
    bad = cfg;
    bad.inter_sep = -1.0;
    CHECK_THROWS_AS(generate_synthetic(bad), ValidationError);
  }
}

TEST_CASE("synthetic within-cell distance follows the chi mean") {
  // E||x - c|| for x - c ~ N(0, I_64) is sqrt(2) Gamma(32.5) / Gamma(32) ~ 7.98.
  SynthConfig cfg;
  cfg.dim = 64;
  cfg.n_models = 1;
  cfg.n_prompts = 1;
  cfg.k_per_cell = 10000;
  cfg.inter_sep = 10.0;
  cfg.intra_std = 1.0;
  cfg.rng_seed = 5;
  const auto ds = generate_synthetic(cfg);
  // The center is unknown to the test; estimate it from the sample.
  std::vector<double> c(64, 0.0);
  for (const auto& r : ds.records())
    for (std::size_t k = 0; k < 64; ++k) c[k] += r.vector[k];
  for (auto& v : c) v /= 10000.0;
  double mean_dist = 0.0;
  for (const auto& r : ds.records()) {
    double s = 0.0;
    for (std::size_t k = 0; k < 64; ++k) s += (r.vector[k] - c[k]) * (r.vector[k] - c[k]);
    mean_dist += std::sqrt(s);
  }
  mean_dist /= 10000.0;
  const double chi_mean = std::sqrt(2.0) * std::exp(std::lgamma(32.5) - std::lgamma(32.0));
  CHECK(mean_dist == doctest::Approx(8.0).epsilon(0.05));
  CHECK(mean_dist == doctest::Approx(chi_mean).epsilon(0.01));
}

TEST_CASE("synthetic cell covariance approaches sigma^2 I") {
  SynthConfig cfg;
  cfg.dim = 16;
  cfg.n_models = 1;
  cfg.n_prompts = 1;
  cfg.k_per_cell = 10000;
  cfg.intra_std = 0.5;
  cfg.rng_seed = 9;
  const auto ds = generate_synthetic(cfg);
  const std::size_t d = cfg.dim;
  std::vector<double> mu(d, 0.0);
  for (const auto& r : ds.records())
    for (std::size_t k = 0; k < d; ++k) mu[k] += r.vector[k];
  for (auto& v : mu) v /= static_cast<double>(cfg.k_per_cell);
  std::vector<double> cov(d * d, 0.0);
  for (const auto& r : ds.records())
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += (r.vector[i] - mu[i]) * (r.vector[j] - mu[j]);
  double err = 0.0, ref = 0.0;
  const double s2 = cfg.intra_std * cfg.intra_std;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = cov[i * d + j] / static_cast<double>(cfg.k_per_cell - 1);
      const double t = i == j ? s2 : 0.0;
      err += (c - t) * (c - t);
      ref += t * t;
    }
  CHECK(std::sqrt(err / ref) < 0.10);
}

TEST_CASE("synthetic centers have the requested mean pairwise distance") {
  // With intra_std tiny, records sit on their centers.
  SynthConfig cfg;
  cfg.dim = 32;
  cfg.n_models = 40;
  cfg.n_prompts = 5;
  cfg.k_per_cell = 1;
  cfg.inter_sep = 6.0;
  cfg.intra_std = 1e-9;
  cfg.rng_seed = 1;
  const auto ds = generate_synthetic(cfg);
  double total = 0.0;
  std::size_t pairs = 0;
  for (const auto& p : ds.prompts()) {
    for (std::size_t a = 0; a < cfg.n_models; ++a)
      for (std::size_t b = a + 1; b < cfg.n_models; ++b) {
        const auto& x = ds.records()[ds.cell(ModelId(a), p.id).front()].vector;
        const auto& y = ds.records()[ds.cell(ModelId(b), p.id).front()].vector;
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
        total += std::sqrt(s);
        ++pairs;
      }
  }
  CHECK(total / static_cast<double>(pairs) == doctest::Approx(6.0).epsilon(0.03));
}

TEST_CASE("mean chord length on the unit sphere") {
  CHECK(mean_unit_sphere_chord(1) == doctest::Approx(1.0));
  CHECK(mean_unit_sphere_chord(2) == doctest::Approx(4.0 / std::numbers::pi));
  CHECK(mean_unit_sphere_chord(3) == doctest::Approx(4.0 / 3.0));
  CHECK(mean_unit_sphere_chord(1000) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("l2_normalize") {
  const std::vector<float> v = {3.0f, 4.0f};
  const auto u = l2_normalize(std::span<const float>(v));
  CHECK(u[0] == doctest::Approx(0.6));
  CHECK(u[1] == doctest::Approx(0.8));
  const std::vector<float> unit = {0.0f, 1.0f, 0.0f};
  CHECK(l2_normalize(std::span<const float>(unit)) == unit);
  const std::vector<float> zero = {0.0f, 0.0f};
  CHECK_THROWS_AS(l2_normalize(std::span<const float>(zero)), ValidationError);
}

TEST_CASE("reference/holdout split") {
  SynthConfig cfg;
  cfg.dim = 3;
  cfg.n_models = 2;
  cfg.n_prompts = 2;
  cfg.k_per_cell = 30;
  cfg.rng_seed = 4;
  const auto ds = generate_synthetic(cfg);

  CHECK_THROWS_AS(split_reference_holdout(ds, 30, 1), ValidationError);
  CHECK_THROWS_AS(split_reference_holdout(ds, 0, 1), ValidationError);

  const auto [ref, hold] = split_reference_holdout(ds, 29, 1);
  CHECK(hold.cell(ModelId{0}, PromptId{1}).size() == 1);
  CHECK(ref.cell(ModelId{1}, PromptId{0}).size() == 29);

  SUBCASE("partition per cell, as multisets") {
    const auto [r2, h2] = split_reference_holdout(ds, 12, 77);
    using Key = std::tuple<std::size_t, std::size_t, std::uint32_t>;
    std::map<Key, int> counts;
    for (const auto& r : ds.records()) ++counts[{to_index(r.model), to_index(r.prompt), r.seed_index}];
    for (const auto* part : {&r2, &h2})
      for (const auto& r : part->records()) --counts[{to_index(r.model), to_index(r.prompt), r.seed_index}];
    for (const auto& [k, c] : counts) CHECK(c == 0);
    CHECK(r2.records().size() + h2.records().size() == ds.records().size());
  }
  SUBCASE("deterministic under seed") {
    CHECK(split_reference_holdout(ds, 10, 5).first == split_reference_holdout(ds, 10, 5).first);
    CHECK_FALSE(split_reference_holdout(ds, 10, 5).first == split_reference_holdout(ds, 10, 6).first);
  }
}
