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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anonaudit/attribution.hpp"
#include "anonaudit/baselines.hpp"
#include "anonaudit/defense.hpp"
#include "anonaudit/distinguishability.hpp"
#include "anonaudit/embedding_store.hpp"
#include "anonaudit/error.hpp"
#include "anonaudit/harness.hpp"
#include "anonaudit/image.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace anonaudit;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Writes to --out, or stdout when no path was given.
void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text(out, text);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

struct LabeledImages {
  std::vector<std::string> labels;           // subdirectory names, sorted
  std::vector<std::vector<ImageGrid>> images;  // per label, files sorted by name
};

// DIR/<label>/*.pgm
LabeledImages load_image_tree(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: '" + root.string() + "'");
  LabeledImages out;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d))
      if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) continue;
    out.labels.push_back(d.filename().string());
    out.images.emplace_back();
    for (const auto& f : files) out.images.back().push_back(load_pgm(f));
  }
  if (out.labels.empty()) throw ValidationError("no labeled PGM images under '" + root.string() + "'");
  return out;
}

void write_image_tree(const fs::path& root, const std::vector<std::string>& labels,
                      const std::vector<std::vector<ImageGrid>>& images) {
  for (std::size_t m = 0; m < labels.size(); ++m) {
    const fs::path dir = root / labels[m];
    fs::create_directories(dir);
    for (std::size_t i = 0; i < images[m].size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%04zu.pgm", i);
      write_pgm(images[m][i], dir / name);
    }
  }
}

std::string model_label(std::size_t m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "m%03zu", m);
  return buf;
}

json attribution_json(const std::vector<Attribution>& ranked, const std::vector<std::string>& labels) {
  json arr = json::array();
  for (const auto& a : ranked) arr.push_back({{"model", labels[to_index(a.model)]}, {"score", a.score}});
  return arr;
}

// Shared evaluation for both image baselines: train per label, rank each test image.
template <class Attribute>
json evaluate_tree(const LabeledImages& test, const std::vector<std::string>& train_labels, Attribute&& attribute) {
  std::size_t hits = 0, total = 0;
  json items = json::array();
  for (std::size_t m = 0; m < test.labels.size(); ++m) {
    for (std::size_t i = 0; i < test.images[m].size(); ++i) {
      const auto ranked = attribute(test.images[m][i]);
      const std::string& predicted = train_labels[to_index(ranked.front().model)];
      hits += predicted == test.labels[m] ? 1 : 0;
      ++total;
      items.push_back({{"label", test.labels[m]}, {"index", i}, {"predicted", predicted}});
    }
  }
  return {{"top1", static_cast<double>(hits) / static_cast<double>(total)}, {"n_test", total}, {"items", items}};
}

std::vector<EncoderPtr> make_encoders(const std::vector<std::uint64_t>& seeds, std::size_t w, std::size_t h,
                                      std::size_t dim) {
  std::vector<EncoderPtr> out;
  for (auto s : seeds) out.push_back(toy_encoder(s, w, h, dim));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anonaudit: leaderboard anonymity audit toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "anonaudit 0.1.0");

  // ---- gen-synth
  SynthConfig synth;
  std::string synth_out;
  bool synth_normalize = false;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic embedding dataset (manifest + EMB1 cells)");
  gen->add_option("--out", synth_out, "Output directory")->required();
  gen->add_option("--dim", synth.dim)->capture_default_str();
  gen->add_option("--models", synth.n_models)->capture_default_str();
  gen->add_option("--prompts", synth.n_prompts)->capture_default_str();
  gen->add_option("--k", synth.k_per_cell, "Generations per (model, prompt)")->capture_default_str();
  gen->add_option("--inter-sep", synth.inter_sep)->capture_default_str();
  gen->add_option("--intra-std", synth.intra_std)->capture_default_str();
  gen->add_option("--per-prompt-sep", synth.per_prompt_sep, "Separation levels cycled over prompts");
  gen->add_option("--seed", synth.rng_seed)->capture_default_str();
  gen->add_flag("--normalize", synth_normalize, "L2-normalize before writing");

  // ---- shared evaluation flags
  std::string manifest, out;
  std::size_t k_ref = 20, reps = 5;
  std::uint64_t seed = 0;
  bool normalize = false, timing = false;

  auto* attr = app.add_subcommand("attribute", "Multi-class centroid attribution with top-k accuracy");
  attr->add_option("--manifest", manifest)->required();
  attr->add_option("--k-ref", k_ref)->capture_default_str();
  attr->add_option("--reps", reps)->capture_default_str();
  attr->add_option("--seed", seed)->capture_default_str();
  attr->add_flag("--normalize", normalize);
  attr->add_flag("--timing", timing, "Include runtime_seconds in the report");
  attr->add_option("--out", out, "Report JSON path (default stdout)");
  std::string query_file;
  std::uint32_t query_prompt = 0;
  attr->add_option("--query", query_file, "Rank the embeddings of an EMB1 file against all references instead");
  attr->add_option("--prompt", query_prompt, "Prompt id for --query");

  std::string ovr_mode = "full";
  std::optional<std::uint32_t> target;
  std::vector<double> alphas = {0.80, 0.85, 0.90, 0.95};
  auto* ovr = app.add_subcommand("one-vs-rest", "One-vs-rest deanonymization (full or limited access)");
  ovr->add_option("--manifest", manifest)->required();
  ovr->add_option("--mode", ovr_mode)->check(CLI::IsMember({"full", "limited"}))->capture_default_str();
  ovr->add_option("--target", target, "Target model id (default: every model)");
  ovr->add_option("--alpha", alphas, "Quantile levels for --mode limited")->capture_default_str();
  ovr->add_option("--k-ref", k_ref)->capture_default_str();
  ovr->add_option("--reps", reps)->capture_default_str();
  ovr->add_option("--seed", seed)->capture_default_str();
  ovr->add_flag("--normalize", normalize);
  ovr->add_flag("--timing", timing);
  ovr->add_option("--out", out);

  double tau = kDefaultTau;
  std::optional<double> min_score;
  std::string selected_out;
  auto* dist = app.add_subcommand("distinguishability", "Per-prompt distinguishability scores (CSV)");
  dist->add_option("--manifest", manifest)->required();
  dist->add_option("--tau", tau)->capture_default_str();
  dist->add_flag("--normalize", normalize);
  dist->add_option("--out", out, "CSV path (default stdout)");
  dist->add_option("--min-score", min_score, "Also write the prompts with D >= this value");
  dist->add_option("--selected", selected_out, "JSON path for the selected prompt ids");

  std::size_t bins = 4;
  std::string curve_csv;
  auto* curve = app.add_subcommand("success-curve", "Attack success against distinguishability");
  curve->add_option("--manifest", manifest)->required();
  curve->add_option("--tau", tau)->capture_default_str();
  curve->add_option("--bins", bins)->capture_default_str();
  curve->add_option("--k-ref", k_ref)->capture_default_str();
  curve->add_option("--seed", seed)->capture_default_str();
  curve->add_flag("--normalize", normalize);
  curve->add_option("--out", out, "Curve JSON path (default stdout)");
  curve->add_option("--csv", curve_csv, "Bucket CSV path");

  // ---- image baselines
  std::string train_dir, test_dir;
  std::vector<std::string> query_images;
  double band_lo = 0.25, band_hi = 0.5;
  auto* marra = app.add_subcommand("baseline-marra", "Noise-residual fingerprint attribution");
  marra->add_option("--train", train_dir, "Directory of <model>/*.pgm")->required();
  marra->add_option("--test", test_dir, "Labeled directory to evaluate");
  marra->add_option("--query", query_images, "PGM files to attribute");
  marra->add_option("--out", out);
  auto* fourier = app.add_subcommand("baseline-fourier", "Spectral power-law decay attribution");
  fourier->add_option("--train", train_dir, "Directory of <model>/*.pgm")->required();
  fourier->add_option("--test", test_dir);
  fourier->add_option("--query", query_images);
  fourier->add_option("--band-lo", band_lo)->capture_default_str();
  fourier->add_option("--band-hi", band_hi)->capture_default_str();
  fourier->add_option("--out", out);

  std::string gi_kind = "planted";
  std::size_t gi_models = 22, gi_side = 64, gi_train = 100, gi_test = 10;
  double gi_snr = 0.2;
  std::vector<double> gi_betas = {1.0, 2.0, 3.0};
  std::string gi_out;
  auto* gen_img = app.add_subcommand("gen-images", "Write a synthetic labeled PGM corpus (train/ and test/)");
  gen_img->add_option("--kind", gi_kind)->check(CLI::IsMember({"planted", "power-law"}))->capture_default_str();
  gen_img->add_option("--models", gi_models)->capture_default_str();
  gen_img->add_option("--side", gi_side)->capture_default_str();
  gen_img->add_option("--n-train", gi_train)->capture_default_str();
  gen_img->add_option("--n-test", gi_test)->capture_default_str();
  gen_img->add_option("--snr", gi_snr)->capture_default_str();
  gen_img->add_option("--betas", gi_betas, "Exponents for --kind power-law")->capture_default_str();
  gen_img->add_option("--seed", seed)->capture_default_str();
  gen_img->add_option("--out", gi_out)->required();

  // ---- defense
  double epsilon = 8.0, eta = 0.1, tau_temp = 0.1;
  std::size_t iters = 100, enc_dim = 64;
  std::vector<std::uint64_t> enc_seeds = {1, 2, 3};
  std::string image_in, positive_in, trace_out;
  bool defense_eval = false;
  std::vector<double> eval_eps = {0.0, 2.0, 4.0, 8.0}, undo_sigmas;
  std::size_t eval_test = 100;
  DefenseEvalConfig eval_defaults;
  double pattern_std = eval_defaults.pattern_std, noise_std = eval_defaults.noise_std;
  auto* def = app.add_subcommand("defend", "Adversarial post-processing against centroid attribution");
  def->add_option("--image", image_in, "Image to protect (P5 PGM)");
  def->add_option("--positive", positive_in, "Positive target image (P5 PGM)");
  def->add_option("--epsilon", epsilon, "l-infinity budget in 8-bit counts")->capture_default_str();
  def->add_option("--eta", eta)->capture_default_str();
  def->add_option("--tau-temp", tau_temp)->capture_default_str();
  def->add_option("--iters", iters)->capture_default_str();
  def->add_option("--encoder-seeds", enc_seeds, "Toy encoder ensemble")->capture_default_str();
  def->add_option("--encoder-dim", enc_dim)->capture_default_str();
  def->add_option("--out", out, "Defended PGM, or report JSON with --eval");
  def->add_option("--trace", trace_out, "Loss trace CSV");
  def->add_flag("--eval", defense_eval, "Run the toy-encoder attack evaluation over --epsilons");
  def->add_option("--epsilons", eval_eps)->capture_default_str();
  def->add_option("--undo-sigmas", undo_sigmas, "Gaussian noising levels (8-bit counts) applied after defense");
  def->add_option("--n-test", eval_test)->capture_default_str();
  def->add_option("--pattern-std", pattern_std, "Per-model pattern strength for --eval")->capture_default_str();
  def->add_option("--noise-std", noise_std, "Per-image noise for --eval")->capture_default_str();
  def->add_option("--seed", seed)->capture_default_str();

  double sigma = 2.0;
  auto* undo = app.add_subcommand("undo-noise", "Gaussian noising of a (defended) image");
  undo->add_option("--image", image_in)->required();
  undo->add_option("--sigma", sigma, "Noise std in 8-bit counts")->capture_default_str();
  undo->add_option("--seed", seed)->capture_default_str();
  undo->add_option("--out", out)->required();

  std::vector<double> prices;
  std::size_t images_per_model = 1;
  auto* cost = app.add_subcommand("cost", "Attack cost: images per model times the sum of prices");
  cost->add_option("--prices", prices, "Per-image price of each model")->required();
  cost->add_option("--images", images_per_model)->capture_default_str();
  cost->add_option("--out", out);

  std::vector<std::string> report_in;
  auto* report = app.add_subcommand("report", "Flatten report JSON files into one plot-ready CSV");
  report->add_option("--in", report_in, "Report JSON files")->required();
  report->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };

    if (*gen) {
      auto ds = generate_synthetic(synth);
      if (synth_normalize) ds = normalize_dataset(ds);
      std::cout << write_manifest(ds, synth_out).string() << "\n";
    } else if (*attr) {
      const Dataset ds = load_manifest(manifest);
      if (!query_file.empty()) {
        if (query_prompt >= ds.num_prompts()) throw ValidationError("--prompt is not in the dataset");
        const auto table = build_centroid_table(ds, PromptId{query_prompt});
        json rows = json::array();
        for (const auto& q : read_embedding_file(query_file)) {
          json ranking = json::array();
          for (const auto& r : rank_models(q, table, normalize))
            ranking.push_back({{"model", ds.models()[to_index(r.model)].name}, {"distance", r.distance}});
          rows.push_back(ranking);
        }
        emit(out, canonical_dump({{"prompt", query_prompt}, {"rankings", rows}}));
      } else {
        auto rep = run_multiclass(ds, k_ref, reps, seed, normalize);
        if (timing) rep.runtime_seconds = elapsed();
        emit(out, canonical_dump(rep.to_json()));
      }
    } else if (*ovr) {
      const Dataset ds = load_manifest(manifest);
      std::optional<ModelId> t;
      if (target) t = ModelId{*target};
      auto rep = ovr_mode == "full" ? run_one_vs_rest_full(ds, t, k_ref, reps, seed, normalize)
                                    : run_one_vs_rest_limited(ds, t, alphas, k_ref, reps, seed, normalize);
      if (timing) rep.runtime_seconds = elapsed();
      emit(out, canonical_dump(rep.to_json()));
    } else if (*dist) {
      const Dataset ds = load_manifest(manifest);
      const auto ranking = rank_prompts(ds, tau, normalize);
      for (const auto& e : ranking.errors)
        std::cerr << "warning: prompt " << to_index(e.prompt) << " skipped: " << e.message << "\n";
      std::ostringstream csv;
      write_scores_csv(csv, ranking.scores, ds.models());
      emit(out, csv.str());
      if (min_score) {
        json ids = json::array();
        for (auto p : select_prompts(ds, *min_score, tau, normalize)) ids.push_back(to_index(p));
        const std::string text = canonical_dump({{"min_score", *min_score}, {"tau", tau}, {"selected", ids}});
        if (selected_out.empty())
          std::cerr << text;
        else
          write_text(selected_out, text);
      }
    } else if (*curve) {
      const Dataset ds = load_manifest(manifest);
      const auto c = success_vs_distinguishability(ds, tau, bins, k_ref, seed, normalize);
      emit(out, canonical_dump(c.to_json()));
      if (!curve_csv.empty()) {
        std::ostringstream csv;
        csv << "lo,hi,mean_success,n_prompts\n";
        for (const auto& b : c.buckets) csv << b.lo << "," << b.hi << "," << b.mean_success << "," << b.n_prompts << "\n";
        write_text(curve_csv, csv.str());
      }
    } else if (*marra || *fourier) {
      const auto train = load_image_tree(train_dir);
      if (test_dir.empty() && query_images.empty()) throw ValidationError("give --test or --query");
      json result;
      std::function<std::vector<Attribution>(const ImageGrid&)> attribute;
      std::vector<ResidualFingerprint> fps;
      std::vector<SpectralSignature> sigs;
      if (*marra) {
        for (std::size_t m = 0; m < train.labels.size(); ++m) fps.push_back(marra_fingerprint(train.images[m], ModelId(m)));
        attribute = [&](const ImageGrid& img) { return marra_attribute(img, fps); };
        result["method"] = "residual";
      } else {
        const FrequencyBand band{band_lo, band_hi};
        json sig_json = json::array();
        for (std::size_t m = 0; m < train.labels.size(); ++m) {
          sigs.push_back(dzanic_signature(train.images[m], ModelId(m), band));
          sig_json.push_back({{"model", train.labels[m]}, {"a", sigs.back().a}, {"b", sigs.back().b}});
        }
        attribute = [&](const ImageGrid& img) { return dzanic_attribute(img, sigs); };
        result["method"] = "spectral";
        result["signatures"] = sig_json;
        result["band"] = {band_lo, band_hi};
      }
      if (!test_dir.empty()) result["evaluation"] = evaluate_tree(load_image_tree(test_dir), train.labels, attribute);
      if (!query_images.empty()) {
        json q = json::array();
        for (const auto& path : query_images)
          q.push_back({{"image", fs::path(path).filename().string()}, {"ranking", attribution_json(attribute(load_pgm(path)), train.labels)}});
        result["queries"] = q;
      }
      emit(out, canonical_dump(result));
    } else if (*gen_img) {
      std::vector<std::string> labels;
      std::vector<std::vector<ImageGrid>> train, test;
      if (gi_kind == "planted") {
        auto corpus = planted_pattern_corpus(gi_models, gi_side, gi_train + gi_test, gi_snr, seed);
        for (std::size_t m = 0; m < corpus.size(); ++m) {
          labels.push_back(model_label(m));
          train.emplace_back(corpus[m].begin(), corpus[m].begin() + static_cast<std::ptrdiff_t>(gi_train));
          test.emplace_back(corpus[m].begin() + static_cast<std::ptrdiff_t>(gi_train), corpus[m].end());
        }
      } else {
        for (std::size_t m = 0; m < gi_betas.size(); ++m) {
          labels.push_back(model_label(m));
          train.emplace_back();
          test.emplace_back();
          for (std::size_t i = 0; i < gi_train + gi_test; ++i) {
            auto img = power_law_image(gi_side, gi_betas[m], seed * 1000003 + m * 10007 + i);
            (i < gi_train ? train : test).back().push_back(std::move(img));
          }
        }
      }
      write_image_tree(fs::path(gi_out) / "train", labels, train);
      write_image_tree(fs::path(gi_out) / "test", labels, test);
    } else if (*def) {
      if (defense_eval) {
        DefenseEvalConfig cfg;
        cfg.epsilons = eval_eps;
        cfg.undo_sigmas = undo_sigmas;
        cfg.eta = eta;
        cfg.tau_temp = tau_temp;
        cfg.iterations = iters;
        cfg.n_test = eval_test;
        cfg.encoder_dim = enc_dim;
        cfg.seed = seed;
        cfg.pattern_std = pattern_std;
        cfg.noise_std = noise_std;
        emit(out, canonical_dump(run_defense_eval(cfg).to_json()));
      } else {
        if (image_in.empty() || positive_in.empty() || out.empty())
          throw ValidationError("defend needs --image, --positive and --out (or --eval)");
        const auto target_img = load_pgm(image_in);
        const auto positive = load_pgm(positive_in);
        DefenseConfig cfg;
        cfg.epsilon = epsilon;
        cfg.eta = eta;
        cfg.tau_temp = tau_temp;
        cfg.iterations = iters;
        cfg.encoders = make_encoders(enc_seeds, target_img.width(), target_img.height(), enc_dim);
        try {
          const auto res = defend(target_img, positive, cfg);
          write_pgm(res.image, out);
          if (!trace_out.empty()) {
            std::ostringstream csv;
            csv << "iteration,loss\n";
            for (std::size_t i = 0; i < res.loss_trace.size(); ++i) csv << i << "," << res.loss_trace[i] << "\n";
            write_text(trace_out, csv.str());
          }
          std::cout << canonical_dump({{"final_loss", res.final_loss}, {"linf", res.linf}, {"linf_counts", res.linf * 255.0}});
        } catch (const NonFiniteLoss& e) {
          std::cerr << "error: " << e.what() << " after " << e.trace().size() << " iterations\n";
          return kExitValidation;
        }
      }
    } else if (*undo) {
      write_pgm(gaussian_noise_undo(load_pgm(image_in), sigma / 255.0, seed), out);
    } else if (*cost) {
      const CostModel cm{prices, images_per_model};
      emit(out, canonical_dump({{"images_per_model", images_per_model}, {"prices", prices}, {"cost", attack_cost(cm)}}));
    } else if (*report) {
      std::ostringstream csv;
      csv << "source,kind,model,alpha,metric,mean,std\n";
      for (const auto& path : report_in) {
        const json j = read_json(path);
        const std::string src = fs::path(path).filename().string();
        const std::string kind = j.contains("experiment") ? j["experiment"].value("kind", "") : "";
        if (j.contains("topk_accuracy"))
          for (const auto& [k, v] : j["topk_accuracy"].items())
            csv << src << "," << kind << ",,," << k << "," << v.value("mean", 0.0) << "," << v.value("std_over_repetitions", 0.0) << "\n";
        if (j.contains("one_vs_rest"))
          for (const auto& row : j["one_vs_rest"]) {
            const std::string alpha = row.contains("alpha") ? row["alpha"].dump() : "";
            for (const char* m : {"accuracy", "auc", "fpr", "fnr", "tpr_at_1pct", "tpr_at_5pct"})
              csv << src << "," << kind << "," << row.value("model_name", "") << "," << alpha << "," << m << ","
                  << row[m].value("mean", 0.0) << "," << row[m].value("std", 0.0) << "\n";
          }
        if (j.contains("defense"))
          for (const auto& row : j["defense"])
            for (const char* m : {"top1", "top2", "top3"})
              csv << src << ",defense,," << row["epsilon"].dump() << "," << m << "," << row.value(m, 0.0) << ",0\n";
        if (j.contains("buckets"))
          for (const auto& b : j["buckets"])
            csv << src << ",success_curve,," << b["lo"].dump() << ",mean_success," << b.value("mean_success", 0.0) << ",0\n";
      }
      emit(out, csv.str());
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
