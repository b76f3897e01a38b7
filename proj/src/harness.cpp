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

#include "anonaudit/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>

#include "anonaudit/attribution.hpp"
#include "anonaudit/defense.hpp"
#include "anonaudit/distinguishability.hpp"
#include "anonaudit/error.hpp"
#include "anonaudit/metrics.hpp"

namespace anonaudit {

namespace {

// Runs fn(i) for i in [0, n) across OpenMP threads; rethrows the first exception.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

struct Queries {
  std::vector<float> data;
  std::vector<ModelId> labels;
  std::size_t dim = 0;

  kernels::MatrixView<float> view() const { return {data, labels.size(), dim}; }
  std::span<const float> row(std::size_t i) const { return view().row(i); }
};

Queries prompt_queries(const Dataset& ds, PromptId prompt) {
  Queries q;
  q.dim = ds.dim();
  for (const auto& m : ds.models()) {
    for (std::size_t r : ds.cell(m.id, prompt)) {
      const auto& v = ds.records()[r].vector;
      q.data.insert(q.data.end(), v.begin(), v.end());
      q.labels.push_back(m.id);
    }
  }
  return q;
}

std::size_t rank_of(const RankedPrediction& ranking, ModelId model) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ranking[i].model == model) return i;
  return ranking.size();
}

MeanStd summarize(const std::vector<double>& xs) { return {mean(xs), sample_std(xs)}; }

void validate_protocol(const Dataset& ds, std::size_t k_ref, std::size_t repetitions) {
  if (k_ref < 1) throw ValidationError("k_ref must be >= 1");
  if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
  if (ds.num_models() < 1) throw ValidationError("dataset has no models");
}

ExperimentInfo describe(const std::string& kind, const Dataset& ds, std::size_t k_ref, std::size_t repetitions,
                        std::uint64_t seed, bool normalize) {
  ExperimentInfo info;
  info.kind = kind;
  info.dataset_hash = ds.content_hash();
  info.n_models = ds.num_models();
  info.n_prompts = ds.num_prompts();
  info.k_ref = k_ref;
  info.repetitions = repetitions;
  info.seed = seed;
  info.normalize = normalize;
  for (std::size_t r = 0; r < repetitions; ++r) info.repetition_seeds.push_back(seed + r);
  return info;
}

// The working copy is normalized only when requested.
class WorkingSet {
 public:
  WorkingSet(const Dataset& ds, bool normalize) : source_(ds) {
    if (normalize) normalized_ = normalize_dataset(ds);
  }
  const Dataset& get() const { return normalized_ ? *normalized_ : source_; }

 private:
  const Dataset& source_;
  std::optional<Dataset> normalized_;
};

std::vector<ModelId> resolve_targets(const Dataset& ds, std::optional<ModelId> target) {
  if (ds.num_models() < 2) throw ValidationError("one-vs-rest needs at least two models");
  if (target) {
    if (to_index(*target) >= ds.num_models())
      throw ValidationError("target model " + std::to_string(to_index(*target)) + " is not in the dataset");
    return {*target};
  }
  std::vector<ModelId> all;
  for (const auto& m : ds.models()) all.push_back(m.id);
  return all;
}

nlohmann::json to_json(const MeanStd& ms) { return {{"mean", ms.mean}, {"std", ms.std}}; }

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["experiment"] = {{"kind", experiment.kind},
                     {"dataset_hash", hex64(experiment.dataset_hash)},
                     {"n_models", experiment.n_models},
                     {"n_prompts", experiment.n_prompts},
                     {"k_ref", experiment.k_ref},
                     {"repetitions", experiment.repetitions},
                     {"seed", experiment.seed},
                     {"repetition_seeds", experiment.repetition_seeds},
                     {"normalize", experiment.normalize}};
  if (!experiment.alphas.empty()) j["experiment"]["alphas"] = experiment.alphas;
  if (!topk_accuracy.empty()) {
    nlohmann::json tk = nlohmann::json::object();
    for (const auto& [k, s] : topk_accuracy) {
      tk["top" + std::to_string(k)] = {{"mean", s.over_repetitions.mean},
                                       {"std_over_repetitions", s.over_repetitions.std},
                                       {"std_over_prompts", s.std_over_prompts}};
    }
    j["topk_accuracy"] = tk;
  }
  if (!one_vs_rest.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : one_vs_rest) {
      nlohmann::json row = {{"model", to_index(r.model)},
                            {"model_name", r.model_name},
                            {"accuracy", anonaudit::to_json(r.accuracy)},
                            {"auc", anonaudit::to_json(r.auc)},
                            {"fpr", anonaudit::to_json(r.fpr)},
                            {"fnr", anonaudit::to_json(r.fnr)},
                            {"tpr_at_1pct", anonaudit::to_json(r.tpr_at_1pct)},
                            {"tpr_at_5pct", anonaudit::to_json(r.tpr_at_5pct)}};
      if (r.alpha) row["alpha"] = *r.alpha;
      rows.push_back(row);
    }
    j["one_vs_rest"] = rows;
  }
  if (runtime_seconds) j["runtime_seconds"] = *runtime_seconds;
  return j;
}

std::string canonical_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

EvalReport run_multiclass(const Dataset& ds, std::size_t k_ref, std::size_t repetitions, std::uint64_t seed,
                          bool normalize) {
  validate_protocol(ds, k_ref, repetitions);
  const WorkingSet work(ds, normalize);
  const std::size_t n_prompts = ds.num_prompts();

  std::array<std::vector<double>, 4> acc;       // [k][rep]
  std::array<std::vector<double>, 4> std_prompts;
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto split = split_reference_holdout(work.get(), k_ref, seed + r);
    const Dataset& ref = split.first;
    const Dataset& hold = split.second;
    std::vector<std::array<std::size_t, 4>> hits(n_prompts);
    std::vector<std::size_t> items(n_prompts, 0);
    parallel_for(n_prompts, [&](std::size_t p) {
      const auto prompt = static_cast<PromptId>(p);
      const auto table = build_centroid_table(ref, prompt);
      const auto q = prompt_queries(hold, prompt);
      const auto ranks = rank_models_batch(q.view(), table, Execution::serial);
      hits[p] = {};
      for (std::size_t i = 0; i < ranks.size(); ++i) {
        const std::size_t pos = rank_of(ranks[i], q.labels[i]);
        for (std::size_t k = 0; k < 4; ++k)
          if (pos < static_cast<std::size_t>(kTopK[k])) ++hits[p][k];
      }
      items[p] = ranks.size();
    });
    std::size_t total = 0;
    for (auto n : items) total += n;
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t h = 0;
      std::vector<double> per_prompt;
      for (std::size_t p = 0; p < n_prompts; ++p) {
        h += hits[p][k];
        per_prompt.push_back(static_cast<double>(hits[p][k]) / static_cast<double>(items[p]));
      }
      acc[k].push_back(static_cast<double>(h) / static_cast<double>(total));
      std_prompts[k].push_back(sample_std(per_prompt));
    }
  }

  EvalReport report;
  report.experiment = describe("multiclass", ds, k_ref, repetitions, seed, normalize);
  for (std::size_t k = 0; k < 4; ++k)
    report.topk_accuracy[kTopK[k]] = {summarize(acc[k]), mean(std_prompts[k])};
  return report;
}

namespace {

struct TargetScores {
  std::vector<double> pos, neg;
  std::vector<BinaryOutcome> outcomes;  // one per decision rule (alpha), or a single one
};

struct RepMetrics {
  std::vector<double> accuracy, auc, fpr, fnr, tpr1, tpr5;

  void add(const BinaryOutcome& o, const std::vector<double>& pos, const std::vector<double>& neg) {
    accuracy.push_back(o.accuracy());
    fpr.push_back(o.fpr());
    fnr.push_back(o.fnr());
    auc.push_back(anonaudit::auc(pos, neg));
    tpr1.push_back(tpr_at_fpr(pos, neg, 0.01));
    tpr5.push_back(tpr_at_fpr(pos, neg, 0.05));
  }

  void fill(OneVsRestRow& row) const {
    row.accuracy = summarize(accuracy);
    row.auc = summarize(auc);
    row.fpr = summarize(fpr);
    row.fnr = summarize(fnr);
    row.tpr_at_1pct = summarize(tpr1);
    row.tpr_at_5pct = summarize(tpr5);
  }
};

// Concatenates per-prompt scores in prompt order and sums outcomes.
TargetScores merge(const std::vector<TargetScores>& per_prompt, std::size_t n_rules) {
  TargetScores all;
  all.outcomes.assign(n_rules, {});
  for (const auto& s : per_prompt) {
    all.pos.insert(all.pos.end(), s.pos.begin(), s.pos.end());
    all.neg.insert(all.neg.end(), s.neg.begin(), s.neg.end());
    for (std::size_t a = 0; a < n_rules; ++a) {
      all.outcomes[a].tp += s.outcomes[a].tp;
      all.outcomes[a].fp += s.outcomes[a].fp;
      all.outcomes[a].tn += s.outcomes[a].tn;
      all.outcomes[a].fn += s.outcomes[a].fn;
    }
  }
  return all;
}

void record(BinaryOutcome& o, bool positive, bool predicted) {
  if (positive && predicted) ++o.tp;
  else if (positive) ++o.fn;
  else if (predicted) ++o.fp;
  else ++o.tn;
}

}  // namespace

EvalReport run_one_vs_rest_full(const Dataset& ds, std::optional<ModelId> target, std::size_t k_ref,
                                std::size_t repetitions, std::uint64_t seed, bool normalize) {
  validate_protocol(ds, k_ref, repetitions);
  const auto targets = resolve_targets(ds, target);
  const WorkingSet work(ds, normalize);
  const std::size_t n_prompts = ds.num_prompts();

  std::vector<RepMetrics> metrics(targets.size());
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto split = split_reference_holdout(work.get(), k_ref, seed + r);
    const Dataset& ref = split.first;
    const Dataset& hold = split.second;
    // [prompt][target]
    std::vector<std::vector<TargetScores>> scores(n_prompts);
    parallel_for(n_prompts, [&](std::size_t p) {
      const auto prompt = static_cast<PromptId>(p);
      const auto table = build_centroid_table(ref, prompt);
      const auto q = prompt_queries(hold, prompt);
      const auto ranks = rank_models_batch(q.view(), table, Execution::serial);
      scores[p].assign(targets.size(), TargetScores{{}, {}, std::vector<BinaryOutcome>(1)});
      for (std::size_t t = 0; t < targets.size(); ++t) {
        auto& s = scores[p][t];
        for (std::size_t i = 0; i < ranks.size(); ++i) {
          const auto& rk = ranks[i];
          const double d_target = rk[rank_of(rk, targets[t])].distance;
          const bool positive = q.labels[i] == targets[t];
          record(s.outcomes[0], positive, rk.front().model == targets[t]);
          (positive ? s.pos : s.neg).push_back(-d_target);
        }
      }
    });
    for (std::size_t t = 0; t < targets.size(); ++t) {
      std::vector<TargetScores> per_prompt;
      for (std::size_t p = 0; p < n_prompts; ++p) per_prompt.push_back(scores[p][t]);
      const auto all = merge(per_prompt, 1);
      metrics[t].add(all.outcomes[0], all.pos, all.neg);
    }
  }

  EvalReport report;
  report.experiment = describe("one_vs_rest_full", ds, k_ref, repetitions, seed, normalize);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    OneVsRestRow row;
    row.model = targets[t];
    row.model_name = ds.models()[to_index(targets[t])].name;
    metrics[t].fill(row);
    report.one_vs_rest.push_back(row);
  }
  return report;
}

EvalReport run_one_vs_rest_limited(const Dataset& ds, std::optional<ModelId> target,
                                   const std::vector<double>& alphas, std::size_t k_ref, std::size_t repetitions,
                                   std::uint64_t seed, bool normalize) {
  validate_protocol(ds, k_ref, repetitions);
  if (k_ref < 2) throw ValidationError("threshold fitting needs k_ref >= 2");
  if (alphas.empty()) throw ValidationError("at least one alpha is required");
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  const auto targets = resolve_targets(ds, target);
  const WorkingSet work(ds, normalize);
  const std::size_t n_prompts = ds.num_prompts();
  const std::size_t n_alpha = alphas.size();

  std::vector<std::vector<RepMetrics>> metrics(targets.size(), std::vector<RepMetrics>(n_alpha));
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto split = split_reference_holdout(work.get(), k_ref, seed + r);
    const Dataset& ref = split.first;
    const Dataset& hold = split.second;
    std::vector<std::vector<TargetScores>> scores(n_prompts);
    parallel_for(n_prompts, [&](std::size_t p) {
      const auto prompt = static_cast<PromptId>(p);
      const auto q = prompt_queries(hold, prompt);
      const auto cells = prompt_cells(ref, prompt);
      scores[p].assign(targets.size(), TargetScores{{}, {}, std::vector<BinaryOutcome>(n_alpha)});
      for (std::size_t t = 0; t < targets.size(); ++t) {
        std::vector<ClusterThreshold> th;
        for (double a : alphas) th.push_back(fit_threshold(cells[to_index(targets[t])], a, prompt, targets[t]));
        auto& s = scores[p][t];
        for (std::size_t i = 0; i < q.labels.size(); ++i) {
          const double d = distance_to_centroid(q.row(i), th.front().centroid);
          const bool positive = q.labels[i] == targets[t];
          for (std::size_t a = 0; a < n_alpha; ++a) record(s.outcomes[a], positive, d <= th[a].lambda);
          (positive ? s.pos : s.neg).push_back(-d);
        }
      }
    });
    for (std::size_t t = 0; t < targets.size(); ++t) {
      std::vector<TargetScores> per_prompt;
      for (std::size_t p = 0; p < n_prompts; ++p) per_prompt.push_back(scores[p][t]);
      const auto all = merge(per_prompt, n_alpha);
      for (std::size_t a = 0; a < n_alpha; ++a) metrics[t][a].add(all.outcomes[a], all.pos, all.neg);
    }
  }

  EvalReport report;
  report.experiment = describe("one_vs_rest_limited", ds, k_ref, repetitions, seed, normalize);
  report.experiment.alphas = alphas;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t a = 0; a < n_alpha; ++a) {
      OneVsRestRow row;
      row.model = targets[t];
      row.model_name = ds.models()[to_index(targets[t])].name;
      row.alpha = alphas[a];
      metrics[t][a].fill(row);
      report.one_vs_rest.push_back(row);
    }
  }
  return report;
}

std::optional<double> SuccessCurve::selected_accuracy(double min_score) const {
  std::size_t hits = 0, items = 0;
  for (const auto& p : prompts) {
    if (p.d >= min_score) {
      hits += p.hits;
      items += p.items;
    }
  }
  if (items == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(items);
}

nlohmann::json SuccessCurve::to_json() const {
  nlohmann::json j;
  j["tau"] = tau;
  j["spearman"] = spearman;
  j["buckets"] = nlohmann::json::array();
  for (const auto& b : buckets)
    j["buckets"].push_back({{"lo", b.lo}, {"hi", b.hi}, {"mean_success", b.mean_success}, {"n_prompts", b.n_prompts}});
  j["prompts"] = nlohmann::json::array();
  for (const auto& p : prompts)
    j["prompts"].push_back({{"prompt", to_index(p.prompt)}, {"d", p.d}, {"hits", p.hits}, {"items", p.items}});
  return j;
}

SuccessCurve success_vs_distinguishability(const Dataset& ds, double tau, std::size_t bins, std::size_t k_ref,
                                           std::uint64_t seed, bool normalize) {
  if (bins < 2) throw ValidationError("need at least 2 bins");
  if (k_ref < 2) throw ValidationError("distinguishability on the reference split needs k_ref >= 2");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  const WorkingSet work(ds, normalize);
  const auto split = split_reference_holdout(work.get(), k_ref, seed);
  const Dataset& ref = split.first;
  const Dataset& hold = split.second;
  const std::size_t n_prompts = ds.num_prompts();

  SuccessCurve curve;
  curve.tau = tau;
  curve.prompts.resize(n_prompts);
  parallel_for(n_prompts, [&](std::size_t p) {
    const auto prompt = static_cast<PromptId>(p);
    auto& out = curve.prompts[p];
    out.prompt = prompt;
    out.d = prompt_distinguishability(PromptPool::from_dataset(ref, prompt), tau, false).d;
    const auto table = build_centroid_table(ref, prompt);
    const auto q = prompt_queries(hold, prompt);
    const auto ranks = rank_models_batch(q.view(), table, Execution::serial);
    for (std::size_t i = 0; i < ranks.size(); ++i)
      if (ranks[i].front().model == q.labels[i]) ++out.hits;
    out.items = ranks.size();
  });

  std::vector<std::vector<double>> bucket_success(bins);
  for (const auto& p : curve.prompts) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(std::floor(p.d * static_cast<double>(bins))));
    bucket_success[b].push_back(p.success());
  }
  for (std::size_t b = 0; b < bins; ++b) {
    curve.buckets.push_back({static_cast<double>(b) / static_cast<double>(bins),
                             static_cast<double>(b + 1) / static_cast<double>(bins), mean(bucket_success[b]),
                             bucket_success[b].size()});
  }
  if (n_prompts >= 2) {
    std::vector<double> d, s;
    for (const auto& p : curve.prompts) {
      d.push_back(p.d);
      s.push_back(p.success());
    }
    curve.spearman = spearman(d, s);
  }
  return curve;
}

void CostModel::validate() const {
  if (images < 1) throw ValidationError("images per model must be >= 1");
  for (double p : prices)
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("prices must be finite and >= 0");
}

double attack_cost(const CostModel& cm) {
  cm.validate();
  double total = 0.0;
  for (double p : cm.prices) total += p;
  return static_cast<double>(cm.images) * total;
}

// ---- defense evaluation ------------------------------------------------------

void DefenseEvalConfig::validate() const {
  if (side < 3 || n_models < 2 || k_ref < 1 || n_test < 1 || encoder_dim < 2 || ensemble_size < 1 || iterations < 1)
    throw ValidationError("invalid defense evaluation shape");
  if (!(pattern_std >= 0.0) || !(noise_std >= 0.0) || !(content_std >= 0.0))
    throw ValidationError("standard deviations must be >= 0");
  for (double e : epsilons)
    if (!(e >= 0.0)) throw ValidationError("epsilons must be >= 0");
  for (double s : undo_sigmas)
    if (!(s >= 0.0)) throw ValidationError("undo sigmas must be >= 0");
}

nlohmann::json DefenseEvalReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = {{"epsilon", r.epsilon}, {"max_linf", r.max_linf}, {"budget_violations", r.budget_violations}};
    for (const auto& [k, v] : r.topk) row["top" + std::to_string(k)] = v;
    nlohmann::json undo = nlohmann::json::array();
    for (const auto& [sigma, top1] : r.undo_top1) undo.push_back({{"sigma", sigma}, {"top1", top1}});
    row["undo_noise"] = undo;
    rows_json.push_back(row);
  }
  return {{"defense", rows_json}};
}

DefenseEvalReport run_defense_eval(const DefenseEvalConfig& config) {
  config.validate();
  const std::size_t px = config.side * config.side;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> content(px);
  for (auto& v : content) v = 0.5 + config.content_std * normal(rng);
  std::vector<std::vector<double>> patterns(config.n_models, std::vector<double>(px));
  for (auto& p : patterns)
    for (auto& v : p) v = config.pattern_std * normal(rng);
  auto generate = [&](std::size_t m) {
    std::vector<double> img(px);
    for (std::size_t i = 0; i < px; ++i) img[i] = content[i] + patterns[m][i] + config.noise_std * normal(rng);
    return clamp_to_image(config.side, config.side, img);
  };

  const auto attacker = toy_encoder(config.attacker_seed, config.side, config.side, config.encoder_dim);
  std::vector<EncoderPtr> ensemble;
  for (std::size_t k = 0; k < config.ensemble_size; ++k)
    ensemble.push_back(toy_encoder(config.attacker_seed + 1 + k, config.side, config.side, config.encoder_dim));

  auto embed = [&](const ImageGrid& img) {
    const auto z = attacker->forward(img);
    return std::vector<float>(z.begin(), z.end());
  };

  CentroidTable table;
  for (std::size_t m = 0; m < config.n_models; ++m) {
    std::vector<std::vector<float>> refs;
    for (std::size_t j = 0; j < config.k_ref; ++j) refs.push_back(embed(generate(m)));
    table.entries.push_back({static_cast<ModelId>(m), compute_centroid(refs), refs.size()});
  }

  struct TestCase {
    std::size_t model;
    ImageGrid image;
    std::vector<std::pair<ModelId, ImageGrid>> candidates;
  };
  std::vector<TestCase> cases;
  for (std::size_t i = 0; i < config.n_test; ++i) {
    TestCase tc{i % config.n_models, generate(i % config.n_models), {}};
    for (std::size_t j = 0; j < config.n_models; ++j)
      if (j != tc.model) tc.candidates.emplace_back(static_cast<ModelId>(j), generate(j));
    cases.push_back(std::move(tc));
  }

  const double ens_scale = 1.0 / std::sqrt(static_cast<double>(ensemble.size()));
  // Concatenated ensemble embedding; its cosine equals the mean per-encoder cosine.
  auto ensemble_embed = [&](const ImageGrid& img) {
    std::vector<double> out;
    for (const auto& e : ensemble)
      for (double v : e->forward(img)) out.push_back(v * ens_scale);
    return out;
  };

  const std::size_t n_eps = config.epsilons.size();
  const std::size_t n_sig = config.undo_sigmas.size();
  // [case][eps] -> rank of the true model; [case][eps][sigma] -> top-1 hit after noising
  std::vector<std::vector<std::size_t>> ranks(cases.size(), std::vector<std::size_t>(n_eps));
  std::vector<std::vector<double>> linf(cases.size(), std::vector<double>(n_eps));
  std::vector<std::vector<char>> violation(cases.size(), std::vector<char>(n_eps));
  std::vector<std::vector<std::vector<char>>> undo_hit(cases.size(),
                                                       std::vector<std::vector<char>>(n_eps, std::vector<char>(n_sig)));

  parallel_for(cases.size(), [&](std::size_t c) {
    const auto& tc = cases[c];
    std::vector<std::pair<ModelId, std::vector<double>>> cand;
    for (const auto& [id, img] : tc.candidates) cand.emplace_back(id, ensemble_embed(img));
    const auto pick = select_positive_target(ensemble_embed(tc.image), cand);
    const ImageGrid& positive = tc.candidates[pick].second;
    const auto truth = static_cast<ModelId>(tc.model);
    for (std::size_t e = 0; e < n_eps; ++e) {
      DefenseConfig dc;
      dc.epsilon = config.epsilons[e];
      dc.eta = config.eta;
      dc.tau_temp = config.tau_temp;
      dc.iterations = config.iterations;
      dc.encoders = ensemble;
      const auto res = defend(tc.image, positive, dc);
      ranks[c][e] = rank_of(rank_models(embed(res.image), table), truth);
      linf[c][e] = res.linf;
      violation[c][e] = res.linf > dc.epsilon01();
      for (std::size_t s = 0; s < n_sig; ++s) {
        const auto noisy = gaussian_noise_undo(res.image, config.undo_sigmas[s] / 255.0,
                                               config.seed * 7919 + c * 131 + s);
        undo_hit[c][e][s] = rank_models(embed(noisy), table).front().model == truth;
      }
    }
  });

  DefenseEvalReport report;
  const double n = static_cast<double>(cases.size());
  for (std::size_t e = 0; e < n_eps; ++e) {
    DefenseEvalRow row;
    row.epsilon = config.epsilons[e];
    for (int k : {1, 2, 3}) {
      std::size_t hits = 0;
      for (std::size_t c = 0; c < cases.size(); ++c)
        if (ranks[c][e] < static_cast<std::size_t>(k)) ++hits;
      row.topk[k] = static_cast<double>(hits) / n;
    }
    for (std::size_t c = 0; c < cases.size(); ++c) {
      row.max_linf = std::max(row.max_linf, linf[c][e]);
      row.budget_violations += violation[c][e] ? 1 : 0;
    }
    for (std::size_t s = 0; s < n_sig; ++s) {
      std::size_t hits = 0;
      for (std::size_t c = 0; c < cases.size(); ++c) hits += undo_hit[c][e][s] ? 1 : 0;
      row.undo_top1[config.undo_sigmas[s]] = static_cast<double>(hits) / n;
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace anonaudit
