// Copyright 2026 The fedsvd-sim Authors.
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

#ifndef FEDSVD_EXPERIMENT_HPP_
#define FEDSVD_EXPERIMENT_HPP_

// Turns a RunConfig into per-seed runs: data, partition, pre-trained
// backbone, then the federated loop. Metrics go to a CSV.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsvd/config.hpp"
#include "fedsvd/data.hpp"
#include "fedsvd/federation.hpp"
#include "fedsvd/model.hpp"
#include "fedsvd/rng.hpp"

namespace fedsvd {

// Everything a run needs that does not depend on the strategy. Building it
// (pre-training in particular) dominates setup, so callers comparing
// strategies under one seed should build it once.
struct SeedSetup {
  std::uint64_t seed = 0;
  Classifier backbone;
  std::vector<Dataset> clients;
  Dataset eval;
};

namespace detail {

struct SourceSplits {
  Dataset pretrain;
  Dataset finetune;
  Dataset eval;
};

inline Dataset take(const Dataset& d, const std::vector<std::size_t>& idx,
                    std::size_t begin, std::size_t end) {
  Dataset out{{}, d.class_count, d.feature_dim};
  out.examples.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.examples.push_back(d.examples[idx[i]]);
  return out;
}

inline SourceSplits load_source(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.source == "synthetic") {
    SyntheticSpec spec;
    spec.classes = cfg.classes;
    spec.features = cfg.features;
    spec.samples = cfg.samples;
    spec.pretrain_samples = cfg.pretrain_samples;
    spec.eval_samples = cfg.eval_samples;
    spec.margin = cfg.margin;
    spec.shift_angle = cfg.shift_angle;
    spec.latent_dim = cfg.latent_dim;
    spec.noise_std = cfg.noise_std;
    spec.seed = seed;
    SyntheticSplits s = gen_synthetic(spec);
    return {std::move(s.pretrain), std::move(s.finetune), std::move(s.eval)};
  }
  const Dataset all = load_csv(cfg.source);
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, Stream::kData);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = static_cast<double>(all.size());
  const auto n_pre = static_cast<std::size_t>(cfg.csv_pretrain_fraction * n);
  const auto n_eval = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.csv_eval_fraction * n));
  if (n_pre + n_eval >= all.size()) {
    throw ConfigError("data.source: " + cfg.source +
                      " is too small for the requested splits");
  }
  return {take(all, idx, 0, n_pre), take(all, idx, n_pre, n_pre + n_eval),
          take(all, idx, n_pre + n_eval, all.size())};
}

}  // namespace detail

inline Architecture architecture_for(const RunConfig& cfg,
                                     std::size_t features,
                                     std::size_t classes) {
  Architecture arch;
  arch.widths.push_back(features);
  for (std::size_t h : cfg.hidden) arch.widths.push_back(h);
  arch.widths.push_back(classes);
  arch.rank = cfg.rank;
  arch.alpha = cfg.alpha;
  return arch;
}

inline SeedSetup build_seed(const RunConfig& cfg, std::uint64_t seed) {
  detail::SourceSplits s = detail::load_source(cfg, seed);
  SeedSetup out;
  out.seed = seed;
  PartitionSpec ps{cfg.dirichlet_alpha, cfg.clients, seed};
  try {
    out.clients = partition_dirichlet(s.finetune, ps).clients;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("federation.clients: ") + e.what());
  }
  Rng rng = make_rng(seed, Stream::kBackbone);
  out.backbone = make_classifier(
      architecture_for(cfg, s.finetune.feature_dim, s.finetune.class_count),
      rng);
  if (cfg.pretrain_steps > 0 && !s.pretrain.empty()) {
    pretrain_backbone(out.backbone, s.pretrain.examples,
                      static_cast<int>(cfg.pretrain_steps), cfg.pretrain_lr);
  }
  out.eval = std::move(s.eval);
  return out;
}

inline FederationConfig federation_config(const RunConfig& cfg,
                                          std::uint64_t seed) {
  FederationConfig f;
  f.strategy = cfg.strategy;
  f.participants = cfg.participants;
  f.rounds = cfg.rounds;
  f.local_steps = cfg.local_steps;
  f.local_steps_per_client = cfg.local_steps_per_client;
  f.lr = cfg.lr;
  f.batch_size = cfg.batch_size;
  f.epsilon = cfg.epsilon;
  f.delta = cfg.delta;
  f.clip_norm = cfg.clip_norm;
  f.sigma = cfg.sigma;
  f.threads = cfg.threads;
  f.client_side_svd = cfg.client_side_svd;
  f.record_wall_time = cfg.record_wall_time;
  f.seed = seed;
  return f;
}

inline RunResult run_seed(const RunConfig& cfg, const SeedSetup& setup) {
  return run_experiment(federation_config(cfg, setup.seed), setup.backbone,
                        setup.clients, setup.eval);
}

// ---------------------------------------------------------------------------
// Metrics CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricsHeader =
    "run_id,seed,strategy,round,eval_accuracy,eval_loss,epsilon_spent,"
    "uploaded_params,downloaded_params,wall_ms";

// One line per round. The epsilon column is empty for non-private runs.
inline void write_metrics(std::ostream& out, const std::string& run_id,
                          std::uint64_t seed, const Strategy& strategy,
                          const std::vector<RoundMetrics>& rows) {
  char buf[512];
  for (const RoundMetrics& m : rows) {
    char eps[40] = "";
    if (m.epsilon_spent) std::snprintf(eps, sizeof eps, "%.10g", *m.epsilon_spent);
    std::snprintf(buf, sizeof buf, "%s,%llu,%s,%zu,%.10g,%.10g,%s,%zu,%zu,%.3f\n",
                  run_id.c_str(), static_cast<unsigned long long>(seed),
                  strategy.label().c_str(), m.round, m.eval_accuracy,
                  m.eval_loss, eps, m.uploaded_params, m.downloaded_params,
                  m.wall_ms);
    out << buf;
  }
}

struct MeanInterval {
  double mean = 0.0;
  double half_width = 0.0;  // 95% Student-t; 0 for one sample
};

inline MeanInterval mean_ci95(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean_ci95: no samples");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  return {mean, t * sd / std::sqrt(n)};
}

struct ExperimentSummary {
  std::vector<double> final_accuracy;  // one per seed
  std::vector<RunResult> runs;
};

// Runs every seed of the config and streams metrics rows to `out` (header
// first). Run ids are "<strategy label>-s<seed>".
inline ExperimentSummary run_config(const RunConfig& cfg, std::ostream& out) {
  validate(cfg);
  out << kMetricsHeader << "\n";
  ExperimentSummary summary;
  for (std::uint64_t seed : cfg.seeds) {
    const SeedSetup setup = build_seed(cfg, seed);
    RunResult r = run_seed(cfg, setup);
    write_metrics(out, cfg.strategy.label() + "-s" + std::to_string(seed),
                  seed, cfg.strategy, r.rounds);
    summary.final_accuracy.push_back(r.rounds.back().eval_accuracy);
    summary.runs.push_back(std::move(r));
  }
  return summary;
}

}  // namespace fedsvd

#endif  // FEDSVD_EXPERIMENT_HPP_
