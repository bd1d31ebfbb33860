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

// fedsvd: run federated experiments, check invariants, calibrate noise.
//
//   fedsvd run configs/desk_scale.ini federation.strategy=ffa_lora
//   fedsvd verify --scope all --trials 200
//   fedsvd calibrate --epsilon 6 --delta 1e-5 --q 0.03 --steps 1000
//   fedsvd partition-stats configs/desk_scale.ini

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedsvd/fedsvd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> output;
};

fedsvd::RunConfig resolve_config(const std::string& path,
                                 const std::vector<std::string>& overrides,
                                 const GlobalFlags& g) {
  fedsvd::RunConfig cfg = fedsvd::load_config(path);
  fedsvd::apply_overrides(cfg, overrides);
  if (g.seed) cfg.seeds = {*g.seed};
  if (g.threads) cfg.threads = *g.threads;
  if (g.output) cfg.output = *g.output;
  fedsvd::validate(cfg);
  return cfg;
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides,
            const GlobalFlags& g) {
  const fedsvd::RunConfig cfg = resolve_config(path, overrides, g);
  std::ofstream out(cfg.output, std::ios::binary);
  if (!out) throw fedsvd::ConfigError("run.output: cannot write " + cfg.output);
  const fedsvd::ExperimentSummary s = fedsvd::run_config(cfg, out);
  out.close();
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const fedsvd::RunResult& r = s.runs[i];
    std::printf("seed %llu: final accuracy %.4f",
                static_cast<unsigned long long>(cfg.seeds[i]),
                s.final_accuracy[i]);
    if (r.rounds.back().epsilon_spent) {
      std::printf(", epsilon spent %.4f", *r.rounds.back().epsilon_spent);
    }
    std::printf("\n");
  }
  const fedsvd::MeanInterval ci = fedsvd::mean_ci95(s.final_accuracy);
  std::printf("%s: final accuracy %.4f +- %.4f (95%% CI, %zu seeds)\n",
              cfg.strategy.label().c_str(), ci.mean, ci.half_width,
              cfg.seeds.size());
  std::printf("metrics written to %s\n", cfg.output.c_str());
  return kExitOk;
}

int cmd_verify(const std::string& scope, std::size_t trials,
               const GlobalFlags& g) {
  const std::uint64_t seed = g.seed.value_or(0);
  if (trials == 0) {
    std::fprintf(stderr, "warning: trials = 0, nothing checked\n");
  }
  const fedsvd::VerifyReport rep = fedsvd::run_verify(scope, trials, seed);
  const std::string margins = g.output.value_or("margins.csv");
  std::ofstream out(margins);
  if (!out) throw fedsvd::ConfigError("--output: cannot write " + margins);
  fedsvd::write_margins(out, rep);
  std::printf("verify %s: %zu checks, %zu violations, %zu inconclusive\n",
              scope.c_str(), rep.records.size(), rep.violations(),
              rep.inconclusive);
  for (const fedsvd::MarginRecord& r : rep.records) {
    if (!r.pass) {
      std::printf("  FAIL %s/%s trial %zu: value %.6e limit %.6e\n",
                  r.suite.c_str(), r.check.c_str(), r.trial, r.value, r.limit);
    }
  }
  std::printf("margins written to %s\n", margins.c_str());
  return rep.violations() == 0 ? kExitOk : kExitViolation;
}

int cmd_calibrate(double epsilon, double delta, double q, std::size_t steps) {
  const double sigma = fedsvd::calibrate_sigma(epsilon, delta, q, steps);
  fedsvd::RdpAccountant acc(q, sigma);
  acc.step(steps);
  const fedsvd::EpsilonResult spent = fedsvd::rdp_to_epsilon(acc, delta);
  std::printf("sigma %.10g\n", sigma);
  std::printf("epsilon spent %.10g (target %.10g, delta %.3g)\n", spent.epsilon,
              epsilon, delta);
  std::printf("best order %d\n", spent.best_order);
  std::printf("order,epsilon\n");
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < acc.orders().size(); ++i) {
    const int a = acc.orders()[i];
    std::printf("%d,%.10g\n", a, acc.rdp_total(i) + log_inv_delta / (a - 1.0));
  }
  return kExitOk;
}

int cmd_partition_stats(const std::string& path,
                        const std::vector<std::string>& overrides,
                        const GlobalFlags& g) {
  const fedsvd::RunConfig cfg = resolve_config(path, overrides, g);
  for (std::uint64_t seed : cfg.seeds) {
    const fedsvd::SeedSetup setup = fedsvd::build_seed(cfg, seed);
    std::printf("seed %llu (eval %zu examples)\n",
                static_cast<unsigned long long>(seed), setup.eval.size());
    std::printf("client,n");
    for (std::size_t c = 0; c < setup.eval.class_count; ++c)
      std::printf(",class_%zu", c);
    std::printf(",q\n");
    for (std::size_t k = 0; k < setup.clients.size(); ++k) {
      const fedsvd::Dataset& d = setup.clients[k];
      std::printf("%zu,%zu", k, d.size());
      for (std::size_t n : fedsvd::class_histogram(d)) std::printf(",%zu", n);
      std::printf(",%.6g\n",
                  std::min(1.0, static_cast<double>(cfg.batch_size) /
                                    static_cast<double>(d.size())));
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated LoRA fine-tuning simulator with SVD refactoring"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Master seed (replaces run.seeds)");
  app.add_option("--threads", g.threads, "Worker threads for client training")
      ->check(CLI::PositiveNumber);
  app.add_option("--output", g.output, "Metrics CSV (run) or margins CSV (verify)");

  std::string config_path;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run every seed of a config");
  run->add_option("config", config_path, "INI config file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("overrides", overrides, "section.key=value overrides");

  std::string scope = "all";
  std::size_t trials = 100;
  auto* verify = app.add_subcommand("verify", "Randomized invariant suites");
  verify->add_option("--scope", scope, "linalg|theorem|privacy|gradients|all")
      ->check(CLI::IsMember({"linalg", "theorem", "privacy", "gradients", "all"}));
  verify->add_option("--trials", trials, "Instances per suite");

  double epsilon = 6.0;
  double delta = 1e-5;
  double q = 0.0;
  std::size_t steps = 0;
  auto* calibrate = app.add_subcommand("calibrate", "Noise multiplier for a budget");
  calibrate->add_option("--epsilon", epsilon, "Target epsilon")->required();
  calibrate->add_option("--delta", delta, "Target delta")->required();
  calibrate->add_option("--q", q, "Poisson sampling rate")->required();
  calibrate->add_option("--steps", steps, "Number of steps T")->required();

  auto* stats = app.add_subcommand("partition-stats",
                                   "Per-client sizes and label histograms");
  stats->add_option("config", config_path, "INI config file")
      ->required()
      ->check(CLI::ExistingFile);
  stats->add_option("overrides", overrides, "section.key=value overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, overrides, g);
    if (*verify) return cmd_verify(scope, trials, g);
    if (*calibrate) return cmd_calibrate(epsilon, delta, q, steps);
    if (*stats) return cmd_partition_stats(config_path, overrides, g);
  } catch (const fedsvd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const fedsvd::ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitConfig;
  } catch (const fedsvd::CalibrationError& e) {
    std::fprintf(stderr, "calibration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitConfig;
  } catch (const fedsvd::InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return kExitViolation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitViolation;
  }
  return kExitOk;
}
