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

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "fedsvd/config.hpp"
#include "fedsvd/experiment.hpp"

namespace fedsvd {
namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string error_of(const RunConfig& c) {
  try {
    validate(c);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyGivesDefaults) {
  EXPECT_EQ(parse(""), RunConfig{});
  EXPECT_EQ(error_of(RunConfig{}), "");
}

TEST(Config, ParsesSections) {
  const RunConfig c = parse(
      "; comment\n"
      "[federation]\nstrategy = fedsvd\nperiod = 5\nclients = 10\n"
      "participants = 4\nlocal_steps_per_client = 1, 2, 3, 4, 5, 6, 7, 8, 9, 10\n"
      "[privacy]\nepsilon = none\nsigma = 1.5\n"
      "[model]\nhidden = 32, 16\n"
      "[run]\nseeds = 3,4\nthreads = 2\n");
  EXPECT_EQ(c.strategy.kind, StrategyKind::kFedSvd);
  EXPECT_EQ(c.strategy.period, 5u);
  EXPECT_EQ(c.clients, 10u);
  EXPECT_EQ(c.participants, 4u);
  EXPECT_EQ(c.local_steps_per_client.size(), 10u);
  EXPECT_EQ(c.local_steps_per_client[9], 10u);
  EXPECT_FALSE(c.epsilon.has_value());
  EXPECT_EQ(c.sigma, 1.5);
  EXPECT_EQ(c.hidden, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(c.threads, 2u);
}

TEST(Config, PeriodSurvivesStrategyOrder) {
  // The period key may precede the strategy key.
  const RunConfig c = parse("[federation]\nperiod = 10\nstrategy = fedsvd\n");
  EXPECT_EQ(c.strategy.period, 10u);
  EXPECT_EQ(c.strategy.label(), "fedsvd_p10");
}

TEST(Config, DumpRoundTrips) {
  RunConfig c;
  c.strategy = Strategy::parse("fedsvd", 2);
  c.lr = 0.123456789012345;
  c.epsilon.reset();
  c.sigma = 0.7;
  c.hidden = {8, 4};
  c.local_steps_per_client = {1, 2, 3, 4, 5, 6};
  c.latent_dim = 12;
  c.noise_std = 0.05;
  c.seeds = {7, 11};
  c.output = "out/x.csv";
  c.record_wall_time = true;
  c.client_side_svd = false;
  EXPECT_EQ(parse(dump_config(c)), c);
  EXPECT_EQ(parse(dump_config(RunConfig{})), RunConfig{});
  for (const char* name : {"fedavg", "ffa_lora", "flora", "fedex_lora",
                           "fedsvd_nonortho", "ffa_orthonormal", "ffa_pissa"}) {
    RunConfig d;
    d.strategy = Strategy::parse(name, 1);
    EXPECT_EQ(parse(dump_config(d)), d) << name;
  }
}

TEST(Config, ShippedConfigsLoadAndValidate) {
  for (const char* name : {"smoke.ini", "desk_scale.ini", "nonprivate.ini"}) {
    const RunConfig c = load_config(std::string(FEDSVD_CONFIG_DIR) + "/" + name);
    EXPECT_EQ(error_of(c), "") << name;
  }
  EXPECT_FALSE(load_config(std::string(FEDSVD_CONFIG_DIR) + "/nonprivate.ini")
                   .epsilon.has_value());
}

TEST(Config, Overrides) {
  RunConfig c;
  apply_overrides(c, {"federation.rounds=7", "privacy.epsilon=none",
                      " lora.rank = 4", "federation.strategy=ffa_lora"});
  EXPECT_EQ(c.rounds, 7u);
  EXPECT_FALSE(c.epsilon.has_value());
  EXPECT_EQ(c.rank, 4u);
  EXPECT_EQ(c.strategy.kind, StrategyKind::kFfaLora);
  EXPECT_THROW(apply_overrides(c, {"rounds"}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {"=3"}), ConfigError);
}

TEST(Config, ParseErrors) {
  EXPECT_THROW(parse("[federation]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse("[nowhere]\nrounds = 1\n"), ConfigError);
  EXPECT_THROW(parse("[federation]\nrounds = ten\n"), ConfigError);
  EXPECT_THROW(parse("[federation]\nrounds = 3x\n"), ConfigError);
  EXPECT_THROW(parse("[federation]\nstrategy = fedprox\n"), ConfigError);
  EXPECT_THROW(parse("[federation]\nclient_side_svd = maybe\n"), ConfigError);
  EXPECT_THROW(parse("[federation\nrounds = 1\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/fedsvd.ini"), ConfigError);
  try {
    parse("[federation]\nbogus = 1\n");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("federation.bogus"), std::string::npos);
  }
}

TEST(Config, ValidateNamesField) {
  auto field = [](auto mutate) {
    RunConfig c;
    mutate(c);
    const std::string msg = error_of(c);
    return msg.substr(0, msg.find(':'));
  };
  EXPECT_EQ(field([](RunConfig& c) { c.participants = 7; }),
            "federation.participants");
  EXPECT_EQ(field([](RunConfig& c) { c.rounds = 0; }), "federation.rounds");
  EXPECT_EQ(field([](RunConfig& c) { c.lr = -1; }), "federation.lr");
  EXPECT_EQ(field([](RunConfig& c) { c.local_steps_per_client = {1, 2}; }),
            "federation.local_steps_per_client");
  EXPECT_EQ(field([](RunConfig& c) { c.strategy.period = 0; }), "federation.period");
  EXPECT_EQ(field([](RunConfig& c) { c.epsilon = 0.0; }), "privacy.epsilon");
  EXPECT_EQ(field([](RunConfig& c) { c.delta = 1.0; }), "privacy.delta");
  EXPECT_EQ(field([](RunConfig& c) { c.clip_norm = 0.0; }), "privacy.clip");
  EXPECT_EQ(field([](RunConfig& c) { c.rank = 0; }), "lora.rank");
  EXPECT_EQ(field([](RunConfig& c) { c.hidden = {0}; }), "model.hidden");
  EXPECT_EQ(field([](RunConfig& c) { c.latent_dim = 2; }), "data.latent_dim");
  EXPECT_EQ(field([](RunConfig& c) { c.features = 2; }), "data.features");
  EXPECT_EQ(field([](RunConfig& c) { c.seeds.clear(); }), "run.seeds");
  EXPECT_EQ(field([](RunConfig& c) { c.threads = 0; }), "run.threads");
  // Clip is irrelevant without a privacy budget.
  EXPECT_EQ(field([](RunConfig& c) {
              c.epsilon.reset();
              c.clip_norm = 0.0;
            }),
            "");
}

TEST(Metrics, RowFormat) {
  std::vector<RoundMetrics> rows(2);
  rows[0] = {1, 0.5, 1.25, 0.75, 100, 200, 0.0};
  rows[1] = {2, 0.625, 1.0, std::nullopt, 100, 200, 12.3456};
  std::ostringstream out;
  write_metrics(out, "fedsvd_p1-s3", 3, Strategy::parse("fedsvd", 1), rows);
  EXPECT_EQ(out.str(),
            "fedsvd_p1-s3,3,fedsvd_p1,1,0.5,1.25,0.75,100,200,0.000\n"
            "fedsvd_p1-s3,3,fedsvd_p1,2,0.625,1,,100,200,12.346\n");
  EXPECT_EQ(std::string(kMetricsHeader),
            "run_id,seed,strategy,round,eval_accuracy,eval_loss,epsilon_spent,"
            "uploaded_params,downloaded_params,wall_ms");
}

TEST(Metrics, MeanCi95) {
  // Student-t quantiles from an independent statistics package.
  const MeanInterval a = mean_ci95({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(a.mean, 3.0);
  EXPECT_NEAR(a.half_width, 1.9632431614775607, 1e-10);
  const MeanInterval b = mean_ci95({1, 2});
  EXPECT_NEAR(b.half_width, 6.353102368216047, 1e-9);
  EXPECT_EQ(mean_ci95({4}).half_width, 0.0);
  EXPECT_EQ(mean_ci95({2, 2, 2}).half_width, 0.0);
  EXPECT_THROW(mean_ci95({}), std::invalid_argument);
}

TEST(Experiment, RunConfigStreamsRowsFromRoundZero) {
  RunConfig c;
  c.rounds = 3;
  c.local_steps = 2;
  c.samples = 600;
  c.features = 16;
  c.hidden = {8};
  c.pretrain_steps = 20;
  c.seeds = {0, 1};
  std::ostringstream out;
  const ExperimentSummary s = run_config(c, out);
  ASSERT_EQ(s.final_accuracy.size(), 2u);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kMetricsHeader);
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 9) << line;
    EXPECT_EQ(line.rfind("fedsvd_p1-s", 0), 0u) << line;
  }
  EXPECT_EQ(n, 8u);  // rounds 0..3 for each seed
  for (const RunResult& r : s.runs) {
    ASSERT_TRUE(r.rounds.back().epsilon_spent.has_value());
    EXPECT_LE(*r.rounds.back().epsilon_spent, 6.0 * (1 + 1e-6));
  }
}

TEST(Experiment, RejectsInvalidConfig) {
  RunConfig c;
  c.participants = 100;
  std::ostringstream out;
  EXPECT_THROW(run_config(c, out), ConfigError);
  EXPECT_TRUE(out.str().empty());
}

}  // namespace
}  // namespace fedsvd
