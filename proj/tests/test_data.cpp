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
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <unistd.h>

#include "fedsvd/data.hpp"
#include "fedsvd/model.hpp"

namespace fedsvd {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() /
         ("fedsvd_test_" + std::to_string(::getpid()) + "_" + name);
}

double trained_accuracy(const SyntheticSplits& s) {
  Rng rng(1);
  Classifier m = make_classifier(
      {{s.finetune.feature_dim, s.finetune.class_count}, 2, 2.0}, rng);
  pretrain_backbone(m, s.finetune.examples, 200, 0.5);
  return evaluate(m, s.eval.examples).accuracy;
}

TEST(GenSynthetic, ShapesAndDefaults) {
  SyntheticSpec spec;
  spec.features = 16;
  spec.samples = 600;
  const SyntheticSplits s = gen_synthetic(spec);
  EXPECT_EQ(s.finetune.size(), 600u);
  EXPECT_EQ(s.pretrain.size(), 300u);
  EXPECT_EQ(s.eval.size(), 200u);
  for (const Dataset* d : {&s.pretrain, &s.finetune, &s.eval}) {
    EXPECT_EQ(d->class_count, 3u);
    EXPECT_EQ(d->feature_dim, 16u);
    for (const Example& e : d->examples) {
      EXPECT_EQ(e.x.size(), 16u);
      EXPECT_LT(e.y, 3u);
    }
  }
}

TEST(GenSynthetic, Deterministic) {
  SyntheticSpec spec;
  spec.features = 8;
  spec.samples = 300;
  spec.seed = 42;
  const SyntheticSplits a = gen_synthetic(spec);
  const SyntheticSplits b = gen_synthetic(spec);
  EXPECT_EQ(a.finetune, b.finetune);
  EXPECT_EQ(a.pretrain, b.pretrain);
  EXPECT_EQ(a.eval, b.eval);
  spec.seed = 43;
  EXPECT_NE(gen_synthetic(spec).finetune, a.finetune);
}

TEST(GenSynthetic, ZeroMarginHasNoSignal) {
  SyntheticSpec spec;
  spec.features = 8;
  spec.samples = 3000;
  spec.eval_samples = 3000;
  spec.margin = 0.0;
  EXPECT_NEAR(trained_accuracy(gen_synthetic(spec)), 1.0 / 3.0, 0.05);
}

TEST(GenSynthetic, LargeMarginIsSeparable) {
  SyntheticSpec spec;
  spec.features = 8;
  spec.samples = 2000;
  spec.margin = 8.0;
  EXPECT_GT(trained_accuracy(gen_synthetic(spec)), 0.99);
}

TEST(GenSynthetic, LatentSubspace) {
  SyntheticSpec spec;
  spec.features = 20;
  spec.latent_dim = 4;
  spec.samples = 200;
  const SyntheticSplits s = gen_synthetic(spec);
  // Noise-free data lies in a 4-dimensional subspace.
  Matrix x(s.finetune.size(), 20);
  for (std::size_t i = 0; i < s.finetune.size(); ++i)
    std::copy(s.finetune.examples[i].x.begin(), s.finetune.examples[i].x.end(),
              x.row(i).begin());
  const Vector sv = svd(x).singular_values;
  EXPECT_GT(sv[3], 1e-6 * sv[0]);
  EXPECT_LT(sv[4], 1e-10 * sv[0]);
}

TEST(GenSynthetic, ShiftMovesMeans) {
  SyntheticSpec spec;
  spec.features = 10;
  spec.samples = 6000;
  spec.pretrain_samples = 6000;
  spec.margin = 4.0;
  auto mean_of = [](const Dataset& d, std::size_t cls) {
    Vector m(d.feature_dim, 0.0);
    double n = 0.0;
    for (const Example& e : d.examples) {
      if (e.y != cls) continue;
      for (std::size_t j = 0; j < m.size(); ++j) m[j] += e.x[j];
      n += 1.0;
    }
    for (double& v : m) v /= n;
    return m;
  };
  const SyntheticSplits s = gen_synthetic(spec);
  const Vector a = mean_of(s.pretrain, 0);
  const Vector b = mean_of(s.finetune, 0);
  const double radius = 4.0 / std::sqrt(2.0);
  EXPECT_NEAR(norm2(a), radius, 0.15);
  EXPECT_NEAR(norm2(b), radius, 0.15);
  // Angle between the two means is the shift angle.
  EXPECT_NEAR(std::acos(dot(a, b) / (norm2(a) * norm2(b))), 1.0, 0.08);
}

TEST(GenSynthetic, Errors) {
  SyntheticSpec spec;
  spec.classes = 1;
  EXPECT_THROW(gen_synthetic(spec), std::invalid_argument);
  spec.classes = 5;
  spec.features = 4;
  EXPECT_THROW(gen_synthetic(spec), std::invalid_argument);
  spec.features = 10;
  spec.latent_dim = 3;
  EXPECT_THROW(gen_synthetic(spec), std::invalid_argument);
  spec.latent_dim = 11;
  EXPECT_THROW(gen_synthetic(spec), std::invalid_argument);
}

Dataset synthetic_pool(std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.features = 4;
  spec.samples = n;
  spec.seed = seed;
  return gen_synthetic(spec).finetune;
}

void expect_disjoint_cover(const Partition& p, std::size_t n) {
  std::vector<std::size_t> all;
  for (const auto& idx : p.indices) all.insert(all.end(), idx.begin(), idx.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> want(n);
  std::iota(want.begin(), want.end(), 0);
  EXPECT_EQ(all, want);
}

TEST(PartitionDirichlet, Alpha05SixClients) {
  const Dataset d = synthetic_pool(3000, 7);
  const Partition p = partition_dirichlet(d, {0.5, 6, 7});
  ASSERT_EQ(p.clients.size(), 6u);
  expect_disjoint_cover(p, d.size());
  const std::vector<std::size_t> global = class_histogram(d);
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (double v : p.proportions[c]) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t k = 0; k < 6; ++k) {
      const double share =
          static_cast<double>(class_histogram(p.clients[k])[c]);
      // Largest-remainder rounding is off by less than one example; the
      // empty-client rule may move one more.
      EXPECT_LE(std::abs(share - p.proportions[c][k] * global[c]), 2.0);
    }
  }
  for (const Dataset& cell : p.clients) {
    EXPECT_GE(cell.size(), 1u);
    for (std::size_t i = 0; i < cell.size(); ++i) {
      EXPECT_EQ(cell.examples[i], d.examples[p.indices[&cell - &p.clients[0]][i]]);
    }
  }
}

TEST(PartitionDirichlet, SingleClientGetsEverything) {
  const Dataset d = synthetic_pool(100, 1);
  const Partition p = partition_dirichlet(d, {0.5, 1, 1});
  ASSERT_EQ(p.clients.size(), 1u);
  EXPECT_EQ(p.clients[0].size(), d.size());
  expect_disjoint_cover(p, d.size());
}

TEST(PartitionDirichlet, HugeAlphaIsNearlyIid) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset d = synthetic_pool(3000, seed);
    const Partition p = partition_dirichlet(d, {1e6, 4, seed});
    const std::vector<std::size_t> global = class_histogram(d);
    for (const Dataset& cell : p.clients) {
      const std::vector<std::size_t> h = class_histogram(cell);
      for (std::size_t c = 0; c < 3; ++c) {
        const double want = global[c] / 4.0;
        EXPECT_NEAR(static_cast<double>(h[c]), want, 0.1 * want);
      }
    }
  }
}

TEST(PartitionDirichlet, SmallAlphaKeepsEveryClientNonEmpty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Dataset d = synthetic_pool(60, seed);
    const Partition p = partition_dirichlet(d, {0.01, 10, seed});
    expect_disjoint_cover(p, d.size());
    for (const Dataset& cell : p.clients) EXPECT_GE(cell.size(), 1u);
  }
}

TEST(PartitionDirichlet, Deterministic) {
  const Dataset d = synthetic_pool(500, 3);
  EXPECT_EQ(partition_dirichlet(d, {0.5, 5, 9}).indices,
            partition_dirichlet(d, {0.5, 5, 9}).indices);
}

TEST(PartitionDirichlet, Errors) {
  const Dataset d = synthetic_pool(30, 3);
  EXPECT_THROW(partition_dirichlet(d, {0.5, 0, 1}), std::invalid_argument);
  EXPECT_THROW(partition_dirichlet(d, {0.0, 2, 1}), std::invalid_argument);
  EXPECT_THROW(partition_dirichlet(d, {0.5, 40, 1}), std::invalid_argument);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(LoadCsv, WellFormed) {
  const fs::path p = temp_file("ok.csv");
  write_text(p, "f1,label,f2\n1.5,cat,2\n-3e2, dog ,0.25\n");
  const Dataset d = load_csv(p.string());
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.feature_dim, 2u);
  EXPECT_EQ(d.class_count, 2u);
  EXPECT_EQ(d.examples[0].x, (Vector{1.5, 2.0}));
  EXPECT_EQ(d.examples[1].x, (Vector{-300.0, 0.25}));
  EXPECT_EQ(d.examples[0].y, 0u);
  EXPECT_EQ(d.examples[1].y, 1u);
  fs::remove(p);
}

TEST(LoadCsv, ErrorsNameTheLine) {
  const fs::path p = temp_file("bad.csv");
  write_text(p, "a,label\n1,x\nnan,y\n");
  try {
    load_csv(p.string());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text(p, "a,label\n1,x\n1,2,y\n");
  try {
    load_csv(p.string());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text(p, "a,label\nabc,x\n");
  EXPECT_THROW(load_csv(p.string()), ParseError);
  write_text(p, "a,b\n1,2\n");
  EXPECT_THROW(load_csv(p.string()), ParseError);
  write_text(p, "");
  EXPECT_THROW(load_csv(p.string()), ParseError);
  fs::remove(p);
  EXPECT_THROW(load_csv(p.string()), ParseError);
}

TEST(LoadCsv, RoundTrip) {
  SyntheticSpec spec;
  spec.features = 6;
  spec.samples = 200;
  const Dataset d = gen_synthetic(spec).finetune;
  const fs::path p = temp_file("rt.csv");
  write_csv(d, p.string());
  const Dataset back = load_csv(p.string());
  fs::remove(p);
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.feature_dim, d.feature_dim);
  // Labels come back renumbered by first appearance: a bijection.
  std::map<std::size_t, std::size_t> fwd;
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.examples[i].x, d.examples[i].x);
    auto [it, inserted] = fwd.try_emplace(d.examples[i].y, back.examples[i].y);
    EXPECT_EQ(it->second, back.examples[i].y);
  }
  std::set<std::size_t> images;
  for (const auto& [k, v] : fwd) images.insert(v);
  EXPECT_EQ(images.size(), fwd.size());
}

}  // namespace
}  // namespace fedsvd
