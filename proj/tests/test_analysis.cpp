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

#include <cmath>
#include <random>
#include <vector>

#include "fedsvd/analysis.hpp"
#include "fedsvd/lora.hpp"
#include "test_util.hpp"

namespace fedsvd {
namespace {

using testing::gaussian;
using testing::max_abs_diff;
using testing::pick;

std::vector<Example> binary_data(std::size_t n, std::size_t d,
                                 std::mt19937_64& rng) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_example(d, 2, rng));
  return out;
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(800.0), 1.0, 1e-15);
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 1e-15);
}

TEST(HessianLogreg, ZeroLogitsGiveQuarterWeights) {
  std::mt19937_64 rng(1);
  const std::vector<Example> data = binary_data(30, 5, rng);
  const Matrix a = gaussian(2, 5, rng);
  const HessianReport rep = hessian_logreg(a, Matrix(1, 2), Matrix(1, 5), data);
  Matrix want(5, 5);
  for (const Example& e : data) axpy(0.25 / 30.0, outer(e.x, e.x), want);
  EXPECT_LT(max_abs_diff(rep.m, want), 1e-14);
}

TEST(HessianLogreg, IdentityAGivesM) {
  std::mt19937_64 rng(2);
  const std::vector<Example> data = binary_data(40, 4, rng);
  const HessianReport rep = hessian_logreg(Matrix::identity(4), gaussian(1, 4, rng),
                                           gaussian(1, 4, rng), data);
  EXPECT_LT(max_abs_diff(rep.h, rep.m), 1e-15);
}

TEST(HessianLogreg, MatchesFiniteDifferenceHessian) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = pick(3, 10, rng), r = pick(1, std::min<std::size_t>(d, 4), rng);
    const std::vector<Example> data = binary_data(25, d, rng);
    const Matrix a = gaussian(r, d, rng, 0.5);
    const Matrix b = gaussian(1, r, rng, 0.5);
    const Matrix w = gaussian(1, d, rng, 0.5);
    const HessianReport rep = hessian_logreg(a, b, w, data);
    const double h = 1e-4;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        auto at = [&](double di, double dj) {
          Matrix bb = b;
          bb(0, i) += di;
          bb(0, j) += dj;
          return binary_logistic_loss(a, bb, w, data);
        };
        const double fd =
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        EXPECT_NEAR(fd, rep.h(i, j), 1e-4 * std::max(1.0, std::abs(rep.h(i, j))));
      }
    }
  }
}

TEST(HessianLogreg, SymmetricPsd) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    const std::size_t d = pick(4, 16, rng), r = pick(1, 4, rng);
    const HessianReport rep = hessian_logreg(gaussian(r, d, rng), gaussian(1, r, rng),
                                             gaussian(1, d, rng),
                                             binary_data(50, d, rng));
    EXPECT_EQ(rep.h, transpose(rep.h));
    EXPECT_GE(rep.lambda_min_h, -1e-10);
    EXPECT_GE(eig_sym(rep.m).eigenvalues.back(), -1e-10);
    EXPECT_NEAR(rep.bound_general,
                rep.kappa_a * rep.kappa_a * rep.lambda_max_m /
                    rep.lambda_min_m_restricted,
                1e-12 * rep.bound_general);
  }
}

TEST(HessianLogreg, Errors) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(hessian_logreg(Matrix(2, 4), Matrix(1, 2), Matrix(1, 4), {}),
               std::invalid_argument);
  EXPECT_THROW(hessian_logreg(Matrix(2, 4), Matrix(1, 3), Matrix(1, 4),
                              binary_data(3, 4, rng)),
               std::invalid_argument);
  std::vector<Example> bad = binary_data(3, 4, rng);
  bad[1].y = 2;
  EXPECT_THROW(hessian_logreg(gaussian(2, 4, rng), Matrix(1, 2), Matrix(1, 4), bad),
               std::invalid_argument);
}

TEST(ConditioningBound, OrthonormalA) {
  std::mt19937_64 rng(6);
  Rng gen(6);
  const Matrix a = random_orthonormal_rows(3, 8, gen);
  const HessianReport rep =
      hessian_logreg(a, gaussian(1, 3, rng), gaussian(1, 8, rng), binary_data(60, 8, rng));
  EXPECT_NEAR(rep.kappa_a, 1.0, 1e-10);
  const ConditioningBoundResult res = conditioning_bound_check(rep);
  EXPECT_EQ(res.status, CheckStatus::kPass);
  EXPECT_TRUE(res.checks[3].applicable);
  EXPECT_TRUE(res.checks[3].holds);
}

TEST(ConditioningBound, ScalingAKeepsKappaH) {
  std::mt19937_64 rng(7);
  const Matrix a = gaussian(3, 8, rng);
  const Matrix w = gaussian(1, 8, rng);
  const Matrix b = gaussian(1, 3, rng);
  const std::vector<Example> data = binary_data(60, 8, rng);
  const HessianReport one = hessian_logreg(a, b, w, data);
  // Halving b keeps z, so M is unchanged and H scales by exactly 4.
  const HessianReport two = hessian_logreg(2.0 * a, 0.5 * b, w, data);
  EXPECT_NEAR(two.lambda_max_h, 4.0 * one.lambda_max_h, 1e-10 * two.lambda_max_h);
  EXPECT_NEAR(two.kappa_h, one.kappa_h, 1e-10 * one.kappa_h);
}

TEST(ConditioningBound, RandomInstancesHold) {
  std::mt19937_64 rng(8);
  const std::size_t ranks[] = {2, 4, 8};
  const std::size_t dims[] = {8, 16, 32};
  std::size_t conclusive = 0;
  for (int t = 0; t < 300; ++t) {
    const std::size_t r = ranks[pick(0, 2, rng)];
    const std::size_t d = dims[pick(0, 2, rng)];
    Matrix a = gaussian(r, d, rng, 1.0 / std::sqrt(double(d)));
    if (t % 2) {
      a = fedsvd_reparam(gaussian(d, r, rng), a).a;
    }
    const HessianReport rep = hessian_logreg(a, gaussian(1, r, rng),
                                             gaussian(1, d, rng, 0.3),
                                             binary_data(4 * d, d, rng));
    const ConditioningBoundResult res = conditioning_bound_check(rep);
    EXPECT_NE(res.status, CheckStatus::kFail) << "instance " << t;
    if (res.status == CheckStatus::kPass) ++conclusive;
    if (t % 2 && res.status == CheckStatus::kPass) {
      EXPECT_TRUE(res.checks[3].applicable);
    }
  }
  EXPECT_GT(conclusive, 250u);
}

TEST(ConditioningBound, DegenerateIsInconclusive) {
  std::mt19937_64 rng(9);
  // All examples identical: M has rank one.
  std::vector<Example> data(10, testing::random_example(6, 2, rng));
  const HessianReport rep =
      hessian_logreg(gaussian(3, 6, rng), gaussian(1, 3, rng), gaussian(1, 6, rng), data);
  EXPECT_TRUE(rep.degenerate);
  const ConditioningBoundResult res = conditioning_bound_check(rep);
  EXPECT_EQ(res.status, CheckStatus::kInconclusive);
  EXPECT_STREQ(to_string(res.status), "inconclusive");
}

TEST(ConditioningBound, DetectsViolation) {
  HessianReport rep;
  rep.lambda_max_h = 10.0;
  rep.lambda_min_h = 1.0;
  rep.kappa_h = 10.0;
  rep.sigma_max_a = rep.sigma_min_a = rep.kappa_a = 1.0;
  rep.lambda_max_m = 2.0;
  rep.lambda_min_m_restricted = 1.0;
  rep.bound_general = rep.bound_orthonormal = 2.0;
  EXPECT_EQ(conditioning_bound_check(rep).status, CheckStatus::kFail);
}

TEST(GradNorm, ZeroInput) {
  std::mt19937_64 rng(10);
  const GradNormCheck c = grad_norm_identity_check(
      gaussian(2, 4, rng), gaussian(3, 2, rng), gaussian(3, 4, rng),
      {Vector(4, 0.0), 1});
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_EQ(c.rhs_identity, 0.0);
  EXPECT_EQ(c.rhs_bound, 0.0);
}

TEST(GradNorm, EqualityOnRowSpace) {
  std::mt19937_64 rng(11);
  Rng gen(11);
  const Matrix a = random_orthonormal_rows(3, 9, gen);
  const Vector x = matvec_t(a, Vector{0.3, -1.2, 2.0});
  const GradNormCheck c = grad_norm_identity_check(a, gaussian(4, 3, rng),
                                                   gaussian(4, 9, rng), {x, 2});
  EXPECT_NEAR(c.lhs, c.rhs_bound, 1e-12);
  EXPECT_TRUE(c.identity_holds);
}

TEST(GradNorm, AgreesWithModelGradients) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = pick(3, 20, rng), c = pick(2, 5, rng);
    const std::size_t r = pick(1, std::min(c, d), rng);
    Classifier m;
    m.class_count = c;
    LoraLayer l;
    l.w0 = gaussian(c, d, rng);
    l.a = gaussian(r, d, rng);
    if (t % 2) l.a = fedsvd_reparam(gaussian(c, r, rng), l.a).a;
    l.b = gaussian(c, r, rng);
    l.rank = r;
    l.alpha = static_cast<double>(r);
    m.layers.push_back(l);
    const Example ex = testing::random_example(d, c, rng);
    const GradNormCheck chk = grad_norm_identity_check(l.a, l.b, l.w0, ex);
    EXPECT_TRUE(chk.identity_holds);
    EXPECT_TRUE(chk.bound_holds);
    EXPECT_NEAR(frobenius_norm(example_grad(m, ex, {false, true})[0].b), chk.lhs,
                1e-12 * std::max(1.0, chk.lhs));
    if (t % 2) {
      EXPECT_NEAR(chk.spectral_norm_a, 1.0, 1e-10);
      EXPECT_LE(chk.lhs, chk.rhs_bound / chk.spectral_norm_a + 1e-10);
    }
  }
}

TEST(NoiseTerms, Examples) {
  std::mt19937_64 rng(13);
  const Matrix b = gaussian(5, 2, rng), a = gaussian(2, 6, rng);
  const NoiseTerms zero = noise_amplification_terms(b, a, Matrix(5, 2), Matrix(2, 6));
  EXPECT_EQ(zero.norms[1], 0.0);
  EXPECT_EQ(zero.norms[2], 0.0);
  EXPECT_EQ(zero.norms[3], 0.0);
  const NoiseTerms pure = noise_amplification_terms(
      Matrix(5, 2), Matrix(2, 6), gaussian(5, 2, rng), gaussian(2, 6, rng));
  EXPECT_EQ(pure.norms[0], 0.0);
  EXPECT_EQ(pure.norms[1], 0.0);
  EXPECT_EQ(pure.norms[2], 0.0);
  EXPECT_GT(pure.norms[3], 0.0);
  EXPECT_THROW(noise_amplification_terms(b, a, Matrix(5, 3), Matrix(2, 6)),
               std::invalid_argument);
}

TEST(NoiseTerms, IdentityAtDpScale) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d_out = pick(2, 64, rng), d_in = pick(2, 64, rng);
    const std::size_t r = pick(1, std::min<std::size_t>({8, d_out, d_in}), rng);
    // sigma * C around 2, matching calibrated runs.
    const NoiseTerms n = noise_amplification_terms(
        gaussian(d_out, r, rng, 0.1), gaussian(r, d_in, rng, 0.2),
        gaussian(d_out, r, rng, 2.0), gaussian(r, d_in, rng, 2.0));
    EXPECT_LE(n.residual, 1e-12);
  }
}

}  // namespace
}  // namespace fedsvd
