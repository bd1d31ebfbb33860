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

#ifndef FEDSVD_VERIFY_HPP_
#define FEDSVD_VERIFY_HPP_

// Randomized invariant suites behind `fedsvd verify`. Every check records its
// measured value next to the limit it was held to, so the margins can be
// inspected as a CSV.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedsvd/analysis.hpp"
#include "fedsvd/linalg.hpp"
#include "fedsvd/lora.hpp"
#include "fedsvd/model.hpp"
#include "fedsvd/privacy.hpp"
#include "fedsvd/rng.hpp"

namespace fedsvd {

struct MarginRecord {
  std::string suite;
  std::string check;
  std::size_t trial = 0;
  double value = 0.0;
  double limit = 0.0;
  bool pass = true;
};

struct VerifyReport {
  std::vector<MarginRecord> records;
  std::size_t inconclusive = 0;

  std::size_t violations() const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(),
        [](const MarginRecord& r) { return !r.pass; }));
  }
  void merge(const VerifyReport& o) {
    records.insert(records.end(), o.records.begin(), o.records.end());
    inconclusive += o.inconclusive;
  }
};

namespace detail {

// Verification seeds live apart from experiment streams.
inline constexpr std::uint64_t kVerifySalt = 0x7665726966790000ULL;

class Recorder {
 public:
  Recorder(VerifyReport& r, std::string suite)
      : report_(r), suite_(std::move(suite)) {}

  void at_most(std::string check, std::size_t trial, double value,
               double limit) {
    report_.records.push_back(
        {suite_, std::move(check), trial, value, limit, value <= limit});
  }
  void at_least(std::string check, std::size_t trial, double value,
                double limit) {
    report_.records.push_back(
        {suite_, std::move(check), trial, value, limit, value >= limit});
  }
  void flag(std::string check, std::size_t trial, bool ok) {
    report_.records.push_back(
        {suite_, std::move(check), trial, ok ? 1.0 : 0.0, 1.0, ok});
  }

 private:
  VerifyReport& report_;
  std::string suite_;
};

inline Matrix gaussian(std::size_t r, std::size_t c, double sd, Rng& rng) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(r, c);
  for (double& v : m.data()) v = g(rng);
  return m;
}

inline std::size_t uniform_size(std::size_t lo, std::size_t hi, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace detail

// Refactorization exactness and orthonormality over random shapes, plus SVD
// reconstruction of random dense matrices.
inline VerifyReport verify_linalg(std::size_t trials, std::uint64_t seed) {
  VerifyReport rep;
  detail::Recorder rec(rep, "linalg");
  Rng rng(seed ^ detail::kVerifySalt);
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d_out = detail::uniform_size(1, 256, rng);
    const std::size_t d_in = detail::uniform_size(1, 256, rng);
    const std::size_t r =
        detail::uniform_size(1, std::min<std::size_t>({16, d_out, d_in}), rng);
    const Matrix b = detail::gaussian(d_out, r, 1.0, rng);
    const Matrix a = kaiming_uniform(r, d_in, d_in, rng);
    const AdapterPair p = fedsvd_reparam(b, a);
    const Matrix before = matmul(b, a);
    rec.at_most("reparam_recovery", t, relative_error(matmul(p.b, p.a), before),
                1e-10);
    rec.at_most("reparam_orthonormality", t, row_orthonormality_error(p.a),
                1e-10);

    const std::size_t m = detail::uniform_size(1, 40, rng);
    const std::size_t n = detail::uniform_size(1, 40, rng);
    const Matrix x = detail::gaussian(m, n, 1.0, rng);
    const SvdResult s = svd(x);
    rec.at_most("svd_reconstruction", t, relative_error(reconstruct(s), x),
                1e-10);
    rec.at_most("svd_u_orthonormality", t, col_orthonormality_error(s.u),
                1e-10);
    rec.at_most("svd_v_orthonormality", t, row_orthonormality_error(s.vt),
                1e-10);
  }
  return rep;
}

// Hessian conditioning bounds on random binary logistic-regression instances,
// alternating Kaiming and refactored (orthonormal) projections.
inline VerifyReport verify_conditioning(std::size_t trials,
                                        std::uint64_t seed) {
  VerifyReport rep;
  detail::Recorder rec(rep, "theorem");
  Rng rng(seed ^ (detail::kVerifySalt + 1));
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  static constexpr const char* kNames[4] = {"lambda_max_upper",
                                            "lambda_min_lower", "kappa_general",
                                            "kappa_orthonormal"};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d = detail::uniform_size(2, 12, rng);
    const std::size_t r = detail::uniform_size(1, d, rng);
    const std::size_t n = detail::uniform_size(d + 2, 4 * d + 20, rng);
    std::vector<Example> data(n);
    for (Example& e : data) {
      e.x.resize(d);
      for (double& v : e.x) v = gauss(rng);
      e.y = coin(rng) ? 1 : 0;
    }
    const Matrix w = detail::gaussian(1, d, 0.5, rng);
    Matrix a = kaiming_uniform(r, d, d, rng);
    const Matrix b = detail::gaussian(1, r, 0.5, rng);
    if (t % 2 == 1) {
      // Refactor a rank-r product so the projection has orthonormal rows.
      const Matrix b_full = detail::gaussian(r, r, 1.0, rng);
      a = fedsvd_reparam(b_full, a).a;
      rec.at_most("kappa_refactored_minus_one", t,
                  std::abs(condition_number(a) - 1.0), 1e-10);
    }
    const HessianReport h = hessian_logreg(a, b, w, data);
    const ConditioningBoundResult res = conditioning_bound_check(h);
    if (res.status == CheckStatus::kInconclusive) {
      ++rep.inconclusive;
      continue;
    }
    for (std::size_t i = 0; i < 4; ++i) {
      const InequalityMargin& c = res.checks[i];
      if (!c.applicable) continue;
      // Recorded as lhs / rhs against 1 +- tol.
      const double ratio = c.rhs != 0.0 ? c.lhs / c.rhs : 0.0;
      if (i == 1) {
        rec.at_least(kNames[i], t, ratio, 1.0 - kTheoremTol);
      } else {
        rec.at_most(kNames[i], t, ratio, 1.0 + kTheoremTol);
      }
    }
  }
  return rep;
}

// Accountant closed form, monotonicity, and calibration.
inline VerifyReport verify_privacy(std::size_t trials, std::uint64_t seed) {
  VerifyReport rep;
  detail::Recorder rec(rep, "privacy");
  Rng rng(seed ^ (detail::kVerifySalt + 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<int> orders = default_orders();
  for (std::size_t t = 0; t < trials; ++t) {
    const double sigma = 0.5 + 4.0 * unit(rng);
    const std::size_t steps = detail::uniform_size(1, 5000, rng);
    const double q = 0.001 + 0.3 * unit(rng);
    const double delta = 1e-5;

    const Vector full = rdp_subsampled_gaussian(1.0, sigma, orders);
    double worst = 0.0;
    for (std::size_t i = 0; i < orders.size(); ++i) {
      const double closed = orders[i] / (2.0 * sigma * sigma);
      worst = std::max(worst, std::abs(full[i] * static_cast<double>(steps) -
                                       closed * static_cast<double>(steps)) /
                                  (closed * static_cast<double>(steps)));
    }
    rec.at_most("full_batch_closed_form", t, worst, 1e-9);

    const double e0 = epsilon_for(q, sigma, steps, delta).epsilon;
    rec.flag("decreasing_in_sigma", t,
             epsilon_for(q, sigma * 1.1, steps, delta).epsilon < e0);
    rec.flag("increasing_in_steps", t,
             epsilon_for(q, sigma, steps + 1 + steps / 10, delta).epsilon > e0);
    rec.flag("nondecreasing_in_q", t,
             epsilon_for(std::min(1.0, q * 1.1), sigma, steps, delta).epsilon >=
                 e0);

    const double target = 0.5 + 9.5 * unit(rng);
    try {
      const double s = calibrate_sigma(target, delta, q, steps);
      const double spent = epsilon_for(q, s, steps, delta).epsilon;
      rec.at_most("calibrated_spent_over_target", t, spent / target, 1.0);
      if (s > kSigmaLow) {
        rec.at_least("calibrated_spent_over_target_low", t, spent / target,
                     0.99);
      }
    } catch (const CalibrationError&) {
      ++rep.inconclusive;
    }
  }
  return rep;
}

namespace detail {

// Central finite differences of the per-example loss with respect to one
// adapter entry.
inline double fd_entry(Classifier& model, const Example& ex, std::size_t l,
                       bool wrt_a, std::size_t i, std::size_t j) {
  Matrix& m = wrt_a ? model.layers[l].a : model.layers[l].b;
  const double orig = m(i, j);
  const double h = 1e-5 * std::max(1.0, std::abs(orig));
  m(i, j) = orig + h;
  const double up = loss(forward(model, ex.x), ex.y);
  m(i, j) = orig - h;
  const double down = loss(forward(model, ex.x), ex.y);
  m(i, j) = orig;
  return (up - down) / (2.0 * h);
}

inline double fd_relative_error(double fd, double g) {
  return std::abs(fd - g) / std::max({std::abs(g), std::abs(fd), 1e-4});
}

}  // namespace detail

// Analytic adapter gradients against finite differences on random one- and
// two-layer models, and the gradient-norm identity for linear models.
inline VerifyReport verify_gradients(std::size_t trials, std::uint64_t seed) {
  VerifyReport rep;
  detail::Recorder rec(rep, "gradients");
  Rng rng(seed ^ (detail::kVerifySalt + 3));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t t = 0; t < trials; ++t) {
    Architecture arch;
    arch.widths.push_back(detail::uniform_size(2, 10, rng));
    if (t % 2 == 1) arch.widths.push_back(detail::uniform_size(2, 8, rng));
    arch.widths.push_back(detail::uniform_size(2, 5, rng));
    arch.rank = detail::uniform_size(1, 4, rng);
    arch.alpha = 0.5 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    Classifier model = make_classifier(arch, rng);
    for (LoraLayer& layer : model.layers) {
      layer.b = detail::gaussian(layer.b.rows(), layer.b.cols(), 0.5, rng);
      layer.a_frozen = false;
    }
    Example ex;
    ex.x.resize(arch.widths.front());
    for (double& v : ex.x) v = gauss(rng);
    ex.y = detail::uniform_size(0, model.class_count - 1, rng);

    const ModelGrad g = example_grad(model, ex, TrainableMask{true, true});
    double worst = 0.0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      for (bool wrt_a : {false, true}) {
        const Matrix& an = wrt_a ? g[l].a : g[l].b;
        for (std::size_t i = 0; i < an.rows(); ++i)
          for (std::size_t j = 0; j < an.cols(); ++j)
            worst = std::max(worst,
                             detail::fd_relative_error(
                                 detail::fd_entry(model, ex, l, wrt_a, i, j),
                                 an(i, j)));
      }
    }
    rec.at_most("finite_difference", t, worst, 1e-6);

    if (model.layers.size() == 1) {
      const LoraLayer& layer = model.layers[0];
      const GradNormCheck a_kaiming =
          grad_norm_identity_check(layer.a, layer.b, layer.w0, ex);
      rec.at_most("grad_norm_identity", t,
                  std::abs(a_kaiming.lhs - a_kaiming.rhs_identity),
                  kGradNormTol);
      const Matrix a_hat = fedsvd_reparam(layer.b, layer.a).a;
      const GradNormCheck a_orth =
          grad_norm_identity_check(a_hat, layer.b, layer.w0, ex);
      rec.at_most("grad_norm_bound_orthonormal", t,
                  a_orth.lhs - a_orth.rhs_bound, kGradNormTol);
    }
  }
  return rep;
}

inline constexpr std::string_view kVerifyScopes[] = {
    "linalg", "theorem", "privacy", "gradients", "all"};

inline VerifyReport run_verify(std::string_view scope, std::size_t trials,
                               std::uint64_t seed) {
  if (std::find(std::begin(kVerifyScopes), std::end(kVerifyScopes), scope) ==
      std::end(kVerifyScopes)) {
    throw std::invalid_argument("verify: unknown scope \"" +
                                std::string(scope) + "\"");
  }
  const bool all = scope == "all";
  VerifyReport rep;
  if (all || scope == "linalg") rep.merge(verify_linalg(trials, seed));
  if (all || scope == "theorem") rep.merge(verify_conditioning(trials, seed));
  if (all || scope == "privacy") rep.merge(verify_privacy(trials, seed));
  if (all || scope == "gradients") rep.merge(verify_gradients(trials, seed));
  return rep;
}

inline void write_margins(std::ostream& out, const VerifyReport& rep) {
  out << "suite,check,trial,value,limit,pass\n";
  char buf[64];
  for (const MarginRecord& r : rep.records) {
    out << r.suite << ',' << r.check << ',' << r.trial << ',';
    std::snprintf(buf, sizeof buf, "%.6e,%.6e", r.value, r.limit);
    out << buf << ',' << (r.pass ? 1 : 0) << '\n';
  }
}

}  // namespace fedsvd

#endif  // FEDSVD_VERIFY_HPP_
