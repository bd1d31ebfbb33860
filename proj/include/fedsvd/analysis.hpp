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

#ifndef FEDSVD_ANALYSIS_HPP_
#define FEDSVD_ANALYSIS_HPP_

// Numerical checks of the conditioning argument for LoRA on binary logistic
// regression: with logits z = (W + B A) x, the Hessian in B is H = A M A^T and
//   kappa(H) <= kappa(A)^2 * lambda_max(M) / lambda_min(M restricted to R(A^T)).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "fedsvd/linalg.hpp"
#include "fedsvd/model.hpp"

namespace fedsvd {

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace detail {

inline void check_logreg_shapes(const Matrix& a, const Matrix& b,
                                const Matrix& w) {
  if (b.rows() != 1 || w.rows() != 1 || b.cols() != a.rows() ||
      w.cols() != a.cols()) {
    throw std::invalid_argument("logistic model: expected A r x d, B 1 x r, "
                                "W 1 x d; got A " + shape_str(a) + ", B " +
                                shape_str(b) + ", W " + shape_str(w));
  }
}

inline double logreg_logit(const Matrix& a, const Matrix& b, const Matrix& w,
                           std::span<const double> x) {
  const Vector ax = matvec(a, x);
  return dot(w.row(0), x) + dot(b.row(0), ax);
}

}  // namespace detail

// Mean binary cross-entropy of z = (W + B A) x over data with labels in {0,1}.
inline double binary_logistic_loss(const Matrix& a, const Matrix& b,
                                   const Matrix& w,
                                   std::span<const Example> data) {
  detail::check_logreg_shapes(a, b, w);
  if (data.empty()) throw std::invalid_argument("binary_logistic_loss: no data");
  double total = 0.0;
  for (const Example& e : data) {
    const double z = detail::logreg_logit(a, b, w, e.x);
    // -y log s(z) - (1-y) log(1 - s(z)) = softplus(z) - y z
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z))
                                  : std::log1p(std::exp(z));
    total += softplus - static_cast<double>(e.y) * z;
  }
  return total / static_cast<double>(data.size());
}

struct HessianReport {
  Matrix h;  // r x r
  Matrix m;  // d x d
  double lambda_max_h = 0.0;
  double lambda_min_h = 0.0;
  double kappa_h = 0.0;
  double sigma_max_a = 0.0;
  double sigma_min_a = 0.0;
  double kappa_a = 0.0;
  double a_orthonormality_error = 0.0;
  double lambda_max_m = 0.0;
  double lambda_min_m_restricted = 0.0;
  double bound_general = 0.0;
  double bound_orthonormal = 0.0;
  bool degenerate = false;
};

inline constexpr double kHessianRankTol = 1e-10;

inline HessianReport hessian_logreg(const Matrix& a, const Matrix& b,
                                    const Matrix& w,
                                    std::span<const Example> data) {
  detail::check_logreg_shapes(a, b, w);
  if (data.empty()) throw std::invalid_argument("hessian_logreg: n = 0");
  if (a.rows() > a.cols()) {
    throw std::invalid_argument("hessian_logreg: needs r <= d, got A " +
                                shape_str(a));
  }
  const std::size_t d = a.cols();
  HessianReport rep;
  rep.m = Matrix(d, d);
  for (const Example& e : data) {
    if (e.y > 1) {
      throw std::invalid_argument("hessian_logreg: labels must be binary");
    }
    const double s = sigmoid(detail::logreg_logit(a, b, w, e.x));
    const double weight = s * (1.0 - s);
    for (std::size_t i = 0; i < d; ++i) {
      const double wi = weight * e.x[i];
      auto row = rep.m.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += wi * e.x[j];
    }
  }
  rep.m *= 1.0 / static_cast<double>(data.size());
  rep.h = matmul_nt(matmul(a, rep.m), a);
  // Symmetrize away the rounding asymmetry of the triple product.
  for (std::size_t i = 0; i < rep.h.rows(); ++i)
    for (std::size_t j = i + 1; j < rep.h.cols(); ++j)
      rep.h(i, j) = rep.h(j, i) = 0.5 * (rep.h(i, j) + rep.h(j, i));

  const EigResult eh = eig_sym(rep.h);
  rep.lambda_max_h = eh.eigenvalues.front();
  rep.lambda_min_h = eh.eigenvalues.back();

  const SvdResult sa = svd(a);
  rep.sigma_max_a = sa.singular_values.front();
  rep.sigma_min_a = sa.singular_values.back();
  rep.kappa_a = rep.sigma_min_a > 0.0 ? rep.sigma_max_a / rep.sigma_min_a
                                      : std::numeric_limits<double>::infinity();
  rep.a_orthonormality_error = row_orthonormality_error(a);

  rep.lambda_max_m = eig_sym(rep.m).eigenvalues.front();
  const Matrix q = qr(transpose(a)).q;  // d x r basis of R(A^T)
  Matrix restricted = matmul_tn(q, matmul(rep.m, q));
  for (std::size_t i = 0; i < restricted.rows(); ++i)
    for (std::size_t j = i + 1; j < restricted.cols(); ++j)
      restricted(i, j) = restricted(j, i) =
          0.5 * (restricted(i, j) + restricted(j, i));
  rep.lambda_min_m_restricted = eig_sym(restricted).eigenvalues.back();

  rep.degenerate = !(rep.lambda_min_h > kHessianRankTol * rep.lambda_max_h) ||
                   !(rep.lambda_min_m_restricted >
                     kHessianRankTol * rep.lambda_max_m) ||
                   !(rep.sigma_min_a > kHessianRankTol * rep.sigma_max_a);
  if (!rep.degenerate) {
    rep.kappa_h = rep.lambda_max_h / rep.lambda_min_h;
    rep.bound_orthonormal = rep.lambda_max_m / rep.lambda_min_m_restricted;
    rep.bound_general = rep.kappa_a * rep.kappa_a * rep.bound_orthonormal;
  }
  return rep;
}

enum class CheckStatus { kPass, kFail, kInconclusive };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass:
      return "pass";
    case CheckStatus::kFail:
      return "fail";
    case CheckStatus::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

struct InequalityMargin {
  double lhs = 0.0;
  double rhs = 0.0;
  bool applicable = true;
  bool holds = true;
};

// (a) lambda_max(H) <= sigma_max(A)^2 lambda_max(M)
// (b) lambda_min(H) >= sigma_min(A)^2 lambda_min(M|R(A^T))
// (c) kappa(H) <= kappa(A)^2 lambda_max(M) / lambda_min(M|R(A^T))
// (d) kappa(H) <= lambda_max(M) / lambda_min(M|R(A^T)) when A A^T = I
struct ConditioningBoundResult {
  CheckStatus status = CheckStatus::kPass;
  std::array<InequalityMargin, 4> checks;
};

inline constexpr double kTheoremTol = 1e-8;
inline constexpr double kOrthonormalTol = 1e-10;

inline ConditioningBoundResult conditioning_bound_check(
    const HessianReport& rep, double tol = kTheoremTol) {
  ConditioningBoundResult out;
  if (rep.degenerate) {
    out.status = CheckStatus::kInconclusive;
    for (auto& c : out.checks) c.applicable = false;
    return out;
  }
  auto& [a, b, c, d] = out.checks;
  a.lhs = rep.lambda_max_h;
  a.rhs = rep.sigma_max_a * rep.sigma_max_a * rep.lambda_max_m;
  a.holds = a.lhs <= a.rhs * (1.0 + tol);

  b.lhs = rep.lambda_min_h;
  b.rhs = rep.sigma_min_a * rep.sigma_min_a * rep.lambda_min_m_restricted;
  b.holds = b.lhs >= b.rhs * (1.0 - tol);

  c.lhs = rep.kappa_h;
  c.rhs = rep.bound_general;
  c.holds = c.lhs <= c.rhs * (1.0 + tol);

  d.lhs = rep.kappa_h;
  d.rhs = rep.bound_orthonormal;
  d.applicable = rep.a_orthonormality_error <= kOrthonormalTol;
  d.holds = !d.applicable || d.lhs <= d.rhs * (1.0 + tol);

  for (const auto& chk : out.checks)
    if (!chk.holds) out.status = CheckStatus::kFail;
  return out;
}

// ‖dl/dB‖_F against ‖dl/dz‖ ‖A x‖ (equality) and ‖dl/dz‖ ‖A‖_2 ‖x‖ (bound)
// for softmax cross-entropy on z = (W + B A) x.
struct GradNormCheck {
  double lhs = 0.0;
  double rhs_identity = 0.0;
  double rhs_bound = 0.0;
  double spectral_norm_a = 0.0;
  bool identity_holds = false;
  bool bound_holds = false;
};

inline constexpr double kGradNormTol = 1e-10;

inline GradNormCheck grad_norm_identity_check(const Matrix& a, const Matrix& b,
                                              const Matrix& w,
                                              const Example& ex) {
  if (b.cols() != a.rows() || w.rows() != b.rows() || w.cols() != a.cols() ||
      ex.x.size() != a.cols() || ex.y >= w.rows()) {
    throw std::invalid_argument("grad_norm_identity_check: shape mismatch");
  }
  const Vector ax = matvec(a, ex.x);
  Vector z = matvec(w, ex.x);
  const Vector bax = matvec(b, ax);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += bax[i];
  Vector dz = softmax(z);
  dz[ex.y] -= 1.0;

  GradNormCheck out;
  out.lhs = frobenius_norm(outer(dz, ax));
  out.spectral_norm_a = spectral_norm(a);
  out.rhs_identity = norm2(dz) * norm2(ax);
  out.rhs_bound = norm2(dz) * out.spectral_norm_a * norm2(ex.x);
  out.identity_holds = std::abs(out.lhs - out.rhs_identity) <= kGradNormTol;
  out.bound_holds = out.lhs <= out.rhs_bound + kGradNormTol;
  return out;
}

// Expansion of (B + xi_B)(A + xi_A) into signal, two linear noise terms and
// the quadratic noise term.
struct NoiseTerms {
  Matrix signal;     // B A
  Matrix noise_b;    // xi_B A
  Matrix noise_a;    // B xi_A
  Matrix quadratic;  // xi_B xi_A
  std::array<double, 4> norms{};
  double residual = 0.0;  // max-abs of product minus the four terms
};

inline NoiseTerms noise_amplification_terms(const Matrix& b, const Matrix& a,
                                            const Matrix& xi_b,
                                            const Matrix& xi_a) {
  if (b.rows() != xi_b.rows() || b.cols() != xi_b.cols() ||
      a.rows() != xi_a.rows() || a.cols() != xi_a.cols() ||
      b.cols() != a.rows()) {
    throw std::invalid_argument("noise_amplification_terms: shape mismatch");
  }
  NoiseTerms t;
  t.signal = matmul(b, a);
  t.noise_b = matmul(xi_b, a);
  t.noise_a = matmul(b, xi_a);
  t.quadratic = matmul(xi_b, xi_a);
  t.norms = {frobenius_norm(t.signal), frobenius_norm(t.noise_b),
             frobenius_norm(t.noise_a), frobenius_norm(t.quadratic)};
  const Matrix noisy = matmul(b + xi_b, a + xi_a);
  t.residual = max_abs(noisy - t.signal - t.noise_b - t.noise_a - t.quadratic);
  return t;
}

}  // namespace fedsvd

#endif  // FEDSVD_ANALYSIS_HPP_
