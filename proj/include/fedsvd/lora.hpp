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

#ifndef FEDSVD_LORA_HPP_
#define FEDSVD_LORA_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "fedsvd/linalg.hpp"
#include "fedsvd/rng.hpp"

namespace fedsvd {

// A frozen base weight plus a trainable low-rank pair. The adapted weight is
// w0 + (alpha / rank) * b * a with b: d_out x r and a: r x d_in.
struct LoraLayer {
  Matrix w0;
  Matrix a;
  Matrix b;
  std::size_t rank = 0;
  double alpha = 0.0;
  bool a_frozen = false;

  std::size_t d_out() const { return w0.rows(); }
  std::size_t d_in() const { return w0.cols(); }
  double scale() const { return alpha / static_cast<double>(rank); }

  bool operator==(const LoraLayer&) const = default;
};

enum class ReparamKind { kFedSvd, kNonOrthonormalSplit, kPissaInit, kNone };

struct AdapterPair {
  Matrix b;  // d_out x r
  Matrix a;  // r x d_in
};

struct PissaSplit {
  Matrix a;
  Matrix b;
  Matrix w0_residual;
};

// Kaiming-uniform with gain 1: entries i.i.d. U(-sqrt(3/fan_in), sqrt(3/fan_in)).
inline Matrix kaiming_uniform(std::size_t rows, std::size_t cols,
                              std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

inline void check_rank(std::size_t d_out, std::size_t d_in, std::size_t r,
                       const char* op) {
  if (r == 0) throw std::invalid_argument(std::string(op) + ": rank must be >= 1");
  if (r > d_out || r > d_in) {
    throw std::invalid_argument(std::string(op) + ": rank " +
                                std::to_string(r) + " exceeds min(" +
                                std::to_string(d_out) + ", " +
                                std::to_string(d_in) + ")");
  }
}

// b = 0, a Kaiming-uniform over fan-in d_in.
inline AdapterPair init_adapter(std::size_t d_out, std::size_t d_in,
                                std::size_t r, Rng& rng) {
  check_rank(d_out, d_in, r, "init_adapter");
  AdapterPair out;
  out.a = kaiming_uniform(r, d_in, d_in, rng);
  out.b = Matrix(d_out, r);
  return out;
}

inline AdapterPair init_adapter(std::size_t d_out, std::size_t d_in,
                                std::size_t r, std::uint64_t seed) {
  Rng rng(seed);
  return init_adapter(d_out, d_in, r, rng);
}

// r x d_in with orthonormal rows, uniformly distributed (QR of a Gaussian).
inline Matrix random_orthonormal_rows(std::size_t r, std::size_t d_in,
                                      Rng& rng) {
  check_rank(r, d_in, r, "random_orthonormal_rows");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(d_in, r);
  for (double& v : g.data()) v = gauss(rng);
  QrResult f = qr(g);
  // Fix the sign ambiguity of QR so the draw is Haar-distributed.
  for (std::size_t j = 0; j < r; ++j) {
    if (f.r(j, j) < 0.0)
      for (std::size_t i = 0; i < d_in; ++i) f.q(i, j) = -f.q(i, j);
  }
  return transpose(f.q);
}

// Singular values this small relative to max(1, ‖b‖_F) count as a zero
// product.
inline constexpr double kDegenerateProductTol = 1e-12;

namespace detail {

inline bool degenerate_product(const SvdResult& s, const Matrix& b) {
  const double floor =
      kDegenerateProductTol * std::max(1.0, frobenius_norm(b));
  for (double v : s.singular_values)
    if (v >= floor) return false;
  return true;
}

inline void check_pair(const Matrix& b, const Matrix& a_prev, const char* op) {
  if (b.cols() != a_prev.rows()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                shape_str(b) + " * " + shape_str(a_prev) + ")");
  }
}

}  // namespace detail

// Refactors b * a_prev as (U Sigma) * V^T so the new a has orthonormal rows.
// The product is unchanged. A numerically zero product keeps a_prev and
// zeroes b.
inline AdapterPair fedsvd_reparam(const Matrix& b, const Matrix& a_prev) {
  detail::check_pair(b, a_prev, "fedsvd_reparam");
  SvdResult s = lowrank_svd(b, a_prev);
  if (detail::degenerate_product(s, b)) {
    return {Matrix(b.rows(), b.cols()), a_prev};
  }
  AdapterPair out{std::move(s.u), std::move(s.vt)};
  for (std::size_t i = 0; i < out.b.rows(); ++i)
    for (std::size_t j = 0; j < out.b.cols(); ++j)
      out.b(i, j) *= s.singular_values[j];
  return out;
}

// Same factorization with sqrt(Sigma) on both sides; rows of a are not
// orthonormal unless all singular values equal one.
inline AdapterPair nonorthonormal_reparam(const Matrix& b,
                                          const Matrix& a_prev) {
  detail::check_pair(b, a_prev, "nonorthonormal_reparam");
  SvdResult s = lowrank_svd(b, a_prev);
  if (detail::degenerate_product(s, b)) {
    return {Matrix(b.rows(), b.cols()), a_prev};
  }
  AdapterPair out{std::move(s.u), std::move(s.vt)};
  for (std::size_t j = 0; j < s.singular_values.size(); ++j) {
    const double root = std::sqrt(s.singular_values[j]);
    for (std::size_t i = 0; i < out.b.rows(); ++i) out.b(i, j) *= root;
    for (double& v : out.a.row(j)) v *= root;
  }
  return out;
}

// Splits w0 into its top-r part (as b * a with sqrt(Sigma) on both factors)
// and the residual w0 - b * a.
inline PissaSplit pissa_init(const Matrix& w0, std::size_t r) {
  check_rank(w0.rows(), w0.cols(), r, "pissa_init");
  SvdResult s = svd(w0);
  const std::size_t k = s.singular_values.size();
  PissaSplit out{Matrix(r, w0.cols()), Matrix(w0.rows(), r),
                 Matrix(w0.rows(), w0.cols())};
  for (std::size_t j = 0; j < r; ++j) {
    const double root = std::sqrt(s.singular_values[j]);
    for (std::size_t i = 0; i < w0.rows(); ++i) out.b(i, j) = s.u(i, j) * root;
    auto src = s.vt.row(j);
    auto dst = out.a.row(j);
    for (std::size_t i = 0; i < w0.cols(); ++i) dst[i] = src[i] * root;
  }
  for (std::size_t j = r; j < k; ++j) {
    const double sj = s.singular_values[j];
    if (sj == 0.0) continue;
    for (std::size_t i = 0; i < w0.rows(); ++i) {
      const double ui = s.u(i, j) * sj;
      auto dst = out.w0_residual.row(i);
      auto v = s.vt.row(j);
      for (std::size_t c = 0; c < w0.cols(); ++c) dst[c] += ui * v[c];
    }
  }
  return out;
}

inline AdapterPair reparameterize(ReparamKind kind, const Matrix& b,
                                  const Matrix& a_prev) {
  switch (kind) {
    case ReparamKind::kFedSvd:
      return fedsvd_reparam(b, a_prev);
    case ReparamKind::kNonOrthonormalSplit:
      return nonorthonormal_reparam(b, a_prev);
    case ReparamKind::kPissaInit:
    case ReparamKind::kNone:
      break;
  }
  return {b, a_prev};
}

// (alpha / rank) * b * a
inline Matrix lora_delta(const LoraLayer& layer) {
  return layer.scale() * matmul(layer.b, layer.a);
}

inline Matrix effective_weight(const LoraLayer& layer) {
  return layer.w0 + lora_delta(layer);
}

}  // namespace fedsvd

#endif  // FEDSVD_LORA_HPP_
