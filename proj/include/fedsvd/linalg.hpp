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

#ifndef FEDSVD_LINALG_HPP_
#define FEDSVD_LINALG_HPP_

// Dense row-major linear algebra for the small matrices that show up in LoRA
// adapters: Householder QR, one-sided Jacobi SVD, cyclic Jacobi symmetric
// eigendecomposition, and the norms built on top of them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedsvd {

using Vector = std::vector<double>;

// Thrown when an iterative kernel exhausts its sweep budget.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data length " +
                                  std::to_string(data_.size()) +
                                  " does not match " + std::to_string(rows) +
                                  "x" + std::to_string(cols));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) {
        throw std::invalid_argument("Matrix: ragged initializer list");
      }
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix column(std::span<const double> v) {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::span<double> row(std::size_t i) {
    return std::span<double>(data_).subspan(i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                shape_str(a) + " vs " + shape_str(b) + ")");
  }
}

inline double sign_or_one(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace detail

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch (" + shape_str(a) +
                                " * " + shape_str(b) + ")");
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

// a^T * b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_tn: shape mismatch (" + shape_str(a) +
                                "^T * " + shape_str(b) + ")");
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto out = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

// a * b^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: shape mismatch (" + shape_str(a) +
                                " * " + shape_str(b) + "^T)");
  }
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline Vector matvec(const Matrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) {
    throw std::invalid_argument("matvec: shape mismatch (" + shape_str(m) +
                                " * " + std::to_string(x.size()) + ")");
  }
  Vector y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

// m^T * x.
inline Vector matvec_t(const Matrix& m, std::span<const double> x) {
  if (m.rows() != x.size()) {
    throw std::invalid_argument("matvec_t: shape mismatch (" + shape_str(m) +
                                "^T * " + std::to_string(x.size()) + ")");
  }
  Vector y(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) y[j] += r[j] * xi;
  }
  return y;
}

// u * v^T.
inline Matrix outer(std::span<const double> u, std::span<const double> v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) r[j] = u[i] * v[j];
  }
  return m;
}

inline Matrix& operator+=(Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "operator+=");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
  return a;
}

inline Matrix& operator-=(Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "operator-=");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] -= bd[i];
  return a;
}

inline Matrix& operator*=(Matrix& a, double s) {
  for (double& v : a.data()) v *= s;
  return a;
}

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }
inline Matrix operator*(const Matrix& a, const Matrix& b) {
  return matmul(a, b);
}

// a += s * b
inline void axpy(double s, const Matrix& b, Matrix& a) {
  detail::require_same_shape(a, b, "axpy");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += s * bd[i];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double frobenius_norm(const Matrix& m) { return norm2(m.data()); }

inline double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::abs(v));
  return best;
}

inline bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(),
                     [](double v) { return std::isfinite(v); });
}

inline Matrix diag(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

// Columns [begin, end) of m.
inline Matrix col_block(const Matrix& m, std::size_t begin, std::size_t end) {
  Matrix out(m.rows(), end - begin);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = m(i, j);
  return out;
}

// Rows [begin, end) of m.
inline Matrix row_block(const Matrix& m, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, m.cols());
  for (std::size_t i = begin; i < end; ++i)
    std::copy(m.row(i).begin(), m.row(i).end(), out.row(i - begin).begin());
  return out;
}

// ‖m m^T − I‖_max; zero iff the rows of m are orthonormal.
inline double row_orthonormality_error(const Matrix& m) {
  Matrix g = matmul_nt(m, m);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return max_abs(g);
}

// ‖m^T m − I‖_max; zero iff the columns of m are orthonormal.
inline double col_orthonormality_error(const Matrix& m) {
  Matrix g = matmul_tn(m, m);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return max_abs(g);
}

// ‖a − b‖_F / ‖b‖_F, falling back to the absolute error when b = 0.
inline double relative_error(const Matrix& a, const Matrix& b) {
  const double denom = frobenius_norm(b);
  const double num = frobenius_norm(a - b);
  return denom > 0.0 ? num / denom : num;
}

// ---------------------------------------------------------------------------
// QR
// ---------------------------------------------------------------------------

struct QrResult {
  Matrix q;  // m x n, orthonormal columns
  Matrix r;  // n x n, upper triangular
};

// Thin Householder QR for m >= n. Zero columns produce a zero diagonal in r
// and a standard basis column in q, so q is always orthonormal.
inline QrResult qr(const Matrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  if (rows < cols) {
    throw std::invalid_argument("qr: needs rows >= cols, got " + shape_str(m));
  }
  Matrix work = m;
  std::vector<Vector> reflectors(cols);
  for (std::size_t k = 0; k < cols; ++k) {
    Vector v(rows - k);
    for (std::size_t i = k; i < rows; ++i) v[i - k] = work(i, k);
    const double xnorm = norm2(v);
    if (xnorm == 0.0) continue;
    const double alpha = -detail::sign_or_one(v[0]) * xnorm;
    v[0] -= alpha;
    const double vnorm = norm2(v);
    if (vnorm == 0.0) continue;
    for (double& x : v) x /= vnorm;
    for (std::size_t j = k; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < rows; ++i) s += v[i - k] * work(i, j);
      s *= 2.0;
      for (std::size_t i = k; i < rows; ++i) work(i, j) -= s * v[i - k];
    }
    reflectors[k] = std::move(v);
  }

  QrResult out{Matrix(rows, cols), Matrix(cols, cols)};
  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = i; j < cols; ++j) out.r(i, j) = work(i, j);

  Matrix& q = out.q;
  for (std::size_t i = 0; i < cols; ++i) q(i, i) = 1.0;
  for (std::size_t kk = cols; kk-- > 0;) {
    const Vector& v = reflectors[kk];
    if (v.empty()) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t i = kk; i < rows; ++i) s += v[i - kk] * q(i, j);
      s *= 2.0;
      for (std::size_t i = kk; i < rows; ++i) q(i, j) -= s * v[i - kk];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVD
// ---------------------------------------------------------------------------

struct SvdResult {
  Matrix u;                     // m x k
  Vector singular_values;       // k, nonincreasing
  Matrix vt;                    // k x n
};

inline constexpr int kSvdMaxSweeps = 100;
inline constexpr double kSvdOffDiagonalTol = 1e-12;

namespace detail {

// Fills the rows of `basis` flagged in `missing` with unit vectors orthogonal
// to every other row, drawn from the standard basis by Gram-Schmidt.
inline void complete_orthonormal_rows(Matrix& basis,
                                      const std::vector<bool>& missing) {
  const std::size_t dim = basis.cols();
  std::vector<bool> filled(basis.rows());
  for (std::size_t i = 0; i < basis.rows(); ++i) filled[i] = !missing[i];
  std::size_t candidate = 0;
  for (std::size_t slot = 0; slot < basis.rows(); ++slot) {
    if (!missing[slot]) continue;
    bool placed = false;
    while (!placed && candidate < dim) {
      Vector v(dim, 0.0);
      v[candidate++] = 1.0;
      // Two passes of classical Gram-Schmidt.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < basis.rows(); ++i) {
          if (!filled[i]) continue;
          const double proj = dot(basis.row(i), v);
          auto r = basis.row(i);
          for (std::size_t j = 0; j < dim; ++j) v[j] -= proj * r[j];
        }
      }
      const double n = norm2(v);
      if (n > 0.5) {
        auto dst = basis.row(slot);
        for (std::size_t j = 0; j < dim; ++j) dst[j] = v[j] / n;
        filled[slot] = true;
        placed = true;
      }
    }
    if (!placed) {
      throw std::logic_error("svd: orthonormal completion ran out of vectors");
    }
  }
}

// One-sided Jacobi on the columns of `cols_as_rows` (each row holds one column
// of the tall input). On return its rows are mutually orthogonal and `rot`
// (n x n, rows = right vectors) holds the accumulated rotation.
inline void one_sided_jacobi(Matrix& cols_as_rows, Matrix& rot,
                             const std::size_t orig_rows,
                             const std::size_t orig_cols) {
  const std::size_t n = cols_as_rows.rows();
  const std::size_t len = cols_as_rows.cols();
  const double scale = frobenius_norm(cols_as_rows);
  const double tiny = std::numeric_limits<double>::epsilon() *
                      std::numeric_limits<double>::epsilon() * scale * scale;
  for (int sweep = 0; sweep < kSvdMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto cp = cols_as_rows.row(p);
        auto cq = cols_as_rows.row(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          alpha += cp[i] * cp[i];
          beta += cq[i] * cq[i];
          gamma += cp[i] * cq[i];
        }
        if (alpha <= tiny || beta <= tiny) continue;
        if (std::abs(gamma) <= kSvdOffDiagonalTol * std::sqrt(alpha * beta))
          continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = sign_or_one(zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < len; ++i) {
          const double a = cp[i];
          const double b = cq[i];
          cp[i] = c * a - s * b;
          cq[i] = s * a + c * b;
        }
        auto rp = rot.row(p);
        auto rq = rot.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double a = rp[i];
          const double b = rq[i];
          rp[i] = c * a - s * b;
          rq[i] = s * a + c * b;
        }
      }
    }
    if (!rotated) return;
  }
  throw ConvergenceError("svd: no convergence after " +
                         std::to_string(kSvdMaxSweeps) + " sweeps for " +
                         std::to_string(orig_rows) + "x" +
                         std::to_string(orig_cols) + " matrix");
}

// Makes the largest-magnitude entry (lowest index on ties) of every row of vt
// positive, flipping the paired column of u.
inline void canonicalize_signs(SvdResult& s) {
  for (std::size_t j = 0; j < s.vt.rows(); ++j) {
    auto r = s.vt.row(j);
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.size(); ++i)
      if (std::abs(r[i]) > std::abs(r[best])) best = i;
    if (r[best] < 0.0) {
      for (double& v : r) v = -v;
      for (std::size_t i = 0; i < s.u.rows(); ++i) s.u(i, j) = -s.u(i, j);
    }
  }
}

}  // namespace detail

// Thin SVD with k = min(rows, cols). Signs are canonical: the
// largest-magnitude entry of every right singular vector is positive.
inline SvdResult svd(const Matrix& m) {
  if (m.empty()) throw std::invalid_argument("svd: empty matrix");
  if (!all_finite(m)) {
    throw std::invalid_argument("svd: non-finite entries in " + shape_str(m) +
                                " matrix");
  }
  const bool tall = m.rows() >= m.cols();
  // Work on the side with fewer columns; rows of `work` are its columns.
  Matrix work = tall ? transpose(m) : m;
  const std::size_t k = work.rows();
  const std::size_t len = work.cols();
  Matrix rot = Matrix::identity(k);
  detail::one_sided_jacobi(work, rot, m.rows(), m.cols());

  Vector norms(k);
  for (std::size_t j = 0; j < k; ++j) norms[j] = norm2(work.row(j));
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return norms[a] > norms[b];
  });
  const double sigma_max = norms[order[0]];
  const double cutoff = sigma_max * static_cast<double>(std::max(m.rows(),
                                                                 m.cols())) *
                        std::numeric_limits<double>::epsilon();

  // `normalized` holds the singular vectors recovered from the rotated
  // columns; `rotated` the ones accumulated in `rot`.
  Matrix normalized(k, len);
  Matrix rotated(k, k);
  Vector sigma(k);
  std::vector<bool> missing(k, false);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    sigma[j] = norms[src];
    std::copy(rot.row(src).begin(), rot.row(src).end(),
              rotated.row(j).begin());
    if (sigma[j] > cutoff && sigma[j] > 0.0) {
      auto dst = normalized.row(j);
      auto from = work.row(src);
      for (std::size_t i = 0; i < len; ++i) dst[i] = from[i] / sigma[j];
    } else {
      missing[j] = true;
    }
  }
  detail::complete_orthonormal_rows(normalized, missing);

  SvdResult out;
  out.singular_values = std::move(sigma);
  if (tall) {
    // m = (normalized^T) diag(sigma) rotated
    out.u = transpose(normalized);
    out.vt = std::move(rotated);
  } else {
    // m^T = normalized^T diag(sigma) rotated  =>  m = rotated^T diag normalized
    out.u = transpose(rotated);
    out.vt = std::move(normalized);
  }
  detail::canonicalize_signs(out);
  return out;
}

// Rank-r SVD of b * a (b: d_out x r, a: r x d_in) through QR factors of b and
// a^T, so the d_out x d_in product is never formed.
inline SvdResult lowrank_svd(const Matrix& b, const Matrix& a) {
  if (b.cols() != a.rows()) {
    throw std::invalid_argument("lowrank_svd: inner dimensions disagree (" +
                                shape_str(b) + " * " + shape_str(a) + ")");
  }
  const std::size_t r = b.cols();
  if (r == 0 || r > b.rows() || r > a.cols()) {
    throw std::invalid_argument("lowrank_svd: rank " + std::to_string(r) +
                                " exceeds min(d_out, d_in) for " +
                                shape_str(b) + " * " + shape_str(a));
  }
  QrResult qb = qr(b);
  QrResult qa = qr(transpose(a));
  SvdResult core = svd(matmul_nt(qb.r, qa.r));

  SvdResult out;
  out.u = matmul(qb.q, core.u);
  // (Q_a V_s)^T = V_s^T Q_a^T
  out.vt = matmul_nt(core.vt, qa.q);
  out.singular_values = std::move(core.singular_values);
  detail::canonicalize_signs(out);
  return out;
}

inline Matrix reconstruct(const SvdResult& s) {
  Matrix us = s.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s.singular_values[j];
  return matmul(us, s.vt);
}

inline double spectral_norm(const Matrix& m) {
  return svd(m).singular_values.front();
}

inline constexpr double kDefaultRankTol = 1e-10;

// sigma_max / sigma_min over singular values above rank_tol * sigma_max.
inline double condition_number(const Matrix& m,
                               double rank_tol = kDefaultRankTol) {
  if (!(rank_tol > 0.0)) {
    throw std::invalid_argument("condition_number: rank_tol must be > 0");
  }
  const Vector s = svd(m).singular_values;
  const double smax = s.front();
  if (smax == 0.0) {
    throw std::domain_error(
        "condition_number: undefined for the all-zero " + shape_str(m) +
        " matrix");
  }
  double smin = smax;
  for (double v : s)
    if (v > rank_tol * smax) smin = std::min(smin, v);
  return smax / smin;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition
// ---------------------------------------------------------------------------

struct EigResult {
  Vector eigenvalues;   // nonincreasing
  Matrix eigenvectors;  // column j pairs with eigenvalues[j]
};

inline constexpr double kSymmetryTol = 1e-10;

// Cyclic Jacobi.
inline EigResult eig_sym(const Matrix& m) {
  if (m.rows() != m.cols() || m.empty()) {
    throw std::invalid_argument("eig_sym: needs a non-empty square matrix, "
                                "got " + shape_str(m));
  }
  const std::size_t n = m.rows();
  const double tol_sym = kSymmetryTol * std::max(1.0, max_abs(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol_sym) {
        throw std::invalid_argument("eig_sym: matrix is not symmetric at (" +
                                    std::to_string(i) + "," +
                                    std::to_string(j) + ")");
      }

  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  const double scale = std::max(frobenius_norm(a),
                                std::numeric_limits<double>::min());
  int sweep = 0;
  while (off_norm() > 1e-15 * scale) {
    if (++sweep > kSvdMaxSweeps) {
      throw ConvergenceError("eig_sym: no convergence after " +
                             std::to_string(kSvdMaxSweeps) + " sweeps for " +
                             shape_str(m) + " matrix");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = detail::sign_or_one(theta) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x,
                                                   std::size_t y) {
    return a(x, x) > a(y, y);
  });
  EigResult out{Vector(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

}  // namespace fedsvd

#endif  // FEDSVD_LINALG_HPP_
