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

#ifndef FEDSVD_PRIVACY_HPP_
#define FEDSVD_PRIVACY_HPP_

// DP-SGD (per-example clipping + Gaussian noise) and a Renyi-DP accountant for
// the Poisson-subsampled Gaussian mechanism.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsvd/linalg.hpp"
#include "fedsvd/rng.hpp"

namespace fedsvd {

inline constexpr double kNoClip = std::numeric_limits<double>::infinity();

struct PrivacyConfig {
  double epsilon_target = 6.0;
  double delta = 1e-5;
  double clip_norm = 2.0;
  double sigma = 0.0;
  double sample_rate = 1.0;
  std::size_t total_steps = 0;
};

// All trainable-parameter gradients of one example, in a fixed order.
using GradientSet = std::vector<Matrix>;

inline double global_norm(const GradientSet& g) {
  double s = 0.0;
  for (const Matrix& m : g)
    for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

// g * min(1, C / ‖g‖) with ‖g‖ taken over the whole set.
inline GradientSet clip_gradient(GradientSet g, double clip_norm) {
  if (!(clip_norm > 0.0)) {
    throw std::invalid_argument("clip_gradient: clip norm must be > 0");
  }
  const double n = global_norm(g);
  if (n > clip_norm) {
    const double f = clip_norm / n;
    for (Matrix& m : g) m *= f;
  }
  return g;
}

// params -= lr * (sum_i clip(g_i) + xi) / m with xi ~ N(0, sigma^2 C^2) drawn
// independently per coordinate of every tensor. Returns false (and leaves
// params alone) for an empty batch. clip_norm = kNoClip with sigma = 0 is
// plain mini-batch SGD.
inline bool dp_sgd_step(std::vector<Matrix>& params,
                        std::span<const GradientSet> per_sample,
                        double clip_norm, double sigma, double lr, Rng& rng) {
  if (per_sample.empty()) return false;
  if (sigma < 0.0) throw std::invalid_argument("dp_sgd_step: sigma < 0");
  if (sigma > 0.0 && !std::isfinite(clip_norm)) {
    throw std::invalid_argument("dp_sgd_step: noise needs a finite clip norm");
  }
  std::vector<Matrix> sum;
  sum.reserve(params.size());
  for (const Matrix& p : params) sum.emplace_back(p.rows(), p.cols());
  for (const GradientSet& g : per_sample) {
    if (g.size() != params.size()) {
      throw std::invalid_argument("dp_sgd_step: gradient set has " +
                                  std::to_string(g.size()) +
                                  " tensors, expected " +
                                  std::to_string(params.size()));
    }
    const double n = global_norm(g);
    const double f = (std::isfinite(clip_norm) && n > clip_norm)
                         ? clip_norm / n
                         : 1.0;
    for (std::size_t t = 0; t < params.size(); ++t) axpy(f, g[t], sum[t]);
  }
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma * clip_norm);
    for (Matrix& s : sum)
      for (double& v : s.data()) v += noise(rng);
  }
  const double step = lr / static_cast<double>(per_sample.size());
  for (std::size_t t = 0; t < params.size(); ++t) axpy(-step, sum[t], params[t]);
  return true;
}

// Same step with clip norm and noise multiplier taken from a privacy config.
inline bool dp_sgd_step(std::vector<Matrix>& params,
                        std::span<const GradientSet> per_sample,
                        const PrivacyConfig& cfg, double lr, Rng& rng) {
  return dp_sgd_step(params, per_sample, cfg.clip_norm, cfg.sigma, lr, rng);
}

// Integer Renyi orders 2..64 plus 128 and 256.
inline std::vector<int> default_orders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  orders.push_back(128);
  orders.push_back(256);
  return orders;
}

namespace detail {

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

// Per-step RDP of the Poisson-subsampled Gaussian mechanism at each order:
//   (1/(a-1)) log sum_k C(a,k) (1-q)^(a-k) q^k exp(k(k-1)/(2 sigma^2)),
// which is a/(2 sigma^2) at q = 1.
inline Vector rdp_subsampled_gaussian(double q, double sigma,
                                      std::span<const int> orders) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::invalid_argument("rdp_subsampled_gaussian: q must be in (0, 1]");
  }
  if (sigma == 0.0) {
    throw std::domain_error(
        "rdp_subsampled_gaussian: sigma = 0 gives infinite RDP");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("rdp_subsampled_gaussian: sigma must be > 0");
  }
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  Vector rdp(orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const int alpha = orders[i];
    if (alpha < 2) {
      throw std::invalid_argument("rdp_subsampled_gaussian: orders must be >= 2");
    }
    if (q == 1.0) {
      rdp[i] = alpha * inv_two_var;
      continue;
    }
    const double log_q = std::log(q);
    const double log_1mq = std::log1p(-q);
    double log_a = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= alpha; ++k) {
      const double term = detail::log_binomial(alpha, k) +
                          (alpha - k) * log_1mq + k * log_q +
                          k * (k - 1.0) * inv_two_var;
      log_a = detail::log_add(log_a, term);
    }
    rdp[i] = std::max(0.0, log_a / (alpha - 1.0));
  }
  return rdp;
}

// Per-order RDP ledger for repeated applications of one mechanism.
class RdpAccountant {
 public:
  RdpAccountant() = default;
  RdpAccountant(double q, double sigma, std::vector<int> orders = default_orders())
      : orders_(std::move(orders)),
        rdp_per_step_(rdp_subsampled_gaussian(q, sigma, orders_)) {}

  void step(std::size_t n = 1) { steps_ += n; }

  std::size_t steps() const { return steps_; }
  const std::vector<int>& orders() const { return orders_; }
  const Vector& rdp_per_step() const { return rdp_per_step_; }
  double rdp_total(std::size_t i) const {
    return static_cast<double>(steps_) * rdp_per_step_[i];
  }

 private:
  std::vector<int> orders_;
  Vector rdp_per_step_;
  std::size_t steps_ = 0;
};

struct EpsilonResult {
  double epsilon = 0.0;
  int best_order = 0;
};

// eps = min_a [ T * rdp(a) + log(1/delta) / (a - 1) ].
inline EpsilonResult rdp_to_epsilon(const RdpAccountant& acc, double delta) {
  if (acc.steps() == 0) {
    throw std::invalid_argument("rdp_to_epsilon: no steps accumulated");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("rdp_to_epsilon: delta must be in (0, 1)");
  }
  EpsilonResult best{std::numeric_limits<double>::infinity(), 0};
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < acc.orders().size(); ++i) {
    const int a = acc.orders()[i];
    const double eps = acc.rdp_total(i) + log_inv_delta / (a - 1.0);
    if (eps < best.epsilon) best = {eps, a};
  }
  return best;
}

inline EpsilonResult epsilon_for(double q, double sigma, std::size_t steps,
                                 double delta) {
  RdpAccountant acc(q, sigma);
  acc.step(steps);
  return rdp_to_epsilon(acc, delta);
}

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSigmaLow = 0.3;
inline constexpr double kSigmaHigh = 256.0;

// Smallest sigma in [0.3, 256] whose spent epsilon after `steps` steps does
// not exceed the target.
inline double calibrate_sigma(double epsilon_target, double delta, double q,
                              std::size_t steps) {
  if (!(epsilon_target > 0.0)) {
    throw std::invalid_argument("calibrate_sigma: epsilon must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("calibrate_sigma: delta must be in (0, 1)");
  }
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::invalid_argument("calibrate_sigma: q must be in (0, 1]");
  }
  if (steps == 0) {
    throw std::invalid_argument("calibrate_sigma: steps must be >= 1");
  }
  auto eps = [&](double sigma) {
    return epsilon_for(q, sigma, steps, delta).epsilon;
  };
  if (eps(kSigmaLow) <= epsilon_target) return kSigmaLow;
  if (eps(kSigmaHigh) > epsilon_target) {
    throw CalibrationError("calibrate_sigma: epsilon " +
                           std::to_string(epsilon_target) +
                           " unreachable with sigma <= 256");
  }
  double lo = kSigmaLow;
  double hi = kSigmaHigh;
  while (hi - lo > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (eps(mid) <= epsilon_target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace fedsvd

#endif  // FEDSVD_PRIVACY_HPP_
