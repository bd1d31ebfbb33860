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

#ifndef FEDSVD_DATA_HPP_
#define FEDSVD_DATA_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedsvd/linalg.hpp"
#include "fedsvd/model.hpp"
#include "fedsvd/rng.hpp"

namespace fedsvd {

struct Dataset {
  std::vector<Example> examples;
  std::size_t class_count = 0;
  std::size_t feature_dim = 0;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  bool operator==(const Dataset&) const = default;
};

inline std::vector<std::size_t> class_histogram(const Dataset& d) {
  std::vector<std::size_t> h(d.class_count, 0);
  for (const Example& e : d.examples) ++h.at(e.y);
  return h;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

// Gaussian class clusters on a `latent_dim`-dimensional subspace of the input
// space: x = P (mu_y + z) + noise_std * e with P orthonormal, z ~ N(0, I) in
// the latent space and e ~ N(0, I) in the input space. Class means sit on
// orthonormal latent directions scaled so that any two are `margin` apart.
// The fine-tuning distribution tilts every mean by `shift_angle` radians
// towards another latent direction, so a model fit to the pre-training split
// is useful but imperfect on it. latent_dim = 0 uses the whole input space,
// where the default noise_std = 0 gives plain unit-variance clusters.
struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t features = 64;
  std::size_t samples = 6000;        // fine-tuning pool
  std::size_t pretrain_samples = 0;  // 0: samples / 2
  std::size_t eval_samples = 0;      // 0: samples / 3
  double margin = 3.0;
  double shift_angle = 1.0;
  std::size_t latent_dim = 0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SyntheticSpec&) const = default;
};

struct SyntheticSplits {
  Dataset pretrain;
  Dataset finetune;
  Dataset eval;
};

inline SyntheticSplits gen_synthetic(const SyntheticSpec& spec) {
  const std::size_t c = spec.classes;
  const std::size_t d = spec.features;
  if (c < 2) throw std::invalid_argument("gen_synthetic: needs >= 2 classes");
  if (d < c) {
    throw std::invalid_argument("gen_synthetic: feature dim must be >= classes");
  }
  const std::size_t latent = spec.latent_dim ? spec.latent_dim : d;
  if (latent < c || latent > d) {
    throw std::invalid_argument(
        "gen_synthetic: latent dim must be in [classes, features]");
  }
  Rng rng = make_rng(spec.seed, Stream::kData);

  // Orthonormal latent basis; the first c directions carry the base means,
  // the next c (when room) the shift.
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(d, latent);
  for (double& v : g.data()) v = gauss(rng);
  const Matrix basis = transpose(qr(g).q);  // latent x d
  const double radius = spec.margin / std::sqrt(2.0);
  const double cs = std::cos(spec.shift_angle);
  const double sn = std::sin(spec.shift_angle);

  Matrix base_means(c, latent);
  Matrix tuned_means(c, latent);
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t shift_dir = latent >= 2 * c ? c + k : (k + 1) % c;
    base_means(k, k) = radius;
    tuned_means(k, k) += radius * cs;
    tuned_means(k, shift_dir) += radius * sn;
  }

  std::uniform_int_distribution<std::size_t> label(0, c - 1);
  auto draw = [&](const Matrix& means, std::size_t n) {
    Dataset out{{}, c, d};
    out.examples.reserve(n);
    Vector z(latent);
    for (std::size_t i = 0; i < n; ++i) {
      Example e;
      e.y = label(rng);
      for (std::size_t j = 0; j < latent; ++j) z[j] = means(e.y, j) + gauss(rng);
      e.x = matvec_t(basis, z);
      for (double& v : e.x) v += spec.noise_std * gauss(rng);
      out.examples.push_back(std::move(e));
    }
    return out;
  };
  const std::size_t n_pre =
      spec.pretrain_samples ? spec.pretrain_samples : spec.samples / 2;
  const std::size_t n_eval =
      spec.eval_samples ? spec.eval_samples : spec.samples / 3;
  SyntheticSplits out;
  out.pretrain = draw(base_means, n_pre);
  out.finetune = draw(tuned_means, spec.samples);
  out.eval = draw(tuned_means, n_eval);
  return out;
}

// ---------------------------------------------------------------------------
// Dirichlet label-skew partitioning
// ---------------------------------------------------------------------------

struct PartitionSpec {
  double alpha = 0.5;
  std::size_t clients = 6;
  std::uint64_t seed = 0;
};

struct Partition {
  std::vector<Dataset> clients;
  // indices[k] lists the examples of the input given to client k.
  std::vector<std::vector<std::size_t>> indices;
  // proportions[c][k]: Dirichlet draw for class c (sums to 1).
  std::vector<Vector> proportions;
};

namespace detail {

inline Vector draw_dirichlet(double alpha, std::size_t k, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Vector p(k);
  double total = 0.0;
  for (double& v : p) {
    v = gamma(rng);
    total += v;
  }
  if (!(total > 0.0)) {
    // Every draw underflowed; the limit is a point mass on one client.
    std::fill(p.begin(), p.end(), 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    p[pick(rng)] = 1.0;
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

// Largest-remainder integerization of n * p.
inline std::vector<std::size_t> apportion(std::size_t n, const Vector& p) {
  const std::size_t k = p.size();
  std::vector<std::size_t> counts(k);
  Vector frac(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = static_cast<double>(n) * p[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % k]];
  return counts;
}

}  // namespace detail

inline Partition partition_dirichlet(const Dataset& data,
                                     const PartitionSpec& spec) {
  const std::size_t k = spec.clients;
  if (k == 0) throw std::invalid_argument("partition_dirichlet: K must be >= 1");
  if (!(spec.alpha > 0.0)) {
    throw std::invalid_argument("partition_dirichlet: alpha must be > 0");
  }
  if (data.size() < k) {
    throw std::invalid_argument(
        "partition_dirichlet: cannot give each of " + std::to_string(k) +
        " clients an example from " + std::to_string(data.size()));
  }
  std::vector<std::vector<std::size_t>> by_class(data.class_count);
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class.at(data.examples[i].y).push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < k) {
      throw std::invalid_argument("partition_dirichlet: class " +
                                  std::to_string(c) + " has fewer than " +
                                  std::to_string(k) + " examples");
    }
  }

  Rng rng = make_rng(spec.seed, Stream::kPartition);
  Partition out;
  out.indices.resize(k);
  out.proportions.resize(data.class_count);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    out.proportions[c] = detail::draw_dirichlet(spec.alpha, k, rng);
    const std::vector<std::size_t> counts =
        detail::apportion(by_class[c].size(), out.proportions[c]);
    std::size_t pos = 0;
    for (std::size_t client = 0; client < k; ++client)
      for (std::size_t j = 0; j < counts[client]; ++j)
        out.indices[client].push_back(by_class[c][pos++]);
  }

  // Participants need n_k >= 1 for the n_k / m weights.
  for (std::size_t client = 0; client < k; ++client) {
    if (!out.indices[client].empty()) continue;
    std::size_t largest = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (out.indices[j].size() > out.indices[largest].size()) largest = j;
    out.indices[client].push_back(out.indices[largest].back());
    out.indices[largest].pop_back();
  }

  out.clients.resize(k);
  for (std::size_t client = 0; client < k; ++client) {
    Dataset& cell = out.clients[client];
    cell.class_count = data.class_count;
    cell.feature_dim = data.feature_dim;
    cell.examples.reserve(out.indices[client].size());
    for (std::size_t i : out.indices[client])
      cell.examples.push_back(data.examples[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Header row required; the "label" column holds class names, mapped to
// indices in order of first appearance. Every other column is a feature.
inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header row");
  ++lineno;
  const auto header = detail::split_commas(line);
  std::size_t label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (detail::trim(header[i]) == "label") label_col = i;
  if (label_col == header.size()) {
    throw ParseError(path, 1, "no column named \"label\"");
  }

  Dataset out;
  out.feature_dim = header.size() - 1;
  std::map<std::string, std::size_t, std::less<>> label_ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != header.size()) {
      throw ParseError(path, lineno,
                       "expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()));
    }
    Example e;
    e.x.reserve(out.feature_dim);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string_view f = detail::trim(fields[i]);
      if (i == label_col) {
        auto [it, inserted] =
            label_ids.try_emplace(std::string(f), label_ids.size());
        e.y = it->second;
        continue;
      }
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(path, lineno,
                         "non-numeric feature \"" + std::string(f) + "\"");
      }
      if (!std::isfinite(v)) {
        throw ParseError(path, lineno,
                         "non-finite feature \"" + std::string(f) + "\"");
      }
      e.x.push_back(v);
    }
    out.examples.push_back(std::move(e));
  }
  out.class_count = label_ids.size();
  return out;
}

// Writes features at round-trip precision with integer class labels.
inline void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (std::size_t j = 0; j < data.feature_dim; ++j) out << 'x' << j << ',';
  out << "label\n";
  char buf[32];
  for (const Example& e : data.examples) {
    for (double v : e.x) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << buf << ',';
    }
    out << e.y << '\n';
  }
}

}  // namespace fedsvd

#endif  // FEDSVD_DATA_HPP_
