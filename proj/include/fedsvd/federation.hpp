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

#ifndef FEDSVD_FEDERATION_HPP_
#define FEDSVD_FEDERATION_HPP_

// Round protocol for federated LoRA fine-tuning under client-side DP-SGD:
// sample clients, broadcast, train locally, aggregate, and (for the SVD
// strategies) refactor the aggregated adapters on the server.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fedsvd/data.hpp"
#include "fedsvd/linalg.hpp"
#include "fedsvd/lora.hpp"
#include "fedsvd/model.hpp"
#include "fedsvd/privacy.hpp"
#include "fedsvd/rng.hpp"

namespace fedsvd {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class StrategyKind {
  kFedAvg,
  kFfaLora,
  kFedSvd,
  kFedSvdNonOrtho,
  kFfaOrthonormalInit,
  kFfaPissa,
  kFlora,
  kFedExLora,
};

inline constexpr std::string_view kind_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::kFedAvg:
      return "fedavg";
    case StrategyKind::kFfaLora:
      return "ffa_lora";
    case StrategyKind::kFedSvd:
      return "fedsvd";
    case StrategyKind::kFedSvdNonOrtho:
      return "fedsvd_nonortho";
    case StrategyKind::kFfaOrthonormalInit:
      return "ffa_orthonormal";
    case StrategyKind::kFfaPissa:
      return "ffa_pissa";
    case StrategyKind::kFlora:
      return "flora";
    case StrategyKind::kFedExLora:
      return "fedex_lora";
  }
  return "?";
}

inline constexpr StrategyKind kAllStrategyKinds[] = {
    StrategyKind::kFedAvg,          StrategyKind::kFfaLora,
    StrategyKind::kFedSvd,          StrategyKind::kFedSvdNonOrtho,
    StrategyKind::kFfaOrthonormalInit, StrategyKind::kFfaPissa,
    StrategyKind::kFlora,           StrategyKind::kFedExLora,
};

struct Strategy {
  StrategyKind kind = StrategyKind::kFedSvd;
  std::size_t period = 1;  // SVD strategies only

  static Strategy parse(std::string_view name, std::size_t period = 1) {
    for (StrategyKind k : kAllStrategyKinds) {
      if (kind_name(k) == name) {
        if (period == 0) {
          throw std::invalid_argument("strategy: period must be >= 1");
        }
        return {k, period};
      }
    }
    throw std::invalid_argument("strategy: unknown name \"" +
                                std::string(name) + "\"");
  }

  bool periodic() const {
    return kind == StrategyKind::kFedSvd ||
           kind == StrategyKind::kFedSvdNonOrtho;
  }

  // Strategies that train and upload A as well as B.
  bool trains_a() const {
    return kind == StrategyKind::kFedAvg || kind == StrategyKind::kFlora ||
           kind == StrategyKind::kFedExLora;
  }

  // Column value in the metrics CSV, e.g. "fedsvd_p5".
  std::string label() const {
    std::string s(kind_name(kind));
    if (periodic()) s += "_p" + std::to_string(period);
    return s;
  }

  bool operator==(const Strategy&) const = default;
};

// Thrown when a protocol invariant (exact recovery, freezing, replica
// agreement) is violated during a run.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Server and clients
// ---------------------------------------------------------------------------

struct ServerState {
  Classifier model;  // global w0 and adapters per layer
  std::size_t round = 0;
  Strategy strategy;
};

// Relative Frobenius error tolerated between the adapted weight before and
// after a server-side refactorization.
inline constexpr double kRecoveryTol = 1e-10;

// Round-0 server state: zero b everywhere; a is Kaiming-uniform (or random
// orthonormal, or the PiSSA split of w0, depending on the strategy).
inline ServerState init_server(const Classifier& backbone, const Strategy& s,
                               std::uint64_t seed) {
  ServerState st;
  st.model = backbone;
  st.strategy = s;
  for (std::size_t l = 0; l < st.model.layers.size(); ++l) {
    LoraLayer& layer = st.model.layers[l];
    Rng rng = make_rng(seed, Stream::kServerInit, {l});
    layer.a_frozen = !s.trains_a();
    switch (s.kind) {
      case StrategyKind::kFfaOrthonormalInit:
        layer.a = random_orthonormal_rows(layer.rank, layer.d_in(), rng);
        layer.b = Matrix(layer.d_out(), layer.rank);
        break;
      case StrategyKind::kFfaPissa: {
        PissaSplit p = pissa_init(layer.w0, layer.rank);
        // Keep the adapted weight equal to w0: w0' + s * b * a = w0.
        const double root = std::sqrt(layer.scale());
        layer.a = p.a * (1.0 / root);
        layer.b = p.b * (1.0 / root);
        layer.w0 = std::move(p.w0_residual);
        break;
      }
      default: {
        AdapterPair p = init_adapter(layer.d_out(), layer.d_in(), layer.rank, rng);
        layer.a = std::move(p.a);
        layer.b = std::move(p.b);
        break;
      }
    }
  }
  return st;
}

struct ClientHandle {
  std::size_t id = 0;
  Dataset data;
  std::size_t local_steps = 10;
  double sample_rate = 1.0;  // Poisson rate q_k
  double sigma = 0.0;        // noise multiplier, 0 when non-private
  double clip_norm = kNoClip;
  std::optional<RdpAccountant> accountant;

  std::size_t n() const { return data.size(); }
  bool is_private() const { return accountant.has_value(); }
};

// Trained adapter factors of one client for every layer.
struct ClientUpdate {
  std::size_t client_id = 0;
  std::size_t n = 0;
  std::vector<AdapterPair> layers;
  std::size_t steps_taken = 0;
  std::size_t empty_batches = 0;
};

// Uniform sample of `participants` distinct ids out of [0, clients), sorted.
inline std::vector<std::size_t> sample_clients(std::size_t clients,
                                               std::size_t participants,
                                               Rng& rng) {
  if (participants == 0 || participants > clients) {
    throw std::invalid_argument("sample_clients: need 1 <= K' <= K, got K' = " +
                                std::to_string(participants) +
                                ", K = " + std::to_string(clients));
  }
  std::vector<std::size_t> ids(clients);
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < participants; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, clients - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(participants);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Runs `steps` DP-SGD steps on the client's data starting from the broadcast
// model. Only b trains unless the layer's a is unfrozen. Each step draws a
// Poisson batch at the client's sample rate; an empty batch skips the update
// but still counts as a step for the accountant.
inline ClientUpdate local_train(ClientHandle& client, const Classifier& global,
                                double lr, std::size_t steps, Rng& rng) {
  Classifier model = global;
  const std::size_t depth = model.layers.size();
  TrainableMask mask{true, true};

  ClientUpdate out;
  out.client_id = client.id;
  out.n = client.n();
  std::bernoulli_distribution take(client.sample_rate);
  std::vector<Example> batch;
  for (std::size_t step = 0; step < steps; ++step) {
    batch.clear();
    for (const Example& e : client.data.examples)
      if (take(rng)) batch.push_back(e);
    if (client.accountant) client.accountant->step();
    ++out.steps_taken;
    if (batch.empty()) {
      ++out.empty_batches;
      continue;
    }
    std::vector<Matrix> params;
    for (const LoraLayer& layer : model.layers) {
      if (!layer.a_frozen) params.push_back(layer.a);
      params.push_back(layer.b);
    }
    std::vector<GradientSet> grads;
    grads.reserve(batch.size());
    for (const Example& e : batch) {
      ModelGrad g = example_grad(model, e, mask);
      GradientSet flat;
      flat.reserve(params.size());
      for (std::size_t l = 0; l < depth; ++l) {
        if (!model.layers[l].a_frozen) flat.push_back(std::move(g[l].a));
        flat.push_back(std::move(g[l].b));
      }
      grads.push_back(std::move(flat));
    }
    dp_sgd_step(params, grads, client.clip_norm, client.sigma, lr, rng);
    std::size_t t = 0;
    for (LoraLayer& layer : model.layers) {
      if (!layer.a_frozen) layer.a = std::move(params[t++]);
      layer.b = std::move(params[t++]);
    }
  }
  out.layers.reserve(depth);
  for (LoraLayer& layer : model.layers)
    out.layers.push_back({std::move(layer.b), std::move(layer.a)});
  return out;
}

// n_k / sum_j n_j over the participants.
inline Vector aggregation_weights(std::span<const ClientUpdate> updates) {
  double total = 0.0;
  for (const ClientUpdate& u : updates) total += static_cast<double>(u.n);
  Vector w;
  w.reserve(updates.size());
  for (const ClientUpdate& u : updates)
    w.push_back(static_cast<double>(u.n) / total);
  return w;
}

struct AggregateReport {
  bool reparameterized = false;
  double max_recovery_error = 0.0;
  // Message the clients need to rebuild the reparameterized pair themselves:
  // the aggregated b and the previous a, per layer.
  std::vector<AdapterPair> reparam_inputs;
};

// Folds the client updates into the server state and advances the round.
// `rng` supplies fresh adapters for strategies that re-initialize them.
inline AggregateReport aggregate(ServerState& server,
                                 std::span<const ClientUpdate> updates,
                                 std::span<const double> weights, Rng& rng) {
  if (updates.empty() || updates.size() != weights.size()) {
    throw std::invalid_argument("aggregate: need one weight per update");
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-12) {
    throw std::invalid_argument("aggregate: weights sum to " +
                                std::to_string(wsum) + ", not 1");
  }
  const Strategy& s = server.strategy;
  AggregateReport report;
  const std::size_t next_round = server.round + 1;
  const bool reparam_due = s.periodic() && next_round % s.period == 0;
  report.reparameterized = reparam_due;

  for (std::size_t l = 0; l < server.model.layers.size(); ++l) {
    LoraLayer& layer = server.model.layers[l];
    Matrix b_avg(layer.b.rows(), layer.b.cols());
    Matrix a_avg(layer.a.rows(), layer.a.cols());
    Matrix prod_avg;
    const bool need_products = s.kind == StrategyKind::kFlora ||
                               s.kind == StrategyKind::kFedExLora;
    if (need_products) prod_avg = Matrix(layer.d_out(), layer.d_in());
    for (std::size_t k = 0; k < updates.size(); ++k) {
      const AdapterPair& u = updates[k].layers.at(l);
      if (u.b.rows() != b_avg.rows() || u.b.cols() != b_avg.cols() ||
          u.a.rows() != a_avg.rows() || u.a.cols() != a_avg.cols()) {
        throw std::invalid_argument("aggregate: client " +
                                    std::to_string(updates[k].client_id) +
                                    " sent mismatched shapes for layer " +
                                    std::to_string(l));
      }
      axpy(weights[k], u.b, b_avg);
      axpy(weights[k], u.a, a_avg);
      if (need_products) axpy(weights[k], matmul(u.b, u.a), prod_avg);
    }

    switch (s.kind) {
      case StrategyKind::kFedAvg:
        layer.a = std::move(a_avg);
        layer.b = std::move(b_avg);
        break;
      case StrategyKind::kFfaLora:
      case StrategyKind::kFfaOrthonormalInit:
      case StrategyKind::kFfaPissa:
        layer.b = std::move(b_avg);
        break;
      case StrategyKind::kFedSvd:
      case StrategyKind::kFedSvdNonOrtho: {
        layer.b = std::move(b_avg);
        if (!reparam_due) break;
        const Matrix before = effective_weight(layer);
        report.reparam_inputs.push_back({layer.b, layer.a});
        AdapterPair p = reparameterize(s.kind == StrategyKind::kFedSvd
                                           ? ReparamKind::kFedSvd
                                           : ReparamKind::kNonOrthonormalSplit,
                                       layer.b, layer.a);
        layer.b = std::move(p.b);
        layer.a = std::move(p.a);
        report.max_recovery_error =
            std::max(report.max_recovery_error,
                     relative_error(effective_weight(layer), before));
        break;
      }
      case StrategyKind::kFlora: {
        axpy(layer.scale(), prod_avg, layer.w0);
        Rng layer_rng(rng());
        AdapterPair p =
            init_adapter(layer.d_out(), layer.d_in(), layer.rank, layer_rng);
        layer.a = std::move(p.a);
        layer.b = std::move(p.b);
        break;
      }
      case StrategyKind::kFedExLora: {
        Matrix residual = prod_avg - matmul(b_avg, a_avg);
        axpy(layer.scale(), residual, layer.w0);
        layer.a = std::move(a_avg);
        layer.b = std::move(b_avg);
        break;
      }
    }
  }
  server.round = next_round;
  return report;
}

// Parameters sent per participant per round for each direction.
struct CommCost {
  std::size_t upload = 0;
  std::size_t download = 0;
};

inline CommCost comm_cost_per_client(const Classifier& model,
                                     const Strategy& s, bool client_side_svd) {
  CommCost c;
  for (const LoraLayer& layer : model.layers) {
    const std::size_t a = layer.a.size();
    const std::size_t b = layer.b.size();
    const std::size_t w = layer.w0.size();
    switch (s.kind) {
      case StrategyKind::kFedAvg:
        c.upload += a + b;
        c.download += a + b;
        break;
      case StrategyKind::kFfaLora:
      case StrategyKind::kFfaOrthonormalInit:
      case StrategyKind::kFfaPissa:
        c.upload += b;
        c.download += b;
        break;
      case StrategyKind::kFedSvd:
      case StrategyKind::kFedSvdNonOrtho:
        c.upload += b;
        c.download += client_side_svd ? b : a + b;
        break;
      case StrategyKind::kFlora:
      case StrategyKind::kFedExLora:
        c.upload += a + b;
        c.download += w + a + b;
        break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Experiment loop
// ---------------------------------------------------------------------------

struct FederationConfig {
  Strategy strategy;
  std::size_t participants = 3;
  std::size_t rounds = 100;
  std::size_t local_steps = 10;
  // Optional per-client override of local_steps, indexed by client id.
  std::vector<std::size_t> local_steps_per_client;
  double lr = 0.5;
  std::size_t batch_size = 32;  // expected Poisson batch size
  std::optional<double> epsilon;  // unset: non-private
  double delta = 1e-5;
  double clip_norm = 2.0;
  std::optional<double> sigma;  // explicit noise multiplier, skips calibration
  std::size_t threads = 1;
  bool client_side_svd = true;
  bool record_wall_time = false;
  std::uint64_t seed = 0;
};

struct RoundMetrics {
  std::size_t round = 0;
  double eval_accuracy = 0.0;
  double eval_loss = 0.0;
  std::optional<double> epsilon_spent;
  std::size_t uploaded_params = 0;
  std::size_t downloaded_params = 0;
  double wall_ms = 0.0;
};

struct ClientSummary {
  std::size_t id = 0;
  std::size_t n = 0;
  double sample_rate = 0.0;
  double sigma = 0.0;
  std::size_t steps = 0;
  std::optional<double> epsilon;
};

struct RunDiagnostics {
  std::size_t reparameterizations = 0;
  double max_recovery_error = 0.0;
  // Participant-side rebuilds of the refactored adapters compared bit for bit
  // with the server's.
  std::size_t replica_checks = 0;
  // Frozen-a comparisons between broadcast and returned matrices.
  std::size_t frozen_a_checks = 0;
};

struct RunResult {
  std::vector<RoundMetrics> rounds;
  std::vector<ClientSummary> clients;
  RunDiagnostics diagnostics;
  Classifier final_model;
};

// Snapshot handed to an observer after every round.
struct RoundTrace {
  std::size_t round = 0;  // 0-based index of the round just finished
  const Classifier& broadcast;
  std::span<const std::size_t> participants;
  std::span<const ClientUpdate> updates;
  const ServerState& server;
};

using RoundObserver = std::function<void(const RoundTrace&)>;

namespace detail {

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(double)) == 0;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline std::vector<ClientHandle> make_clients(const FederationConfig& cfg,
                                              const std::vector<Dataset>& data) {
  std::vector<ClientHandle> clients;
  clients.reserve(data.size());
  std::map<double, double> sigma_cache;
  for (std::size_t k = 0; k < data.size(); ++k) {
    ClientHandle c;
    c.id = k;
    c.data = data[k];
    if (c.data.empty()) {
      throw std::invalid_argument("client " + std::to_string(k) +
                                  " has no data");
    }
    c.local_steps = cfg.local_steps_per_client.empty()
                        ? cfg.local_steps
                        : cfg.local_steps_per_client.at(k);
    c.sample_rate = std::min(1.0, static_cast<double>(cfg.batch_size) /
                                      static_cast<double>(c.n()));
    if (cfg.epsilon) {
      c.clip_norm = cfg.clip_norm;
      if (cfg.sigma) {
        c.sigma = *cfg.sigma;
      } else {
        const std::size_t total = cfg.rounds * c.local_steps;
        auto it = sigma_cache.find(c.sample_rate);
        if (it == sigma_cache.end()) {
          it = sigma_cache
                   .emplace(c.sample_rate,
                            calibrate_sigma(*cfg.epsilon, cfg.delta,
                                            c.sample_rate, std::max<std::size_t>(
                                                               total, 1)))
                   .first;
        }
        c.sigma = it->second;
      }
      c.accountant.emplace(c.sample_rate, c.sigma);
    }
    clients.push_back(std::move(c));
  }
  return clients;
}

inline double spent_epsilon(const ClientHandle& c, double delta) {
  if (!c.accountant || c.accountant->steps() == 0) return 0.0;
  return rdp_to_epsilon(*c.accountant, delta).epsilon;
}

// R rounds of: broadcast -> parallel local training on the sampled clients ->
// aggregation (with refactorization when due). Metrics row 0 evaluates the
// round-0 model. Deterministic in cfg.seed for any thread count.
inline RunResult run_experiment(const FederationConfig& cfg,
                                const Classifier& backbone,
                                const std::vector<Dataset>& client_data,
                                const Dataset& eval,
                                const RoundObserver& observer = {}) {
  validate(backbone);
  if (client_data.empty()) throw std::invalid_argument("run_experiment: no clients");
  if (cfg.participants == 0 || cfg.participants > client_data.size()) {
    throw std::invalid_argument("run_experiment: participants must be in [1, K]");
  }
  if (cfg.epsilon && !(cfg.clip_norm > 0.0 && std::isfinite(cfg.clip_norm))) {
    throw std::invalid_argument("run_experiment: private runs need a finite clip");
  }

  std::vector<ClientHandle> clients = make_clients(cfg, client_data);
  ServerState server = init_server(backbone, cfg.strategy, cfg.seed);
  const bool fedsvd_kind = cfg.strategy.kind == StrategyKind::kFedSvd;
  const CommCost per_client =
      comm_cost_per_client(server.model, cfg.strategy, cfg.client_side_svd);

  RunResult result;
  auto record = [&](std::size_t round, std::size_t participants,
                    double wall_ms) {
    const EvalResult ev = evaluate(server.model, eval.examples);
    RoundMetrics m;
    m.round = round;
    m.eval_accuracy = ev.accuracy;
    m.eval_loss = ev.mean_loss;
    if (cfg.epsilon) {
      double eps = 0.0;
      for (const ClientHandle& c : clients)
        eps = std::max(eps, spent_epsilon(c, cfg.delta));
      m.epsilon_spent = eps;
    }
    m.uploaded_params = participants * per_client.upload;
    m.downloaded_params = participants * per_client.download;
    m.wall_ms = cfg.record_wall_time ? wall_ms : 0.0;
    result.rounds.push_back(m);
  };
  record(0, 0, 0.0);

  AggregateReport last;
  for (std::size_t i = 0; i < cfg.rounds; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng sampler = make_rng(cfg.seed, Stream::kClientSampling, {i});
    const std::vector<std::size_t> chosen =
        sample_clients(clients.size(), cfg.participants, sampler);
    const Classifier broadcast = server.model;

    std::vector<ClientUpdate> updates(chosen.size());
    std::vector<std::size_t> replica_checks(chosen.size(), 0);
    detail::parallel_for(chosen.size(), cfg.threads, [&](std::size_t j) {
      ClientHandle& c = clients[chosen[j]];
      if (cfg.client_side_svd && fedsvd_kind && last.reparameterized) {
        // The client holds the previous a and receives only the aggregated
        // b; it rebuilds the refactored pair itself.
        for (std::size_t l = 0; l < broadcast.layers.size(); ++l) {
          const AdapterPair& in = last.reparam_inputs[l];
          const AdapterPair mine = fedsvd_reparam(in.b, in.a);
          if (!detail::bitwise_equal(mine.a, broadcast.layers[l].a) ||
              !detail::bitwise_equal(mine.b, broadcast.layers[l].b)) {
            throw InvariantViolation("client " + std::to_string(c.id) +
                                     " rebuilt different adapters for layer " +
                                     std::to_string(l));
          }
          ++replica_checks[j];
        }
      }
      Rng rng = make_rng(cfg.seed, Stream::kClientTraining, {c.id, i});
      updates[j] = local_train(c, broadcast, cfg.lr, c.local_steps, rng);
    });
    for (std::size_t n : replica_checks) result.diagnostics.replica_checks += n;

    for (const ClientUpdate& u : updates) {
      for (std::size_t l = 0; l < broadcast.layers.size(); ++l) {
        if (!broadcast.layers[l].a_frozen) continue;
        if (!detail::bitwise_equal(u.layers[l].a, broadcast.layers[l].a)) {
          throw InvariantViolation("client " + std::to_string(u.client_id) +
                                   " modified a frozen A in layer " +
                                   std::to_string(l));
        }
        ++result.diagnostics.frozen_a_checks;
      }
    }

    const Vector weights = aggregation_weights(updates);
    Rng reinit = make_rng(cfg.seed, Stream::kAdapterReinit, {i});
    last = aggregate(server, updates, weights, reinit);
    if (last.reparameterized) {
      ++result.diagnostics.reparameterizations;
      result.diagnostics.max_recovery_error = std::max(
          result.diagnostics.max_recovery_error, last.max_recovery_error);
      if (last.max_recovery_error > kRecoveryTol) {
        throw InvariantViolation(
            "refactorization changed the adapted weight by " +
            std::to_string(last.max_recovery_error) + " (relative)");
      }
    }
    if (observer) observer({i, broadcast, chosen, updates, server});
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    record(i + 1, chosen.size(), ms);
  }

  for (const ClientHandle& c : clients) {
    ClientSummary s;
    s.id = c.id;
    s.n = c.n();
    s.sample_rate = c.sample_rate;
    s.sigma = c.sigma;
    s.steps = c.accountant ? c.accountant->steps() : 0;
    if (c.accountant && c.accountant->steps() > 0)
      s.epsilon = spent_epsilon(c, cfg.delta);
    result.clients.push_back(s);
  }
  result.final_model = std::move(server.model);
  return result;
}

}  // namespace fedsvd

#endif  // FEDSVD_FEDERATION_HPP_
