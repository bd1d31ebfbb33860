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

#ifndef FEDSVD_CONFIG_HPP_
#define FEDSVD_CONFIG_HPP_

// Experiment manifests: INI-style `key = value` sections, every key also
// settable as `section.key=value` from the command line.
//
//   [federation]
//   strategy = fedsvd
//   period = 1
//   clients = 6
//   ...

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedsvd/data.hpp"
#include "fedsvd/federation.hpp"

namespace fedsvd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // [federation]
  Strategy strategy{StrategyKind::kFedSvd, 1};
  std::size_t clients = 6;
  std::size_t participants = 3;
  std::size_t rounds = 100;
  std::size_t local_steps = 10;
  std::vector<std::size_t> local_steps_per_client;  // empty: uniform
  double lr = 0.5;
  std::size_t batch_size = 32;
  double dirichlet_alpha = 0.5;
  bool client_side_svd = true;

  // [lora]
  std::size_t rank = 8;
  double alpha = 8.0;

  // [privacy]
  std::optional<double> epsilon = 6.0;  // unset: non-private
  double delta = 1e-5;
  double clip_norm = 2.0;
  std::optional<double> sigma;  // explicit noise multiplier

  // [model]
  std::vector<std::size_t> hidden;  // empty: linear classifier
  std::size_t pretrain_steps = 300;
  double pretrain_lr = 0.5;

  // [data]
  std::string source = "synthetic";  // or a CSV path
  std::size_t classes = 3;
  std::size_t features = 64;
  std::size_t samples = 6000;
  std::size_t pretrain_samples = 0;
  std::size_t eval_samples = 0;
  double margin = 3.0;
  double shift_angle = 1.0;
  std::size_t latent_dim = 0;
  double noise_std = 0.0;
  double csv_pretrain_fraction = 0.25;  // CSV source only
  double csv_eval_fraction = 0.2;

  // [run]
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t threads = 1;
  std::string output = "metrics.csv";
  bool record_wall_time = false;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw ConfigError(key + ": cannot parse \"" + std::string(text) + "\"");
  }
  return v;
}

inline bool parse_bool(const std::string& key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got \"" +
                    std::string(text) + "\"");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, std::string_view text) {
  std::vector<T> out;
  for (std::string_view item : split_commas(text)) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number<T>(key, item));
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

// Applies one `section.key` assignment.
inline void assign(RunConfig& c, const std::string& key,
                   const std::string& raw) {
  const std::string value(trim(raw));
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };
  auto optional_real = [&]() -> std::optional<double> {
    if (value.empty() || value == "none") return std::nullopt;
    return real();
  };

  if (key == "federation.strategy") {
    try {
      c.strategy = Strategy::parse(value, c.strategy.period);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  } else if (key == "federation.period") {
    c.strategy.period = size();
  } else if (key == "federation.clients") {
    c.clients = size();
  } else if (key == "federation.participants") {
    c.participants = size();
  } else if (key == "federation.rounds") {
    c.rounds = size();
  } else if (key == "federation.local_steps") {
    c.local_steps = size();
  } else if (key == "federation.local_steps_per_client") {
    c.local_steps_per_client = parse_list<std::size_t>(key, value);
  } else if (key == "federation.lr") {
    c.lr = real();
  } else if (key == "federation.batch_size") {
    c.batch_size = size();
  } else if (key == "federation.dirichlet_alpha") {
    c.dirichlet_alpha = real();
  } else if (key == "federation.client_side_svd") {
    c.client_side_svd = parse_bool(key, value);
  } else if (key == "lora.rank") {
    c.rank = size();
  } else if (key == "lora.alpha") {
    c.alpha = real();
  } else if (key == "privacy.epsilon") {
    c.epsilon = optional_real();
  } else if (key == "privacy.delta") {
    c.delta = real();
  } else if (key == "privacy.clip") {
    c.clip_norm = real();
  } else if (key == "privacy.sigma") {
    c.sigma = optional_real();
  } else if (key == "model.hidden") {
    c.hidden = parse_list<std::size_t>(key, value);
  } else if (key == "model.pretrain_steps") {
    c.pretrain_steps = size();
  } else if (key == "model.pretrain_lr") {
    c.pretrain_lr = real();
  } else if (key == "data.source") {
    c.source = value;
  } else if (key == "data.classes") {
    c.classes = size();
  } else if (key == "data.features") {
    c.features = size();
  } else if (key == "data.samples") {
    c.samples = size();
  } else if (key == "data.pretrain_samples") {
    c.pretrain_samples = size();
  } else if (key == "data.eval_samples") {
    c.eval_samples = size();
  } else if (key == "data.margin") {
    c.margin = real();
  } else if (key == "data.shift_angle") {
    c.shift_angle = real();
  } else if (key == "data.latent_dim") {
    c.latent_dim = size();
  } else if (key == "data.noise_std") {
    c.noise_std = real();
  } else if (key == "data.csv_pretrain_fraction") {
    c.csv_pretrain_fraction = real();
  } else if (key == "data.csv_eval_fraction") {
    c.csv_eval_fraction = real();
  } else if (key == "run.seeds") {
    c.seeds = parse_list<std::uint64_t>(key, value);
  } else if (key == "run.threads") {
    c.threads = size();
  } else if (key == "run.output") {
    c.output = value;
  } else if (key == "run.record_wall_time") {
    c.record_wall_time = parse_bool(key, value);
  } else {
    throw ConfigError(key + ": unknown key");
  }
}

}  // namespace detail

// Throws ConfigError naming the first offending field.
inline void validate(const RunConfig& c) {
  auto need = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(std::string(field) + ": " + what);
  };
  need(c.strategy.period >= 1, "federation.period", "must be >= 1");
  need(c.clients >= 1, "federation.clients", "must be >= 1");
  need(c.participants >= 1, "federation.participants", "must be >= 1");
  need(c.participants <= c.clients, "federation.participants",
       "must not exceed federation.clients");
  need(c.rounds >= 1, "federation.rounds", "must be >= 1");
  need(c.local_steps >= 1, "federation.local_steps", "must be >= 1");
  need(c.local_steps_per_client.empty() ||
           c.local_steps_per_client.size() == c.clients,
       "federation.local_steps_per_client", "needs one entry per client");
  need(c.lr > 0.0 && std::isfinite(c.lr), "federation.lr", "must be > 0");
  need(c.batch_size >= 1, "federation.batch_size", "must be >= 1");
  need(c.dirichlet_alpha > 0.0, "federation.dirichlet_alpha", "must be > 0");
  need(c.rank >= 1, "lora.rank", "must be >= 1");
  need(c.alpha > 0.0, "lora.alpha", "must be > 0");
  if (c.epsilon) {
    need(*c.epsilon > 0.0, "privacy.epsilon", "must be > 0");
    need(c.delta > 0.0 && c.delta < 1.0, "privacy.delta", "must be in (0, 1)");
    need(c.clip_norm > 0.0 && std::isfinite(c.clip_norm), "privacy.clip",
         "must be > 0");
  }
  if (c.sigma) need(*c.sigma >= 0.0, "privacy.sigma", "must be >= 0");
  for (std::size_t h : c.hidden)
    need(h >= 1, "model.hidden", "widths must be >= 1");
  need(c.pretrain_lr > 0.0, "model.pretrain_lr", "must be > 0");
  need(!c.source.empty(), "data.source", "must be set");
  if (c.source == "synthetic") {
    need(c.classes >= 2, "data.classes", "must be >= 2");
    need(c.features >= c.classes, "data.features", "must be >= data.classes");
    need(c.samples >= c.clients, "data.samples",
         "must be >= federation.clients");
    need(c.margin > 0.0, "data.margin", "must be > 0");
    need(c.latent_dim == 0 ||
             (c.latent_dim >= c.classes && c.latent_dim <= c.features),
         "data.latent_dim", "must be 0 or in [data.classes, data.features]");
    need(c.noise_std >= 0.0, "data.noise_std", "must be >= 0");
  } else {
    need(c.csv_pretrain_fraction >= 0.0 && c.csv_eval_fraction > 0.0 &&
             c.csv_pretrain_fraction + c.csv_eval_fraction < 1.0,
         "data.csv_eval_fraction",
         "fractions must be >= 0 with eval > 0 and a nonempty remainder");
  }
  need(!c.seeds.empty(), "run.seeds", "needs at least one seed");
  need(c.threads >= 1, "run.threads", "must be >= 1");
}

// Applies `section.key=value` overrides in order.
inline void apply_overrides(RunConfig& c,
                            const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override \"" + o + "\": expected section.key=value");
    }
    detail::assign(c, std::string(detail::trim(o.substr(0, eq))),
                   o.substr(eq + 1));
  }
}

inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " +
                      e.message());
  }
  RunConfig c;
  // Strategy names reset the period, so apply the period last.
  std::optional<std::string> period;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section + ": keys must live in a [section]");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (full == "federation.period") {
        period = value.data();
        continue;
      }
      detail::assign(c, full, value.data());
    }
  }
  if (period) detail::assign(c, "federation.period", *period);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  return parse_config(in);
}

inline std::string dump_config(const RunConfig& c) {
  using detail::format_double;
  using detail::join;
  std::ostringstream o;
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("none");
  };
  o << "[federation]\n"
    << "strategy = " << kind_name(c.strategy.kind) << "\n"
    << "period = " << c.strategy.period << "\n"
    << "clients = " << c.clients << "\n"
    << "participants = " << c.participants << "\n"
    << "rounds = " << c.rounds << "\n"
    << "local_steps = " << c.local_steps << "\n"
    << "local_steps_per_client = " << join(c.local_steps_per_client) << "\n"
    << "lr = " << format_double(c.lr) << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "dirichlet_alpha = " << format_double(c.dirichlet_alpha) << "\n"
    << "client_side_svd = " << (c.client_side_svd ? "true" : "false") << "\n"
    << "\n[lora]\n"
    << "rank = " << c.rank << "\n"
    << "alpha = " << format_double(c.alpha) << "\n"
    << "\n[privacy]\n"
    << "epsilon = " << opt(c.epsilon) << "\n"
    << "delta = " << format_double(c.delta) << "\n"
    << "clip = " << format_double(c.clip_norm) << "\n"
    << "sigma = " << opt(c.sigma) << "\n"
    << "\n[model]\n"
    << "hidden = " << join(c.hidden) << "\n"
    << "pretrain_steps = " << c.pretrain_steps << "\n"
    << "pretrain_lr = " << format_double(c.pretrain_lr) << "\n"
    << "\n[data]\n"
    << "source = " << c.source << "\n"
    << "classes = " << c.classes << "\n"
    << "features = " << c.features << "\n"
    << "samples = " << c.samples << "\n"
    << "pretrain_samples = " << c.pretrain_samples << "\n"
    << "eval_samples = " << c.eval_samples << "\n"
    << "margin = " << format_double(c.margin) << "\n"
    << "shift_angle = " << format_double(c.shift_angle) << "\n"
    << "latent_dim = " << c.latent_dim << "\n"
    << "noise_std = " << format_double(c.noise_std) << "\n"
    << "csv_pretrain_fraction = " << format_double(c.csv_pretrain_fraction)
    << "\n"
    << "csv_eval_fraction = " << format_double(c.csv_eval_fraction) << "\n"
    << "\n[run]\n"
    << "seeds = " << join(c.seeds) << "\n"
    << "threads = " << c.threads << "\n"
    << "output = " << c.output << "\n"
    << "record_wall_time = " << (c.record_wall_time ? "true" : "false")
    << "\n";
  return o.str();
}

}  // namespace fedsvd

#endif  // FEDSVD_CONFIG_HPP_
