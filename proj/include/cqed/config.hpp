// Copyright 2026 The cqed-pairs Authors
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

#pragma once

// Run configuration: a flat `key = value` text file, one entry per line,
// `#` starts a comment. Physical values are in units of g and 1/g.
//
//   kappa, gamma, delta1, delta2      rates and detunings
//   fwhm, delay, amplitude1, amplitude2
//   t_total, dt, t_max, t_max_ceiling
//   trajectories, seed, threshold, bootstrap
//   bases             comma list out of circular, linear_hv, linear_da; the
//                     tomography settings are all (arm1, arm2) pairs
//   oracle.times      comma list of snapshot times
//   sweep.x, sweep.y  parameter names (SystemParams or pulse fields)
//   sweep.x.values    comma list, or start:step:stop
//   sweep.x.link      name:factor[, ...]; linked = factor * swept value
//   out               output directory

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cqed/model.hpp"

namespace cqed {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepAxis {
  std::string name;
  std::vector<double> values;
  std::vector<std::pair<std::string, double>> links;  // (parameter, factor)
};

struct RunConfig {
  SystemParams params;
  std::size_t trajectories = 10000;
  std::uint64_t seed = 1;
  double threshold = 0.5;
  int bootstrap = 200;
  std::vector<std::string> bases = {"circular", "linear_hv", "linear_da"};
  std::vector<double> oracle_times = {25.0, 50.0, 75.0, 100.0};
  std::optional<SweepAxis> sweep_x;
  std::optional<SweepAxis> sweep_y;
  std::string out = ".";
};

inline const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> names = {
      "kappa", "gamma", "delta1",     "delta2",     "t_total", "dt",
      "t_max", "fwhm",  "delay",      "amplitude1", "amplitude2"};
  return names;
}

/// Sets a SystemParams or PulsePair field by name.
inline void set_parameter(SystemParams& p, std::string_view name, double value) {
  if (name == "kappa") p.kappa = value;
  else if (name == "gamma") p.gamma = value;
  else if (name == "delta1") p.delta1 = value;
  else if (name == "delta2") p.delta2 = value;
  else if (name == "t_total") p.t_total = value;
  else if (name == "dt") p.dt = value;
  else if (name == "t_max") p.t_max = value;
  else if (name == "t_max_ceiling") p.t_max_ceiling = value;
  else if (name == "fwhm") p.pulses.fwhm = value;
  else if (name == "delay") p.pulses.delay = value;
  else if (name == "amplitude1") p.pulses.amplitude1 = value;
  else if (name == "amplitude2") p.pulses.amplitude2 = value;
  else throw std::invalid_argument("unknown parameter '" + std::string(name) + "'");
}

inline double get_parameter(const SystemParams& p, std::string_view name) {
  if (name == "kappa") return p.kappa;
  if (name == "gamma") return p.gamma;
  if (name == "delta1") return p.delta1;
  if (name == "delta2") return p.delta2;
  if (name == "t_total") return p.t_total;
  if (name == "dt") return p.dt;
  if (name == "t_max") return p.t_max;
  if (name == "t_max_ceiling") return p.t_max_ceiling;
  if (name == "fwhm") return p.pulses.fwhm;
  if (name == "delay") return p.pulses.delay;
  if (name == "amplitude1") return p.pulses.amplitude1;
  if (name == "amplitude2") return p.pulses.amplitude2;
  throw std::invalid_argument("unknown parameter '" + std::string(name) + "'");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return value;
}

}  // namespace detail

/// Comma list, or start:step:stop (inclusive, tolerant to rounding).
inline std::vector<double> parse_values(std::string_view text) {
  const std::string s = detail::trim(text);
  if (s.find(':') != std::string::npos && s.find(',') == std::string::npos) {
    const auto parts = detail::split(s, ':');
    if (parts.size() != 3) throw std::invalid_argument("range must be start:step:stop");
    const auto a = detail::parse_number<double>(parts[0]);
    const auto h = detail::parse_number<double>(parts[1]);
    const auto b = detail::parse_number<double>(parts[2]);
    if (!a || !h || !b || *h <= 0.0 || *b < *a) {
      throw std::invalid_argument("bad range '" + s + "'");
    }
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((*b - *a) / *h + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(*a + static_cast<double>(i) * *h);
    return out;
  }
  std::vector<double> out;
  for (const std::string& item : detail::split(s, ',')) {
    const auto v = detail::parse_number<double>(item);
    if (!v) throw std::invalid_argument("'" + item + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

/// Parses config text; errors carry the source name, line and key.
inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  RunConfig cfg;
  std::map<std::string, int> seen;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& key, const std::string& what) -> ConfigError {
    return ConfigError(source + (line_no > 0 ? ":" + std::to_string(line_no) : "") + ": " +
                       (key.empty() ? "" : "field '" + key + "': ") + what);
  };
  auto axis = [&](std::optional<SweepAxis>& a) -> SweepAxis& {
    if (!a) a.emplace();
    return *a;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw fail("", "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw fail("", "missing key");
    if (value.empty()) throw fail(key, "missing value");
    if (const auto it = seen.find(key); it != seen.end()) {
      throw fail(key, "duplicate key (first set on line " + std::to_string(it->second) + ")");
    }
    seen[key] = line_no;

    auto number = [&]() {
      const auto v = detail::parse_number<double>(value);
      if (!v || !std::isfinite(*v)) throw fail(key, "'" + value + "' is not a number");
      return *v;
    };
    auto integer = [&]() {
      const auto v = detail::parse_number<std::uint64_t>(value);
      if (!v) throw fail(key, "'" + value + "' is not a non-negative integer");
      return *v;
    };
    auto values = [&]() {
      try {
        std::vector<double> v = parse_values(value);
        if (v.empty()) throw fail(key, "empty value list");
        return v;
      } catch (const std::invalid_argument& e) {
        throw fail(key, e.what());
      }
    };
    auto parameter_name = [&](const std::string& name) {
      for (const std::string& n : sweepable_parameters()) {
        if (n == name) return name;
      }
      throw fail(key, "'" + name + "' is not a SystemParams or pulse field");
    };
    auto links = [&]() {
      std::vector<std::pair<std::string, double>> out;
      for (const std::string& item : detail::split(value, ',')) {
        const auto parts = detail::split(item, ':');
        const auto f = parts.size() == 2 ? detail::parse_number<double>(parts[1]) : std::nullopt;
        if (!f) throw fail(key, "link must be name:factor, got '" + item + "'");
        out.emplace_back(parameter_name(parts[0]), *f);
      }
      return out;
    };

    if (key == "trajectories") {
      cfg.trajectories = static_cast<std::size_t>(integer());
      if (cfg.trajectories == 0) throw fail(key, "must be >= 1");
    } else if (key == "seed") {
      cfg.seed = integer();
    } else if (key == "threshold") {
      cfg.threshold = number();
      if (cfg.threshold < 0.0 || cfg.threshold > 1.0) throw fail(key, "must lie in [0, 1]");
    } else if (key == "bootstrap") {
      cfg.bootstrap = static_cast<int>(integer());
    } else if (key == "bases") {
      cfg.bases = detail::split(value, ',');
      for (const std::string& b : cfg.bases) {
        if (b != "circular" && b != "linear_hv" && b != "linear_da") {
          throw fail(key, "unknown basis '" + b + "'");
        }
      }
    } else if (key == "oracle.times") {
      cfg.oracle_times = values();
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "sweep.x" || key == "sweep.y") {
      axis(key == "sweep.x" ? cfg.sweep_x : cfg.sweep_y).name = parameter_name(value);
    } else if (key == "sweep.x.values" || key == "sweep.y.values") {
      axis(key[6] == 'x' ? cfg.sweep_x : cfg.sweep_y).values = values();
    } else if (key == "sweep.x.link" || key == "sweep.y.link") {
      axis(key[6] == 'x' ? cfg.sweep_x : cfg.sweep_y).links = links();
    } else {
      try {
        set_parameter(cfg.params, key, number());
      } catch (const std::invalid_argument&) {
        throw fail(key, "unknown key");
      }
    }
  }

  line_no = 0;
  for (auto* a : {&cfg.sweep_x, &cfg.sweep_y}) {
    if (!*a) continue;
    const std::string which = a == &cfg.sweep_x ? "sweep.x" : "sweep.y";
    if ((*a)->name.empty()) throw fail(which, "values given without a parameter name");
    if ((*a)->values.empty()) throw fail(which + ".values", "missing value list");
  }
  if (cfg.sweep_y && !cfg.sweep_x) throw fail("sweep.y", "sweep.y needs sweep.x");
  try {
    cfg.params.validate();
  } catch (const std::invalid_argument& e) {
    throw fail("", e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  return parse_config(in, path);
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace cqed
