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

// Ensemble orchestration for the CLI: event tables, pair characterization
// and parameter sweeps.
//
// Seeds: a parameter point's seed is hash_values(master, point values), so
// a point gives the same numbers whether it runs alone, inside a sweep, or
// in a permuted sweep. Setting s of a point uses child(point_seed, s); the
// bootstrap uses child(point_seed, kBootstrapStream).

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cqed/analysis.hpp"
#include "cqed/config.hpp"
#include "cqed/model.hpp"
#include "cqed/parallel.hpp"
#include "cqed/rng.hpp"
#include "cqed/trajectory.hpp"

namespace cqed {

inline constexpr std::uint64_t kBootstrapStream = 1000;

inline std::uint64_t point_seed(std::uint64_t master, const SystemParams& p) {
  return hash_values(master, {p.kappa, p.gamma, p.delta1, p.delta2, p.pulses.fwhm,
                              p.pulses.delay, p.pulses.amplitude1, p.pulses.amplitude2,
                              p.t_total, p.dt, p.t_max, p.t_max_ceiling});
}

inline PolarizationBasis basis_by_name(const std::string& name) {
  if (name == "circular") return PolarizationBasis::circular();
  if (name == "linear_hv") return PolarizationBasis::linear_hv();
  if (name == "linear_da") return PolarizationBasis::linear_da();
  throw std::invalid_argument("unknown basis '" + name + "'");
}

inline std::vector<AnalyzerSetting> settings_from_bases(const std::vector<std::string>& bases) {
  std::vector<AnalyzerSetting> out;
  for (const std::string& a : bases) {
    for (const std::string& b : bases) out.push_back({basis_by_name(a), basis_by_name(b)});
  }
  return out;
}

/// Event table of one point: circular analyzers, seed child(point_seed, 0).
inline EventTally run_events(const SystemParams& params, std::size_t n_traj, std::uint64_t master,
                             int threads, double threshold) {
  const SettingCounts c =
      accumulate_coincidences(params, AnalyzerSetting{}, n_traj,
                              child_seed(point_seed(master, params), 0), {threads, threshold});
  return c.events;
}

/// Coincidence counts for every setting, plus event classes pooled over all
/// setting ensembles (the event statistics do not depend on the analyzers).
inline CoincidenceCounts run_tomography(const SystemParams& params,
                                        const std::vector<AnalyzerSetting>& settings,
                                        std::size_t n_traj, std::uint64_t master, int threads,
                                        double threshold) {
  const std::uint64_t seed = point_seed(master, params);
  CoincidenceCounts counts;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    counts.settings.push_back(accumulate_coincidences(params, settings[s], n_traj,
                                                      child_seed(seed, s), {threads, threshold}));
  }
  return counts;
}

enum class PointStatus { Ok, InsufficientData, Failed };

inline const char* status_name(PointStatus s) {
  switch (s) {
    case PointStatus::Ok:
      return "ok";
    case PointStatus::InsufficientData:
      return "insufficient_data";
    case PointStatus::Failed:
      return "failed";
  }
  return "failed";
}

struct PointResult {
  SystemParams params;
  EventTally events;
  std::optional<Characterization> pair;
  std::optional<CoincidenceCounts> counts;
  PointStatus status = PointStatus::Ok;
  std::string message;
  std::string method;  // "tomography" or "field"
};

/// kappa = 0: the photons never leave, so the pair state is read off the
/// field. Trajectories are averaged with their pair-subspace weight.
inline Characterization characterize_field(const SystemParams& params, std::size_t n_traj,
                                           std::uint64_t master, int threads) {
  const TrajectoryEngine engine(params);
  const std::uint64_t seed = child_seed(point_seed(master, params), 0);
  // Gamma = 0 makes every trajectory identical.
  const std::size_t n = params.gamma == 0.0 ? 1 : n_traj;
  struct Acc {
    PairDensityMatrix rho = PairDensityMatrix::Zero();
    double weight = 0.0;
  };
  const Acc acc = reduce_ensemble(
      engine, n, seed, threads, Acc{},
      [](Acc& a, std::size_t, const TrajectoryResult& r) {
        const Eigen::Vector4cd amp = pair_amplitudes(r.final_state);
        a.rho += amp * amp.adjoint();
        a.weight += amp.squaredNorm();
      },
      [](Acc& a, const Acc& b) {
        a.rho += b.rho;
        a.weight += b.weight;
      });
  if (acc.weight < 1e-12) {
    throw InsufficientDataError("no weight on the one-photon-per-mode subspace");
  }
  Characterization c;
  c.state.raw = acc.rho / acc.weight;
  c.state.physical = project_physical(c.state.raw);
  c.state.correlations = correlation_tensor(c.state.physical);
  c.value = pair_figures(c.state.physical);
  c.coincidences = 0;
  return c;
}

struct CharacterizeOptions {
  std::size_t trajectories = 10000;
  std::uint64_t master = 1;
  int threads = 1;
  double threshold = kDefaultClassificationThreshold;
  int bootstrap = kDefaultBootstrapSamples;
  std::vector<AnalyzerSetting> settings = tomography_settings();
};

/// Never throws for physics/data problems: they are reported in the status.
inline PointResult characterize_point(const SystemParams& params, const CharacterizeOptions& o) {
  PointResult r;
  r.params = params;
  try {
    if (params.kappa == 0.0) {
      r.method = "field";
      r.events = run_events(params, o.trajectories, o.master, o.threads, o.threshold);
      r.pair = characterize_field(params, o.trajectories, o.master, o.threads);
      return r;
    }
    r.method = "tomography";
    r.counts = run_tomography(params, o.settings, o.trajectories, o.master, o.threads,
                              o.threshold);
    r.events = r.counts->pooled_events();
    r.pair = characterize_counts(*r.counts, o.bootstrap,
                                 child_seed(point_seed(o.master, params), kBootstrapStream));
  } catch (const InsufficientDataError& e) {
    r.status = PointStatus::InsufficientData;
    r.message = e.what();
  } catch (const std::exception& e) {
    r.status = PointStatus::Failed;
    r.message = e.what();
  }
  return r;
}

struct SweepPoint {
  std::vector<std::pair<std::string, double>> coordinates;  // swept and linked values
  SystemParams params;
};

inline std::vector<SweepPoint> sweep_points(const RunConfig& cfg) {
  if (!cfg.sweep_x) throw std::invalid_argument("sweep needs sweep.x");
  auto apply = [](SweepPoint& p, const SweepAxis& axis, double v) {
    set_parameter(p.params, axis.name, v);
    p.coordinates.emplace_back(axis.name, v);
    for (const auto& [name, factor] : axis.links) {
      set_parameter(p.params, name, factor * v);
      p.coordinates.emplace_back(name, factor * v);
    }
  };
  std::vector<SweepPoint> points;
  const std::vector<double> ys = cfg.sweep_y ? cfg.sweep_y->values : std::vector<double>{0.0};
  for (double y : ys) {
    for (double x : cfg.sweep_x->values) {
      SweepPoint p{{}, cfg.params};
      apply(p, *cfg.sweep_x, x);
      if (cfg.sweep_y) apply(p, *cfg.sweep_y, y);
      points.push_back(std::move(p));
    }
  }
  return points;
}

/// Points run concurrently; with fewer points than threads the remaining
/// threads go to the trajectories of each point. Rows come back in point
/// order and do not depend on the thread split.
inline std::vector<PointResult> run_sweep(const std::vector<SweepPoint>& points,
                                          CharacterizeOptions o) {
  std::vector<PointResult> rows(points.size());
  const int outer = std::max(1, std::min<int>(o.threads, static_cast<int>(points.size())));
  o.threads = std::max(1, o.threads / outer);
  parallel_reduce(
      points.size(), outer, 0,
      [&](int&, std::size_t i) {
        try {
          points[i].params.validate();
          rows[i] = characterize_point(points[i].params, o);
        } catch (const std::exception& e) {
          rows[i].params = points[i].params;
          rows[i].status = PointStatus::Failed;
          rows[i].message = e.what();
        }
      },
      [](int&, const int&) {}, 1);
  return rows;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_events_csv(std::ostream& out, const EventTally& tally) {
  out << "event_class,probability,stderr\n";
  for (const EventProbability& e : event_probabilities(tally)) {
    out << event_class_name(e.event) << ',' << fmt(e.probability) << ',' << fmt(e.stderr_)
        << '\n';
  }
}

inline constexpr const char* kCharacterizeHeader = "F,F_err,S_fixed,S_err,S_max,n_coinc";

inline void write_characterize_row(std::ostream& out, const Characterization& c) {
  out << fmt(c.value.fidelity) << ',' << fmt(c.error.fidelity) << ',' << fmt(c.value.s_fixed)
      << ',' << fmt(c.error.s_fixed) << ',' << fmt(c.value.s_max) << ',' << c.coincidences;
}

inline void write_characterize_csv(std::ostream& out, const Characterization& c) {
  out << kCharacterizeHeader << '\n';
  write_characterize_row(out, c);
  out << '\n';
}

/// One row per point: coordinates, event probabilities, characterize
/// columns, status.
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points,
                            const std::vector<PointResult>& rows) {
  if (points.empty()) return;
  for (const auto& [name, v] : points.front().coordinates) out << name << ',';
  out << "P_i,P_ii,P_iii,P_iv,P_incomplete," << kCharacterizeHeader << ",status,message\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [name, v] : points[i].coordinates) out << fmt(v) << ',';
    const PointResult& r = rows[i];
    if (r.events.total() > 0) {
      for (const EventProbability& e : event_probabilities(r.events)) {
        out << fmt(e.probability) << ',';
      }
    } else {
      out << ",,,,,";
    }
    if (r.pair) {
      write_characterize_row(out, *r.pair);
    } else {
      out << ",,,,,";
    }
    std::string message = r.message;
    std::replace(message.begin(), message.end(), ',', ';');
    std::replace(message.begin(), message.end(), '\n', ' ');
    out << ',' << status_name(r.status) << ',' << message << '\n';
  }
}

}  // namespace cqed
