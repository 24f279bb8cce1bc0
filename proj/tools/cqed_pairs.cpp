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

// cqed_pairs: validate | events | characterize | sweep | oracle
//
// Exit codes: 0 success, 1 validation failure, 2 config error,
// 3 insufficient data.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cqed/analysis.hpp"
#include "cqed/config.hpp"
#include "cqed/experiment.hpp"
#include "cqed/lindblad.hpp"
#include "cqed/svg.hpp"
#include "cqed/trajectory.hpp"
#include "cqed/validate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInsufficient = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  int threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::string> out;
};

void add_common(CLI::App& cmd, CommonFlags& f, bool needs_config) {
  auto* c = cmd.add_option("--config", f.config, "run configuration file");
  if (needs_config) c->required();
  cmd.add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd.add_option("--trajectories", f.trajectories, "trajectories per ensemble")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--threads", f.threads, "worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--out", f.out, "output directory (overrides the config)");
}

cqed::RunConfig resolve(const CommonFlags& f) {
  cqed::RunConfig cfg = f.config.empty() ? cqed::RunConfig{} : cqed::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.trajectories) cfg.trajectories = *f.trajectories;
  if (f.out) cfg.out = *f.out;
  fs::create_directories(cfg.out);
  return cfg;
}

std::ofstream open_out(const cqed::RunConfig& cfg, const std::string& name) {
  std::ofstream out(fs::path(cfg.out) / name);
  if (!out) throw std::runtime_error("cannot write " + (fs::path(cfg.out) / name).string());
  return out;
}

json params_json(const cqed::SystemParams& p) {
  json j;
  for (const std::string& name : cqed::sweepable_parameters()) j[name] = cqed::get_parameter(p, name);
  j["t_max_ceiling"] = p.t_max_ceiling;
  return j;
}

json events_json(const cqed::EventTally& t) {
  json j = json::object();
  for (cqed::EventClass c : cqed::kAllEventClasses) {
    j[cqed::event_class_name(c)] = t.counts[static_cast<std::size_t>(c)];
  }
  return j;
}

json counts_json(const cqed::RunConfig& cfg, const cqed::SystemParams& params,
                 const cqed::CoincidenceCounts& counts) {
  json j;
  j["params"] = params_json(params);
  j["trajectories_per_setting"] = cfg.trajectories;
  j["seed"] = cfg.seed;
  j["settings"] = json::array();
  for (const cqed::SettingCounts& s : counts.settings) {
    j["settings"].push_back({{"arm1", s.setting.arm1.name},
                             {"arm2", s.setting.arm2.name},
                             {"u1u2", s.outcomes[cqed::kUU]},
                             {"u1v2", s.outcomes[cqed::kUV]},
                             {"v1u2", s.outcomes[cqed::kVU]},
                             {"v1v2", s.outcomes[cqed::kVV]},
                             {"coincidences", s.coincidences()},
                             {"runs", s.runs},
                             {"events", events_json(s.events)}});
  }
  return j;
}

void plot_events(const cqed::RunConfig& cfg, const cqed::EventTally& tally,
                 const std::string& title) {
  std::vector<std::string> labels = {"(i)", "(ii)", "(iii)", "(iv)", "incomplete"};
  std::vector<double> p, e;
  for (const cqed::EventProbability& ev : cqed::event_probabilities(tally)) {
    p.push_back(ev.probability);
    e.push_back(ev.stderr_);
  }
  std::ofstream svg = open_out(cfg, "events.svg");
  cqed::svg::bar_chart(svg, title, labels, p, e);
}

// --- validate -------------------------------------------------------------

int cmd_validate(const CommonFlags& f, const std::string& mutate) {
  cqed::ValidationOptions opt;
  if (mutate == "delta2-sign") {
    opt.hamiltonian = cqed::hamiltonian_delta2_sign_flipped;
  } else if (!mutate.empty()) {
    std::cerr << "error: unknown mutation '" << mutate << "'\n";
    return kExitConfig;
  }
  if (f.seed) opt.seed = *f.seed;
  const auto checks = cqed::run_validation(opt);
  for (const cqed::CheckResult& c : checks) {
    std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << cqed::fmt(c.value)
              << " (tolerance " << cqed::fmt(c.tolerance) << ") " << c.detail << '\n';
  }
  if (f.out) {
    fs::create_directories(*f.out);
    std::ofstream csv(fs::path(*f.out) / "validate.csv");
    cqed::write_validation_csv(csv, checks);
  }
  const bool ok = cqed::all_passed(checks);
  std::cout << (ok ? "all checks passed\n" : "validation FAILED\n");
  return ok ? kExitOk : kExitValidation;
}

// --- events ---------------------------------------------------------------

int cmd_events(const CommonFlags& f, bool jumps) {
  const cqed::RunConfig cfg = resolve(f);
  const cqed::TrajectoryEngine engine(cfg.params);
  const std::uint64_t seed = cqed::child_seed(cqed::point_seed(cfg.seed, cfg.params), 0);
  struct Acc {
    cqed::EventTally tally;
    std::string records;
  };
  const auto& channels = engine.channels();
  const Acc acc = cqed::reduce_ensemble(
      engine, cfg.trajectories, seed, f.threads, Acc{},
      [&](Acc& a, std::size_t i, const cqed::TrajectoryResult& r) {
        a.tally.add(cqed::classify(r, channels, cfg.threshold));
        if (jumps) {
          std::ostringstream line;
          cqed::write_jump_records(line, i, r, channels);
          a.records += line.str();
        }
      },
      [](Acc& a, const Acc& b) {
        a.tally.merge(b.tally);
        a.records += b.records;
      });

  std::ofstream csv = open_out(cfg, "events.csv");
  cqed::write_events_csv(csv, acc.tally);
  if (jumps) {
    std::ofstream j = open_out(cfg, "jumps.csv");
    j << cqed::kJumpCsvHeader << '\n' << acc.records;
  }
  plot_events(cfg, acc.tally,
              "event classes, kappa=" + cqed::fmt(cfg.params.kappa) +
                  " gamma=" + cqed::fmt(cfg.params.gamma) +
                  " gt=" + cqed::fmt(cfg.params.t_total));
  cqed::write_events_csv(std::cout, acc.tally);
  return kExitOk;
}

// --- characterize ---------------------------------------------------------

cqed::CharacterizeOptions characterize_options(const cqed::RunConfig& cfg, int threads) {
  cqed::CharacterizeOptions o;
  o.trajectories = cfg.trajectories;
  o.master = cfg.seed;
  o.threads = threads;
  o.threshold = cfg.threshold;
  o.bootstrap = cfg.bootstrap;
  o.settings = cqed::settings_from_bases(cfg.bases);
  return o;
}

int cmd_characterize(const CommonFlags& f) {
  const cqed::RunConfig cfg = resolve(f);
  const cqed::PointResult r =
      cqed::characterize_point(cfg.params, characterize_options(cfg, f.threads));
  if (r.counts) {
    std::ofstream j = open_out(cfg, "counts.json");
    j << counts_json(cfg, cfg.params, *r.counts).dump(2) << '\n';
  }
  if (r.events.total() > 0) {
    std::ofstream ev = open_out(cfg, "events.csv");
    cqed::write_events_csv(ev, r.events);
  }
  if (r.status == cqed::PointStatus::InsufficientData) {
    std::cerr << "error: insufficient data: " << r.message
              << "; tomography needs at least 1 clean coincidence in every analyzer setting,"
              << " raise --trajectories\n";
    return kExitInsufficient;
  }
  if (r.status != cqed::PointStatus::Ok) {
    std::cerr << "error: " << r.message << '\n';
    return kExitValidation;
  }
  std::ofstream csv = open_out(cfg, "characterize.csv");
  cqed::write_characterize_csv(csv, *r.pair);
  std::ofstream rho = open_out(cfg, "rho.csv");
  cqed::write_rho_csv(rho, r.pair->state.physical);
  {
    std::vector<double> axis = {0, 1, 2, 3};
    std::vector<std::vector<double>> z(4, std::vector<double>(4));
    for (int i = 0; i < 4; ++i) {
      for (int k = 0; k < 4; ++k) z[i][k] = r.pair->state.physical(i, k).real();
    }
    std::ofstream svg = open_out(cfg, "rho.svg");
    cqed::svg::heat_map(svg, "Re rho (pair qubits ++, +-, -+, --)", "column", "row", axis, axis,
                        z);
  }
  std::cout << "method " << r.method << '\n';
  cqed::write_characterize_csv(std::cout, *r.pair);
  return kExitOk;
}

// --- sweep ----------------------------------------------------------------

void plot_sweep(const cqed::RunConfig& cfg, const std::vector<cqed::SweepPoint>& points,
                const std::vector<cqed::PointResult>& rows) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto value = [&](const cqed::PointResult& r, int which) {
    if (!r.pair) return nan;
    return which == 0 ? r.pair->value.fidelity : r.pair->value.s_fixed;
  };
  auto error = [&](const cqed::PointResult& r, int which) {
    if (!r.pair) return 0.0;
    return which == 0 ? r.pair->error.fidelity : r.pair->error.s_fixed;
  };
  const std::string xname = cfg.sweep_x->name;
  if (!cfg.sweep_y) {
    for (int which : {0, 1}) {
      cqed::svg::Series s{which == 0 ? "F" : "S_fixed", {}, {}, {}};
      for (std::size_t i = 0; i < rows.size(); ++i) {
        s.x.push_back(cqed::get_parameter(points[i].params, xname));
        s.y.push_back(value(rows[i], which));
        s.err.push_back(error(rows[i], which));
      }
      std::ofstream svg = open_out(cfg, which == 0 ? "sweep_F.svg" : "sweep_S.svg");
      cqed::svg::line_plot(svg, s.name + " vs " + xname, xname, s.name, {s});
    }
    return;
  }
  const auto& xs = cfg.sweep_x->values;
  const auto& ys = cfg.sweep_y->values;
  for (int which : {0, 1}) {
    std::vector<std::vector<double>> z(ys.size(), std::vector<double>(xs.size()));
    for (std::size_t iy = 0; iy < ys.size(); ++iy) {
      for (std::size_t ix = 0; ix < xs.size(); ++ix) {
        z[iy][ix] = value(rows[iy * xs.size() + ix], which);
      }
    }
    std::ofstream svg = open_out(cfg, which == 0 ? "sweep_F.svg" : "sweep_S.svg");
    cqed::svg::heat_map(svg, which == 0 ? "F" : "S_fixed", xname, cfg.sweep_y->name, xs, ys, z);
  }
}

int cmd_sweep(const CommonFlags& f) {
  const cqed::RunConfig cfg = resolve(f);
  if (!cfg.sweep_x) {
    std::cerr << "config error: " << f.config << ": field 'sweep.x': sweep needs sweep.x\n";
    return kExitConfig;
  }
  const auto points = cqed::sweep_points(cfg);
  const auto rows = cqed::run_sweep(points, characterize_options(cfg, f.threads));
  std::ofstream csv = open_out(cfg, "sweep.csv");
  cqed::write_sweep_csv(csv, points, rows);
  plot_sweep(cfg, points, rows);
  std::size_t failed = 0;
  for (const cqed::PointResult& r : rows) failed += r.status != cqed::PointStatus::Ok;
  std::cout << rows.size() << " points, " << failed << " without a pair estimate\n";
  return kExitOk;
}

// --- oracle ---------------------------------------------------------------

int cmd_oracle(const CommonFlags& f) {
  const cqed::RunConfig cfg = resolve(f);
  std::vector<double> times = cfg.oracle_times;
  std::sort(times.begin(), times.end());
  const auto snaps = cqed::LindbladSolver(cfg.params).evolve(times);
  std::ofstream csv = open_out(cfg, "oracle.csv");
  csv << cqed::kOracleCsvHeader << '\n';
  std::vector<cqed::svg::Series> series = {{"I", {}, {}, {}},  {"B", {}, {}, {}},
                                           {"D", {}, {}, {}},  {"E+", {}, {}, {}},
                                           {"E-", {}, {}, {}}, {"<N>", {}, {}, {}}};
  for (const auto& [t, rho] : snaps) {
    const cqed::ManifoldSnapshot s = cqed::manifold_snapshot(t, rho);
    cqed::write_oracle_row(csv, s);
    cqed::write_oracle_row(std::cout, s);
    for (std::size_t k = 0; k < 5; ++k) {
      series[k].x.push_back(t);
      series[k].y.push_back(s.populations[k]);
    }
    series[5].x.push_back(t);
    series[5].y.push_back(s.excitation);
  }
  std::ofstream svg = open_out(cfg, "oracle.svg");
  cqed::svg::line_plot(svg, "master-equation populations", "gt", "population", series);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity-QED entangled photon pair source: trajectories, tomography, sweeps"};
  app.require_subcommand(1);

  CommonFlags validate_flags, events_flags, characterize_flags, sweep_flags, oracle_flags;
  std::string mutate;
  bool jumps = false;

  auto* validate = app.add_subcommand("validate", "analytic invariant suite");
  add_common(*validate, validate_flags, false);
  validate->add_option("--mutate", mutate)->group("");  // hidden

  auto* events = app.add_subcommand("events", "event-class probabilities");
  add_common(*events, events_flags, false);
  events->add_flag("--jumps", jumps, "also write every jump to jumps.csv");

  auto* characterize =
      app.add_subcommand("characterize", "coincidence tomography: F, S_fixed, S_max");
  add_common(*characterize, characterize_flags, false);

  auto* sweep = app.add_subcommand("sweep", "1-D or 2-D parameter sweep of characterize");
  add_common(*sweep, sweep_flags, true);

  auto* oracle = app.add_subcommand("oracle", "master-equation snapshots");
  add_common(*oracle, oracle_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*validate) return cmd_validate(validate_flags, mutate);
    if (*events) return cmd_events(events_flags, jumps);
    if (*characterize) return cmd_characterize(characterize_flags);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*oracle) return cmd_oracle(oracle_flags);
  } catch (const cqed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cqed::InsufficientDataError& e) {
    std::cerr << "error: insufficient data: " << e.what() << '\n';
    return kExitInsufficient;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
