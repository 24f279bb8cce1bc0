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

#include <algorithm>
#include <numbers>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cqed/config.hpp"
#include "cqed/experiment.hpp"
#include "cqed/validate.hpp"

namespace cqed {
namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ParsesAllKeys) {
  const RunConfig cfg = parse_config_string(R"(
# comment line
kappa = 2        # trailing comment
gamma = 0.01
delta1 = 15
delta2 = -15
fwhm = 27
delay = 20
t_total = 100
trajectories = 500
seed = 42
threshold = 0.4
bootstrap = 50
bases = circular, linear_hv, linear_da
oracle.times = 10, 20
out = results
sweep.x = kappa
sweep.x.values = 0.5:0.5:2
sweep.y = delay
sweep.y.values = 15, 30
sweep.y.link = fwhm:1
)");
  EXPECT_EQ(cfg.params.kappa, 2.0);
  EXPECT_EQ(cfg.params.delta2, -15.0);
  EXPECT_EQ(cfg.params.pulses.delay, 20.0);
  EXPECT_EQ(cfg.trajectories, 500u);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.threshold, 0.4);
  EXPECT_EQ(cfg.bootstrap, 50);
  EXPECT_EQ(cfg.out, "results");
  EXPECT_EQ(cfg.oracle_times, (std::vector<double>{10, 20}));
  ASSERT_TRUE(cfg.sweep_x && cfg.sweep_y);
  EXPECT_EQ(cfg.sweep_x->values, (std::vector<double>{0.5, 1.0, 1.5, 2.0}));
  ASSERT_EQ(cfg.sweep_y->links.size(), 1u);
  EXPECT_EQ(cfg.sweep_y->links[0].first, "fwhm");
}

TEST(Config, ErrorsCarryLineAndField) {
  EXPECT_EQ(config_error("kappa = 1\nfoo = 2\n"), "<config>:2: field 'foo': unknown key");
  EXPECT_EQ(config_error("kappa = 1\nkappa = 2\n"),
            "<config>:2: field 'kappa': duplicate key (first set on line 1)");
  EXPECT_EQ(config_error("gamma = abc\n"), "<config>:1: field 'gamma': 'abc' is not a number");
  EXPECT_EQ(config_error("just text\n"), "<config>:1: expected 'key = value'");
  EXPECT_EQ(config_error("kappa =\n"), "<config>:1: field 'kappa': missing value");
  EXPECT_EQ(config_error("sweep.x = omega\n"),
            "<config>:1: field 'sweep.x': 'omega' is not a SystemParams or pulse field");
  EXPECT_EQ(config_error("sweep.x = kappa\nsweep.x.values = 3:1:1\n"),
            "<config>:2: field 'sweep.x.values': bad range '3:1:1'");
  EXPECT_EQ(config_error("sweep.x = kappa\n"),
            "<config>: field 'sweep.x.values': missing value list");
  EXPECT_EQ(config_error("sweep.y = kappa\nsweep.y.values = 1\n"),
            "<config>: field 'sweep.y': sweep.y needs sweep.x");
  EXPECT_EQ(config_error("kappa = -1\n"), "<config>: kappa must be >= 0");
  EXPECT_EQ(config_error("trajectories = 0\n"), "<config>:1: field 'trajectories': must be >= 1");
  EXPECT_EQ(config_error("bases = circular, elliptic\n"),
            "<config>:1: field 'bases': unknown basis 'elliptic'");
  EXPECT_EQ(config_error("sweep.x = kappa\nsweep.x.values = 1\nsweep.x.link = gamma\n"),
            "<config>:3: field 'sweep.x.link': link must be name:factor, got 'gamma'");
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, ParameterAccessors) {
  SystemParams p;
  for (const std::string& name : sweepable_parameters()) {
    set_parameter(p, name, 1.25);
    EXPECT_EQ(get_parameter(p, name), 1.25) << name;
  }
  EXPECT_THROW(set_parameter(p, "omega", 1.0), std::invalid_argument);
}

TEST(Sweep, PointsAreYOuterXInnerWithLinks) {
  const RunConfig cfg = parse_config_string(
      "sweep.x = delta1\nsweep.x.values = 1, 2\nsweep.x.link = delta2:-1\n"
      "sweep.y = kappa\nsweep.y.values = 0.5, 1, 2\n");
  const auto pts = sweep_points(cfg);
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_EQ(pts[1].params.delta1, 2.0);
  EXPECT_EQ(pts[1].params.delta2, -2.0);
  EXPECT_EQ(pts[1].params.kappa, 0.5);
  EXPECT_EQ(pts[2].params.kappa, 1.0);
  ASSERT_EQ(pts[0].coordinates.size(), 3u);
  EXPECT_EQ(pts[0].coordinates[1].first, "delta2");
}

// Gamma = 0, kappa = 1: every trajectory is a coincidence, so tiny
// ensembles are enough for full tomography.
RunConfig small_sweep(const std::string& values) {
  return parse_config_string("kappa = 1\ngamma = 0\ntrajectories = 40\nbootstrap = 10\n"
                             "sweep.x = delta1\nsweep.x.link = delta2:-1\nsweep.x.values = " +
                             values + "\n");
}

CharacterizeOptions options_of(const RunConfig& cfg, int threads) {
  CharacterizeOptions o;
  o.trajectories = cfg.trajectories;
  o.master = cfg.seed;
  o.threads = threads;
  o.bootstrap = cfg.bootstrap;
  return o;
}

std::string sweep_csv(const RunConfig& cfg, int threads) {
  const auto pts = sweep_points(cfg);
  std::ostringstream out;
  write_sweep_csv(out, pts, run_sweep(pts, options_of(cfg, threads)));
  return out.str();
}

TEST(Sweep, CsvIsByteIdenticalAcrossThreadCounts) {
  const RunConfig cfg = small_sweep("0, 3");
  EXPECT_EQ(sweep_csv(cfg, 1), sweep_csv(cfg, 3));
}

TEST(Sweep, PermutingValuesPermutesRows) {
  auto rows = [](const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) out.push_back(line);
    return out;
  };
  auto a = rows(sweep_csv(small_sweep("0, 3, 6"), 2));
  auto b = rows(sweep_csv(small_sweep("6, 0, 3"), 2));
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(b[0], a[2]);
  EXPECT_EQ(b[1], a[0]);
  EXPECT_EQ(b[2], a[1]);
}

TEST(Sweep, SinglePointMatchesCharacterize) {
  const RunConfig cfg = small_sweep("3");
  const auto pts = sweep_points(cfg);
  const auto rows = run_sweep(pts, options_of(cfg, 2));
  SystemParams p = cfg.params;
  p.delta1 = 3;
  p.delta2 = -3;
  const PointResult direct = characterize_point(p, options_of(cfg, 1));
  ASSERT_TRUE(rows[0].pair && direct.pair);
  std::ostringstream a, b;
  write_characterize_csv(a, *rows[0].pair);
  write_characterize_csv(b, *direct.pair);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Sweep, FailuresAreRecordedPerRow) {
  RunConfig cfg = parse_config_string(
      "kappa = 1\ngamma = 0.01\ntrajectories = 2\nsweep.x = dt\nsweep.x.values = -1, 0.001\n");
  const auto pts = sweep_points(cfg);
  const auto rows = run_sweep(pts, options_of(cfg, 1));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, PointStatus::Failed);
  EXPECT_EQ(rows[1].status, PointStatus::InsufficientData);
  std::ostringstream out;
  write_sweep_csv(out, pts, rows);
  EXPECT_NE(out.str().find(",failed,"), std::string::npos);
  EXPECT_NE(out.str().find(",insufficient_data,"), std::string::npos);
}

TEST(Characterize, ClosedSystemReadsTheField) {
  SystemParams p;  // kappa = gamma = 0
  const PointResult r = characterize_point(p, {});
  ASSERT_EQ(r.status, PointStatus::Ok) << r.message;
  EXPECT_EQ(r.method, "field");
  EXPECT_GT(r.pair->value.fidelity, 0.99);
  EXPECT_NEAR(r.pair->value.s_fixed, 2.0 * std::numbers::sqrt2, 0.03);
}

TEST(Characterize, GammaZeroHasNoSpontaneousEvents) {
  SystemParams p;
  p.kappa = 1.0;
  const EventTally t = run_events(p, 200, 3, 2, kDefaultClassificationThreshold);
  EXPECT_EQ(t.counts[static_cast<int>(EventClass::OneCavityOneSpont)], 0u);
  EXPECT_EQ(t.counts[static_cast<int>(EventClass::TwoSpont)], 0u);
  EXPECT_EQ(t.total(), 200u);
}

TEST(Characterize, PointSeedDependsOnValuesOnly) {
  SystemParams a, b;
  a.kappa = b.kappa = 2.0;
  EXPECT_EQ(point_seed(9, a), point_seed(9, b));
  b.delta1 = 1e-12;
  EXPECT_NE(point_seed(9, a), point_seed(9, b));
  EXPECT_NE(point_seed(9, a), point_seed(10, a));
}

TEST(Csv, HeadersAndNumberFormat) {
  EventTally t;
  t.counts = {1, 1, 0, 0, 2};
  std::ostringstream out;
  write_events_csv(out, t);
  EXPECT_EQ(out.str(),
            "event_class,probability,stderr\n"
            "ENTANGLED_PAIR,0.25,0.21650635094610965\n"
            "SEPARABLE_CAVITY_PAIR,0.25,0.21650635094610965\n"
            "ONE_CAVITY_ONE_SPONT,0,0\n"
            "TWO_SPONT,0,0\n"
            "INCOMPLETE,0.5,0.25\n");
  EXPECT_EQ(std::string(kCharacterizeHeader), "F,F_err,S_fixed,S_err,S_max,n_coinc");
  EXPECT_EQ(fmt(0.1), "0.1");
  EXPECT_EQ(fmt(-15.0), "-15");
}

TEST(Validate, FreshModelPassesEverything) {
  const auto checks = run_validation();
  for (const CheckResult& c : checks) EXPECT_TRUE(c.passed) << c.name << " " << c.value;
  EXPECT_TRUE(all_passed(checks));
}

TEST(Validate, FlippedDelta2SignFailsFrameEquivalence) {
  ValidationOptions opt;
  opt.hamiltonian = hamiltonian_delta2_sign_flipped;
  const auto checks = run_validation(opt);
  const auto it = std::find_if(checks.begin(), checks.end(),
                               [](const CheckResult& c) { return c.name == "frame_equivalence"; });
  ASSERT_NE(it, checks.end());
  EXPECT_FALSE(it->passed);
  EXPECT_FALSE(all_passed(checks));
}

}  // namespace
}  // namespace cqed
