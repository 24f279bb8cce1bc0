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

// Acceptance gate. `acceptance --criterion N` runs one criterion (1-8) and
// prints detail lines followed by a single "[PASS]" or "[FAIL]" line; the
// exit status is 0 on pass. Ensemble sizes and tolerances are fixed here.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cqed/analysis.hpp"
#include "cqed/experiment.hpp"
#include "cqed/lindblad.hpp"
#include "cqed/trajectory.hpp"
#include "cqed/validate.hpp"

namespace {

using namespace cqed;

constexpr std::uint64_t kMasterSeed = 20260101;
constexpr double kSqrt2 = std::numbers::sqrt2;

int g_threads = 1;

struct Verdict {
  bool passed = true;
  std::string summary;
};

void detail(const std::string& line) { std::cout << "  " << line << '\n'; }

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double manifold_population(const StateVector& psi, SpecialLabel label) {
  return std::norm(special_state(label).dot(psi));
}

// 1. Analytic structure at 100 random parameter points.
Verdict criterion1() {
  ValidationOptions opt;
  opt.seed = kMasterSeed;
  opt.points = 100;
  opt.dark_points = 100;
  Verdict v;
  double worst = 0.0;
  for (const CheckResult& c : run_validation(opt)) {
    const bool relevant = c.name == "dark_state" || c.name.rfind("pattern_", 0) == 0;
    if (!relevant) continue;
    detail(c.name + ": " + fmt(c.value) + " (< " + fmt(c.tolerance) + ")");
    v.passed = v.passed && c.passed && c.value < 1e-12;
    worst = std::max(worst, c.value);
  }
  v.summary = "dark-state decoupling and matrix-element pattern, worst residual " + fmt(worst);
  return v;
}

// 2. Closed-system transfer by trajectory and master equation.
Verdict criterion2() {
  SystemParams p;  // kappa = gamma = 0, gt = 100, fwhm = delay = 27, zero detunings
  const std::array<double, 1> t_end = {p.t_total};
  const TrajectoryResult r = TrajectoryEngine(p).run(kMasterSeed, t_end);
  const double traj = manifold_population(r.snapshots[0], SpecialLabel::EPlus);
  const auto snaps = evolve_density(p, t_end);
  const StateVector ep = special_state(SpecialLabel::EPlus);
  const double oracle = ep.dot(snaps[0].second * ep).real();
  detail("trajectory jumps: " + std::to_string(r.jumps.size()));
  detail("trajectory |<E+|psi>|^2 = " + num(traj, 8));
  detail("oracle <E+|rho|E+> = " + num(oracle, 8));
  detail("difference = " + fmt(std::abs(traj - oracle)));
  Verdict v;
  v.passed = r.jumps.empty() && traj > 0.99 && oracle > 0.99 && std::abs(traj - oracle) < 1e-6;
  v.summary = "closed-system transfer, population " + num(traj, 6) + " / " + num(oracle, 6);
  return v;
}

// 3. Trajectory average against the master equation.
Verdict criterion3() {
  SystemParams p;
  p.kappa = 1.0;
  p.gamma = 0.01;
  const std::vector<double> times = {25.0, 50.0, 75.0, 100.0};
  const std::size_t n = 10000;
  const TrajectoryEngine engine(p);
  using Sums = std::vector<DensityMatrix>;
  Sums init(times.size(), DensityMatrix::Zero(kDim, kDim));
  const Sums sums = reduce_ensemble(
      engine, n, kMasterSeed, g_threads, init,
      [](Sums& s, std::size_t, const TrajectoryResult& r) {
        for (std::size_t k = 0; k < s.size(); ++k) {
          s[k].noalias() += r.snapshots[k] * r.snapshots[k].adjoint();
        }
      },
      [](Sums& a, const Sums& b) {
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
      },
      times);
  const auto oracle = evolve_density(p, times);
  Verdict v;
  double worst = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double d = trace_distance(sums[k] / static_cast<double>(n), oracle[k].second);
    detail("gt = " + num(times[k], 0) + ": trace distance " + num(d, 5));
    worst = std::max(worst, d);
  }
  v.passed = worst <= 0.02;
  v.summary = "trajectory/master-equation trace distance " + num(worst, 5) + " (<= 0.02, " +
              std::to_string(n) + " trajectories)";
  return v;
}

// 4. Tomography on synthetic Born-rule counts, 10^6 samples in total.
Verdict criterion4() {
  const auto settings = tomography_settings();
  const std::uint64_t per_setting = 1'000'000 / settings.size() + 1;
  PairDensityMatrix mixture = PairDensityMatrix::Zero();
  mixture(1, 1) = mixture(2, 2) = 0.5;
  const Reconstruction bell =
      reconstruct_pair_state(synthetic_counts(pure_pair_state(psi_plus()), settings, per_setting,
                                              child_seed(kMasterSeed, 1)));
  const Reconstruction mixed =
      reconstruct_pair_state(synthetic_counts(mixture, settings, per_setting,
                                              child_seed(kMasterSeed, 2)));
  const double f = fidelity(bell.physical), s = chsh_fixed(bell.physical);
  const double sm = chsh_fixed(mixed.physical);
  detail("|Psi+>: F = " + num(f, 5) + ", S_fixed = " + num(s, 5));
  detail("classical mixture: S_fixed = " + num(sm, 5));
  Verdict v;
  v.passed = std::abs(f - 1.0) <= 0.02 && std::abs(s - 2.0 * kSqrt2) <= 0.05 &&
             std::abs(sm - kSqrt2) <= 0.05;
  v.summary = "synthetic tomography F = " + num(f, 4) + ", S = " + num(s, 4) +
              ", mixture S = " + num(sm, 4);
  return v;
}

CharacterizeOptions tomography_options() {
  CharacterizeOptions o;
  o.trajectories = 10000;  // per analyzer setting
  o.master = kMasterSeed;
  o.threads = g_threads;
  return o;
}

std::vector<PointResult> characterize_all(const std::vector<SystemParams>& points) {
  std::vector<SweepPoint> sweep;
  for (const SystemParams& p : points) sweep.push_back({{}, p});
  return run_sweep(sweep, tomography_options());
}

std::string describe(const PointResult& r) {
  if (!r.pair) return std::string(status_name(r.status)) + " (" + r.message + ")";
  const auto& c = *r.pair;
  return "F = " + num(c.value.fidelity, 3) + " +- " + num(c.error.fidelity, 3) +
         ", S_fixed = " + num(c.value.s_fixed, 3) + " +- " + num(c.error.s_fixed, 3) +
         ", S_max = " + num(c.value.s_max, 3) + ", coincidences " + std::to_string(c.coincidences);
}

// 5. kappa = 2g, detuned two-photon resonance: the three reference points.
Verdict criterion5() {
  const std::array<double, 3> deltas = {5.0, 10.0, 15.0};
  const std::array<double, 3> reference_f = {0.79, 0.96, 0.99};
  const std::array<double, 3> reference_s = {2.25, 2.73, 2.81};
  std::vector<SystemParams> points;
  for (double d : deltas) {
    SystemParams p;
    p.kappa = 2.0;
    p.gamma = 0.01;
    p.delta1 = d;
    p.delta2 = -d;
    points.push_back(p);
  }
  const auto rows = characterize_all(points);
  Verdict v;
  std::vector<double> f;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail("delta = " + num(deltas[i], 0) + ": " + describe(rows[i]));
    if (!rows[i].pair) {
      v.passed = false;
      f.push_back(std::nan(""));
      continue;
    }
    const PairFigures& x = rows[i].pair->value;
    const bool near = std::abs(x.fidelity - reference_f[i]) <= 0.05 &&
                      std::abs(x.s_fixed - reference_s[i]) <= 0.15;
    detail("  reference (" + num(reference_f[i], 2) + ", " + num(reference_s[i], 2) + "): " +
           (near ? "within" : "outside") + " +-0.05 / +-0.15");
    v.passed = v.passed && near;
    f.push_back(x.fidelity);
  }
  const bool increasing = f[0] < f[1] && f[1] < f[2];
  detail(std::string("F strictly increasing in delta: ") + (increasing ? "yes" : "no"));
  const bool hard15 =
      rows[2].pair && rows[2].pair->value.fidelity >= 0.95 && rows[2].pair->value.s_fixed > 2.7;
  detail(std::string("F(15) >= 0.95 and S_fixed(15) > 2.7: ") + (hard15 ? "yes" : "no"));
  v.passed = v.passed && increasing && hard15;
  v.summary = "reference (F, S) at delta = 5, 10, 15 and monotone F";
  return v;
}

// 6. Fidelity against cavity decay rate at delta = 15g.
Verdict criterion6() {
  const std::array<double, 4> kappas = {0.5, 1.0, 2.0, 3.0};
  std::vector<SystemParams> points;
  for (double k : kappas) {
    SystemParams p;
    p.kappa = k;
    p.gamma = 0.01;
    p.delta1 = 15.0;
    p.delta2 = -15.0;
    points.push_back(p);
  }
  const auto rows = characterize_all(points);
  Verdict v;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail("kappa = " + num(kappas[i], 1) + ": " + describe(rows[i]));
    v.passed = v.passed && rows[i].pair.has_value();
  }
  if (!v.passed) {
    v.summary = "missing pair estimate";
    return v;
  }
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const auto& a = *rows[i].pair;
    const auto& b = *rows[i + 1].pair;
    const double se = std::hypot(a.error.fidelity, b.error.fidelity);
    monotone = monotone && b.value.fidelity <= a.value.fidelity + 2.0 * se;
  }
  const double f3 = rows.back().pair->value.fidelity;
  detail(std::string("F non-increasing within 2 standard errors: ") + (monotone ? "yes" : "no"));
  detail("F(kappa = 3) = " + num(f3, 3) + " (> 0.9)");
  v.passed = monotone && f3 > 0.9;
  v.summary = "F non-increasing in kappa and F(3g) = " + num(f3, 3);
  return v;
}

// 7. S over detuning deviation and delay (delta1 = 0, deviation = delta2).
Verdict criterion7() {
  const std::array<double, 4> delays = {15.0, 20.0, 25.0, 30.0};
  const std::array<double, 2> deviations = {0.0, 2.0};
  std::vector<SystemParams> points;
  for (double dev : deviations) {
    for (double d : delays) {
      SystemParams p;
      p.kappa = 1.0;
      p.gamma = 0.01;
      p.pulses.fwhm = 27.0;
      p.pulses.delay = d;
      p.delta1 = 0.0;
      p.delta2 = dev;
      points.push_back(p);
    }
  }
  const auto rows = characterize_all(points);
  Verdict v;
  std::array<std::array<double, 4>, 2> s{};
  for (std::size_t j = 0; j < deviations.size(); ++j) {
    for (std::size_t i = 0; i < delays.size(); ++i) {
      const PointResult& r = rows[j * delays.size() + i];
      detail("deviation " + num(deviations[j], 0) + ", delay " + num(delays[i], 0) + ": " +
             describe(r));
      s[j][i] = r.pair ? r.pair->value.s_fixed : std::nan("");
      v.passed = v.passed && r.pair.has_value();
    }
  }
  bool above = true;
  for (std::size_t i = 0; i < delays.size(); ++i) above = above && s[0][i] > s[1][i];
  const auto [lo, hi] = std::minmax_element(s[0].begin(), s[0].end());
  const double spread = *hi - *lo;
  detail(std::string("S(0) > S(2) at every delay: ") + (above ? "yes" : "no"));
  detail("S spread over delay at zero deviation: " + num(spread, 3) + " (< 0.2)");
  v.passed = v.passed && above && spread < 0.2;
  v.summary = "resonant S above detuned S at all delays, delay spread " + num(spread, 3);
  return v;
}

// 8. Bookkeeping.
Verdict criterion8() {
  Verdict v;
  SystemParams p;
  p.kappa = 1.0;
  p.gamma = 0.01;

  const std::size_t n = 2000;
  const auto ensemble = run_ensemble(p, n, kMasterSeed, g_threads);
  const TrajectoryEngine engine(p);
  EventTally tally;
  bool two_jumps = true;
  for (const TrajectoryResult& r : ensemble) {
    if (r.terminated_cleanly) two_jumps = two_jumps && r.jumps.size() == 2;
    tally.add(classify(r, engine.channels()));
  }
  double sum = 0.0;
  std::uint64_t counted = 0;
  for (const EventProbability& e : event_probabilities(tally)) {
    sum += e.probability;
    counted += e.count;
  }
  const bool sums = counted == n && std::abs(sum - 1.0) <= 1e-12;
  detail("event counts sum to " + std::to_string(counted) + " of " + std::to_string(n) +
         ", probabilities sum to 1 " + (std::abs(sum - 1.0) == 0.0 ? "exactly" : "- " + fmt(1 - sum)));
  detail(std::string("every clean trajectory has exactly 2 jumps: ") + (two_jumps ? "yes" : "no"));

  SystemParams q = p;
  q.gamma = 0.0;
  const EventTally closed = run_events(q, 1000, kMasterSeed, g_threads, 0.5);
  const std::uint64_t spont = closed.counts[static_cast<int>(EventClass::OneCavityOneSpont)] +
                              closed.counts[static_cast<int>(EventClass::TwoSpont)];
  detail("gamma = 0: spontaneous events " + std::to_string(spont));

  auto events_bytes = [&](int threads) {
    std::ostringstream out;
    write_events_csv(out, run_events(p, 1000, kMasterSeed, threads, 0.5));
    return out.str();
  };
  auto characterize_bytes = [&](int threads) {
    CharacterizeOptions o;
    o.trajectories = 200;
    o.master = kMasterSeed;
    o.threads = threads;
    SystemParams r = p;
    r.gamma = 0.0;
    const PointResult pr = characterize_point(r, o);
    std::ostringstream out;
    if (pr.pair) {
      write_characterize_csv(out, *pr.pair);
      write_rho_csv(out, pr.pair->state.physical);
    }
    return out.str();
  };
  const bool same = events_bytes(1) == events_bytes(std::max(2, g_threads)) &&
                    characterize_bytes(1) == characterize_bytes(std::max(2, g_threads)) &&
                    !characterize_bytes(1).empty();
  detail(std::string("byte-identical reruns (1 vs several threads): ") + (same ? "yes" : "no"));

  v.passed = sums && two_jumps && spont == 0 && same;
  v.summary = "probability sums, two-jump records, gamma = 0, reproducibility";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int criterion = 0;
  g_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--criterion", criterion, "criterion number 1-8")
      ->required()
      ->check(CLI::Range(1, 8));
  app.add_option("--threads", g_threads, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::array<std::function<Verdict()>, 8> criteria = {
      criterion1, criterion2, criterion3, criterion4,
      criterion5, criterion6, criterion7, criterion8};
  Verdict v;
  try {
    v = criteria[static_cast<std::size_t>(criterion - 1)]();
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what()};
  }
  std::cout << (v.passed ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << v.summary
            << std::endl;
  return v.passed ? 0 : 1;
}
