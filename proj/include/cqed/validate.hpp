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

// Analytic invariant suite behind `cqed_pairs validate`. The Hamiltonian
// builder is injectable so a deliberately broken model can be fed through
// the same checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqed/analysis.hpp"
#include "cqed/experiment.hpp"
#include "cqed/hilbert.hpp"
#include "cqed/model.hpp"
#include "cqed/rng.hpp"
#include "cqed/trajectory.hpp"

namespace cqed {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // worst residual observed
  double tolerance = 0.0;  // pass iff value <= tolerance
  std::string detail;
};

using HamiltonianBuilder = std::function<Operator(double g1, double g2, const SystemParams&)>;

struct ValidationOptions {
  HamiltonianBuilder hamiltonian = hamiltonian_from_couplings;
  std::uint64_t seed = 20260101;
  int points = 100;       // random points for the structural checks
  int dark_points = 50;   // random (g1, g2, t) for the dark-state check
};

/// The model with the sign of delta2 flipped in the diagonal: the mutant the
/// suite must reject.
inline Operator hamiltonian_delta2_sign_flipped(double g1, double g2, const SystemParams& p) {
  SystemParams q = p;
  q.delta2 = -p.delta2;
  return hamiltonian_parts(q).assemble(g1, g2);
}

namespace detail {

inline Complex element(const Operator& h, const StateVector& a, const StateVector& b) {
  return a.dot(h * b);
}

inline CheckResult make_check(std::string name, double worst, double tol, std::string detail) {
  return {std::move(name), worst <= tol, worst, tol, std::move(detail)};
}

/// exp(-i H t) psi for a Hermitian H.
inline StateVector evolve_exact(const Operator& h, const StateVector& psi, double t) {
  const Eigen::MatrixXcd dense = Eigen::MatrixXcd(h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (dense + dense.adjoint()));
  const Eigen::VectorXcd phases = (solver.eigenvalues().cast<Complex>() * Complex(0.0, -t))
                                      .array()
                                      .exp()
                                      .matrix();
  return solver.eigenvectors() *
         (phases.asDiagonal() * (solver.eigenvectors().adjoint() * psi));
}

/// Interaction-picture amplitudes on (I, B, D, E+, E-) with constant
/// couplings: <B|H|I> = sqrt2 g1 e^{-i d1 t}, <B|H|E+> = <D|H|E-> = g2 e^{i d2 t}.
/// Plain RK4 on the five amplitudes.
inline std::array<Complex, 5> interaction_picture(double g1, double g2, double d1, double d2,
                                                  double t_end, double h) {
  auto rhs = [&](double t, const std::array<Complex, 5>& c) {
    const Complex bi = std::numbers::sqrt2 * g1 * std::exp(Complex(0.0, -d1 * t));
    const Complex be = g2 * std::exp(Complex(0.0, d2 * t));
    std::array<Complex, 5> out{};
    out[0] = std::conj(bi) * c[1];
    out[1] = bi * c[0] + be * c[3];
    out[2] = be * c[4];
    out[3] = std::conj(be) * c[1];
    out[4] = std::conj(be) * c[2];
    for (Complex& z : out) z *= Complex(0.0, -1.0);
    return out;
  };
  std::array<Complex, 5> c{Complex(1.0), 0.0, 0.0, 0.0, 0.0};
  const auto steps = static_cast<long>(std::llround(t_end / h));
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    std::array<Complex, 5> tmp;
    const auto k1 = rhs(t, c);
    for (int i = 0; i < 5; ++i) tmp[i] = c[i] + 0.5 * h * k1[i];
    const auto k2 = rhs(t + 0.5 * h, tmp);
    for (int i = 0; i < 5; ++i) tmp[i] = c[i] + 0.5 * h * k2[i];
    const auto k3 = rhs(t + 0.5 * h, tmp);
    for (int i = 0; i < 5; ++i) tmp[i] = c[i] + h * k3[i];
    const auto k4 = rhs(t + h, tmp);
    for (int i = 0; i < 5; ++i) c[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return c;
}

inline std::array<StateVector, 5> manifold() {
  return {special_state(SpecialLabel::I), special_state(SpecialLabel::B),
          special_state(SpecialLabel::D), special_state(SpecialLabel::EPlus),
          special_state(SpecialLabel::EMinus)};
}

}  // namespace detail

inline std::vector<CheckResult> run_validation(const ValidationOptions& opt = {}) {
  using detail::element;
  using detail::make_check;
  std::vector<CheckResult> out;
  Rng rng(opt.seed);
  auto uniform = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
  const auto m = detail::manifold();
  const StateVector& I = m[0];
  const StateVector& B = m[1];
  const StateVector& D = m[2];
  const StateVector& Ep = m[3];
  const StateVector& Em = m[4];

  auto random_params = [&]() {
    SystemParams p;
    p.delta1 = uniform(-20.0, 20.0);
    p.delta2 = uniform(-20.0, 20.0);
    p.pulses.amplitude1 = uniform(0.1, 2.0);
    p.pulses.amplitude2 = uniform(0.1, 2.0);
    return p;
  };

  // Hermiticity and excitation conservation of H(t).
  {
    const Operator n_op = excitation_number();
    double herm = 0.0, comm = 0.0;
    for (int i = 0; i < opt.points; ++i) {
      const SystemParams p = random_params();
      const double t = uniform(0.0, p.t_total);
      const Operator h =
          opt.hamiltonian(pulse_amplitude(t, 1, p), pulse_amplitude(t, 2, p), p);
      herm = std::max(herm, hermiticity_residual(h));
      comm = std::max(comm, max_abs(Operator(h * n_op - n_op * h)));
    }
    out.push_back(make_check("hermiticity", herm, 1e-14, "max |H - H^dag| at random times"));
    out.push_back(make_check("excitation_conservation", comm, 1e-14, "max |[H, N]|"));
  }

  // Matrix-element pattern on the five-state manifold.
  {
    double zero = 0.0, bright = 0.0, transfer = 0.0, closure = 0.0;
    for (int i = 0; i < opt.points; ++i) {
      const SystemParams p = random_params();
      const double g1 = uniform(0.0, 2.0), g2 = uniform(0.0, 2.0);
      const Operator h = opt.hamiltonian(g1, g2, p);
      for (auto [a, b] : {std::pair{&D, &I}, {&Ep, &I}, {&Em, &I}, {&Em, &B}, {&Ep, &D},
                          {&D, &B}, {&Ep, &Em}}) {
        zero = std::max(zero, std::abs(element(h, *a, *b)));
      }
      bright = std::max(bright,
                        std::abs(std::abs(element(h, B, I)) - std::numbers::sqrt2 * g1));
      transfer = std::max({transfer, std::abs(std::abs(element(h, B, Ep)) - g2),
                           std::abs(std::abs(element(h, D, Em)) - g2)});
      // H keeps the manifold closed
      for (const StateVector& v : m) {
        StateVector hv = h * v;
        for (const StateVector& w : m) hv -= w.dot(hv) * w;
        closure = std::max(closure, hv.cwiseAbs().maxCoeff());
      }
    }
    out.push_back(make_check("pattern_zero_set", zero, 1e-12,
                             "<D|H|I>, <E+-|H|I>, <E-|H|B>, <E+|H|D>, <D|H|B>, <E+|H|E->"));
    out.push_back(make_check("pattern_bright_coupling", bright, 1e-12, "|<B|H|I>| = sqrt2 g1"));
    out.push_back(make_check("pattern_transfer_coupling", transfer, 1e-12,
                             "|<B|H|E+>| = |<D|H|E->| = g2"));
    out.push_back(make_check("manifold_closure", closure, 1e-12, "H maps the manifold into itself"));
  }

  // Dark state at two-photon resonance: <B|H|Lambda> = 0 and H Lambda ~ Lambda.
  {
    double worst = 0.0;
    for (int i = 0; i < opt.dark_points; ++i) {
      SystemParams p = random_params();
      p.delta2 = -p.delta1;
      const double t = uniform(0.0, p.t_total);
      const double g1 = pulse_amplitude(t, 1, p), g2 = pulse_amplitude(t, 2, p);
      const StateVector lambda = special_state(SpecialLabel::Lambda, mixing_angle(g1, g2));
      const Operator h = opt.hamiltonian(g1, g2, p);
      const StateVector hl = h * lambda;
      const Complex e = lambda.dot(hl);
      worst = std::max({worst, std::abs(B.dot(hl)), std::abs(e),
                        (hl - e * lambda).cwiseAbs().maxCoeff()});
    }
    out.push_back(make_check("dark_state", worst, 1e-12,
                             "Lambda(theta(t)) decoupled from |B> and an eigenstate of H"));
  }

  // Frame equivalence: static rotating frame vs. the interaction picture.
  {
    SystemParams p;
    p.delta1 = 5.0;
    p.delta2 = -5.0;
    const double g1 = 0.8, g2 = 0.6, t_end = 4.0;
    const StateVector psi = detail::evolve_exact(opt.hamiltonian(g1, g2, p), I, t_end);
    const auto c = detail::interaction_picture(g1, g2, p.delta1, p.delta2, t_end, 1e-4);
    double worst = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      worst = std::max(worst, std::abs(abs2(m[k].dot(psi)) - abs2(c[k])));
    }
    out.push_back(make_check("frame_equivalence", worst, 1e-8,
                             "manifold populations, constant g, delta1 = -delta2 = 5"));
  }

  // Jump bookkeeping: decay operator diagonal for every analyzer setting,
  // identical across settings; |E+> has dp_m = dt kappa / 2 per cavity channel.
  {
    SystemParams p;
    p.kappa = 1.3;
    p.gamma = 0.07;
    const Operator reference = decay_operator(jump_operators(p));
    double off = 0.0, spread = 0.0;
    for (const AnalyzerSetting& s : tomography_settings()) {
      const Operator d = decay_operator(jump_operators(p, s));
      for (int k = 0; k < d.outerSize(); ++k) {
        for (Operator::InnerIterator it(d, k); it; ++it) {
          if (it.row() != it.col()) off = std::max(off, std::abs(it.value()));
        }
      }
      spread = std::max(spread, max_abs(Operator(d - reference)));
    }
    out.push_back(make_check("decay_operator_diagonal", off, 1e-14, "sum L^dag L off-diagonal"));
    out.push_back(make_check("unraveling_invariance", spread, 1e-14,
                             "sum L^dag L independent of analyzer setting"));

    SystemParams q;
    q.kappa = 1.0;
    double per_channel = 0.0;
    for (const JumpChannel& c : jump_operators(q)) {
      const double dp = q.dt * c.rate * (c.op * Ep).squaredNorm();
      const double expect = c.kind == ChannelKind::Cavity ? q.dt * q.kappa / 2.0 : 0.0;
      per_channel = std::max(per_channel, std::abs(dp - expect));
    }
    out.push_back(make_check("jump_probabilities_e_plus", per_channel, 1e-15,
                             "dp_m = dt kappa / 2 for each cavity channel"));

    q.t_total = 1.0;
    const TrajectoryEngine engine(q);
    const StateVector next = engine.evolve_unnormalized(Ep, 5.0);
    const double loss = 1.0 - next.squaredNorm();
    out.push_back(make_check("norm_decay", std::abs(loss - 2.0 * q.kappa * q.dt),
                             4.0 * q.kappa * q.kappa * q.dt * q.dt,
                             "1 - |psi~|^2 = 2 kappa dt + O(dt^2)"));
  }

  // Tomography round trip on exact Born frequencies.
  {
    double worst = 0.0;
    const auto settings = tomography_settings();
    for (int i = 0; i < 20; ++i) {
      Eigen::Matrix4cd a;
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) a(r, c) = Complex(uniform(-1, 1), uniform(-1, 1));
      }
      PairDensityMatrix rho = a * a.adjoint();
      rho /= rho.trace().real();
      std::vector<SettingFrequencies> data;
      for (const AnalyzerSetting& s : settings) data.push_back({s, born_probabilities(rho, s)});
      const Reconstruction rec = reconstruct_from_frequencies(data);
      worst = std::max(worst, (rec.raw - rho).cwiseAbs().maxCoeff());
    }
    out.push_back(make_check("tomography_round_trip", worst, 1e-9,
                             "linear inversion of exact frequencies, 20 random states"));
  }
  return out;
}

inline bool all_passed(const std::vector<CheckResult>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

inline void write_validation_csv(std::ostream& out, const std::vector<CheckResult>& checks) {
  out << "check,passed,value,tolerance,detail\n";
  for (const CheckResult& c : checks) {
    out << c.name << ',' << (c.passed ? "true" : "false") << ',' << fmt(c.value) << ','
        << fmt(c.tolerance) << ",\"" << c.detail << "\"\n";
  }
}

}  // namespace cqed
