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

// Physical model of the cascade atom in the two-mode cavity.
//
// All frequencies are in units of the peak vacuum Rabi frequency g and all
// times in units of 1/g. The Hamiltonian is written in a static rotating
// frame: detunings sit on the diagonal as atomic level energies
//   E(|0''_0>) = 0,  E(|1'_{+-1}>) = -delta2,  E(|0_0>) = -(delta1 + delta2),
// photons carry zero energy, and the couplings are real.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "cqed/hilbert.hpp"

namespace cqed {

/// Gaussian coupling envelopes. Mode 2 is switched on first (counterintuitive
/// ordering); the pair is centered in the protocol window.
struct PulsePair {
  double fwhm = 27.0;
  double delay = 27.0;  // peak1 - peak2
  double amplitude1 = 1.0;
  double amplitude2 = 1.0;

  double sigma() const { return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }
  double peak1(double t_total) const { return 0.5 * t_total + 0.5 * delay; }
  double peak2(double t_total) const { return 0.5 * t_total - 0.5 * delay; }
};

struct SystemParams {
  double kappa = 0.0;   // cavity field decay rate, per polarization mode
  double gamma = 0.0;   // spontaneous decay rate, per transition
  double delta1 = 0.0;  // detuning of cavity mode 1
  double delta2 = 0.0;  // detuning of cavity mode 2
  PulsePair pulses;
  double t_total = 100.0;  // pulse window [0, t_total]
  double dt = 1e-3;
  double t_max = 0.0;  // <= 0 selects t_total + 10 / min(kappa, gamma), capped
  double t_max_ceiling = 5000.0;

  double effective_t_max() const {
    if (t_max > 0.0) return t_max;
    const double slowest = std::min(kappa, gamma);
    const double auto_max = slowest > 0.0 ? t_total + 10.0 / slowest : t_max_ceiling;
    return std::max(t_total, std::min(auto_max, t_max_ceiling));
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(what);
    };
    require(std::isfinite(kappa) && kappa >= 0.0, "kappa must be >= 0");
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be >= 0");
    require(std::isfinite(delta1) && std::isfinite(delta2), "detunings must be finite");
    require(dt > 0.0, "dt must be > 0");
    require(t_total > 0.0, "t_total must be > 0");
    require(t_max <= 0.0 || t_max >= t_total, "t_max must be >= t_total");
    require(t_max_ceiling >= t_total, "t_max_ceiling must be >= t_total");
    require(pulses.fwhm > 0.0, "fwhm must be > 0");
    require(pulses.amplitude1 >= 0.0 && pulses.amplitude2 >= 0.0,
            "pulse amplitudes must be >= 0");
  }
};

/// Coupling g_which(t). Hard-gated to zero outside [0, t_total].
inline double pulse_amplitude(double t, int which, const PulsePair& pulses, double t_total) {
  if (which != 1 && which != 2) throw std::invalid_argument("pulse index must be 1 or 2");
  if (t < 0.0 || t > t_total) return 0.0;
  const double peak = which == 1 ? pulses.peak1(t_total) : pulses.peak2(t_total);
  const double amplitude = which == 1 ? pulses.amplitude1 : pulses.amplitude2;
  const double s = pulses.sigma();
  const double x = t - peak;
  return amplitude * std::exp(-x * x / (2.0 * s * s));
}

inline double pulse_amplitude(double t, int which, const SystemParams& params) {
  return pulse_amplitude(t, which, params.pulses, params.t_total);
}

/// S_{i alpha}: S1+ = |1'_-1><0_0|, S1- = |1'_1><0_0|, S2+ = |0''_0><1'_1|,
/// S2- = |0''_0><1'_-1|.
inline Operator lowering(int transition, Polarization pol) {
  const bool plus = pol == Polarization::Plus;
  if (transition == 1) {
    return atom_transition(plus ? AtomLevel::MMinus : AtomLevel::MPlus, AtomLevel::G2);
  }
  if (transition == 2) {
    return atom_transition(AtomLevel::Ground, plus ? AtomLevel::MPlus : AtomLevel::MMinus);
  }
  throw std::invalid_argument("transition must be 1 or 2");
}

inline double level_energy(AtomLevel level, double delta1, double delta2) {
  switch (level) {
    case AtomLevel::G2:
      return -(delta1 + delta2);
    case AtomLevel::MMinus:
    case AtomLevel::MPlus:
      return -delta2;
    case AtomLevel::Ground:
      return 0.0;
  }
  throw std::invalid_argument("unknown atom level");
}

/// Time-independent pieces: H(t) = detuning + g1(t) coupling1 + g2(t) coupling2.
struct HamiltonianParts {
  Operator detuning;
  Operator coupling1;
  Operator coupling2;

  Operator assemble(double g1, double g2) const {
    return Operator(detuning + g1 * coupling1 + g2 * coupling2);
  }
};

/// sum_alpha (a^dag_{i alpha} S_{i alpha} + h.c.)
inline Operator coupling_operator(int transition) {
  Operator total(kDim, kDim);
  for (Polarization pol : {Polarization::Plus, Polarization::Minus}) {
    const Operator term = creation(Mode{transition, pol}) * lowering(transition, pol);
    total += term;
    total += Operator(term.adjoint());
  }
  total.makeCompressed();
  return total;
}

inline HamiltonianParts hamiltonian_parts(const SystemParams& params) {
  std::vector<Triplet> diag;
  for (int k = 0; k < kDim; ++k) {
    const double e = level_energy(basis_state(k).atom, params.delta1, params.delta2);
    if (e != 0.0) diag.emplace_back(k, k, e);
  }
  return HamiltonianParts{from_triplets(diag), coupling_operator(1), coupling_operator(2)};
}

inline Operator hamiltonian_from_couplings(double g1, double g2, const SystemParams& params) {
  return hamiltonian_parts(params).assemble(g1, g2);
}

inline Operator hamiltonian(double t, const SystemParams& params) {
  return hamiltonian_from_couplings(pulse_amplitude(t, 1, params), pulse_amplitude(t, 2, params),
                                    params);
}

// ---------------------------------------------------------------------------
// Detection frames and jump channels

/// Orthonormal polarization basis {u, v}, amplitudes over (|+>, |->).
struct PolarizationBasis {
  std::array<Complex, 2> u{Complex(1.0), Complex(0.0)};
  std::array<Complex, 2> v{Complex(0.0), Complex(1.0)};
  std::string name = "circular";

  double orthonormality_residual() const {
    const double nu = abs2(u[0]) + abs2(u[1]);
    const double nv = abs2(v[0]) + abs2(v[1]);
    const Complex overlap = std::conj(u[0]) * v[0] + std::conj(u[1]) * v[1];
    return std::max({std::abs(nu - 1.0), std::abs(nv - 1.0), std::abs(overlap)});
  }

  /// Eigenbasis of sigma_z in the circular qubit frame.
  static PolarizationBasis circular() { return {}; }

  /// Eigenbasis of sigma_x: (|+> +- |->)/sqrt2.
  static PolarizationBasis linear_hv() {
    const double r = std::numbers::sqrt2 / 2.0;
    return {{Complex(r), Complex(r)}, {Complex(r), Complex(-r)}, "linear_hv"};
  }

  /// Eigenbasis of sigma_y: (|+> +- i|->)/sqrt2.
  static PolarizationBasis linear_da() {
    const double r = std::numbers::sqrt2 / 2.0;
    return {{Complex(r), Complex(0.0, r)}, {Complex(r), Complex(0.0, -r)}, "linear_da"};
  }

  /// Linear analyzer at angle phi: rotating a linear polarization by phi
  /// multiplies the circular components by exp(-+ i phi).
  static PolarizationBasis linear_at(double phi) {
    const double r = std::numbers::sqrt2 / 2.0;
    const Complex ep = std::polar(r, -phi);
    const Complex em = std::polar(r, phi);
    return {{ep, em}, {ep, -em}, "linear@" + std::to_string(phi)};
  }
};

/// Analyzer basis for each arm (arm 1 watches mode 1, arm 2 watches mode 2).
struct AnalyzerSetting {
  PolarizationBasis arm1;
  PolarizationBasis arm2;

  std::string name() const { return arm1.name + "/" + arm2.name; }
};

enum class ChannelKind { Cavity, Spontaneous };

struct JumpChannel {
  ChannelKind kind;
  int arm;      // longitudinal mode (cavity) or transition (spontaneous): 1 or 2
  int outcome;  // cavity: 0 -> analyzer u, 1 -> analyzer v; spontaneous: 0 -> +, 1 -> -
  double rate;
  Operator op;  // jump operator without the sqrt(rate) prefactor
  std::string name;

  Operator lindblad() const { return Operator(std::sqrt(rate) * op); }
};

inline constexpr int kNumChannels = 8;

/// a_w = conj(w_+) a_+ + conj(w_-) a_-: annihilates a photon of polarization w.
inline Operator projected_annihilation(int mode, const std::array<Complex, 2>& w) {
  return Operator(std::conj(w[0]) * annihilation(Mode{mode, Polarization::Plus}) +
                  std::conj(w[1]) * annihilation(Mode{mode, Polarization::Minus}));
}

/// Eight channels in fixed order: cavity 1u, 1v, 2u, 2v, then spontaneous
/// S1+, S1-, S2+, S2-.
inline std::vector<JumpChannel> jump_operators(const SystemParams& params,
                                               const AnalyzerSetting& setting = {}) {
  std::vector<JumpChannel> channels;
  channels.reserve(kNumChannels);
  auto outcome_label = [](const PolarizationBasis& b, int outcome) -> std::string {
    if (b.name == "circular") return outcome == 0 ? "+" : "-";
    return outcome == 0 ? "u" : "v";
  };
  for (int mode : {1, 2}) {
    const PolarizationBasis& basis = mode == 1 ? setting.arm1 : setting.arm2;
    for (int outcome : {0, 1}) {
      channels.push_back({ChannelKind::Cavity, mode, outcome, params.kappa,
                          projected_annihilation(mode, outcome == 0 ? basis.u : basis.v),
                          "cav" + std::to_string(mode) + outcome_label(basis, outcome)});
    }
  }
  for (int transition : {1, 2}) {
    for (int outcome : {0, 1}) {
      const Polarization pol = outcome == 0 ? Polarization::Plus : Polarization::Minus;
      channels.push_back({ChannelKind::Spontaneous, transition, outcome, params.gamma,
                          lowering(transition, pol),
                          "spont" + std::to_string(transition) + (outcome == 0 ? "+" : "-")});
    }
  }
  return channels;
}

/// sum_m L_m^dag L_m for the given channels.
inline Operator decay_operator(const std::vector<JumpChannel>& channels) {
  Operator total(kDim, kDim);
  for (const JumpChannel& c : channels) {
    if (c.rate == 0.0) continue;
    total += Operator(c.rate * Operator(c.op.adjoint() * c.op));
  }
  total.prune(Complex(0.0), 1e-15);
  total.makeCompressed();
  return total;
}

inline Operator effective_hamiltonian(double t, const SystemParams& params) {
  const Operator decay = decay_operator(jump_operators(params));
  return Operator(hamiltonian(t, params) - Complex(0.0, 0.5) * decay);
}

// ---------------------------------------------------------------------------
// Special states

enum class SpecialLabel { I, B, D, EPlus, EMinus, Lambda };

namespace detail {

inline int index_of(AtomLevel atom, int n1p, int n1m, int n2p, int n2m) {
  return basis_index(atom, {n1p, n1m, n2p, n2m});
}

}  // namespace detail

/// |I>, |B>, |D>, |E+->, or |Lambda(theta)> = cos(theta)|I> - sin(theta)|E+>.
inline StateVector special_state(SpecialLabel label, double theta = 0.0) {
  using detail::index_of;
  const double r = std::numbers::sqrt2 / 2.0;
  StateVector v = StateVector::Zero(kDim);
  // S1+ a1+^dag |I> = |1'_-1> (x) |1_{1+}>, S1- a1-^dag |I> = |1'_1> (x) |1_{1-}>
  const int b_plus = index_of(AtomLevel::MMinus, 1, 0, 0, 0);
  const int b_minus = index_of(AtomLevel::MPlus, 0, 1, 0, 0);
  // S2- a2-^dag S1+ a1+^dag |I> = |0''_0> (x) |1_{1+} 1_{2-}>, and the mirror path
  const int e_plus_minus = index_of(AtomLevel::Ground, 1, 0, 0, 1);
  const int e_minus_plus = index_of(AtomLevel::Ground, 0, 1, 1, 0);
  switch (label) {
    case SpecialLabel::I:
      v(index_of(AtomLevel::G2, 0, 0, 0, 0)) = 1.0;
      return v;
    case SpecialLabel::B:
      v(b_plus) = r;
      v(b_minus) = r;
      return v;
    case SpecialLabel::D:
      v(b_plus) = r;
      v(b_minus) = -r;
      return v;
    case SpecialLabel::EPlus:
      v(e_plus_minus) = r;
      v(e_minus_plus) = r;
      return v;
    case SpecialLabel::EMinus:
      v(e_plus_minus) = r;
      v(e_minus_plus) = -r;
      return v;
    case SpecialLabel::Lambda:
      return std::cos(theta) * special_state(SpecialLabel::I) -
             std::sin(theta) * special_state(SpecialLabel::EPlus);
  }
  throw std::invalid_argument("unknown special state label");
}

/// theta with tan(theta) = sqrt2 g1 / g2.
inline double mixing_angle(double g1, double g2) {
  if (g1 == 0.0 && g2 == 0.0) {
    throw std::domain_error("mixing angle undefined when both couplings vanish");
  }
  return std::atan2(std::numbers::sqrt2 * g1, g2);
}

}  // namespace cqed
