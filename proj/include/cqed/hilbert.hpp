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

// Truncated atom (x) field Hilbert space of the cascade atom and the four
// polarization modes of the two cavity modes.
//
// Basis layout (stable across runs):
//   flat index = atom * 16 + n1+ * 8 + n1- * 4 + n2+ * 2 + n2-
// with each photon number in {0, 1}.

#include <array>
#include <charconv>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cqed {

using Complex = std::complex<double>;

/// |z|^2 without the hypot call std::norm makes for floating types.
inline constexpr double abs2(Complex z) { return z.real() * z.real() + z.imag() * z.imag(); }

/// Plain complex product (no NaN/Inf recovery), for inner loops.
inline constexpr Complex mul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

using StateVector = Eigen::VectorXcd;
using Operator = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<Complex>;

/// Shortest round-trip representation; the same bytes on every platform.
inline std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

inline constexpr int kDim = 64;
inline constexpr int kNumAtomLevels = 4;
inline constexpr int kNumModes = 4;

/// Cascade levels. G2 is |0_0> (top of the cascade), MMinus/MPlus are
/// |1'_{-1}> and |1'_{1}>, Ground is |0''_0>.
enum class AtomLevel : int { G2 = 0, MMinus = 1, MPlus = 2, Ground = 3 };

enum class Polarization : int { Plus = 0, Minus = 1 };

struct Mode {
  int longitudinal;  // 1 or 2
  Polarization polarization;

  friend bool operator==(const Mode&, const Mode&) = default;
};

/// Slot of a mode inside the occupation array (n1+, n1-, n2+, n2-).
inline int mode_slot(Mode mode) {
  if (mode.longitudinal != 1 && mode.longitudinal != 2) {
    throw std::invalid_argument("longitudinal mode must be 1 or 2");
  }
  return (mode.longitudinal - 1) * 2 + static_cast<int>(mode.polarization);
}

inline Mode mode_from_slot(int slot) {
  return Mode{slot / 2 + 1, static_cast<Polarization>(slot % 2)};
}

inline constexpr std::array<Mode, kNumModes> kAllModes = {
    Mode{1, Polarization::Plus}, Mode{1, Polarization::Minus},
    Mode{2, Polarization::Plus}, Mode{2, Polarization::Minus}};

inline constexpr std::array<AtomLevel, kNumAtomLevels> kAllLevels = {
    AtomLevel::G2, AtomLevel::MMinus, AtomLevel::MPlus, AtomLevel::Ground};

using Occupations = std::array<int, kNumModes>;

struct BasisState {
  AtomLevel atom;
  Occupations occupations;  // n1+, n1-, n2+, n2-

  friend bool operator==(const BasisState&, const BasisState&) = default;
};

inline int basis_index(AtomLevel atom, const Occupations& n) {
  for (int bit : n) {
    if (bit != 0 && bit != 1) {
      throw std::invalid_argument("photon occupations are truncated to {0, 1}");
    }
  }
  return static_cast<int>(atom) * 16 + n[0] * 8 + n[1] * 4 + n[2] * 2 + n[3];
}

inline int basis_index(const BasisState& s) { return basis_index(s.atom, s.occupations); }

inline BasisState basis_state(int index) {
  if (index < 0 || index >= kDim) {
    throw std::out_of_range("basis index outside [0, 64)");
  }
  return BasisState{static_cast<AtomLevel>(index / 16),
                    {(index >> 3) & 1, (index >> 2) & 1, (index >> 1) & 1, index & 1}};
}

inline int photon_count(int index) { return __builtin_popcount(static_cast<unsigned>(index & 15)); }

/// Quanta stored in the atom: 2 for |0_0>, 1 for the 1' manifold, 0 for |0''_0>.
inline int atomic_excitation(AtomLevel level) {
  switch (level) {
    case AtomLevel::G2:
      return 2;
    case AtomLevel::MMinus:
    case AtomLevel::MPlus:
      return 1;
    case AtomLevel::Ground:
      return 0;
  }
  throw std::invalid_argument("unknown atom level");
}

inline const char* level_name(AtomLevel level) {
  switch (level) {
    case AtomLevel::G2:
      return "G2";
    case AtomLevel::MMinus:
      return "M_MINUS";
    case AtomLevel::MPlus:
      return "M_PLUS";
    case AtomLevel::Ground:
      return "GROUND";
  }
  return "?";
}

inline StateVector basis_vector(int index) {
  if (index < 0 || index >= kDim) {
    throw std::out_of_range("basis index outside [0, 64)");
  }
  StateVector v = StateVector::Zero(kDim);
  v(index) = 1.0;
  return v;
}

inline Operator from_triplets(const std::vector<Triplet>& entries) {
  Operator op(kDim, kDim);
  op.setFromTriplets(entries.begin(), entries.end());
  op.makeCompressed();
  return op;
}

inline Operator identity_operator() {
  std::vector<Triplet> entries;
  for (int k = 0; k < kDim; ++k) entries.emplace_back(k, k, 1.0);
  return from_triplets(entries);
}

inline Operator annihilation(Mode mode) {
  const int slot = mode_slot(mode);
  std::vector<Triplet> entries;
  for (int k = 0; k < kDim; ++k) {
    BasisState s = basis_state(k);
    if (s.occupations[slot] == 1) {
      s.occupations[slot] = 0;
      entries.emplace_back(basis_index(s), k, 1.0);
    }
  }
  return from_triplets(entries);
}

inline Operator creation(Mode mode) { return Operator(annihilation(mode).adjoint()); }

inline Operator number(Mode mode) {
  const int slot = mode_slot(mode);
  std::vector<Triplet> entries;
  for (int k = 0; k < kDim; ++k) {
    if (basis_state(k).occupations[slot] == 1) entries.emplace_back(k, k, 1.0);
  }
  return from_triplets(entries);
}

/// |to><from| on the atom, identity on the field.
inline Operator atom_transition(AtomLevel to, AtomLevel from) {
  std::vector<Triplet> entries;
  for (int k = 0; k < kDim; ++k) {
    BasisState s = basis_state(k);
    if (s.atom == from) {
      s.atom = to;
      entries.emplace_back(basis_index(s), k, 1.0);
    }
  }
  return from_triplets(entries);
}

inline Operator atom_projector(AtomLevel level) { return atom_transition(level, level); }

/// N = 2|0_0><0_0| + |1'_-1><1'_-1| + |1'_1><1'_1| + sum of photon numbers.
inline Operator excitation_number() {
  std::vector<Triplet> entries;
  for (int k = 0; k < kDim; ++k) {
    const int n = atomic_excitation(basis_state(k).atom) + photon_count(k);
    if (n != 0) entries.emplace_back(k, k, static_cast<double>(n));
  }
  return from_triplets(entries);
}

inline Complex expectation(const Operator& op, const StateVector& psi) {
  if (op.rows() != psi.size() || op.cols() != psi.size()) {
    throw std::invalid_argument("expectation: operator and state dimensions differ (" +
                                std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                                " vs " + std::to_string(psi.size()) + ")");
  }
  return psi.dot(op * psi);  // dot() conjugates the left argument
}

/// max_{ij} |A_ij - conj(A_ji)|
inline double hermiticity_residual(const Operator& op) {
  const Eigen::MatrixXcd dense(op);
  return (dense - dense.adjoint()).cwiseAbs().maxCoeff();
}

inline double max_abs(const Operator& op) {
  double m = 0.0;
  for (int k = 0; k < op.outerSize(); ++k) {
    for (Operator::InnerIterator it(op, k); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

/// Probability of each atomic level in a (not necessarily normalized) state.
inline std::array<double, kNumAtomLevels> atom_populations(const StateVector& psi) {
  std::array<double, kNumAtomLevels> pops{};
  double total = 0.0;
  for (int k = 0; k < kDim; ++k) {
    const double p = abs2(psi(k));
    pops[k / 16] += p;
    total += p;
  }
  if (total > 0.0) {
    for (double& p : pops) p /= total;
  }
  return pops;
}

}  // namespace cqed
