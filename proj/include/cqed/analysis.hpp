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

// Observables built from trajectory ensembles: event classes, coincidence
// counts under rotated analyzers, two-qubit tomography of the photon pair,
// fidelity to |Psi+> and CHSH values.
//
// Pair qubits: |+> = 0, |-> = 1 for the mode-1 photon (first factor) and the
// mode-2 photon (second factor). An analyzer outcome u projects the photon
// onto the basis vector u, so its Bloch vector is <u|sigma|u>.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqed/hilbert.hpp"
#include "cqed/model.hpp"
#include "cqed/rng.hpp"
#include "cqed/trajectory.hpp"

namespace cqed {

// ---------------------------------------------------------------------------
// Event classes

enum class EventClass {
  EntangledPair,          // (i)
  SeparableCavityPair,    // (ii)
  OneCavityOneSpont,      // (iii)
  TwoSpont,               // (iv)
  Incomplete,
};

inline constexpr int kNumEventClasses = 5;

inline constexpr std::array<EventClass, kNumEventClasses> kAllEventClasses = {
    EventClass::EntangledPair, EventClass::SeparableCavityPair, EventClass::OneCavityOneSpont,
    EventClass::TwoSpont, EventClass::Incomplete};

inline const char* event_class_name(EventClass c) {
  switch (c) {
    case EventClass::EntangledPair:
      return "ENTANGLED_PAIR";
    case EventClass::SeparableCavityPair:
      return "SEPARABLE_CAVITY_PAIR";
    case EventClass::OneCavityOneSpont:
      return "ONE_CAVITY_ONE_SPONT";
    case EventClass::TwoSpont:
      return "TWO_SPONT";
    case EventClass::Incomplete:
      return "INCOMPLETE";
  }
  throw std::invalid_argument("unknown event class");
}

class MalformedRecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultClassificationThreshold = 0.5;

/// Two cavity jumps split on the atom's 1' population right after the
/// mode-1 jump: above the threshold the photon left before the transfer
/// (separable pair), otherwise entangled pair.
inline EventClass classify(const TrajectoryResult& record, std::span<const JumpChannel> channels,
                           double threshold = kDefaultClassificationThreshold) {
  if (!record.terminated_cleanly) return EventClass::Incomplete;
  if (record.jumps.size() != 2) {
    throw MalformedRecordError("clean record with " + std::to_string(record.jumps.size()) +
                               " jumps (expected 2)");
  }
  int cavity = 0;
  const JumpEvent* mode1 = nullptr;
  for (const JumpEvent& ev : record.jumps) {
    if (ev.channel < 0 || static_cast<std::size_t>(ev.channel) >= channels.size()) {
      throw MalformedRecordError("jump channel index out of range");
    }
    const JumpChannel& c = channels[static_cast<std::size_t>(ev.channel)];
    if (c.kind != ChannelKind::Cavity) continue;
    ++cavity;
    if (c.arm == 1) mode1 = &ev;
  }
  if (cavity == 0) return EventClass::TwoSpont;
  if (cavity == 1) return EventClass::OneCavityOneSpont;
  if (mode1 == nullptr) throw MalformedRecordError("two cavity jumps without a mode-1 photon");
  const auto& pops = mode1->atom_populations;
  const double intermediate = pops[static_cast<std::size_t>(AtomLevel::MMinus)] +
                              pops[static_cast<std::size_t>(AtomLevel::MPlus)];
  return intermediate > threshold ? EventClass::SeparableCavityPair : EventClass::EntangledPair;
}

struct EventTally {
  std::array<std::uint64_t, kNumEventClasses> counts{};

  void add(EventClass c) { ++counts[static_cast<std::size_t>(c)]; }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (std::uint64_t c : counts) n += c;
    return n;
  }
  void merge(const EventTally& other) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  }
};

struct EventProbability {
  EventClass event;
  double probability = 0.0;
  double stderr_ = 0.0;  // binomial
  std::uint64_t count = 0;
};

inline std::vector<EventProbability> event_probabilities(const EventTally& tally) {
  const std::uint64_t n = tally.total();
  if (n == 0) throw std::invalid_argument("event_probabilities needs a non-empty ensemble");
  std::vector<EventProbability> out;
  for (EventClass c : kAllEventClasses) {
    const std::uint64_t k = tally.counts[static_cast<std::size_t>(c)];
    const double p = static_cast<double>(k) / static_cast<double>(n);
    out.push_back({c, p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), k});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coincidence counts

enum Outcome : int { kUU = 0, kUV = 1, kVU = 2, kVV = 3 };

struct SettingCounts {
  AnalyzerSetting setting;
  std::array<std::uint64_t, 4> outcomes{};  // u1u2, u1v2, v1u2, v1v2
  std::uint64_t runs = 0;
  EventTally events;

  std::uint64_t coincidences() const {
    return outcomes[0] + outcomes[1] + outcomes[2] + outcomes[3];
  }
  void merge(const SettingCounts& other) {
    for (std::size_t i = 0; i < 4; ++i) outcomes[i] += other.outcomes[i];
    runs += other.runs;
    events.merge(other.events);
  }
};

struct CoincidenceCounts {
  std::vector<SettingCounts> settings;

  std::uint64_t coincidences() const {
    std::uint64_t n = 0;
    for (const SettingCounts& s : settings) n += s.coincidences();
    return n;
  }
  EventTally pooled_events() const {
    EventTally t;
    for (const SettingCounts& s : settings) t.merge(s.events);
    return t;
  }
};

/// Outcome slot of a clean two-cavity-jump record, or -1 for anything else.
inline int coincidence_outcome(const TrajectoryResult& record,
                               std::span<const JumpChannel> channels) {
  if (!record.terminated_cleanly || record.jumps.size() != 2) return -1;
  int o1 = -1, o2 = -1;
  for (const JumpEvent& ev : record.jumps) {
    const JumpChannel& c = channels[static_cast<std::size_t>(ev.channel)];
    if (c.kind != ChannelKind::Cavity) return -1;
    (c.arm == 1 ? o1 : o2) = c.outcome;
  }
  if (o1 < 0 || o2 < 0) return -1;
  return 2 * o1 + o2;
}

struct EnsembleOptions {
  int threads = 1;
  double threshold = kDefaultClassificationThreshold;
  TrajectoryEngine::Options engine{};
};

/// Runs n_traj trajectories with the cavity channels rotated into `setting`
/// and tallies one outcome per clean two-cavity-jump record. All records are
/// classified into `events`.
inline SettingCounts accumulate_coincidences(const SystemParams& params,
                                             const AnalyzerSetting& setting, std::size_t n_traj,
                                             std::uint64_t seed,
                                             const EnsembleOptions& options = {}) {
  const TrajectoryEngine engine(params, setting, options.engine);
  SettingCounts init;
  init.setting = setting;
  const std::vector<JumpChannel>& channels = engine.channels();
  SettingCounts out = reduce_ensemble(
      engine, n_traj, seed, options.threads, init,
      [&](SettingCounts& t, std::size_t, const TrajectoryResult& r) {
        ++t.runs;
        t.events.add(classify(r, channels, options.threshold));
        const int o = coincidence_outcome(r, channels);
        if (o >= 0) ++t.outcomes[static_cast<std::size_t>(o)];
      },
      [](SettingCounts& a, const SettingCounts& b) { a.merge(b); });
  out.setting = setting;
  return out;
}

/// The 9 settings pairing circular, linear_hv and linear_da on each arm.
inline std::vector<AnalyzerSetting> tomography_settings() {
  const std::array<PolarizationBasis, 3> bases = {
      PolarizationBasis::circular(), PolarizationBasis::linear_hv(),
      PolarizationBasis::linear_da()};
  std::vector<AnalyzerSetting> out;
  for (const PolarizationBasis& a : bases) {
    for (const PolarizationBasis& b : bases) out.push_back({a, b});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-qubit states

using PairDensityMatrix = Eigen::Matrix4cd;
using Matrix2c = Eigen::Matrix2cd;

inline const std::array<Matrix2c, 4>& pauli() {
  static const std::array<Matrix2c, 4> p = [] {
    std::array<Matrix2c, 4> m;
    m[0] << 1, 0, 0, 1;
    m[1] << 0, 1, 1, 0;
    m[2] << 0, Complex(0, -1), Complex(0, 1), 0;
    m[3] << 1, 0, 0, -1;
    return m;
  }();
  return p;
}

inline PairDensityMatrix kron(const Matrix2c& a, const Matrix2c& b) {
  PairDensityMatrix out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  }
  return out;
}

/// (|01> + |10>)/sqrt2: the pair image of |E+>.
inline Eigen::Vector4cd psi_plus() {
  const double r = std::numbers::sqrt2 / 2.0;
  return Eigen::Vector4cd(0.0, r, r, 0.0);
}

inline PairDensityMatrix pure_pair_state(const Eigen::Vector4cd& v) {
  return v * v.adjoint() / v.squaredNorm();
}

/// T_ij = Tr(rho sigma_i (x) sigma_j), i, j in {x, y, z}.
inline Eigen::Matrix3d correlation_tensor(const PairDensityMatrix& rho) {
  Eigen::Matrix3d t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const PairDensityMatrix op = kron(pauli()[static_cast<std::size_t>(i + 1)],
                                        pauli()[static_cast<std::size_t>(j + 1)]);
      t(i, j) = (rho * op).trace().real();
    }
  }
  return t;
}

inline double fidelity(const PairDensityMatrix& rho) {
  const Eigen::Vector4cd v = psi_plus();
  return (v.adjoint() * rho * v)(0, 0).real();
}

/// sqrt2 |T_xx - T_zz|: CHSH at the fixed settings optimal for |Psi+>.
inline double chsh_fixed(const PairDensityMatrix& rho) {
  const Eigen::Matrix3d t = correlation_tensor(rho);
  return std::numbers::sqrt2 * std::abs(t(0, 0) - t(2, 2));
}

/// 2 sqrt(m1 + m2), m1 >= m2 the largest eigenvalues of T^T T.
inline double chsh_max(const PairDensityMatrix& rho) {
  const Eigen::Matrix3d t = correlation_tensor(rho);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(t.transpose() * t,
                                                        Eigen::EigenvaluesOnly);
  const Eigen::Vector3d m = solver.eigenvalues();  // ascending
  return 2.0 * std::sqrt(std::max(0.0, m(2) + m(1)));
}

/// Hermitian part with negative eigenvalues clipped and trace restored.
inline PairDensityMatrix project_physical(const PairDensityMatrix& rho) {
  const PairDensityMatrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<PairDensityMatrix> solver(herm);
  Eigen::Vector4d lambda = solver.eigenvalues().cwiseMax(0.0);
  const double trace = lambda.sum();
  if (trace <= 0.0) throw std::domain_error("no positive weight left after clipping");
  lambda /= trace;
  return solver.eigenvectors() * lambda.cast<Complex>().asDiagonal() *
         solver.eigenvectors().adjoint();
}

/// Bloch vector <w|sigma|w> of a unit polarization vector.
inline Eigen::Vector3d bloch_vector(const std::array<Complex, 2>& w) {
  Eigen::Vector2cd v(w[0], w[1]);
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    out(i) = (v.adjoint() * pauli()[static_cast<std::size_t>(i + 1)] * v)(0, 0).real();
  }
  return out;
}

/// Exact outcome probabilities (u1u2, u1v2, v1u2, v1v2) of rho under a setting.
inline std::array<double, 4> born_probabilities(const PairDensityMatrix& rho,
                                                const AnalyzerSetting& setting) {
  std::array<double, 4> p{};
  const std::array<const std::array<Complex, 2>*, 2> arm1 = {&setting.arm1.u, &setting.arm1.v};
  const std::array<const std::array<Complex, 2>*, 2> arm2 = {&setting.arm2.u, &setting.arm2.v};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const auto& x = *arm1[static_cast<std::size_t>(a)];
      const auto& y = *arm2[static_cast<std::size_t>(b)];
      const Eigen::Vector4cd v(x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1]);
      p[static_cast<std::size_t>(2 * a + b)] = std::max(0.0, (v.adjoint() * rho * v)(0, 0).real());
    }
  }
  return p;
}

/// Multinomial draw of n outcomes over four cells (sequential binomials).
template <class Gen>
std::array<std::uint64_t, 4> multinomial4(std::uint64_t n, std::array<double, 4> p, Gen& gen) {
  std::array<std::uint64_t, 4> out{};
  double rest = p[0] + p[1] + p[2] + p[3];
  std::uint64_t left = n;
  for (std::size_t i = 0; i < 3 && left > 0; ++i) {
    const double q = rest > 0.0 ? std::clamp(p[i] / rest, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::uint64_t> draw(left, q);
    out[i] = draw(gen);
    left -= out[i];
    rest -= p[i];
  }
  out[3] = left;
  return out;
}

/// Synthetic source: counts for each setting drawn from the Born rule.
inline CoincidenceCounts synthetic_counts(const PairDensityMatrix& rho,
                                          std::span<const AnalyzerSetting> settings,
                                          std::uint64_t samples_per_setting, std::uint64_t seed) {
  CoincidenceCounts counts;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    Rng rng(child_seed(seed, s));
    SettingCounts c;
    c.setting = settings[s];
    c.outcomes = multinomial4(samples_per_setting, born_probabilities(rho, settings[s]), rng);
    c.runs = samples_per_setting;
    counts.settings.push_back(c);
  }
  return counts;
}

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Outcome frequencies of one analyzer setting.
struct SettingFrequencies {
  AnalyzerSetting setting;
  std::array<double, 4> frequencies{};  // sum to 1
};

struct Reconstruction {
  PairDensityMatrix raw;       // linear inversion
  PairDensityMatrix physical;  // after clipping
  Eigen::Matrix3d correlations;
  Eigen::Vector3d marginal1;
  Eigen::Vector3d marginal2;
};

/// Linear inversion. Each setting with outcome-u Bloch vectors a (arm 1) and
/// b (arm 2) measures a.r1, b.r2 and a^T T b; the 15 unknowns are fitted by
/// least squares, which is exact for exact frequencies and averages the
/// marginals over repeated bases.
inline Reconstruction reconstruct_from_frequencies(std::span<const SettingFrequencies> data) {
  const auto rows = static_cast<Eigen::Index>(3 * data.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(rows, 15);
  Eigen::VectorXd rhs(rows);
  for (std::size_t s = 0; s < data.size(); ++s) {
    const Eigen::Vector3d a = bloch_vector(data[s].setting.arm1.u);
    const Eigen::Vector3d b = bloch_vector(data[s].setting.arm2.u);
    const auto& f = data[s].frequencies;
    const auto r = static_cast<Eigen::Index>(3 * s);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) design(r, 3 * i + j) = a(i) * b(j);
      design(r + 1, 9 + i) = a(i);
      design(r + 2, 12 + i) = b(i);
    }
    rhs(r) = f[kUU] - f[kUV] - f[kVU] + f[kVV];
    rhs(r + 1) = f[kUU] + f[kUV] - f[kVU] - f[kVV];
    rhs(r + 2) = f[kUU] - f[kUV] + f[kVU] - f[kVV];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 15) {
    throw std::invalid_argument("analyzer settings are not informationally complete");
  }
  const Eigen::VectorXd x = qr.solve(rhs);

  Reconstruction out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out.correlations(i, j) = x(3 * i + j);
    out.marginal1(i) = x(9 + i);
    out.marginal2(i) = x(12 + i);
  }
  const auto& p = pauli();
  PairDensityMatrix rho = kron(p[0], p[0]);
  for (std::size_t i = 0; i < 3; ++i) {
    rho += out.marginal1(static_cast<Eigen::Index>(i)) * kron(p[i + 1], p[0]);
    rho += out.marginal2(static_cast<Eigen::Index>(i)) * kron(p[0], p[i + 1]);
    for (std::size_t j = 0; j < 3; ++j) {
      rho += out.correlations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
             kron(p[i + 1], p[j + 1]);
    }
  }
  out.raw = 0.25 * rho;
  out.physical = project_physical(out.raw);
  return out;
}

inline std::vector<SettingFrequencies> frequencies_of(const CoincidenceCounts& counts) {
  std::vector<SettingFrequencies> data;
  for (const SettingCounts& s : counts.settings) {
    const std::uint64_t n = s.coincidences();
    if (n == 0) {
      throw InsufficientDataError("analyzer setting " + s.setting.name() +
                                  " has no clean coincidences (need at least 1 per setting)");
    }
    SettingFrequencies f{s.setting, {}};
    for (std::size_t i = 0; i < 4; ++i) {
      f.frequencies[i] = static_cast<double>(s.outcomes[i]) / static_cast<double>(n);
    }
    data.push_back(f);
  }
  return data;
}

inline Reconstruction reconstruct_pair_state(const CoincidenceCounts& counts) {
  const std::vector<SettingFrequencies> data = frequencies_of(counts);
  return reconstruct_from_frequencies(data);
}

// ---------------------------------------------------------------------------
// Characterization with bootstrap errors

struct PairFigures {
  double fidelity = 0.0;
  double s_fixed = 0.0;
  double s_max = 0.0;
};

inline PairFigures pair_figures(const PairDensityMatrix& rho) {
  return {fidelity(rho), chsh_fixed(rho), chsh_max(rho)};
}

struct Characterization {
  Reconstruction state;
  PairFigures value;
  PairFigures error;  // bootstrap standard deviations
  std::uint64_t coincidences = 0;
  int bootstrap_samples = 0;
};

inline constexpr int kDefaultBootstrapSamples = 200;

/// Figures of the physical reconstruction; errors from multinomial
/// resampling of every setting's outcome counts.
inline Characterization characterize_counts(const CoincidenceCounts& counts,
                                            int bootstrap_samples, std::uint64_t seed) {
  Characterization out;
  out.state = reconstruct_pair_state(counts);
  out.value = pair_figures(out.state.physical);
  out.coincidences = counts.coincidences();
  out.bootstrap_samples = bootstrap_samples;
  if (bootstrap_samples < 2) return out;

  const std::vector<SettingFrequencies> base = frequencies_of(counts);
  std::array<double, 3> sum{}, sum2{};
  for (int b = 0; b < bootstrap_samples; ++b) {
    Rng rng(child_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<SettingFrequencies> resampled = base;
    for (std::size_t s = 0; s < base.size(); ++s) {
      const std::uint64_t n = counts.settings[s].coincidences();
      const auto draw = multinomial4(n, base[s].frequencies, rng);
      for (std::size_t i = 0; i < 4; ++i) {
        resampled[s].frequencies[i] = static_cast<double>(draw[i]) / static_cast<double>(n);
      }
    }
    const PairFigures f = pair_figures(reconstruct_from_frequencies(resampled).physical);
    const std::array<double, 3> v = {f.fidelity, f.s_fixed, f.s_max};
    for (std::size_t i = 0; i < 3; ++i) {
      sum[i] += v[i];
      sum2[i] += v[i] * v[i];
    }
  }
  const double n = bootstrap_samples;
  std::array<double, 3> sd{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double mean = sum[i] / n;
    sd[i] = std::sqrt(std::max(0.0, (sum2[i] - n * mean * mean) / (n - 1.0)));
  }
  out.error = {sd[0], sd[1], sd[2]};
  return out;
}

/// Amplitudes of |0''_0> (x) one photon per mode, indexed by pair qubits.
inline Eigen::Vector4cd pair_amplitudes(const StateVector& state) {
  if (state.size() != kDim) throw std::invalid_argument("state must have dimension 64");
  Eigen::Vector4cd amp;
  for (int q1 = 0; q1 < 2; ++q1) {
    for (int q2 = 0; q2 < 2; ++q2) {
      amp(2 * q1 + q2) = state(basis_index(AtomLevel::Ground, {1 - q1, q1, 1 - q2, q2}));
    }
  }
  return amp;
}

/// Pair state read directly off a field that stays in the cavity (kappa = 0).
inline PairDensityMatrix pair_state_from_field(const StateVector& final_state) {
  const Eigen::Vector4cd amp = pair_amplitudes(final_state);
  if (amp.squaredNorm() < 1e-12) {
    throw InsufficientDataError("final state has no weight on the one-photon-per-mode subspace");
  }
  return pure_pair_state(amp);
}

// ---------------------------------------------------------------------------
// Export

inline constexpr const char* kRhoCsvHeader = "index,re,im";

/// 16 rows in row-major order.
inline void write_rho_csv(std::ostream& out, const PairDensityMatrix& rho) {
  out << kRhoCsvHeader << '\n';
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      out << 4 * i + j << ',' << fmt(rho(i, j).real()) << ',' << fmt(rho(i, j).imag()) << '\n';
    }
  }
}

}  // namespace cqed
