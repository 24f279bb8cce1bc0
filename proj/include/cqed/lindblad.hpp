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

// Deterministic density-matrix evolution under the master equation
//   d rho / dt = -i [H(t), rho] + sum_m (L_m rho L_m^dag - 1/2 {L_m^dag L_m, rho})
// with the same H(t) and eight channels as the trajectory engine. Used as
// the oracle the trajectory ensembles are checked against.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cqed/hilbert.hpp"
#include "cqed/model.hpp"

namespace cqed {

using DensityMatrix = Eigen::MatrixXcd;

class LindbladSolver {
 public:
  explicit LindbladSolver(SystemParams params, AnalyzerSetting setting = {})
      : params_(std::move(params)), parts_(hamiltonian_parts(params_)) {
    params_.validate();
    for (const JumpChannel& c : jump_operators(params_, setting)) {
      if (c.rate == 0.0) continue;
      jumps_.push_back(c.lindblad());
      jumps_adj_.push_back(Operator(jumps_.back().adjoint()));
    }
    decay_ = decay_operator(jump_operators(params_, setting));
  }

  const SystemParams& params() const { return params_; }

  DensityMatrix rhs(const DensityMatrix& rho, double t) const {
    return rhs_with_couplings(rho, pulse_amplitude(t, 1, params_), pulse_amplitude(t, 2, params_));
  }

  DensityMatrix rhs_with_couplings(const DensityMatrix& rho, double g1, double g2) const {
    if (rho.rows() != kDim || rho.cols() != kDim) {
      throw std::invalid_argument("density matrix must be 64x64");
    }
    const Operator h = parts_.assemble(g1, g2);
    const Complex minus_i(0.0, -1.0);
    DensityMatrix out = minus_i * (h * rho);
    out.noalias() -= minus_i * (rho * h);
    out.noalias() -= 0.5 * (decay_ * rho);
    out.noalias() -= 0.5 * (rho * decay_);
    for (std::size_t m = 0; m < jumps_.size(); ++m) {
      const DensityMatrix l_rho = jumps_[m] * rho;
      out.noalias() += l_rho * jumps_adj_[m];
    }
    return out;
  }

  /// RK4 from rho(0) = |I><I| with step params.dt; one snapshot per sample
  /// time (rounded to the step grid), returned in the order given.
  std::vector<std::pair<double, DensityMatrix>> evolve(std::span<const double> sample_times) const {
    const double dt = params_.dt;
    const double t_limit = params_.effective_t_max();
    std::vector<std::int64_t> steps;
    for (double ts : sample_times) {
      if (ts < 0.0 || ts > t_limit + 0.5 * dt) {
        throw std::invalid_argument("sample time outside [0, t_max]");
      }
      steps.push_back(static_cast<std::int64_t>(std::llround(ts / dt)));
    }
    std::vector<std::size_t> order(steps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return steps[a] < steps[b]; });

    std::vector<std::pair<double, DensityMatrix>> out(steps.size());
    const StateVector initial = special_state(SpecialLabel::I);
    DensityMatrix rho = initial * initial.adjoint();
    std::int64_t k = 0;
    for (std::size_t idx : order) {
      for (; k < steps[idx]; ++k) rk4_step(rho, static_cast<double>(k) * dt);
      out[idx] = {sample_times[idx], rho};
    }
    return out;
  }

  void rk4_step(DensityMatrix& rho, double t) const {
    const double h = params_.dt;
    const double g1a = pulse_amplitude(t, 1, params_), g2a = pulse_amplitude(t, 2, params_);
    const double g1b = pulse_amplitude(t + 0.5 * h, 1, params_);
    const double g2b = pulse_amplitude(t + 0.5 * h, 2, params_);
    const double g1c = pulse_amplitude(t + h, 1, params_), g2c = pulse_amplitude(t + h, 2, params_);
    const DensityMatrix k1 = rhs_with_couplings(rho, g1a, g2a);
    const DensityMatrix k2 = rhs_with_couplings(rho + 0.5 * h * k1, g1b, g2b);
    const DensityMatrix k3 = rhs_with_couplings(rho + 0.5 * h * k2, g1b, g2b);
    const DensityMatrix k4 = rhs_with_couplings(rho + h * k3, g1c, g2c);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

 private:
  SystemParams params_;
  HamiltonianParts parts_;
  std::vector<Operator> jumps_;
  std::vector<Operator> jumps_adj_;
  Operator decay_;
};

inline DensityMatrix lindblad_rhs(const DensityMatrix& rho, double t, const SystemParams& params) {
  return LindbladSolver(params).rhs(rho, t);
}

inline std::vector<std::pair<double, DensityMatrix>> evolve_density(
    const SystemParams& params, std::span<const double> sample_times) {
  return LindbladSolver(params).evolve(sample_times);
}

/// 1/2 sum |eigenvalues(a - b)| for Hermitian a, b.
inline double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const Eigen::MatrixXcd diff = 0.5 * ((a - b) + (a - b).adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(diff, Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

inline double min_eigenvalue(const Eigen::MatrixXcd& rho) {
  const Eigen::MatrixXcd herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// Populations of |I>, |B>, |D>, |E+>, |E-> and the mean excitation number.
struct ManifoldSnapshot {
  double time = 0.0;
  std::array<double, 5> populations{};
  double excitation = 0.0;
};

inline ManifoldSnapshot manifold_snapshot(double t, const DensityMatrix& rho) {
  static const std::array<SpecialLabel, 5> labels = {SpecialLabel::I, SpecialLabel::B,
                                                      SpecialLabel::D, SpecialLabel::EPlus,
                                                      SpecialLabel::EMinus};
  static const Operator n_op = excitation_number();
  ManifoldSnapshot snap;
  snap.time = t;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const StateVector v = special_state(labels[i]);
    snap.populations[i] = v.dot(rho * v).real();
  }
  snap.excitation = (n_op * rho).trace().real();
  return snap;
}

inline constexpr const char* kOracleCsvHeader =
    "time,pop_I,pop_B,pop_D,pop_E_plus,pop_E_minus,excitation";

inline void write_oracle_row(std::ostream& out, const ManifoldSnapshot& s) {
  out << fmt(s.time);
  for (double p : s.populations) out << ',' << fmt(p);
  out << ',' << fmt(s.excitation) << '\n';
}

}  // namespace cqed
