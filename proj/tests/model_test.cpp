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

#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "cqed/hilbert.hpp"
#include "cqed/model.hpp"

namespace cqed {
namespace {

Complex braket(const StateVector& a, const Operator& h, const StateVector& b) {
  return a.dot(h * b);
}

TEST(Hilbert, IndexRoundTripCoversAllStates) {
  std::set<int> seen;
  for (int k = 0; k < kDim; ++k) {
    const BasisState s = basis_state(k);
    EXPECT_EQ(basis_index(s), k);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 64u);
  EXPECT_EQ(basis_index(AtomLevel::G2, {0, 0, 0, 0}), 0);
  EXPECT_EQ(basis_index(AtomLevel::Ground, {1, 0, 0, 1}), 3 * 16 + 8 + 1);
}

TEST(Hilbert, RejectsBadInput) {
  EXPECT_THROW(basis_state(64), std::out_of_range);
  EXPECT_THROW(basis_index(AtomLevel::G2, {2, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(mode_slot(Mode{3, Polarization::Plus}), std::invalid_argument);
}

TEST(Hilbert, LadderOperators) {
  const Mode m{1, Polarization::Minus};
  const StateVector vac = basis_vector(basis_index(AtomLevel::Ground, {0, 0, 0, 0}));
  const StateVector one = creation(m) * vac;
  EXPECT_NEAR(one.norm(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(one(basis_index(AtomLevel::Ground, {0, 1, 0, 0}))), 1.0, 1e-15);
  EXPECT_NEAR((creation(m) * one).norm(), 0.0, 1e-15);  // truncated at one photon
  EXPECT_NEAR(expectation(number(m), one).real(), 1.0, 1e-15);
}

TEST(Hilbert, ExcitationNumberOfInitialState) {
  const StateVector i = special_state(SpecialLabel::I);
  EXPECT_NEAR(expectation(excitation_number(), i).real(), 2.0, 1e-15);
}

TEST(Model, MixingAngleExamples) {
  EXPECT_NEAR(mixing_angle(0.0, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(mixing_angle(1.0, 0.0), std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(mixing_angle(1.0, std::numbers::sqrt2), std::numbers::pi / 4, 1e-15);
  EXPECT_THROW(mixing_angle(0.0, 0.0), std::domain_error);
}

TEST(Model, SpecialStates) {
  const StateVector i = special_state(SpecialLabel::I);
  const StateVector ep = special_state(SpecialLabel::EPlus);
  const StateVector em = special_state(SpecialLabel::EMinus);
  EXPECT_NEAR((special_state(SpecialLabel::Lambda, 0.0) - i).norm(), 0.0, 1e-15);
  EXPECT_NEAR((special_state(SpecialLabel::Lambda, std::numbers::pi / 2) + ep).norm(), 0.0,
              1e-15);
  EXPECT_NEAR(std::abs(ep.dot(em)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(special_state(SpecialLabel::B).dot(special_state(SpecialLabel::D))), 0.0,
              1e-15);
}

TEST(Model, PulseLayoutIsCenteredAndGated) {
  SystemParams p;
  EXPECT_NEAR(p.pulses.peak2(p.t_total), 50.0 - 13.5, 1e-12);
  EXPECT_NEAR(p.pulses.peak1(p.t_total), 50.0 + 13.5, 1e-12);
  EXPECT_NEAR(pulse_amplitude(p.pulses.peak1(p.t_total), 1, p), 1.0, 1e-15);
  // half maximum at fwhm / 2 from the peak
  EXPECT_NEAR(pulse_amplitude(p.pulses.peak2(p.t_total) + 13.5, 2, p), 0.5, 1e-12);
  EXPECT_EQ(pulse_amplitude(-1e-9, 1, p), 0.0);
  EXPECT_EQ(pulse_amplitude(p.t_total + 1e-9, 2, p), 0.0);
  // counterintuitive order: mode 2 leads
  EXPECT_GT(pulse_amplitude(20.0, 2, p), pulse_amplitude(20.0, 1, p));
}

TEST(Model, DefaultTmax) {
  SystemParams p;
  p.kappa = 1.0;
  p.gamma = 0.01;
  EXPECT_NEAR(p.effective_t_max(), 1100.0, 1e-9);
  p.gamma = 0.001;
  EXPECT_NEAR(p.effective_t_max(), 5000.0, 1e-9);  // ceiling
  p.t_max = 300.0;
  EXPECT_NEAR(p.effective_t_max(), 300.0, 1e-12);
}

TEST(Model, ValidateRejectsNonsense) {
  SystemParams p;
  p.kappa = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SystemParams{};
  p.dt = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SystemParams{};
  p.t_max = 50.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

// Interaction-picture pattern derived by hand from the level scheme:
// <B|H|I> = sqrt2 g1, <E+|H|B> = g2, <E-|H|D> = g2, everything else zero.
TEST(Model, MatrixElementPattern) {
  SystemParams p;
  p.delta1 = 3.0;
  p.delta2 = -1.5;
  const double g1 = 0.7, g2 = 0.4;
  const Operator h = hamiltonian_from_couplings(g1, g2, p);
  const StateVector I = special_state(SpecialLabel::I), B = special_state(SpecialLabel::B),
                    D = special_state(SpecialLabel::D), Ep = special_state(SpecialLabel::EPlus),
                    Em = special_state(SpecialLabel::EMinus);
  EXPECT_NEAR(std::abs(braket(B, h, I)), std::numbers::sqrt2 * g1, 1e-14);
  EXPECT_NEAR(std::abs(braket(Ep, h, B)), g2, 1e-14);
  EXPECT_NEAR(std::abs(braket(Em, h, D)), g2, 1e-14);
  for (auto [a, b] : {std::pair{&D, &I}, {&Ep, &I}, {&Em, &I}, {&Em, &B}, {&Ep, &D}, {&B, &D}}) {
    EXPECT_NEAR(std::abs(braket(*a, h, *b)), 0.0, 1e-14);
  }
  // rotating-frame diagonal
  EXPECT_NEAR(braket(I, h, I).real(), -(p.delta1 + p.delta2), 1e-14);
  EXPECT_NEAR(braket(B, h, B).real(), -p.delta2, 1e-14);
  EXPECT_NEAR(braket(Ep, h, Ep).real(), 0.0, 1e-14);
}

TEST(Model, HermitianAndConservesExcitation) {
  SystemParams p;
  p.delta1 = 2.0;
  p.delta2 = 7.0;
  const Operator n = excitation_number();
  for (double t : {0.0, 13.0, 50.0, 77.7, 100.0}) {
    const Operator h = hamiltonian(t, p);
    EXPECT_LT(hermiticity_residual(h), 1e-14);
    EXPECT_LT(max_abs(Operator(h * n - n * h)), 1e-14);
  }
}

TEST(Model, DarkStateAtTwoPhotonResonance) {
  SystemParams p;
  p.delta1 = 4.0;
  p.delta2 = -4.0;
  for (double t : {10.0, 36.5, 50.0, 63.5, 90.0}) {
    const double g1 = pulse_amplitude(t, 1, p), g2 = pulse_amplitude(t, 2, p);
    const StateVector l = special_state(SpecialLabel::Lambda, mixing_angle(g1, g2));
    const StateVector hl = hamiltonian(t, p) * l;
    EXPECT_LT(hl.norm(), 1e-12) << "t = " << t;
  }
}

TEST(Model, JumpOperatorsOrderAndRates) {
  SystemParams p;
  p.kappa = 0.3;
  p.gamma = 0.02;
  const auto ch = jump_operators(p);
  ASSERT_EQ(ch.size(), 8u);
  for (int m = 0; m < 4; ++m) {
    EXPECT_EQ(ch[m].kind, ChannelKind::Cavity);
    EXPECT_EQ(ch[m].rate, 0.3);
    EXPECT_EQ(ch[m].arm, m < 2 ? 1 : 2);
  }
  for (int m = 4; m < 8; ++m) {
    EXPECT_EQ(ch[m].kind, ChannelKind::Spontaneous);
    EXPECT_EQ(ch[m].rate, 0.02);
  }
  EXPECT_EQ(ch[0].name, "cav1+");
  EXPECT_EQ(ch[7].name, "spont2-");
}

TEST(Model, AnalyzerBasesOrthonormal) {
  for (const auto& b : {PolarizationBasis::circular(), PolarizationBasis::linear_hv(),
                        PolarizationBasis::linear_da(), PolarizationBasis::linear_at(0.3)}) {
    EXPECT_LT(b.orthonormality_residual(), 1e-12) << b.name;
  }
}

// Rotating the detection basis within a mode leaves sum L^dag L unchanged.
TEST(Model, DecayOperatorIndependentOfAnalyzer) {
  SystemParams p;
  p.kappa = 1.0;
  p.gamma = 0.01;
  const Operator ref = decay_operator(jump_operators(p));
  const AnalyzerSetting s{PolarizationBasis::linear_da(), PolarizationBasis::linear_at(1.1)};
  EXPECT_LT(max_abs(Operator(decay_operator(jump_operators(p, s)) - ref)), 1e-14);
}

}  // namespace
}  // namespace cqed
