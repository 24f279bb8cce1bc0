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

// Monte Carlo wave function engine.
//
// Each step of length dt draws one uniform eps. With the pre-step state psi
// and dp = dt <psi| sum_m L_m^dag L_m |psi>:
//   eps <  dp : channel m is chosen with probability dp_m / dp and
//               psi <- L_m psi / |L_m psi|;
//   eps >= dp : psi is advanced under H_eff with one RK4 step and renormalized.
//
// The effective Hamiltonian is block diagonal in the product basis (blocks
// are the connected components of the coupling graph), so RK4 only touches
// blocks that carry amplitude. Every trajectory starts from |I> and follows
// the same normalized path until its first jump; that path is computed once
// per engine and replayed, which is bit-identical to stepping it directly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cqed/hilbert.hpp"
#include "cqed/model.hpp"
#include "cqed/parallel.hpp"
#include "cqed/rng.hpp"

namespace cqed {

inline constexpr double kMaxJumpProbability = 0.1;
/// Relative weights below this are dropped in the post-pulse free run.
inline constexpr double kNegligibleWeight = 1e-280;

class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JumpEvent {
  double time = 0.0;
  int channel = -1;  // index into TrajectoryEngine::channels()
  std::array<double, kNumAtomLevels> atom_populations{};
  /// Probability that a mode-2 photon is present in the post-jump state or
  /// has already left through a mode-2 cavity channel.
  double mode2_excitation = 0.0;
};

struct TrajectoryResult {
  std::vector<JumpEvent> jumps;
  bool terminated_cleanly = false;  // all excitation emitted before t_max
  StateVector final_state;
  std::uint64_t seed = 0;
  double end_time = 0.0;
  std::vector<StateVector> snapshots;  // one per requested sample time
};

class TrajectoryEngine {
 public:
  struct Options {
    bool share_prefix = true;
  };

  explicit TrajectoryEngine(SystemParams params, AnalyzerSetting setting = {})
      : TrajectoryEngine(std::move(params), std::move(setting), Options{}) {}

  TrajectoryEngine(SystemParams params, AnalyzerSetting setting, Options options)
      : params_(std::move(params)), setting_(std::move(setting)), options_(options) {
    params_.validate();
    if (setting_.arm1.orthonormality_residual() > 1e-12 ||
        setting_.arm2.orthonormality_residual() > 1e-12) {
      throw std::invalid_argument("analyzer bases must be orthonormal");
    }
    channels_ = jump_operators(params_, setting_);
    n_max_ = static_cast<std::int64_t>(std::llround(params_.effective_t_max() / params_.dt));
    build_blocks();
    build_coupling_table();
    prefix_block_ = block_of_[static_cast<std::size_t>(index_of_initial())];
    if (options_.share_prefix) build_prefix();
    build_step_matrices();
  }

  const SystemParams& params() const { return params_; }
  const AnalyzerSetting& setting() const { return setting_; }
  const std::vector<JumpChannel>& channels() const { return channels_; }
  std::int64_t total_steps() const { return n_max_; }
  /// Steps from this index on have all couplings switched off.
  std::int64_t window_steps() const { return window_steps_; }

  /// dt <psi| sum_m L_m^dag L_m |psi> for a normalized psi.
  double jump_probability(const StateVector& psi) const {
    check_dim(psi);
    double s = 0.0;
    for (int k = 0; k < kDim; ++k) s += decay_[k] * abs2(psi(k));
    return params_.dt * s;
  }

  /// One MCWF step from time t with uniform draw eps.
  std::optional<JumpEvent> step(StateVector& psi, double t, double eps) const {
    check_dim(psi);
    Amplitudes amp;
    for (int k = 0; k < kDim; ++k) amp[k] = psi(k);
    const double dp = jump_probability(psi);
    guard(dp, t);
    if (eps < dp) {
      JumpEvent ev = jump(amp, eps, dp, t + params_.dt, false);
      for (int k = 0; k < kDim; ++k) psi(k) = amp[k];
      return ev;
    }
    const std::array<double, 3> g1 = {pulse_amplitude(t, 1, params_),
                                      pulse_amplitude(t + 0.5 * params_.dt, 1, params_),
                                      pulse_amplitude(t + params_.dt, 1, params_)};
    const std::array<double, 3> g2 = {pulse_amplitude(t, 2, params_),
                                      pulse_amplitude(t + 0.5 * params_.dt, 2, params_),
                                      pulse_amplitude(t + params_.dt, 2, params_)};
    for (int b : active_blocks(amp)) advance_block(blocks_[b], amp, g1, g2);
    normalize(amp, active_blocks(amp));
    for (int k = 0; k < kDim; ++k) psi(k) = amp[k];
    return std::nullopt;
  }

  /// (1 - i H_eff dt) integrated by one RK4 step without renormalization.
  StateVector evolve_unnormalized(const StateVector& psi, double t) const {
    check_dim(psi);
    Amplitudes amp;
    for (int k = 0; k < kDim; ++k) amp[k] = psi(k);
    const std::array<double, 3> g1 = {pulse_amplitude(t, 1, params_),
                                      pulse_amplitude(t + 0.5 * params_.dt, 1, params_),
                                      pulse_amplitude(t + params_.dt, 1, params_)};
    const std::array<double, 3> g2 = {pulse_amplitude(t, 2, params_),
                                      pulse_amplitude(t + 0.5 * params_.dt, 2, params_),
                                      pulse_amplitude(t + params_.dt, 2, params_)};
    for (int b : active_blocks(amp)) advance_block(blocks_[b], amp, g1, g2);
    StateVector out(kDim);
    for (int k = 0; k < kDim; ++k) out(k) = amp[k];
    return out;
  }

  /// Full trajectory from |I>: pulses over [0, t_total], then free decay
  /// until the excitation is gone or t_max is reached. Snapshots hold the
  /// normalized state at each sample time (rounded to the step grid).
  TrajectoryResult run(std::uint64_t seed, std::span<const double> sample_times = {}) const {
    TrajectoryResult result;
    result.seed = seed;
    Rng rng(seed);

    std::vector<std::int64_t> samples;
    samples.reserve(sample_times.size());
    for (double ts : sample_times) {
      const auto s = static_cast<std::int64_t>(std::llround(ts / params_.dt));
      if (s < 0 || s > n_max_) throw std::invalid_argument("sample time outside [0, t_max]");
      samples.push_back(s);
    }
    result.snapshots.resize(samples.size());
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
    std::size_t next_sample = 0;
    auto record_until = [&](std::int64_t k, const Amplitudes& amp) {
      while (next_sample < order.size() && samples[order[next_sample]] <= k) {
        result.snapshots[order[next_sample]] = to_vector(amp);
        ++next_sample;
      }
    };

    Amplitudes amp{};
    Work work;
    bool mode2_emitted = false;
    std::int64_t k = 0;

    auto after_jump = [&](const JumpEvent& ev) {
      result.jumps.push_back(ev);
      const JumpChannel& c = channels_[static_cast<std::size_t>(ev.channel)];
      if (c.kind == ChannelKind::Cavity && c.arm == 2) mode2_emitted = true;
      load_work(amp, work);
    };

    bool jumped = false;
    if (options_.share_prefix) {
      const std::int64_t limit = std::min<std::int64_t>(window_steps_, n_max_);
      for (; k < limit; ++k) {
        if (next_sample < order.size() && samples[order[next_sample]] <= k) {
          load_prefix(k, amp);
          record_until(k, amp);
        }
        const double dp = prefix_dp_[static_cast<std::size_t>(k)];
        guard(dp, static_cast<double>(k) * params_.dt);
        const double eps = rng.uniform();
        if (eps < dp) {
          load_prefix(k, amp);
          const JumpEvent ev = jump(amp, eps, dp, static_cast<double>(k + 1) * params_.dt, false);
          ++k;
          after_jump(ev);
          jumped = true;
          break;
        }
      }
      if (!jumped) {
        load_prefix(k, amp);
        load_work(amp, work);
      }
    } else {
      amp[static_cast<std::size_t>(index_of_initial())] = 1.0;
      load_work(amp, work);
    }

    bool frozen = false;
    while (k < n_max_) {
      if (next_sample < order.size() && samples[order[next_sample]] <= k) {
        store_work(work, amp);
        record_until(k, amp);
      }
      if (work.relaxed) break;
      if (k >= window_steps_) {
        const std::int64_t stop =
            next_sample < order.size() ? std::min(samples[order[next_sample]], n_max_) : n_max_;
        const FreeRun run = run_free(work, k, stop, rng);
        k = run.k;
        if (run.frozen) {
          frozen = true;
          break;
        }
        if (run.jumped) {
          store_work(work, amp);
          after_jump(jump(amp, run.eps, run.dp, static_cast<double>(k + 1) * params_.dt,
                          mode2_emitted));
          ++k;
        }
        continue;
      }
      double rate = 0.0;
      for (std::size_t j = 0; j < work.n; ++j) rate += work.decay[j] * abs2(work.y[j]);
      const double dp = params_.dt * rate;
      guard(dp, static_cast<double>(k) * params_.dt);
      const double eps = rng.uniform();
      if (eps < dp) {
        store_work(work, amp);
        after_jump(jump(amp, eps, dp, static_cast<double>(k + 1) * params_.dt, mode2_emitted));
      } else {
        advance_work(k, work);
      }
      ++k;
    }
    store_work(work, amp);
    std::vector<int> active = active_blocks(amp);

    if (frozen) {
      // Only phases evolve from here on; jump straight to each remaining
      // sample and to t_max.
      std::int64_t at = k;
      while (next_sample < order.size()) {
        const std::int64_t s = samples[order[next_sample]];
        advance_free(amp, active, s - at);
        at = s;
        record_until(at, amp);
      }
      advance_free(amp, active, n_max_ - at);
      k = n_max_;
    } else {
      record_until(n_max_, amp);  // relaxed states are stationary
    }

    result.terminated_cleanly = all_relaxed(active);
    result.end_time = result.terminated_cleanly && !result.jumps.empty()
                          ? result.jumps.back().time
                          : static_cast<double>(k) * params_.dt;
    result.final_state = to_vector(amp);
    return result;
  }

 private:
  using Amplitudes = std::array<Complex, kDim>;
  static constexpr std::size_t kMaxBlock = 16;

  struct Link {
    int row;
    int col;
    int pulse;  // 0 -> g1, 1 -> g2
    double coef;
  };

  struct Block {
    std::vector<int> states;
    std::vector<Complex> diag;  // E - i decay / 2
    std::vector<double> decay;
    std::vector<Complex> free_factor;  // RK4 amplification with couplings off
    std::vector<Link> links;
    int excitation = 0;
  };

  // Amplitudes of the blocks that carry weight, packed block by block.
  struct Work {
    std::size_t n = 0;
    std::array<Complex, kDim> y{};
    std::array<double, kDim> decay{};
    std::array<Complex, kDim> free_factor{};
    std::array<int, kDim> state{};
    std::vector<std::pair<int, std::size_t>> segments;  // (block, offset)
    bool relaxed = true;
  };

  static int index_of_initial() { return basis_index(AtomLevel::G2, {0, 0, 0, 0}); }

  static void check_dim(const StateVector& psi) {
    if (psi.size() != kDim) throw std::invalid_argument("state vector must have dimension 64");
  }

  void guard(double dp, double t) const {
    if (dp >= kMaxJumpProbability) [[unlikely]] step_size_error(dp, t);
  }

  [[noreturn, gnu::noinline, gnu::cold]] void step_size_error(double dp, double t) const {
    throw StepSizeError("jump probability " + std::to_string(dp) + " >= " +
                        std::to_string(kMaxJumpProbability) + " at t=" + std::to_string(t) +
                        "; reduce dt (currently " + std::to_string(params_.dt) +
                        ") for kappa=" + std::to_string(params_.kappa) +
                        ", gamma=" + std::to_string(params_.gamma));
  }

  static StateVector to_vector(const Amplitudes& amp) {
    StateVector v(kDim);
    for (int k = 0; k < kDim; ++k) v(k) = amp[static_cast<std::size_t>(k)];
    return v;
  }

  void build_blocks() {
    const HamiltonianParts parts = hamiltonian_parts(params_);
    const Operator decay_op = decay_operator(channels_);
    decay_.assign(kDim, 0.0);
    for (int k = 0; k < decay_op.outerSize(); ++k) {
      for (Operator::InnerIterator it(decay_op, k); it; ++it) {
        if (it.row() != it.col() && std::abs(it.value()) > 1e-14) {
          throw std::logic_error("decay operator is not diagonal in the product basis");
        }
        if (it.row() == it.col()) decay_[static_cast<std::size_t>(k)] = it.value().real();
      }
    }
    // connected components of the coupling graph
    std::array<int, kDim> parent{};
    for (int k = 0; k < kDim; ++k) parent[static_cast<std::size_t>(k)] = k;
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
      return x;
    };
    for (const Operator* op : {&parts.coupling1, &parts.coupling2}) {
      for (int r = 0; r < op->outerSize(); ++r) {
        for (Operator::InnerIterator it(*op, r); it; ++it) {
          parent[static_cast<std::size_t>(find(static_cast<int>(it.row())))] =
              find(static_cast<int>(it.col()));
        }
      }
    }
    std::array<int, kDim> root_to_block;
    root_to_block.fill(-1);
    for (int k = 0; k < kDim; ++k) {
      const int root = find(k);
      int& b = root_to_block[static_cast<std::size_t>(root)];
      if (b < 0) {
        b = static_cast<int>(blocks_.size());
        blocks_.emplace_back();
      }
      Block& blk = blocks_[static_cast<std::size_t>(b)];
      block_of_[static_cast<std::size_t>(k)] = b;
      local_of_[static_cast<std::size_t>(k)] = static_cast<int>(blk.states.size());
      blk.states.push_back(k);
      const double e = level_energy(basis_state(k).atom, params_.delta1, params_.delta2);
      const double d = decay_[static_cast<std::size_t>(k)];
      blk.diag.emplace_back(e, -0.5 * d);
      blk.decay.push_back(d);
      const Complex z = Complex(0.0, -1.0) * blk.diag.back() * params_.dt;
      blk.free_factor.push_back(1.0 + z * (1.0 + z / 2.0 * (1.0 + z / 3.0 * (1.0 + z / 4.0))));
      blk.excitation = atomic_excitation(basis_state(k).atom) + photon_count(k);
    }
    for (int pulse = 0; pulse < 2; ++pulse) {
      const Operator& op = pulse == 0 ? parts.coupling1 : parts.coupling2;
      for (int r = 0; r < op.outerSize(); ++r) {
        for (Operator::InnerIterator it(op, r); it; ++it) {
          const auto row = static_cast<std::size_t>(it.row());
          const auto col = static_cast<std::size_t>(it.col());
          Block& blk = blocks_[static_cast<std::size_t>(block_of_[row])];
          blk.links.push_back({local_of_[row], local_of_[col], pulse, it.value().real()});
        }
      }
    }
    for (const Block& blk : blocks_) {
      if (blk.states.size() > kMaxBlock) throw std::logic_error("coupling block too large");
    }
  }

  void build_coupling_table() {
    // Steps whose three RK4 stage times all lie after t_total run free.
    window_steps_ = static_cast<std::int64_t>(std::floor(params_.t_total / params_.dt));
    while (static_cast<double>(window_steps_) * params_.dt <= params_.t_total) ++window_steps_;
    const std::size_t n = static_cast<std::size_t>(2 * window_steps_ + 1);
    g_table_[0].resize(n);
    g_table_[1].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 0.5 * static_cast<double>(i) * params_.dt;
      g_table_[0][i] = pulse_amplitude(t, 1, params_);
      g_table_[1][i] = pulse_amplitude(t, 2, params_);
    }
  }

  void build_prefix() {
    const std::int64_t steps = std::min(window_steps_, n_max_);
    const Block& blk = blocks_[static_cast<std::size_t>(prefix_block_)];
    const std::size_t width = blk.states.size();
    prefix_states_.resize(static_cast<std::size_t>(steps + 1) * width);
    prefix_dp_.resize(static_cast<std::size_t>(steps));
    Amplitudes amp{};
    amp[static_cast<std::size_t>(index_of_initial())] = 1.0;
    const std::vector<int> active = {prefix_block_};
    for (std::int64_t k = 0; k <= steps; ++k) {
      double rate = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        const Complex c = amp[static_cast<std::size_t>(blk.states[j])];
        prefix_states_[static_cast<std::size_t>(k) * width + j] = c;
        rate += blk.decay[j] * abs2(c);
      }
      if (k == steps) break;
      prefix_dp_[static_cast<std::size_t>(k)] = params_.dt * rate;
      advance_step(k, amp, active);
    }
  }

  void load_prefix(std::int64_t k, Amplitudes& amp) const {
    const Block& blk = blocks_[static_cast<std::size_t>(prefix_block_)];
    const std::size_t width = blk.states.size();
    amp.fill(Complex(0.0));
    for (std::size_t j = 0; j < width; ++j) {
      amp[static_cast<std::size_t>(blk.states[j])] =
          prefix_states_[static_cast<std::size_t>(k) * width + j];
    }
  }

  std::vector<int> active_blocks(const Amplitudes& amp) const {
    std::vector<int> active;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      for (int s : blocks_[b].states) {
        if (amp[static_cast<std::size_t>(s)] != Complex(0.0)) {
          active.push_back(static_cast<int>(b));
          break;
        }
      }
    }
    return active;
  }

  bool all_relaxed(const std::vector<int>& active) const {
    return std::all_of(active.begin(), active.end(), [&](int b) {
      return blocks_[static_cast<std::size_t>(b)].excitation == 0;
    });
  }

  void normalize(Amplitudes& amp, const std::vector<int>& active) const {
    double n2 = 0.0;
    for (int b : active) {
      for (int s : blocks_[static_cast<std::size_t>(b)].states) {
        n2 += abs2(amp[static_cast<std::size_t>(s)]);
      }
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (int b : active) {
      for (int s : blocks_[static_cast<std::size_t>(b)].states) {
        amp[static_cast<std::size_t>(s)] *= inv;
      }
    }
  }

  /// One RK4 step of block b on its packed amplitudes y (in place); g1/g2
  /// hold the couplings at t, t + dt/2, t + dt.
  void advance_local(const Block& blk, Complex* y, const std::array<double, 3>& g1,
                     const std::array<double, 3>& g2) const {
    const std::size_t n = blk.states.size();
    if (g1[0] == 0.0 && g1[1] == 0.0 && g1[2] == 0.0 && g2[0] == 0.0 && g2[1] == 0.0 &&
        g2[2] == 0.0) {
      for (std::size_t j = 0; j < n; ++j) y[j] = mul(y[j], blk.free_factor[j]);
      return;
    }
    std::array<Complex, kMaxBlock> k1, k2, k3, k4, tmp;
    auto deriv = [&](const Complex* x, double c1, double c2, std::array<Complex, kMaxBlock>& out) {
      for (std::size_t j = 0; j < n; ++j) out[j] = mul(blk.diag[j], x[j]);
      for (const Link& l : blk.links) {
        out[static_cast<std::size_t>(l.row)] +=
            (l.pulse == 0 ? c1 : c2) * l.coef * x[static_cast<std::size_t>(l.col)];
      }
      for (std::size_t j = 0; j < n; ++j) out[j] = Complex(out[j].imag(), -out[j].real());
    };
    const double h = params_.dt;
    deriv(y, g1[0], g2[0], k1);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
    deriv(tmp.data(), g1[1], g2[1], k2);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
    deriv(tmp.data(), g1[1], g2[1], k3);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + h * k3[j];
    deriv(tmp.data(), g1[2], g2[2], k4);
    for (std::size_t j = 0; j < n; ++j) {
      y[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
  }

  void advance_block(const Block& blk, Amplitudes& amp, const std::array<double, 3>& g1,
                     const std::array<double, 3>& g2) const {
    std::array<Complex, kMaxBlock> y{};
    const std::size_t n = blk.states.size();
    for (std::size_t j = 0; j < n; ++j) y[j] = amp[static_cast<std::size_t>(blk.states[j])];
    advance_local(blk, y.data(), g1, g2);
    for (std::size_t j = 0; j < n; ++j) amp[static_cast<std::size_t>(blk.states[j])] = y[j];
  }

  std::array<double, 3> couplings(std::int64_t k, int pulse) const {
    if (k >= window_steps_) return {0.0, 0.0, 0.0};
    const auto i = static_cast<std::size_t>(2 * k);
    const std::vector<double>& g = g_table_[static_cast<std::size_t>(pulse)];
    return {g[i], g[i + 1], g[i + 2]};
  }

  void load_work(const Amplitudes& amp, Work& work) const {
    work.n = 0;
    work.segments.clear();
    work.relaxed = true;
    for (int b : active_blocks(amp)) {
      const Block& blk = blocks_[static_cast<std::size_t>(b)];
      work.segments.emplace_back(b, work.n);
      if (blk.excitation != 0) work.relaxed = false;
      for (std::size_t j = 0; j < blk.states.size(); ++j, ++work.n) {
        work.state[work.n] = blk.states[j];
        work.y[work.n] = amp[static_cast<std::size_t>(blk.states[j])];
        work.decay[work.n] = blk.decay[j];
        work.free_factor[work.n] = blk.free_factor[j];
      }
    }
  }

  static void store_work(const Work& work, Amplitudes& amp) {
    amp.fill(Complex(0.0));
    for (std::size_t j = 0; j < work.n; ++j) amp[static_cast<std::size_t>(work.state[j])] = work.y[j];
  }

  /// No-jump step k of the packed working set, followed by renormalization.
  void advance_work(std::int64_t k, Work& work) const {
    if (k >= window_steps_) {
      for (std::size_t j = 0; j < work.n; ++j) work.y[j] = mul(work.y[j], work.free_factor[j]);
    } else {
      for (const auto& [b, offset] : work.segments) {
        const Block& blk = blocks_[static_cast<std::size_t>(b)];
        Complex* y = work.y.data() + offset;
        const std::vector<Complex>& mats = step_matrices_[static_cast<std::size_t>(b)];
        const std::size_t n = blk.states.size();
        if (mats.empty()) {
          advance_local(blk, y, couplings(k, 0), couplings(k, 1));
          continue;
        }
        const Complex* m = mats.data() + static_cast<std::size_t>(k) * n * n;
        if (n == 2) {
          const Complex y0 = y[0], y1 = y[1];
          y[0] = mul(m[0], y0) + mul(m[1], y1);
          y[1] = mul(m[2], y0) + mul(m[3], y1);
          continue;
        }
        std::array<Complex, kMaxBlock> in;
        std::copy_n(y, n, in.begin());
        for (std::size_t r = 0; r < n; ++r) {
          Complex acc(0.0);
          for (std::size_t c = 0; c < n; ++c) acc += mul(m[r * n + c], in[c]);
          y[r] = acc;
        }
      }
    }
    double n2 = 0.0;
    for (std::size_t j = 0; j < work.n; ++j) n2 += abs2(work.y[j]);
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t j = 0; j < work.n; ++j) work.y[j] *= inv;
  }

  struct FreeRun {
    std::int64_t k;      // step at which the run stopped
    bool jumped = false;  // a jump fires in step k (eps, dp below)
    bool frozen = false;  // dp == 0: nothing can happen any more
    double eps = 0.0;
    double dp = 0.0;
  };

  /// MCWF steps k, k+1, ... < stop with the couplings off. H_eff is then
  /// diagonal with constant per-step factors f_j, so only the weights
  /// |y_j|^2 are tracked step by step; amplitudes are rebuilt as
  /// y_j f_j^n (normalized) when the run stops.
  FreeRun run_free(Work& work, std::int64_t k, std::int64_t stop, Rng& rng) const {
    const std::size_t n = work.n;
    std::array<double, kDim> w, f2;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = abs2(work.y[j]);
      f2[j] = abs2(work.free_factor[j]);
      total += w[j];
    }
    for (std::size_t j = 0; j < n; ++j) w[j] /= total;
    const std::int64_t start = k;
    FreeRun out{stop};
    const double dt = params_.dt;
    for (; k < stop; ++k) {
      double sum = 0.0, rate = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        sum += w[j];
        rate += work.decay[j] * w[j];
      }
      if (rate == 0.0) {
        out = {k, false, true};
        break;
      }
      // eps < dt * rate / sum, without the division on the common path
      if (dt * rate >= kMaxJumpProbability * sum) guard(dt * rate / sum, static_cast<double>(k) * dt);
      const double eps = rng.uniform();
      if (eps * sum < dt * rate) {
        out = {k, true, false, eps, dt * rate / sum};
        break;
      }
      for (std::size_t j = 0; j < n; ++j) w[j] *= f2[j];
      if (((k - start) & 255) == 255) {
        // A decaying weight would otherwise stall at the smallest subnormal
        // (w * f2 rounds back to w) and the run would never freeze.
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < n; ++j) {
          w[j] *= inv;
          if (w[j] < kNegligibleWeight) w[j] = 0.0;
        }
      }
    }
    propagate_free(work, out.k - start);
    return out;
  }

  /// y_j <- y_j f_j^steps, normalized; in log-magnitude form so strongly
  /// damped components underflow to zero instead of taking the norm along.
  static void propagate_free(Work& work, std::int64_t steps) {
    if (steps <= 0) return;
    const auto n_steps = static_cast<double>(steps);
    std::array<double, kDim> log_mag;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < work.n; ++j) {
      log_mag[j] = work.y[j] == Complex(0.0)
                       ? -std::numeric_limits<double>::infinity()
                       : std::log(std::abs(work.y[j])) + n_steps * std::log(std::abs(work.free_factor[j]));
      peak = std::max(peak, log_mag[j]);
    }
    double n2 = 0.0;
    for (std::size_t j = 0; j < work.n; ++j) {
      const double phase = std::arg(work.y[j]) + n_steps * std::arg(work.free_factor[j]);
      work.y[j] = std::polar(std::exp(log_mag[j] - peak), phase);
      n2 += abs2(work.y[j]);
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t j = 0; j < work.n; ++j) work.y[j] *= inv;
  }

  /// RK4 is linear in the state, so each in-window step of a coupled block is
  /// a fixed matrix. Tabulated for the blocks a trajectory can reach after
  /// its first jump.
  void build_step_matrices() {
    step_matrices_.assign(blocks_.size(), {});
    std::vector<bool> reached(blocks_.size(), false);
    std::vector<int> queue = {block_of_[static_cast<std::size_t>(index_of_initial())]};
    reached[static_cast<std::size_t>(queue.front())] = true;
    while (!queue.empty()) {
      const int b = queue.back();
      queue.pop_back();
      for (const JumpChannel& c : channels_) {
        if (c.rate == 0.0) continue;
        for (int col = 0; col < c.op.outerSize(); ++col) {
          for (Operator::InnerIterator it(c.op, col); it; ++it) {
            if (block_of_[static_cast<std::size_t>(it.col())] != b) continue;
            const int to = block_of_[static_cast<std::size_t>(it.row())];
            if (!reached[static_cast<std::size_t>(to)]) {
              reached[static_cast<std::size_t>(to)] = true;
              queue.push_back(to);
            }
          }
        }
      }
    }
    const std::int64_t steps = std::min(window_steps_, n_max_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Block& blk = blocks_[b];
      const std::size_t n = blk.states.size();
      // the initial block always runs RK4 directly, prefix or not
      if (!reached[b] || blk.links.empty() || static_cast<int>(b) == prefix_block_) continue;
      std::vector<Complex>& mats = step_matrices_[b];
      mats.resize(static_cast<std::size_t>(steps) * n * n);
      for (std::int64_t k = 0; k < steps; ++k) {
        const auto g1 = couplings(k, 0), g2 = couplings(k, 1);
        Complex* m = mats.data() + static_cast<std::size_t>(k) * n * n;
        for (std::size_t c = 0; c < n; ++c) {
          std::array<Complex, kMaxBlock> e{};
          e[c] = 1.0;
          advance_local(blk, e.data(), g1, g2);
          for (std::size_t r = 0; r < n; ++r) m[r * n + c] = e[r];
        }
      }
    }
  }

  /// No-jump step k using tabulated couplings, followed by renormalization.
  void advance_step(std::int64_t k, Amplitudes& amp, const std::vector<int>& active) const {
    const auto g1 = couplings(k, 0), g2 = couplings(k, 1);
    for (int b : active) advance_block(blocks_[static_cast<std::size_t>(b)], amp, g1, g2);
    normalize(amp, active);
  }

  void advance_free(Amplitudes& amp, const std::vector<int>& active, std::int64_t steps) const {
    if (steps <= 0) return;
    for (int b : active) {
      const Block& blk = blocks_[static_cast<std::size_t>(b)];
      for (std::size_t j = 0; j < blk.states.size(); ++j) {
        amp[static_cast<std::size_t>(blk.states[j])] *=
            std::pow(blk.free_factor[j], static_cast<double>(steps));
      }
    }
    normalize(amp, active);
  }

  JumpEvent jump(Amplitudes& amp, double eps, double dp, double time, bool mode2_emitted) const {
    Eigen::VectorXcd psi(kDim);
    for (int k = 0; k < kDim; ++k) psi(k) = amp[static_cast<std::size_t>(k)];
    std::array<double, kNumChannels> weight{};
    for (std::size_t m = 0; m < channels_.size(); ++m) {
      if (channels_[m].rate == 0.0) continue;
      weight[m] = params_.dt * channels_[m].rate * (channels_[m].op * psi).squaredNorm();
    }
    // eps is uniform on [0, dp); reuse it to pick the channel, mapped onto
    // the recomputed weights so rounding differences cannot skew the choice.
    double total = 0.0;
    for (double w : weight) total += w;
    if (dp > 0.0) eps *= total / dp;
    int chosen = -1;
    double cumulative = 0.0;
    for (std::size_t m = 0; m < channels_.size(); ++m) {
      if (weight[m] <= 0.0) continue;
      cumulative += weight[m];
      chosen = static_cast<int>(m);
      if (eps < cumulative) break;
    }
    if (chosen < 0) throw std::logic_error("jump requested from a state with no decay");
    const JumpChannel& c = channels_[static_cast<std::size_t>(chosen)];
    Eigen::VectorXcd post = c.op * psi;
    post /= post.norm();
    for (int k = 0; k < kDim; ++k) amp[static_cast<std::size_t>(k)] = post(k);

    JumpEvent ev;
    ev.time = time;
    ev.channel = chosen;
    ev.atom_populations = atom_populations(post);
    double mode2 = 0.0;
    for (int k = 0; k < kDim; ++k) {
      const BasisState s = basis_state(k);
      mode2 += abs2(post(k)) * (s.occupations[2] + s.occupations[3]);
    }
    const bool emitted = mode2_emitted || (c.kind == ChannelKind::Cavity && c.arm == 2);
    ev.mode2_excitation = std::min(1.0, mode2 + (emitted ? 1.0 : 0.0));
    return ev;
  }

  SystemParams params_;
  AnalyzerSetting setting_;
  Options options_;
  std::vector<JumpChannel> channels_;
  std::int64_t n_max_ = 0;
  std::int64_t window_steps_ = 0;

  std::vector<double> decay_;
  std::vector<Block> blocks_;
  std::array<int, kDim> block_of_{};
  std::array<int, kDim> local_of_{};
  std::array<std::vector<double>, 2> g_table_;

  int prefix_block_ = 0;
  std::vector<Complex> prefix_states_;
  std::vector<double> prefix_dp_;
  std::vector<std::vector<Complex>> step_matrices_;
};

/// Child seed of trajectory `index` within an ensemble stream.
inline std::uint64_t trajectory_seed(std::uint64_t stream_seed, std::size_t index) {
  return child_seed(stream_seed, index);
}

inline TrajectoryResult run_trajectory(const SystemParams& params, std::uint64_t seed) {
  return TrajectoryEngine(params).run(seed);
}

/// Trajectory k uses trajectory_seed(master_seed, k); results in index order.
inline std::vector<TrajectoryResult> run_ensemble(const SystemParams& params, std::size_t n_traj,
                                                  std::uint64_t master_seed, int threads = 1) {
  if (n_traj == 0) throw std::invalid_argument("run_ensemble needs n_traj >= 1");
  const TrajectoryEngine engine(params);
  std::vector<TrajectoryResult> results(n_traj);
  parallel_reduce(
      n_traj, threads, 0,
      [&](int&, std::size_t i) { results[i] = engine.run(trajectory_seed(master_seed, i)); },
      [](int&, const int&) {});
  return results;
}

/// Folds `n` trajectories of one engine into a Tally. fold(Tally&, index,
/// const TrajectoryResult&); merge(Tally&, const Tally&). Deterministic for
/// any thread count.
template <class Tally, class Fold, class Merge>
Tally reduce_ensemble(const TrajectoryEngine& engine, std::size_t n, std::uint64_t stream_seed,
                      int threads, Tally init, Fold fold, Merge merge,
                      std::span<const double> sample_times = {}) {
  return parallel_reduce(
      n, threads, std::move(init),
      [&](Tally& tally, std::size_t i) {
        const TrajectoryResult r = engine.run(trajectory_seed(stream_seed, i), sample_times);
        fold(tally, i, r);
      },
      merge);
}

inline const char* kJumpCsvHeader =
    "trajectory_index,time,channel,pop_G2,pop_M_MINUS,pop_M_PLUS,pop_GROUND,mode2_excitation";

/// One CSV line per jump (see kJumpCsvHeader).
inline void write_jump_records(std::ostream& out, std::size_t index, const TrajectoryResult& r,
                               const std::vector<JumpChannel>& channels) {
  for (const JumpEvent& ev : r.jumps) {
    out << index << ',' << fmt(ev.time) << ','
        << channels[static_cast<std::size_t>(ev.channel)].name;
    for (double p : ev.atom_populations) out << ',' << fmt(p);
    out << ',' << fmt(ev.mode2_excitation) << '\n';
  }
}

}  // namespace cqed
