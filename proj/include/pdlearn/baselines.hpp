// Copyright 2026 The pdlearn Authors
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

// Ground-truth solvers used to score the learned policies: the per-alpha
// optimal bandwidth by stochastic approximation, the symmetric closed-form
// power allocation with its active-set fixed point, the joint optimum built
// from the two, the equal-power comparison policy, and water-filling.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pdlearn/channel.hpp"
#include "pdlearn/config.hpp"
#include "pdlearn/qos.hpp"

namespace pdlearn {

/// Controls the bandwidth iteration W <- [W + phi(t) (exp(-theta s) - exp(-theta B^E))]^+.
/// The step is phi(t) = step_fraction * W0 / (1 + decay_rate * t), W0 the
/// Shannon-rate initial guess.
struct StochasticSolveOptions {
  double step_fraction = 0.1;
  double decay_rate = 0.03;
  std::int64_t min_iters = 5000;
  std::int64_t max_iters = 400000;
  std::size_t window = 1000;        // iterations in the update-magnitude window
  double update_tol = 1e-4;         // window mean of |dW| / W
  std::size_t validation_draws = 100000;
  double gap_tol = 1e-3;
  std::uint64_t seed = 1;
};

struct BandwidthSolveResult {
  double bandwidth = 0.0;       // Hz; tail average of the iterates
  double last_iterate = 0.0;    // Hz
  bool converged = false;
  std::int64_t iterations = 0;
  double validation_gap = 0.0;  // qos_gap on a fresh batch at the returned bandwidth
};

/// Shannon-rate guess u B^E ln2 / (tau ln(1 + SNR_mean)) at spectral density P0.
double shannon_bandwidth_guess(double alpha, double P0, const SystemConfig& cfg,
                               const QosTarget& target);

/// Shannon guess for K users splitting P_max equally, iterated to a fixed point
/// in W (the power per Hz depends on W itself).
double equal_split_bandwidth_guess(double alpha, std::size_t k, const SystemConfig& cfg,
                                   const QosTarget& target);

/// Optimal bandwidth for one user with fixed spectral density P0 = P_max / W_max.
BandwidthSolveResult stochastic_bandwidth_solve(double alpha, const SystemConfig& cfg,
                                                const QosTarget& target,
                                                const StochasticSolveOptions& options = {});

/// E{exp(-theta s(W, P, alpha g))} over the fading law by quadrature.
double expected_exp_rate(double alpha, double W, double P, double theta, const FadingLaw& law,
                         const SystemConfig& cfg);
/// QoS violation (E{exp(theta (B^E - s))} - 1)^+ at the fixed spectral density.
double expected_violation(double alpha, double W, const SystemConfig& cfg,
                          const QosTarget& target, const FadingLaw& law);

/// Root of E_g{exp(-theta s(W))} = exp(-theta B^E) in W (TOMS 748 on a
/// doubling bracket) with the expectation evaluated by quadrature. power_of_w maps a bandwidth to the
/// transmit power used at that bandwidth.
double quadrature_bandwidth_solve(double alpha, const SystemConfig& cfg, const QosTarget& target,
                                  const FadingLaw& law,
                                  const std::function<double(double)>& power_of_w,
                                  double rel_tol = 1e-10);
/// Fixed spectral density P_max / W_max under the configured fading law.
double quadrature_bandwidth_solve(double alpha, const SystemConfig& cfg, const QosTarget& target);

struct SymmetricAllocResult {
  std::vector<double> powers;       // W
  std::vector<std::size_t> active;  // sorted user indices with positive power
  double g_threshold = 0.0;
  double residual = 0.0;            // |sum(powers) - P_max|
  int passes = 0;                   // active-set iterations used
};

/// eta = 1 / (1 + theta tau W / (u ln 2))
double power_exponent_eta(double W, double theta, const SystemConfig& cfg);

/// Closed-form optimal power split for users sharing alpha, theta and W.
SymmetricAllocResult symmetric_power_alloc(std::span<const double> gains, double W, double alpha,
                                           double theta, const SystemConfig& cfg);

struct JointOptimalResult {
  double bandwidth_per_user = 0.0;  // Hz
  double sum_bandwidth = 0.0;       // Hz
  bool converged = false;
  std::int64_t iterations = 0;
  std::vector<double> validation_gaps;  // per user
  std::function<std::vector<double>(std::span<const double>)> power_policy;
};

/// Symmetric joint optimum: shared W by stochastic approximation, with the
/// closed-form power split evaluated per fading draw.
JointOptimalResult joint_optimal_solve(const SystemConfig& cfg, std::size_t k, double alpha,
                                       const QosTarget& target,
                                       const StochasticSolveOptions& options = {});

struct EqualPowerResult {
  std::vector<double> bandwidths;  // Hz, per user
  double sum_bandwidth = 0.0;
  bool feasible = true;            // sum_bandwidth <= W_max
  bool converged = true;
};

/// Per-user optimal bandwidth at fixed spectral density P_max / W_max. All
/// users share the solver seed, so identical users get identical bandwidths.
EqualPowerResult equal_power_baseline(const SystemConfig& cfg, std::span<const double> alphas,
                                      const QosTarget& target,
                                      const StochasticSolveOptions& options = {});

struct WaterFillingResult {
  double water_level = 0.0;      // W
  double cutoff_gain = 0.0;      // g below which no power is spent
  double expected_power = 0.0;   // W
  double capacity_bps = 0.0;     // ergodic capacity, bit/s
  double noise_over_gain = 0.0;  // N0 W / alpha
  double power(double g) const;
};

/// P(g) = (mu - N0 W / (alpha g))^+ with E{P} = P_ave, mu found by bisection.
WaterFillingResult water_filling_solve(double alpha, double W, double P_ave, const FadingLaw& law,
                                       const SystemConfig& cfg);
/// W E{log2(1 + alpha g P_ave / (N0 W))}.
double constant_power_capacity(double alpha, double W, double P_ave, const FadingLaw& law,
                               const SystemConfig& cfg);

}  // namespace pdlearn
