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

// Closed-form URLLC QoS mathematics. Rates are in packets/slot, bandwidth in
// Hz, power in W. All functions are pure.

#pragma once

#include <span>

#include "pdlearn/config.hpp"

namespace pdlearn {

/// x such that Q(x) = p, Q the standard normal tail. Requires 0 < p < 1.
double inv_gaussian_q(double p);

/// Tail-decay exponent: ln(1 + |ln(eps/2)| / (a * dq_max)).
double qos_exponent(double a, double dq_max, double eps_max);
/// Minimal constant service rate meeting the (dq_max, eps/2) queueing tail:
/// |ln(eps/2)| / (dq_max * theta). Always >= a.
double effective_bandwidth(double a, double dq_max, double eps_max);

struct QosTarget {
  double dq_max = 0.0;
  double theta = 0.0;
  double eb = 0.0;
  double eps_c = 0.0;
  double eps_q = 0.0;
  /// exp(-theta * eb), the bound E{exp(-theta s)} must not exceed.
  double target_exp() const;
};

/// Splits eps_max evenly between decoding and queueing.
QosTarget make_qos_target(const SystemConfig& cfg, double arrival_rate);
inline QosTarget make_qos_target(const SystemConfig& cfg) {
  return make_qos_target(cfg, cfg.arrival_rate_a);
}

/// Finite-blocklength rate with unit channel dispersion and decoding error
/// eps_max/2:
///   s = tau W / (u ln 2) * [ln(1 + gamma) - Qinv / sqrt(tau W)],  gamma = a g P / (N0 W)
/// The "gain" argument everywhere below is the product alpha * g.
class RateModel {
 public:
  explicit RateModel(const SystemConfig& cfg);

  /// Unclamped bracket expression; may be negative.
  double raw(double W, double P, double gain) const;
  /// max(0, raw); zero at W = 0.
  double rate(double W, double P, double gain) const;
  /// d raw / dW at fixed total power P. Requires W > 0.
  double d_dW(double W, double P, double gain) const;
  /// d raw / dP. Requires W > 0.
  double d_dP(double W, double P, double gain) const;

  /// Power proportional to bandwidth, P = P0 * W (fixed spectral density).
  double raw_density(double W, double P0, double gain) const;
  double rate_density(double W, double P0, double gain) const;
  double d_dW_density(double W, double P0, double gain) const;

  double snr(double W, double P, double gain) const { return gain * P / (noise_ * W); }
  double coef() const { return coef_; }
  double qinv() const { return qinv_; }
  double tau() const { return tau_; }
  double noise() const { return noise_; }

 private:
  double tau_;
  double coef_;  // tau / (u ln 2)
  double qinv_;  // Q^{-1}(eps_max / 2)
  double noise_;
};

double achievable_rate(double W, double P, double alpha, double g, const SystemConfig& cfg);
double rate_dW(double W, double P, double alpha, double g, const SystemConfig& cfg);
double rate_dP(double W, double P, double alpha, double g, const SystemConfig& cfg);

/// mean(exp(-theta s)) - exp(-theta B^E); <= 0 means the constraint holds.
double qos_gap(std::span<const double> rates, const QosTarget& target);
/// -(1/theta) ln mean(exp(-theta s)), evaluated with a max shift.
double effective_capacity(std::span<const double> rates, double theta);
/// (mean(exp(theta (B^E - s))) - 1)^+, the relative QoS violation.
double qos_violation(std::span<const double> rates, const QosTarget& target);

}  // namespace pdlearn
