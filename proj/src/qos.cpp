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

#include "pdlearn/qos.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pdlearn/errors.hpp"

namespace pdlearn {

namespace {

double q_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Acklam's rational approximation of the standard normal quantile.
double normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) return -normal_quantile(1.0 - p);
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double inv_gaussian_q(double p) {
  require(p > 0.0 && p < 1.0, "inv_gaussian_q: p must lie in (0, 1)");
  double x = -normal_quantile(p);
  // Halley refinement on Q(x) - p; Q'(x) = -phi(x), Q''(x) = x phi(x).
  for (int i = 0; i < 3; ++i) {
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    if (phi == 0.0) break;
    const double f = q_tail(x) - p;
    const double u = f / -phi;
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double qos_exponent(double a, double dq_max, double eps_max) {
  require(a > 0.0 && dq_max > 0.0, "qos_exponent: a and dq_max must be positive");
  require(eps_max > 0.0 && eps_max < 2.0, "qos_exponent: eps_max must lie in (0, 2)");
  return std::log1p(std::abs(std::log(eps_max / 2.0)) / (a * dq_max));
}

double effective_bandwidth(double a, double dq_max, double eps_max) {
  const double theta = qos_exponent(a, dq_max, eps_max);
  return std::abs(std::log(eps_max / 2.0)) / (dq_max * theta);
}

double QosTarget::target_exp() const { return std::exp(-theta * eb); }

QosTarget make_qos_target(const SystemConfig& cfg, double arrival_rate) {
  QosTarget t;
  t.dq_max = cfg.queue_delay_bound();
  t.theta = qos_exponent(arrival_rate, t.dq_max, cfg.eps_max);
  t.eb = effective_bandwidth(arrival_rate, t.dq_max, cfg.eps_max);
  t.eps_c = cfg.eps_max / 2.0;
  t.eps_q = cfg.eps_max / 2.0;
  return t;
}

RateModel::RateModel(const SystemConfig& cfg)
    : tau_(cfg.tx_duration_tau),
      coef_(cfg.tx_duration_tau / (cfg.packet_bits_u * std::numbers::ln2)),
      qinv_(inv_gaussian_q(cfg.eps_max / 2.0)),
      noise_(cfg.N0) {}

double RateModel::raw(double W, double P, double gain) const {
  if (W <= 0.0) return 0.0;
  return coef_ * W * std::log1p(gain * P / (noise_ * W)) - coef_ * qinv_ * std::sqrt(W / tau_);
}

double RateModel::rate(double W, double P, double gain) const {
  return std::max(0.0, raw(W, P, gain));
}

double RateModel::d_dW(double W, double P, double gain) const {
  require(W > 0.0, "rate_dW: bandwidth must be positive");
  const double g = gain * P / (noise_ * W);
  return coef_ * (std::log1p(g) - g / (1.0 + g)) - 0.5 * coef_ * qinv_ / std::sqrt(tau_ * W);
}

double RateModel::d_dP(double W, double P, double gain) const {
  require(W > 0.0, "rate_dP: bandwidth must be positive");
  const double g = gain * P / (noise_ * W);
  return coef_ * W * (gain / (noise_ * W)) / (1.0 + g);
}

double RateModel::raw_density(double W, double P0, double gain) const {
  if (W <= 0.0) return 0.0;
  return coef_ * W * std::log1p(gain * P0 / noise_) - coef_ * qinv_ * std::sqrt(W / tau_);
}

double RateModel::rate_density(double W, double P0, double gain) const {
  return std::max(0.0, raw_density(W, P0, gain));
}

double RateModel::d_dW_density(double W, double P0, double gain) const {
  require(W > 0.0, "rate_dW: bandwidth must be positive");
  // (1/(u ln2)) [tau ln(1 + a g P0 / N0) - (Qinv/2) sqrt(tau / W)]
  return coef_ * std::log1p(gain * P0 / noise_) - 0.5 * coef_ * qinv_ / std::sqrt(tau_ * W);
}

double achievable_rate(double W, double P, double alpha, double g, const SystemConfig& cfg) {
  require(W >= 0.0 && P >= 0.0, "achievable_rate: W and P must be nonnegative");
  return RateModel(cfg).rate(W, P, alpha * g);
}

double rate_dW(double W, double P, double alpha, double g, const SystemConfig& cfg) {
  return RateModel(cfg).d_dW(W, P, alpha * g);
}

double rate_dP(double W, double P, double alpha, double g, const SystemConfig& cfg) {
  return RateModel(cfg).d_dP(W, P, alpha * g);
}

double qos_gap(std::span<const double> rates, const QosTarget& target) {
  require(!rates.empty(), "qos_gap: empty batch");
  double s = 0.0;
  for (double r : rates) s += std::exp(-target.theta * r);
  return s / static_cast<double>(rates.size()) - target.target_exp();
}

double effective_capacity(std::span<const double> rates, double theta) {
  require(!rates.empty(), "effective_capacity: empty batch");
  require(theta > 0.0, "effective_capacity: theta must be positive");
  double shift = -theta * rates[0];
  for (double r : rates) shift = std::max(shift, -theta * r);
  double s = 0.0;
  for (double r : rates) s += std::exp(-theta * r - shift);
  const double log_mean = shift + std::log(s / static_cast<double>(rates.size()));
  return -log_mean / theta;
}

double qos_violation(std::span<const double> rates, const QosTarget& target) {
  require(!rates.empty(), "qos_violation: empty batch");
  double s = 0.0;
  for (double r : rates) s += std::exp(target.theta * (target.eb - r));
  return std::max(0.0, s / static_cast<double>(rates.size()) - 1.0);
}

}  // namespace pdlearn
