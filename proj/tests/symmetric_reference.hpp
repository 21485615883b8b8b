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


// Projected-gradient reference for the per-slot symmetric power split,
// independent of the closed-form active-set solver.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "pdlearn/config.hpp"

namespace pdlearn::testing {

/// Euclidean projection of v onto {x >= 0, sum x = total}.
inline std::vector<double> project_simplex(std::vector<double> v, double total) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, shift = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - total) / double(i + 1);
    if (u[i] - t > 0.0) shift = t;
  }
  for (double& x : v) x = std::max(x - shift, 0.0);
  return v;
}

/// Minimizes sum_k (1 + g_k x_k)^(-beta) over the scaled simplex with
/// Armijo-backtracked projected gradient, where x_k = P_k alpha / (N0 W) and
/// beta = theta tau W / (u ln 2). Returns powers in watts.
inline std::vector<double> projected_gradient_powers(std::span<const double> gains, double W,
                                                     double alpha, double theta,
                                                     const SystemConfig& cfg,
                                                     int max_iters = 200000) {
  const std::size_t k = gains.size();
  const double unit = cfg.N0 * W / alpha;
  const double budget = cfg.P_max / unit;
  const double beta = theta * cfg.tx_duration_tau * W / (cfg.packet_bits_u * std::numbers::ln2);
  auto f = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::pow(1.0 + gains[i] * x[i], -beta);
    return s;
  };
  std::vector<double> x(k, budget / double(k)), grad(k);
  double step = 0.0;
  double fx = f(x);
  int still = 0;
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i < k; ++i)
      grad[i] = -beta * gains[i] * std::pow(1.0 + gains[i] * x[i], -beta - 1.0);
    if (it == 0) {
      double gmax = 0.0;
      for (double v : grad) gmax = std::max(gmax, std::abs(v));
      step = budget / gmax;
    }
    step *= 2.0;
    std::vector<double> next;
    double fn = 0.0, decrease = 0.0;
    while (true) {
      std::vector<double> trial(k);
      for (std::size_t i = 0; i < k; ++i) trial[i] = x[i] - step * grad[i];
      next = project_simplex(std::move(trial), budget);
      fn = f(next);
      decrease = 0.0;
      for (std::size_t i = 0; i < k; ++i) decrease += grad[i] * (x[i] - next[i]);
      if (fn <= fx - 0.5 * decrease || step < 1e-300) break;
      step *= 0.5;
    }
    double moved = 0.0;
    for (std::size_t i = 0; i < k; ++i) moved = std::max(moved, std::abs(next[i] - x[i]));
    x = std::move(next);
    fx = fn;
    still = moved <= 1e-14 * budget ? still + 1 : 0;
    if (still >= 20) break;
  }
  for (double& v : x) v *= unit;
  return x;
}

}  // namespace pdlearn::testing
