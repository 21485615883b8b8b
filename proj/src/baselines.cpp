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

#include "pdlearn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/tools/roots.hpp>

#include "pdlearn/errors.hpp"
#include "pdlearn/kernels.hpp"

namespace pdlearn {

namespace {

// Draws one small-scale gain per call without re-creating the distribution.
class GainSampler {
 public:
  GainSampler(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t stream)
      : rng_(make_rng(seed, stream)),
        shape_(cfg.fading_kind == FadingKind::Exponential ? 1.0
                                                           : static_cast<double>(cfg.num_antennas_Nt)),
        dist_(shape_, 1.0) {}

  double operator()() {
    double x;
    do x = dist_(rng_); while (!(x > 0.0));
    return x;
  }

 private:
  Rng rng_;
  double shape_;
  std::gamma_distribution<double> dist_;
};

constexpr std::uint64_t kStreamIterate = 0x10;
constexpr std::uint64_t kStreamValidate = 0x20;

// Sliding mean of relative update magnitudes and a consecutive-below counter.
class UpdateWindow {
 public:
  UpdateWindow(std::size_t size, double tol) : buf_(size, 1.0), tol_(tol), sum_(double(size)) {}

  void push(double rel_update) {
    sum_ += rel_update - buf_[pos_];
    buf_[pos_] = rel_update;
    pos_ = (pos_ + 1) % buf_.size();
    quiet_ = sum_ / double(buf_.size()) < tol_ ? quiet_ + 1 : 0;
  }
  bool settled() const { return quiet_ >= buf_.size(); }
  void reset() { quiet_ = 0; }

 private:
  std::vector<double> buf_;
  std::size_t pos_ = 0;
  double tol_;
  double sum_;
  std::size_t quiet_ = 0;
};

double tail_mean(const std::vector<double>& xs) {
  const std::size_t start = xs.size() / 2;
  double s = 0.0;
  for (std::size_t i = start; i < xs.size(); ++i) s += xs[i];
  return s / double(xs.size() - start);
}

}  // namespace

double shannon_bandwidth_guess(double alpha, double P0, const SystemConfig& cfg,
                               const QosTarget& target) {
  const double snr = alpha * cfg.fading_mean() * P0 / cfg.N0;
  return cfg.packet_bits_u * target.eb * std::numbers::ln2 /
         (cfg.tx_duration_tau * std::log1p(snr));
}

double equal_split_bandwidth_guess(double alpha, std::size_t k, const SystemConfig& cfg,
                                   const QosTarget& target) {
  require(k >= 1, "equal_split_bandwidth_guess: need at least one user");
  double w = shannon_bandwidth_guess(alpha, cfg.power_density(), cfg, target);
  for (int i = 0; i < 100; ++i) {
    const double next = shannon_bandwidth_guess(alpha, cfg.P_max / (double(k) * w), cfg, target);
    if (std::abs(next - w) <= 1e-12 * w) break;
    w = next;
  }
  return w;
}

BandwidthSolveResult stochastic_bandwidth_solve(double alpha, const SystemConfig& cfg,
                                                const QosTarget& target,
                                                const StochasticSolveOptions& options) {
  require(alpha > 0.0, "stochastic_bandwidth_solve: alpha must be positive");
  const RateModel model(cfg);
  const double P0 = cfg.power_density();
  const double w0 = shannon_bandwidth_guess(alpha, P0, cfg, target);
  const double c = options.step_fraction * w0;
  const double target_exp = target.target_exp();

  GainSampler draw(cfg, options.seed, kStreamIterate);
  UpdateWindow window(options.window, options.update_tol);
  std::vector<double> iterates;
  iterates.reserve(static_cast<std::size_t>(std::min<std::int64_t>(options.max_iters, 1 << 20)));

  BandwidthSolveResult res;
  double w = w0;
  int attempt = 0;
  for (std::int64_t t = 0; t < options.max_iters; ++t) {
    const double s = model.rate_density(w, P0, alpha * draw());
    const double step = c / (1.0 + options.decay_rate * double(t));
    const double next = std::max(0.0, w + step * (std::exp(-target.theta * s) - target_exp));
    window.push(w > 0.0 ? std::abs(next - w) / w : 1.0);
    w = next;
    iterates.push_back(w);
    res.iterations = t + 1;
    if (t + 1 < options.min_iters || !window.settled()) continue;

    const double candidate = tail_mean(iterates);
    const auto gains = sample_fading(1, options.validation_draws, cfg,
                                     derive_seed(options.seed, kStreamValidate + attempt++));
    const double gap =
        kernels::mean_exp_rate_density(model, candidate, P0, alpha, gains, target.theta) -
        target_exp;
    res.bandwidth = candidate;
    res.validation_gap = gap;
    if (std::abs(gap) <= options.gap_tol) {
      res.converged = true;
      break;
    }
    window.reset();
  }
  res.last_iterate = w;
  if (!res.converged) {
    res.bandwidth = iterates.empty() ? w0 : tail_mean(iterates);
    const auto gains = sample_fading(1, options.validation_draws, cfg,
                                     derive_seed(options.seed, kStreamValidate + attempt));
    res.validation_gap =
        kernels::mean_exp_rate_density(model, res.bandwidth, P0, alpha, gains, target.theta) -
        target_exp;
  }
  return res;
}

double expected_exp_rate(double alpha, double W, double P, double theta, const FadingLaw& law,
                         const SystemConfig& cfg) {
  require(alpha > 0.0 && W > 0.0 && P > 0.0, "expected_exp_rate: alpha, W, P > 0");
  const RateModel model(cfg);
  // The rate clamps at zero below this gain.
  const double g0 =
      std::expm1(model.qinv() / std::sqrt(model.tau() * W)) * cfg.N0 * W / (alpha * P);
  const double kink[] = {g0};
  return law.expect([&](double g) { return std::exp(-theta * model.rate(W, P, alpha * g)); },
                    kink);
}

double expected_violation(double alpha, double W, const SystemConfig& cfg,
                          const QosTarget& target, const FadingLaw& law) {
  const double m = expected_exp_rate(alpha, W, cfg.power_density() * W, target.theta, law, cfg);
  return std::max(0.0, m / target.target_exp() - 1.0);
}

double quadrature_bandwidth_solve(double alpha, const SystemConfig& cfg, const QosTarget& target,
                                  const FadingLaw& law,
                                  const std::function<double(double)>& power_of_w,
                                  double rel_tol) {
  require(alpha > 0.0, "quadrature_bandwidth_solve: alpha must be positive");
  const double target_exp = target.target_exp();
  auto excess = [&](double w) {
    return expected_exp_rate(alpha, w, power_of_w(w), target.theta, law, cfg) - target_exp;
  };
  // Bracket the root by doubling from the Shannon guess, then refine with TOMS 748.
  double hi = shannon_bandwidth_guess(alpha, cfg.power_density(), cfg, target);
  double f_hi = excess(hi);
  double lo = hi;
  double f_lo = f_hi;
  if (f_hi > 0.0) {
    do {
      lo = hi;
      f_lo = f_hi;
      hi *= 2.0;
      f_hi = excess(hi);
    } while (f_hi > 0.0);
  } else {
    do {
      hi = lo;
      f_hi = f_lo;
      lo *= 0.5;
      f_lo = excess(lo);
    } while (f_lo <= 0.0 && lo > 1e-6);
  }
  if (f_hi == 0.0) return hi;
  const int bits = std::clamp(static_cast<int>(std::ceil(-std::log2(rel_tol))) + 1, 8, 52);
  std::uintmax_t max_iter = 200;
  const auto root = boost::math::tools::toms748_solve(
      excess, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(bits), max_iter);
  return 0.5 * (root.first + root.second);
}

double quadrature_bandwidth_solve(double alpha, const SystemConfig& cfg, const QosTarget& target) {
  const double p0 = cfg.power_density();
  return quadrature_bandwidth_solve(alpha, cfg, target, FadingLaw::from_config(cfg),
                                    [p0](double w) { return p0 * w; });
}

double power_exponent_eta(double W, double theta, const SystemConfig& cfg) {
  return 1.0 / (1.0 + theta * cfg.tx_duration_tau * W /
                          (cfg.packet_bits_u * std::numbers::ln2));
}

SymmetricAllocResult symmetric_power_alloc(std::span<const double> gains, double W, double alpha,
                                           double theta, const SystemConfig& cfg) {
  require(!gains.empty(), "symmetric_power_alloc: no users");
  require(W > 0.0 && alpha > 0.0 && theta > 0.0, "symmetric_power_alloc: W, alpha, theta > 0");
  for (double g : gains) require(g > 0.0 && std::isfinite(g), "symmetric_power_alloc: gains > 0");

  const std::size_t k = gains.size();
  const double eta = power_exponent_eta(W, theta, cfg);
  const double unit = cfg.N0 * W / alpha;  // P_k = unit / g_k * ((g_k / g_th)^eta - 1)
  const double budget = cfg.P_max / unit;

  SymmetricAllocResult res;
  res.powers.assign(k, 0.0);
  std::vector<std::size_t> active(k);
  std::iota(active.begin(), active.end(), 0);
  std::vector<double> gpow(k);
  for (std::size_t i = 0; i < k; ++i) gpow[i] = std::pow(gains[i], eta);

  while (true) {
    ++res.passes;
    double inv_sum = 0.0;
    double pow_sum = 0.0;
    for (std::size_t i : active) {
      inv_sum += 1.0 / gains[i];
      pow_sum += gpow[i] / gains[i];
    }
    // (g_th)^(-eta) = (alpha P_max / (N0 W) + sum 1/g) / sum g^(eta-1)
    const double level = (budget + inv_sum) / pow_sum;
    std::vector<std::size_t> keep;
    keep.reserve(active.size());
    for (std::size_t i : active)
      if (gpow[i] * level - 1.0 > 0.0) keep.push_back(i);
    if (keep.size() == active.size() || keep.empty()) {
      require(!keep.empty(), "symmetric_power_alloc: empty active set");
      std::fill(res.powers.begin(), res.powers.end(), 0.0);
      for (std::size_t i : active) res.powers[i] = unit / gains[i] * (gpow[i] * level - 1.0);
      res.g_threshold = std::pow(level, -1.0 / eta);
      res.active = active;
      break;
    }
    active = std::move(keep);
  }
  const double total = std::accumulate(res.powers.begin(), res.powers.end(), 0.0);
  res.residual = std::abs(total - cfg.P_max);
  return res;
}

namespace {

// Per-user mean of exp(-theta s_k) under the symmetric optimal split.
std::vector<double> symmetric_moments(const SystemConfig& cfg, std::size_t k, double alpha,
                                      double W, double theta, std::size_t draws,
                                      std::uint64_t seed) {
  const RateModel model(cfg);
  const auto gains = sample_fading(k, draws, cfg, seed);
  auto sums = kernels::chunked_sum_vec(draws, k, [&](std::size_t n, std::span<double> acc) {
    std::span<const double> g(gains.data() + n * k, k);
    const auto alloc = symmetric_power_alloc(g, W, alpha, theta, cfg);
    for (std::size_t i = 0; i < k; ++i)
      acc[i] += std::exp(-theta * model.rate(W, alloc.powers[i], alpha * g[i]));
  });
  for (double& s : sums) s /= double(draws);
  return sums;
}

}  // namespace

JointOptimalResult joint_optimal_solve(const SystemConfig& cfg, std::size_t k, double alpha,
                                       const QosTarget& target,
                                       const StochasticSolveOptions& options) {
  require(k >= 1, "joint_optimal_solve: need at least one user");
  const RateModel model(cfg);
  const double target_exp = target.target_exp();
  const double w0 = equal_split_bandwidth_guess(alpha, k, cfg, target);
  const double c = options.step_fraction * w0;

  GainSampler draw(cfg, options.seed, kStreamIterate);
  UpdateWindow window(options.window, options.update_tol);
  std::vector<double> iterates;
  std::vector<double> g(k);

  JointOptimalResult res;
  double w = w0;
  int attempt = 0;
  double estimate = w0;
  for (std::int64_t t = 0; t < options.max_iters; ++t) {
    for (double& x : g) x = draw();
    const auto alloc = symmetric_power_alloc(g, w, alpha, target.theta, cfg);
    double sample = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      sample += std::exp(-target.theta * model.rate(w, alloc.powers[i], alpha * g[i]));
    sample = sample / double(k) - target_exp;
    const double step = c / (1.0 + options.decay_rate * double(t));
    const double next = std::max(1e-9 * w0, w + step * sample);
    window.push(std::abs(next - w) / w);
    w = next;
    iterates.push_back(w);
    res.iterations = t + 1;
    if (t + 1 < options.min_iters || !window.settled()) continue;

    estimate = tail_mean(iterates);
    const auto moments = symmetric_moments(cfg, k, alpha, estimate, target.theta,
                                           options.validation_draws / k + 1,
                                           derive_seed(options.seed, kStreamValidate + attempt++));
    const double pooled = std::accumulate(moments.begin(), moments.end(), 0.0) / double(k);
    if (std::abs(pooled - target_exp) <= options.gap_tol) {
      res.converged = true;
      break;
    }
    window.reset();
  }
  if (!res.converged) estimate = iterates.empty() ? w0 : tail_mean(iterates);

  res.bandwidth_per_user = estimate;
  res.sum_bandwidth = estimate * double(k);
  const auto moments = symmetric_moments(cfg, k, alpha, estimate, target.theta,
                                         options.validation_draws,
                                         derive_seed(options.seed, kStreamValidate + 1000));
  for (double m : moments) res.validation_gaps.push_back(m - target_exp);
  const double theta = target.theta;
  const SystemConfig cfg_copy = cfg;
  res.power_policy = [cfg_copy, estimate, alpha, theta](std::span<const double> gains) {
    return symmetric_power_alloc(gains, estimate, alpha, theta, cfg_copy).powers;
  };
  return res;
}

EqualPowerResult equal_power_baseline(const SystemConfig& cfg, std::span<const double> alphas,
                                      const QosTarget& target,
                                      const StochasticSolveOptions& options) {
  require(!alphas.empty(), "equal_power_baseline: no users");
  EqualPowerResult res;
  res.bandwidths.assign(alphas.size(), 0.0);
  std::vector<char> ok(alphas.size(), 1);
  kernels::parallel_for(alphas.size(), [&](std::size_t i) {
    const auto r = stochastic_bandwidth_solve(alphas[i], cfg, target, options);
    res.bandwidths[i] = r.bandwidth;
    ok[i] = r.converged ? 1 : 0;
  });
  res.sum_bandwidth = std::accumulate(res.bandwidths.begin(), res.bandwidths.end(), 0.0);
  res.converged = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
  res.feasible = res.sum_bandwidth <= cfg.W_max;
  return res;
}

double WaterFillingResult::power(double g) const {
  return g > 0.0 ? std::max(0.0, water_level - noise_over_gain / g) : 0.0;
}

WaterFillingResult water_filling_solve(double alpha, double W, double P_ave, const FadingLaw& law,
                                       const SystemConfig& cfg) {
  require(alpha > 0.0 && W > 0.0 && P_ave > 0.0, "water_filling_solve: alpha, W, P_ave > 0");
  WaterFillingResult res;
  res.noise_over_gain = cfg.N0 * W / alpha;
  const double c = res.noise_over_gain;
  auto mean_power = [&](double mu) {
    return law.expect_above([&](double g) { return mu - c / g; }, c / mu);
  };
  double lo = 0.0;
  double hi = P_ave;
  while (mean_power(hi) < P_ave) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_power(mid) < P_ave ? lo : hi) = mid;
  }
  res.water_level = 0.5 * (lo + hi);
  res.cutoff_gain = c / res.water_level;
  res.expected_power = mean_power(res.water_level);
  const double mu = res.water_level;
  res.capacity_bps = W * law.expect_above([&](double g) { return std::log2(g * mu / c); },
                                          res.cutoff_gain);
  return res;
}

double constant_power_capacity(double alpha, double W, double P_ave, const FadingLaw& law,
                               const SystemConfig& cfg) {
  const double snr_unit = alpha * P_ave / (cfg.N0 * W);
  return W * law.expect([&](double g) { return std::log2(1.0 + snr_unit * g); });
}

}  // namespace pdlearn
