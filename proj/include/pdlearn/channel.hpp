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

// Random environment: path-loss large-scale gains and per-slot small-scale
// fading. Every sampler is a pure function of (arguments, seed); the generator
// is std::mt19937_64 seeded through splitmix64.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "pdlearn/config.hpp"

namespace pdlearn {

using Rng = std::mt19937_64;

/// splitmix64 finalizer over (base, stream); decorrelates derived seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
Rng make_rng(std::uint64_t base, std::uint64_t stream = 0);

enum class Placement { UniformRoad, CellEdge };

/// alpha = 10^(-(offset + slope * log10(d)) / 10)
double pathloss_gain(double distance_m, const SystemConfig& cfg);
/// 10 log10(alpha) in dB (negative).
double pathloss_db(double distance_m, const SystemConfig& cfg);

struct UserDrop {
  std::vector<double> distances;
  std::vector<double> alphas;
};

UserDrop sample_users(std::size_t k, Placement placement, const SystemConfig& cfg,
                      std::uint64_t seed);
UserDrop users_at(std::vector<double> distances, const SystemConfig& cfg);

struct ChannelBatch {
  std::vector<double> alphas;  // one per user
  std::vector<double> gains;   // n_batch x k, row-major
  std::size_t n_batch = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::int64_t slot_index = 0;

  std::span<const double> row(std::size_t n) const { return {gains.data() + n * k, k}; }
  double gain(std::size_t n, std::size_t user) const { return gains[n * k + user]; }
};

/// n_batch x k i.i.d. small-scale gains: Exp(1) or Gamma(Nt, 1).
std::vector<double> sample_fading(std::size_t k, std::size_t n_batch, const SystemConfig& cfg,
                                  std::uint64_t seed);
/// Draws into an existing buffer with a caller-owned generator.
void sample_fading_into(std::span<double> out, const SystemConfig& cfg, Rng& rng);

ChannelBatch make_batch(std::vector<double> alphas, std::size_t n_batch, const SystemConfig& cfg,
                        std::uint64_t seed, std::int64_t slot_index = 0);

/// Distribution of a scalar small-scale gain, with exact expectations by
/// adaptive quadrature (continuous laws) or enumeration (discrete laws).
class FadingLaw {
 public:
  static FadingLaw gamma(double shape, double scale = 1.0);
  static FadingLaw exponential() { return gamma(1.0, 1.0); }
  static FadingLaw discrete(std::vector<double> points, std::vector<double> probs);
  static FadingLaw point_mass(double g) { return discrete({g}, {1.0}); }
  static FadingLaw from_config(const SystemConfig& cfg);

  bool is_discrete() const { return !points_.empty(); }
  double mean() const;
  double sample(Rng& rng) const;
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& probs() const { return probs_; }

  /// E{f(g)}. breakpoints are locations where f has a kink; they become
  /// quadrature interval boundaries.
  double expect(const std::function<double(double)>& f,
                std::span<const double> breakpoints = {}) const;
  /// E{f(g) ; g > lower}.
  double expect_above(const std::function<double(double)>& f, double lower) const;

 private:
  double shape_ = 1.0;
  double scale_ = 1.0;
  std::vector<double> points_;
  std::vector<double> probs_;
};

}  // namespace pdlearn
