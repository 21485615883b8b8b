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

#include "pdlearn/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pdlearn/errors.hpp"

namespace pdlearn {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng make_rng(std::uint64_t base, std::uint64_t stream) { return Rng(derive_seed(base, stream)); }

double pathloss_db(double distance_m, const SystemConfig& cfg) {
  require(distance_m > 0.0, "pathloss: distance must be positive");
  return -(cfg.pathloss_offset_dB + cfg.pathloss_slope_dB * std::log10(distance_m));
}

double pathloss_gain(double distance_m, const SystemConfig& cfg) {
  return std::pow(10.0, pathloss_db(distance_m, cfg) / 10.0);
}

UserDrop users_at(std::vector<double> distances, const SystemConfig& cfg) {
  UserDrop drop;
  drop.alphas.reserve(distances.size());
  for (double d : distances) drop.alphas.push_back(pathloss_gain(d, cfg));
  drop.distances = std::move(distances);
  return drop;
}

UserDrop sample_users(std::size_t k, Placement placement, const SystemConfig& cfg,
                      std::uint64_t seed) {
  require(k >= 1, "sample_users: need at least one user");
  std::vector<double> d(k, cfg.cell_max_dist);
  if (placement == Placement::UniformRoad) {
    Rng rng = make_rng(seed, 0x75736572);
    std::uniform_real_distribution<double> u(cfg.cell_min_dist, cfg.cell_max_dist);
    for (double& x : d) x = u(rng);
  }
  return users_at(std::move(d), cfg);
}

void sample_fading_into(std::span<double> out, const SystemConfig& cfg, Rng& rng) {
  if (cfg.fading_kind == FadingKind::Exponential) {
    std::exponential_distribution<double> e(1.0);
    for (double& x : out) {
      do x = e(rng); while (!(x > 0.0));
    }
  } else {
    std::gamma_distribution<double> g(static_cast<double>(cfg.num_antennas_Nt), 1.0);
    for (double& x : out) {
      do x = g(rng); while (!(x > 0.0));
    }
  }
}

std::vector<double> sample_fading(std::size_t k, std::size_t n_batch, const SystemConfig& cfg,
                                  std::uint64_t seed) {
  require(k >= 1 && n_batch >= 1, "sample_fading: counts must be positive");
  std::vector<double> out(k * n_batch);
  Rng rng = make_rng(seed, 0x66616465);
  sample_fading_into(out, cfg, rng);
  return out;
}

ChannelBatch make_batch(std::vector<double> alphas, std::size_t n_batch, const SystemConfig& cfg,
                        std::uint64_t seed, std::int64_t slot_index) {
  ChannelBatch b;
  b.k = alphas.size();
  b.n_batch = n_batch;
  b.gains = sample_fading(b.k, n_batch, cfg, seed);
  b.alphas = std::move(alphas);
  b.seed = seed;
  b.slot_index = slot_index;
  return b;
}

FadingLaw FadingLaw::gamma(double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "FadingLaw::gamma: shape and scale must be positive");
  FadingLaw law;
  law.shape_ = shape;
  law.scale_ = scale;
  return law;
}

FadingLaw FadingLaw::discrete(std::vector<double> points, std::vector<double> probs) {
  require(!points.empty() && points.size() == probs.size(), "FadingLaw::discrete: bad support");
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i] > 0.0 && probs[i] >= 0.0, "FadingLaw::discrete: gains > 0, probs >= 0");
    total += probs[i];
  }
  require(std::abs(total - 1.0) < 1e-12, "FadingLaw::discrete: probabilities must sum to 1");
  FadingLaw law;
  law.points_ = std::move(points);
  law.probs_ = std::move(probs);
  return law;
}

FadingLaw FadingLaw::from_config(const SystemConfig& cfg) {
  return cfg.fading_kind == FadingKind::Exponential
             ? exponential()
             : gamma(static_cast<double>(cfg.num_antennas_Nt), 1.0);
}

double FadingLaw::mean() const {
  if (is_discrete())
    return std::inner_product(points_.begin(), points_.end(), probs_.begin(), 0.0);
  return shape_ * scale_;
}

double FadingLaw::sample(Rng& rng) const {
  if (is_discrete()) {
    std::discrete_distribution<std::size_t> pick(probs_.begin(), probs_.end());
    return points_[pick(rng)];
  }
  std::gamma_distribution<double> g(shape_, scale_);
  double x;
  do x = g(rng); while (!(x > 0.0));
  return x;
}

double FadingLaw::expect(const std::function<double(double)>& f,
                         std::span<const double> breakpoints) const {
  if (is_discrete()) {
    double s = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (probs_[i] > 0.0) s += probs_[i] * f(points_[i]);
    return s;
  }
  const boost::math::gamma_distribution<double> dist(shape_, scale_);
  auto integrand = [&](double g) {
    if (g <= 0.0) return 0.0;
    const double p = boost::math::pdf(dist, g);
    return p == 0.0 ? 0.0 : f(g) * p;
  };
  // Finite body up to mean + 40 sd, exp-sinh tail beyond.
  const double sd = std::sqrt(shape_) * scale_;
  const double upper = mean() + 40.0 * sd;
  std::vector<double> cuts{0.0};
  for (double b : breakpoints)
    if (b > 0.0 && b < upper) cuts.push_back(b);
  // Extra cuts around the mode keep the Kronrod panels well resolved.
  for (double m : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) cuts.push_back(std::min(m * mean(), upper));
  cuts.push_back(upper);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  using Kronrod = boost::math::quadrature::gauss_kronrod<double, 61>;
  // A coarse pass measures each panel's share of the total L1 mass; the
  // adaptive pass then asks every panel for accuracy relative to the total, so
  // panels carrying negligible probability do not recurse to full depth.
  const std::size_t panels = cuts.size() - 1;
  std::vector<double> panel_l1(panels, 0.0);
  double total_l1 = 0.0;
  for (std::size_t i = 0; i < panels; ++i) {
    double err = 0.0;
    Kronrod::integrate(integrand, cuts[i], cuts[i + 1], 0, 0.0, &err, &panel_l1[i]);
    total_l1 += panel_l1[i];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < panels; ++i) {
    const double tol = panel_l1[i] > 0.0 ? std::max(1e-13, 1e-14 * total_l1 / panel_l1[i]) : 1.0;
    total += Kronrod::integrate(integrand, cuts[i], cuts[i + 1], 12, tol);
  }
  // Tail beyond mean + 40 sd: one coarse panel is far below the body's error.
  total += Kronrod::integrate(integrand, upper, 2.0 * upper, 0, 0.0);
  return total;
}

double FadingLaw::expect_above(const std::function<double(double)>& f, double lower) const {
  const double bp[1] = {lower};
  return expect([&](double g) { return g > lower ? f(g) : 0.0; }, bp);
}

}  // namespace pdlearn
