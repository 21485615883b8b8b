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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracle_values.hpp"
#include "pdlearn/channel.hpp"
#include "pdlearn/config.hpp"
#include "pdlearn/errors.hpp"

using namespace pdlearn;

TEST_CASE("default configuration") {
  const SystemConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.queue_delay_bound() == 8);
  CHECK(cfg.fading_mean() == 8.0);
  CHECK(10.0 * std::log10(cfg.P_max * 1000.0) == doctest::Approx(43.0).epsilon(1e-12));
  CHECK(10.0 * std::log10(cfg.N0 * 1000.0) == doctest::Approx(-173.0).epsilon(1e-12));
}

TEST_CASE("config text round-trips and overrides apply") {
  SystemConfig cfg;
  cfg.arrival_rate_a = 0.37;
  cfg.fading_kind = FadingKind::Exponential;
  cfg.num_antennas_Nt = 4;
  const SystemConfig back = parse_config(cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());
  CHECK(back.hash() == cfg.hash());
  CHECK(SystemConfig{}.hash() != cfg.hash());

  const SystemConfig o = parse_config(
      "# comment\n[system]\nP_max_dBm = 30\nN0_dBm_per_Hz = -174  # trailing\n"
      "fading_kind = \"exponential\"\n");
  CHECK(o.P_max == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(o.N0 == doctest::Approx(std::pow(10.0, -20.4)).epsilon(1e-14));
  CHECK(o.fading_kind == FadingKind::Exponential);
  CHECK(o.eps_max == SystemConfig{}.eps_max);
}

TEST_CASE("shipped default config matches the built-in defaults") {
  const SystemConfig cfg = load_config(PDLEARN_SOURCE_DIR "/configs/default.toml");
  CHECK(cfg.to_text() == SystemConfig{}.to_text());
}

TEST_CASE("invalid configuration is rejected") {
  CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("eps_max = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("eps_max = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("num_antennas_Nt = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dl_delay_bound_Dmax = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("tx_duration_tau = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("fading_kind = rician\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/pdlearn.toml"), ConfigError);
}

TEST_CASE("path loss oracles") {
  const SystemConfig cfg;
  CHECK(std::log10(pathloss_gain(10.0, cfg)) == doctest::Approx(oracle::kLog10Alpha_10m).epsilon(1e-13));
  CHECK(std::log10(pathloss_gain(250.0, cfg)) ==
        doctest::Approx(oracle::kLog10Alpha_250m).epsilon(1e-13));
  CHECK(pathloss_db(1.0, cfg) == doctest::Approx(-35.3));
  double prev = 1.0;
  for (double d = 50.0; d <= 250.0; d += 10.0) {
    CHECK(pathloss_gain(d, cfg) < prev);
    prev = pathloss_gain(d, cfg);
  }
  CHECK_THROWS_AS(pathloss_gain(0.0, cfg), ContractViolation);
}

TEST_CASE("user placement") {
  const SystemConfig cfg;
  const UserDrop edge = sample_users(5, Placement::CellEdge, cfg, 3);
  for (double d : edge.distances) CHECK(d == cfg.cell_max_dist);
  const UserDrop road = sample_users(200, Placement::UniformRoad, cfg, 3);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(road.distances[i] >= cfg.cell_min_dist);
    CHECK(road.distances[i] <= cfg.cell_max_dist);
    CHECK(road.alphas[i] == pathloss_gain(road.distances[i], cfg));
  }
  CHECK(sample_users(200, Placement::UniformRoad, cfg, 3).distances == road.distances);
  CHECK(sample_users(200, Placement::UniformRoad, cfg, 4).distances != road.distances);
}

TEST_CASE("fading gains are positive, seeded and have the right moments") {
  for (FadingKind kind : {FadingKind::GammaNt, FadingKind::Exponential}) {
    SystemConfig cfg;
    cfg.fading_kind = kind;
    const std::size_t k = 4, n = 50000;
    const auto g = sample_fading(k, n, cfg, 9);
    REQUIRE(g.size() == k * n);
    double sum = 0.0, sq = 0.0;
    std::size_t nonpositive = 0;
    for (double x : g) {
      nonpositive += x > 0.0 ? 0 : 1;
      sum += x;
      sq += x * x;
    }
    CHECK(nonpositive == 0);
    const double mean = sum / double(g.size());
    const double var = sq / double(g.size()) - mean * mean;
    const double m = cfg.fading_mean();  // gamma(m, 1): variance m
    CHECK(mean == doctest::Approx(m).epsilon(0.01));
    CHECK(var == doctest::Approx(m).epsilon(0.03));
    CHECK(sample_fading(k, n, cfg, 9) == g);
    CHECK(sample_fading(k, n, cfg, 10) != g);
  }
}

TEST_CASE("exponential fading passes a Kolmogorov-Smirnov test") {
  SystemConfig cfg;
  cfg.fading_kind = FadingKind::Exponential;
  auto g = sample_fading(1, 100000, cfg, 2026);
  std::sort(g.begin(), g.end());
  const double n = double(g.size());
  double d = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double f = 1.0 - std::exp(-g[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  CHECK(d < 0.01);
}

TEST_CASE("batches carry their provenance") {
  const SystemConfig cfg;
  const ChannelBatch b = make_batch({1e-12, 2e-12}, 100, cfg, 77, 5);
  CHECK(b.k == 2);
  CHECK(b.n_batch == 100);
  CHECK(b.slot_index == 5);
  CHECK(b.row(3)[1] == b.gain(3, 1));
  CHECK(b.gains == sample_fading(2, 100, cfg, 77));
}

TEST_CASE("derived seeds are distinct across streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base = 0; base < 20; ++base)
    for (std::uint64_t s = 0; s < 50; ++s) seen.insert(derive_seed(base, s));
  CHECK(seen.size() == 1000);
}

TEST_CASE("fading law expectations") {
  const FadingLaw gam = FadingLaw::gamma(8.0);
  CHECK(gam.mean() == 8.0);
  CHECK(gam.expect([](double g) { return g; }) == doctest::Approx(8.0).epsilon(1e-10));
  CHECK(gam.expect([](double g) { return g * g; }) == doctest::Approx(72.0).epsilon(1e-10));
  const FadingLaw ex = FadingLaw::exponential();
  CHECK(ex.expect([](double g) { return std::exp(-g); }) == doctest::Approx(0.5).epsilon(1e-10));
  // E{g ; g > 1} = 2 / e for the unit exponential.
  CHECK(ex.expect_above([](double g) { return g; }, 1.0) ==
        doctest::Approx(2.0 / std::exp(1.0)).epsilon(1e-9));
  const double kink[] = {3.0};
  CHECK(gam.expect([](double g) { return std::max(g - 3.0, 0.0); }, kink) ==
        doctest::Approx(gam.expect_above([](double g) { return g - 3.0; }, 3.0)).epsilon(1e-9));

  const FadingLaw two = FadingLaw::discrete({0.1, 1.9}, {0.5, 0.5});
  CHECK(two.mean() == doctest::Approx(1.0));
  CHECK(two.expect([](double g) { return g * g; }) == doctest::Approx(1.81));
  Rng rng = make_rng(1);
  for (int i = 0; i < 100; ++i) {
    const double s = two.sample(rng);
    CHECK((s == 0.1 || s == 1.9));
  }
  CHECK_THROWS_AS(FadingLaw::discrete({1.0}, {0.5}), ContractViolation);
  CHECK_THROWS_AS(FadingLaw::gamma(-1.0), ContractViolation);
  SystemConfig cfg;
  CHECK(FadingLaw::from_config(cfg).mean() == 8.0);
  cfg.fading_kind = FadingKind::Exponential;
  CHECK(FadingLaw::from_config(cfg).mean() == 1.0);
}
