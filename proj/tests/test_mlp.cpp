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

#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "oracle_values.hpp"
#include "pdlearn/errors.hpp"
#include "pdlearn/mlp.hpp"

using namespace pdlearn;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("layer shapes follow the widths") {
  Mlp net({3, 5, 2}, Activation::Tanh, Activation::Identity);
  CHECK(net.num_layers() == 2);
  CHECK(net.num_params() == 5 * 3 + 5 + 2 * 5 + 2);
  CHECK(net.weight_index(0, 4, 2) == 14);
  CHECK(net.bias_index(0, 0) == 15);
  CHECK(net.weight_index(1, 0, 0) == 20);
  CHECK_THROWS_AS(Mlp({3}, Activation::Tanh, Activation::Identity), ContractViolation);
  CHECK_THROWS_AS(Mlp({3, 0, 1}, Activation::Tanh, Activation::Identity), ContractViolation);
  CHECK_THROWS_AS(Mlp({3, 2}, Activation::ScaledSoftmax, Activation::Identity), ContractViolation);
}

TEST_CASE("zero network outputs") {
  const std::vector<double> x{0.3, -1.2, 4.0};
  SUBCASE("identity output is zero") {
    Mlp net({3, 4, 2}, Activation::Tanh, Activation::Identity);
    for (double y : net.forward(x)) CHECK(y == 0.0);
  }
  SUBCASE("scaled softmax splits the scale evenly") {
    const double p_max = 19.952623149688797;
    Mlp net({3, 4, 5}, Activation::Tanh, Activation::ScaledSoftmax, p_max);
    for (double y : net.forward(x)) CHECK(y == doctest::Approx(p_max / 5).epsilon(1e-15));
  }
}

TEST_CASE("hand-evaluated 1-2-1 tanh network") {
  Mlp net({1, 2, 1}, Activation::Tanh, Activation::Identity);
  net.weight(0, 0, 0) = 0.5;
  net.weight(0, 1, 0) = -1.5;
  net.bias(0, 0) = 0.1;
  net.bias(0, 1) = 0.2;
  net.weight(1, 0, 0) = 2.0;
  net.weight(1, 0, 1) = -0.7;
  net.bias(1, 0) = 0.3;
  for (double x : {-1.0, 0.25, 2.0}) {
    const double expect =
        2.0 * std::tanh(0.5 * x + 0.1) - 0.7 * std::tanh(-1.5 * x + 0.2) + 0.3;
    CHECK(net.forward(std::vector<double>{x})[0] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("backward of a single linear layer is cotangent times input") {
  Mlp net = Mlp::glorot({3, 2}, Activation::Tanh, Activation::Identity, 1.0, 5);
  const std::vector<double> x{0.5, -2.0, 1.5}, c{0.7, -0.3};
  Mlp::Tape tape;
  net.forward(x, tape);
  const Gradients g = net.backward(tape, c);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(g.values[net.weight_index(0, i, j)] == c[i] * x[j]);
    CHECK(g.values[net.bias_index(0, i)] == c[i]);
  }
}

TEST_CASE("zero cotangent gives zero gradients") {
  Mlp net = Mlp::glorot({4, 6, 3}, Activation::Tanh, Activation::Softplus, 1.0, 8);
  Mlp::Tape tape;
  net.forward(random_vec(4, 1), tape);
  const Gradients g = net.backward(tape, std::vector<double>(3, 0.0));
  for (double v : g.values) CHECK(v == 0.0);
}

TEST_CASE("backward matches central differences") {
  struct Shape {
    std::vector<std::size_t> widths;
    Activation hidden, output;
  };
  const Shape shapes[] = {
      {{1, 16, 16, 16, 16, 16, 16, 1}, Activation::Tanh, Activation::Softplus},
      {{8, 16, 16, 4}, Activation::Tanh, Activation::ScaledSoftmax},
      {{5, 5, 5, 5}, Activation::Tanh, Activation::ScaledSoftmax},
      {{3, 7, 2}, Activation::Tanh, Activation::Identity},
      {{2, 9, 3}, Activation::Softplus, Activation::Relu},
      {{4, 8, 1}, Activation::Relu, Activation::Softplus},
  };
  std::uint64_t seed = 11;
  for (const auto& s : shapes) {
    const auto r = testing::probe_mlp(s.widths, s.hidden, s.output, 20, seed++);
    INFO("widths[0]=" << s.widths[0] << " output=" << to_string(s.output));
    CHECK(r.worst <= 1e-5);
  }
}

TEST_CASE("batched passes agree with per-sample passes") {
  const std::size_t n = 37;
  for (Activation out : {Activation::Softplus, Activation::ScaledSoftmax, Activation::Identity}) {
    Mlp net = Mlp::glorot({3, 8, 8, 4}, Activation::Tanh, out, 2.5, 21);
    const auto x = random_vec(3 * n, 4);
    const auto c = random_vec(4 * n, 5);
    Mlp::BatchTape bt;
    const auto& y = net.forward_batch(x, n, bt);
    Gradients gb = net.zero_gradients();
    net.backward_batch(bt, c, gb, 0.5);

    Gradients gs = net.zero_gradients();
    Mlp::Tape tape;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> xi{x[i], x[n + i], x[2 * n + i]};
      const auto yi = net.forward(xi, tape);
      std::vector<double> ci(4);
      for (std::size_t o = 0; o < 4; ++o) {
        CHECK(y[o * n + i] == doctest::Approx(yi[o]).epsilon(1e-13));
        ci[o] = c[o * n + i];
      }
      net.backward_into(tape, ci, gs, 0.5);
    }
    for (std::size_t p = 0; p < gs.values.size(); ++p)
      CHECK(gb.values[p] == doctest::Approx(gs.values[p]).epsilon(1e-11).scale(1e-12));
  }
}

TEST_CASE("scaled softmax stays on the simplex and its Jacobian rows sum to zero") {
  const double scale = 19.952623149688797;
  Mlp net = Mlp::glorot({6, 10, 6}, Activation::Tanh, Activation::ScaledSoftmax, scale, 3);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto x = random_vec(6, 100 + s, 5.0);
    const auto y = net.forward(x);
    double sum = 0.0;
    for (double v : y) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - scale) <= 1e-9 * scale);
  }
  // d(sum of outputs)/d(params) vanishes: the all-ones cotangent.
  Mlp::Tape tape;
  net.forward(random_vec(6, 7), tape);
  const Gradients g = net.backward(tape, std::vector<double>(6, 1.0));
  for (double v : g.values) CHECK(std::abs(v) <= 1e-12);
  auto total = [&] {
    const auto y = net.forward(random_vec(6, 7));
    return std::accumulate(y.begin(), y.end(), 0.0);
  };
  for (std::size_t i : {0u, 13u, 77u}) CHECK(std::abs(testing::central_diff(net.params(), i, 1e-5, total)) <= 1e-6);
}

TEST_CASE("softmax and softplus survive extreme inputs") {
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  Mlp net({2, 3}, Activation::Tanh, Activation::ScaledSoftmax, 1.0);
  net.bias(0, 0) = 1000.0;
  const auto y = net.forward(std::vector<double>{0.0, 0.0});
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(y[1]));
}

TEST_CASE("fast_tanh tracks std::tanh") {
  for (double x = -25.0; x <= 25.0; x += 0.013) CHECK(std::abs(fast_tanh(x) - std::tanh(x)) <= 1e-15);
}

TEST_CASE("sgd_step arithmetic and schedule") {
  Mlp net({1, 1}, Activation::Tanh, Activation::Identity);
  net.params()[0] = 1.0;
  Gradients g = net.zero_gradients();
  g.values[0] = 2.0;
  net.sgd_step(g, LrSchedule{0.5, 0.0}, 0, Direction::Descent);
  CHECK(net.params()[0] == 0.0);
  net.sgd_step(g, LrSchedule{0.5, 0.0}, 0, Direction::Ascent);
  CHECK(net.params()[0] == 1.0);

  const LrSchedule phi{1.0, 0.1};
  CHECK(phi(10) == doctest::Approx(oracle::kPhi10).epsilon(1e-15));
  double prev = phi(0);
  for (std::int64_t t = 1; t < 1000; t += 7) {
    CHECK(phi(t) > 0.0);
    CHECK(phi(t) <= prev);
    prev = phi(t);
  }

  const Mlp before = Mlp::glorot({3, 4, 1}, Activation::Tanh, Activation::Softplus, 1.0, 2);
  Mlp after = before;
  after.sgd_step(after.zero_gradients(), LrSchedule{}, 3, Direction::Descent);
  CHECK(after == before);
}

TEST_CASE("glorot bounds and zero biases") {
  const Mlp net = Mlp::glorot({7, 16, 3}, Activation::Tanh, Activation::Softplus, 1.0, 99);
  const std::size_t fans[2][2] = {{7, 16}, {16, 3}};
  for (std::size_t l = 0; l < 2; ++l) {
    const double bound = std::sqrt(6.0 / double(fans[l][0] + fans[l][1]));
    for (std::size_t r = 0; r < net.widths()[l + 1]; ++r) {
      for (std::size_t c = 0; c < net.widths()[l]; ++c)
        CHECK(std::abs(net.weight(l, r, c)) <= bound);
      CHECK(net.bias(l, r) == 0.0);
    }
  }
  CHECK(Mlp::glorot({7, 16, 3}, Activation::Tanh, Activation::Softplus, 1.0, 99) == net);
  CHECK_FALSE(Mlp::glorot({7, 16, 3}, Activation::Tanh, Activation::Softplus, 1.0, 98) == net);
}

TEST_CASE("forward is deterministic and JSON round-trips exactly") {
  const Mlp net = Mlp::glorot({2, 5, 3}, Activation::Tanh, Activation::ScaledSoftmax, 4.0, 17);
  const std::vector<double> x{0.25, -0.75};
  CHECK(net.forward(x) == net.forward(x));
  const Mlp back = Mlp::from_json(nlohmann::json::parse(net.to_json().dump()));
  CHECK(back == net);
  CHECK(back.forward(x) == net.forward(x));
  CHECK_THROWS(Mlp::from_json(nlohmann::json{{"widths", {2, 3}}}));
}

TEST_CASE("shape mismatches are rejected") {
  Mlp net({3, 2}, Activation::Tanh, Activation::Identity);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), ContractViolation);
  Mlp::Tape tape;
  net.forward(std::vector<double>{1.0, 2.0, 3.0}, tape);
  CHECK_THROWS_AS(net.backward(tape, std::vector<double>{1.0}), ContractViolation);
  Mlp::BatchTape bt;
  CHECK_THROWS_AS(net.forward_batch(std::vector<double>(5), 2, bt), ContractViolation);
}
