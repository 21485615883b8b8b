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


// Serial reference against the OpenMP path of the Monte-Carlo kernels.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "pdlearn/baselines.hpp"
#include "pdlearn/channel.hpp"
#include "pdlearn/kernels.hpp"
#include "pdlearn/qos.hpp"
#include "pdlearn/trainer.hpp"

namespace {

using namespace pdlearn;
using kernels::Exec;

struct Fixture {
  SystemConfig cfg;
  RateModel model{cfg};
  QosTarget target = make_qos_target(cfg);
  double alpha = pathloss_gain(250.0, cfg);

  std::vector<double> gains(std::size_t n) const { return sample_fading(1, n, cfg, 1); }
};

Exec exec_of(const benchmark::State& state) {
  return state.range(1) == 0 ? Exec::Serial : Exec::Parallel;
}

void label(benchmark::State& state) {
  state.SetLabel(state.range(1) == 0 ? "serial" : "parallel");
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MeanExpRate(benchmark::State& state) {
  const Fixture f;
  const auto g = f.gains(static_cast<std::size_t>(state.range(0)));
  const double p0 = f.cfg.power_density();
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::mean_exp_rate_density(f.model, 2e5, p0, f.alpha, g,
                                                            f.target.theta, exec_of(state)));
  label(state);
}

void BM_ViolationRatio(benchmark::State& state) {
  const Fixture f;
  const auto g = f.gains(static_cast<std::size_t>(state.range(0)));
  const double p0 = f.cfg.power_density();
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::mean_violation_ratio_density(f.model, 2e5, p0, f.alpha, g,
                                                                   f.target, exec_of(state)));
  label(state);
}

// Per-user moments under the symmetric optimal split, the inner loop of the
// joint optimum.
void BM_SymmetricMoments(benchmark::State& state) {
  const Fixture f;
  const std::size_t k = 10;
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = sample_fading(k, n, f.cfg, 2);
  for (auto _ : state) {
    auto sums = kernels::chunked_sum_vec(
        n, k,
        [&](std::size_t row, std::span<double> acc) {
          std::span<const double> gr(g.data() + row * k, k);
          const auto alloc = symmetric_power_alloc(gr, 2e5, f.alpha, f.target.theta, f.cfg);
          for (std::size_t i = 0; i < k; ++i)
            acc[i] += std::exp(-f.target.theta *
                               f.model.rate(2e5, alloc.powers[i], f.alpha * gr[i]));
        },
        exec_of(state));
    benchmark::DoNotOptimize(sums.data());
  }
  label(state);
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long n : {1L << 12, 1L << 15, 1L << 18})
    for (long mode : {0L, 1L}) b->Args({n, mode});
}

}  // namespace

BENCHMARK(BM_MeanExpRate)->Apply(sizes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ViolationRatio)->Apply(sizes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SymmetricMoments)->Args({1 << 14, 0})->Args({1 << 14, 1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
