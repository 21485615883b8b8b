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

// Monte-Carlo reduction kernels.
//
// Each reduction splits [0, n) into fixed chunks of kChunk items, sums every
// chunk sequentially and combines the chunk partials in index order. The
// OpenMP variant only changes which thread computes a chunk, so both variants
// return bit-identical results for any thread count. The serial variant is
// kept as the reference the tests and benchmarks compare against.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#ifdef PDLEARN_HAVE_OPENMP
#include <omp.h>
#endif

#include "pdlearn/qos.hpp"

namespace pdlearn::kernels {

enum class Exec { Serial, Parallel };

inline constexpr std::size_t kChunk = 2048;

/// Sum of f(i) over i in [0, n) with the fixed-chunk reduction order.
template <class F>
double chunked_sum(std::size_t n, F&& f, Exec exec = Exec::Parallel) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += f(i);
    partial[c] = s;
  };
  if (exec == Exec::Parallel) {
#ifdef PDLEARN_HAVE_OPENMP
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < static_cast<long long>(chunks); ++c)
      run_chunk(static_cast<std::size_t>(c));
#else
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
#endif
  } else {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

/// Vector-valued variant: f(i, acc) adds item i's contribution into acc (length dim).
template <class F>
std::vector<double> chunked_sum_vec(std::size_t n, std::size_t dim, F&& f,
                                    Exec exec = Exec::Parallel) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks * dim, 0.0);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
    std::span<double> acc(partial.data() + c * dim, dim);
    for (std::size_t i = lo; i < hi; ++i) f(i, acc);
  };
  if (exec == Exec::Parallel) {
#ifdef PDLEARN_HAVE_OPENMP
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < static_cast<long long>(chunks); ++c)
      run_chunk(static_cast<std::size_t>(c));
#else
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
#endif
  } else {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  }
  std::vector<double> total(dim, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t d = 0; d < dim; ++d) total[d] += partial[c * dim + d];
  return total;
}

/// mean over gains of exp(-theta * s), s at fixed spectral density P0.
double mean_exp_rate_density(const RateModel& model, double W, double P0, double alpha,
                             std::span<const double> gains, double theta,
                             Exec exec = Exec::Parallel);

/// mean over gains of exp(theta * (B^E - s)) at fixed spectral density P0.
double mean_violation_ratio_density(const RateModel& model, double W, double P0, double alpha,
                                    std::span<const double> gains, const QosTarget& target,
                                    Exec exec = Exec::Parallel);

/// Runs body(i) for i in [0, n); iterations must be independent.
template <class F>
void parallel_for(std::size_t n, F&& body, Exec exec = Exec::Parallel) {
  if (exec == Exec::Parallel) {
#ifdef PDLEARN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < static_cast<long long>(n); ++i) body(static_cast<std::size_t>(i));
    return;
#endif
  }
  for (std::size_t i = 0; i < n; ++i) body(i);
}

int max_threads();

}  // namespace pdlearn::kernels
