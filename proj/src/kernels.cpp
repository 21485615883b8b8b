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

#include "pdlearn/kernels.hpp"

#include <cmath>

namespace pdlearn::kernels {

double mean_exp_rate_density(const RateModel& model, double W, double P0, double alpha,
                             std::span<const double> gains, double theta, Exec exec) {
  if (gains.empty()) return 0.0;
  const double sum = chunked_sum(
      gains.size(),
      [&](std::size_t i) { return std::exp(-theta * model.rate_density(W, P0, alpha * gains[i])); },
      exec);
  return sum / static_cast<double>(gains.size());
}

double mean_violation_ratio_density(const RateModel& model, double W, double P0, double alpha,
                                    std::span<const double> gains, const QosTarget& target,
                                    Exec exec) {
  if (gains.empty()) return 0.0;
  const double sum = chunked_sum(
      gains.size(),
      [&](std::size_t i) {
        return std::exp(target.theta * (target.eb - model.rate_density(W, P0, alpha * gains[i])));
      },
      exec);
  return sum / static_cast<double>(gains.size());
}

int max_threads() {
#ifdef PDLEARN_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace pdlearn::kernels
