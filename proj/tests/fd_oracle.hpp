// Copyright 2026 The dplr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dplr/dataset.hpp"
#include "dplr/logreg.hpp"

namespace dplr::testing {

// Independent replica of the mean log loss in long double arithmetic.
// Written against the documented loss definition, not by calling the
// library, so it can serve as a finite-difference oracle whose roundoff
// noise sits well below double precision.
inline long double oracle_loss(const std::vector<long double>& stacked,
                               const Dataset& data) {
  const std::size_t d = data.feature_count();
  long double total = 0.0L;
  for (std::size_t i = 0; i < data.size(); ++i) {
    long double z = stacked[d];
    for (std::size_t j = 0; j < d; ++j) {
      z += stacked[j] * static_cast<long double>(data.row(i)[j]);
    }
    long double p;
    if (z >= 0.0L) {
      p = 1.0L / (1.0L + std::exp(-z));
    } else {
      const long double e = std::exp(z);
      p = e / (1.0L + e);
    }
    p = std::min(1.0L - 1e-12L, std::max(1e-12L, p));
    total += data.label(i) == 1 ? -std::log(p) : -std::log(1.0L - p);
  }
  return total / static_cast<long double>(data.size());
}

// Central finite difference of the oracle loss in every coordinate of the
// augmented parameter vector, rounded to double at the end.
inline std::vector<double> finite_difference_gradient(const ModelParams& params,
                                                      const Dataset& data,
                                                      long double step = 1e-6L) {
  std::vector<long double> stacked;
  stacked.reserve(params.weights.size() + 1);
  for (double w : params.weights) {
    stacked.push_back(static_cast<long double>(w));
  }
  stacked.push_back(static_cast<long double>(params.intercept));

  std::vector<double> grad(stacked.size());
  for (std::size_t j = 0; j < stacked.size(); ++j) {
    std::vector<long double> forward = stacked;
    std::vector<long double> backward = stacked;
    forward[j] += step;
    backward[j] -= step;
    grad[j] = static_cast<double>(
        (oracle_loss(forward, data) - oracle_loss(backward, data)) / (2.0L * step));
  }
  return grad;
}

// Worst per-coordinate relative error, floored at 1e-4 so coordinates
// near zero are compared against the finite-difference resolution rather
// than divided by almost nothing.
inline double gradient_mismatch(const std::vector<double>& analytic,
                                const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t j = 0; j < analytic.size(); ++j) {
    const double scale =
        std::max({std::abs(analytic[j]), std::abs(numeric[j]), 1e-4});
    worst = std::max(worst, std::abs(analytic[j] - numeric[j]) / scale);
  }
  return worst;
}

}  // namespace dplr::testing
