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
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dplr/rng.hpp"

namespace dplr {

// An (epsilon, delta) differential privacy guarantee. The neighboring
// relation throughout the library is replace-one: two datasets of equal
// size differing in a single row.
struct PrivacyPair {
  double epsilon = 0.0;
  double delta = 0.0;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("PrivacyPair: epsilon must be positive and finite");
    }
    if (!(delta >= 0.0) || !(delta <= 1.0)) {
      throw std::invalid_argument("PrivacyPair: delta must lie in [0, 1]");
    }
  }
};

struct GaussianNoiseSpec {
  double sigma = 0.0;
  int dim = 1;

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("GaussianNoiseSpec: sigma must be nonnegative and finite");
    }
    if (dim < 1) {
      throw std::invalid_argument("GaussianNoiseSpec: dim must be at least 1");
    }
  }
};

enum class NeighboringModel { replace_one };

// How a batch gradient is reduced before noise is added.
//   aggregate: clip the summed gradient once; sensitivity 2C.
//   per_example_mean: clip each per-example gradient, then average;
//     replacing one row moves the mean by at most 2C / n.
enum class ClippingMode { aggregate, per_example_mean };

struct SensitivityBound {
  double value = 0.0;
  NeighboringModel neighboring = NeighboringModel::replace_one;
  ClippingMode mode = ClippingMode::per_example_mean;
};

inline SensitivityBound clipped_gradient_sensitivity(double clip_threshold,
                                                     int sample_count,
                                                     ClippingMode mode) {
  if (!(clip_threshold > 0.0) || !std::isfinite(clip_threshold)) {
    throw std::invalid_argument(
        "clipped_gradient_sensitivity: clip threshold must be positive and finite");
  }
  if (sample_count < 1) {
    throw std::invalid_argument(
        "clipped_gradient_sensitivity: sample count must be at least 1");
  }
  SensitivityBound bound;
  bound.mode = mode;
  bound.value = mode == ClippingMode::aggregate
                    ? 2.0 * clip_threshold
                    : 2.0 * clip_threshold / static_cast<double>(sample_count);
  return bound;
}

// Smallest noise scale for one release of a clipped mean gradient under a
// per-release budget (eps, delta):
//
//   sigma = (2 C / (n eps)) * sqrt(2 ln(1.25 / delta))
//
// i.e. sensitivity * sqrt(2 ln(1.25/delta)) / eps with the per_example_mean
// sensitivity 2C/n. Requires delta > 0; the Gaussian mechanism has no
// (eps, 0) guarantee.
inline double calibrate_sigma(double clip_threshold, int sample_count,
                              double epsilon, double delta) {
  PrivacyPair pair{epsilon, delta};
  pair.validate();
  if (!(delta > 0.0)) {
    throw std::invalid_argument("calibrate_sigma: delta must be positive");
  }
  const SensitivityBound bound = clipped_gradient_sensitivity(
      clip_threshold, sample_count, ClippingMode::per_example_mean);
  return bound.value * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

// value + sigma * z with z ~ N(0, I_dim). Draws are always consumed, so a
// sigma = 0 call advances the stream exactly like a noisy one and returns
// the input bit-for-bit (the scale multiplies to zero).
inline std::vector<double> gaussian_mechanism(std::span<const double> value,
                                              const GaussianNoiseSpec& spec,
                                              RngState& rng) {
  spec.validate();
  if (value.size() != static_cast<std::size_t>(spec.dim)) {
    throw std::invalid_argument("gaussian_mechanism: value length does not match spec.dim");
  }
  std::vector<double> noisy(value.begin(), value.end());
  for (double& coord : noisy) {
    coord += spec.sigma * rng.normal();
  }
  return noisy;
}

struct DpCheckReport {
  double max_violation = 0.0;
  double slack = 0.0;
  bool passed = false;
};

// Heuristic empirical test of an (eps, delta) claim from samples of a
// scalar mechanism on two neighboring inputs. Events are the one-sided
// intervals (-inf, t] and (t, inf) for num_thresholds values of t evenly
// spaced over the pooled sample range; both orderings of the inputs are
// checked. The claim demands
//
//   P[M(x) in E] <= e^eps P[M(x') in E] + delta
//
// so max_violation is the largest estimated excess over all events and
// orderings. Estimation error is absorbed by
//
//   slack = 3 sqrt(ln(num_thresholds) / min(n1, n2))
//
// a union-bound style allowance on the frequency estimates. This is a
// smoke test for calibration bugs, not a certified audit: it can miss
// violations confined to unprobed events and its pass threshold is a
// concentration heuristic rather than a valid hypothesis test.
inline DpCheckReport empirical_dp_check(std::span<const double> samples_x,
                                        std::span<const double> samples_x_prime,
                                        const PrivacyPair& claim,
                                        int num_thresholds = 200) {
  claim.validate();
  if (samples_x.empty() || samples_x_prime.empty()) {
    throw std::invalid_argument("empirical_dp_check: both sample sets must be nonempty");
  }
  if (num_thresholds < 1) {
    throw std::invalid_argument("empirical_dp_check: num_thresholds must be at least 1");
  }
  for (std::span<const double> side : {samples_x, samples_x_prime}) {
    for (double sample : side) {
      if (!std::isfinite(sample)) {
        throw std::invalid_argument("empirical_dp_check: samples must be finite");
      }
    }
  }

  double lo = samples_x.front();
  double hi = samples_x.front();
  for (std::span<const double> side : {samples_x, samples_x_prime}) {
    for (double sample : side) {
      lo = std::min(lo, sample);
      hi = std::max(hi, sample);
    }
  }

  const double amplification = std::exp(claim.epsilon);
  double max_violation = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < num_thresholds; ++i) {
    const double fraction =
        num_thresholds == 1 ? 0.5
                            : static_cast<double>(i) / (num_thresholds - 1);
    const double threshold = lo + fraction * (hi - lo);
    const auto tail_fraction = [threshold](std::span<const double> side) {
      std::size_t below = 0;
      for (double sample : side) {
        if (sample <= threshold) {
          ++below;
        }
      }
      return static_cast<double>(below) / static_cast<double>(side.size());
    };
    const double p_low = tail_fraction(samples_x);
    const double q_low = tail_fraction(samples_x_prime);
    for (const auto [p, q] : {std::pair{p_low, q_low},
                              std::pair{1.0 - p_low, 1.0 - q_low}}) {
      max_violation = std::max(max_violation, p - amplification * q - claim.delta);
      max_violation = std::max(max_violation, q - amplification * p - claim.delta);
    }
  }

  DpCheckReport report;
  report.max_violation = max_violation;
  report.slack =
      3.0 * std::sqrt(std::log(static_cast<double>(num_thresholds)) /
                      static_cast<double>(
                          std::min(samples_x.size(), samples_x_prime.size())));
  report.passed = report.max_violation <= report.slack;
  return report;
}

}  // namespace dplr
