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

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dplr/dataset.hpp"
#include "dplr/logreg.hpp"
#include "dplr/noise.hpp"
#include "dplr/rng.hpp"

namespace dplr {

// How a total (epsilon, delta) budget pays for T gradient releases.
//   basic: each release gets (epsilon / T, delta / T); the sequential
//     composition of the T releases then satisfies the total budget.
//   per_iteration: the stated pair applies to every release individually
//     and the caller owns whatever composition claim they want to make.
enum class Accounting { basic, per_iteration };

inline PrivacyPair split_budget(const PrivacyPair& total, int iterations,
                                Accounting accounting) {
  total.validate();
  if (iterations < 1) {
    throw std::invalid_argument("split_budget: iterations must be at least 1");
  }
  if (accounting == Accounting::per_iteration) {
    return total;
  }
  const double steps = static_cast<double>(iterations);
  return PrivacyPair{total.epsilon / steps, total.delta / steps};
}

// The noise contract for one training run. Exactly one of three shapes:
//   from_total: calibrated from a total (epsilon, delta) budget; remembers
//     the clip threshold and sample count it was calibrated against so the
//     trainer can reject mismatched usage.
//   from_sigma: a raw noise scale with no budget attached.
//   none: the explicit no-privacy sentinel (sigma = 0, no budget). This is
//     how "epsilon = infinity" baselines are requested; there is no
//     floating-point infinity epsilon anywhere in the API.
struct PrivacyBudget {
  std::optional<PrivacyPair> total;
  std::optional<PrivacyPair> per_release;
  Accounting accounting = Accounting::basic;
  int iterations = 1;
  double sigma = 0.0;
  std::optional<double> clip_threshold;
  std::optional<int> sample_count;

  bool calibrated() const { return total.has_value(); }

  static PrivacyBudget from_total(const PrivacyPair& total_budget, int iterations,
                                  Accounting accounting, double clip_threshold,
                                  int sample_count) {
    const PrivacyPair per_release = split_budget(total_budget, iterations, accounting);
    PrivacyBudget budget;
    budget.total = total_budget;
    budget.per_release = per_release;
    budget.accounting = accounting;
    budget.iterations = iterations;
    budget.clip_threshold = clip_threshold;
    budget.sample_count = sample_count;
    budget.sigma = calibrate_sigma(clip_threshold, sample_count, per_release.epsilon,
                                   per_release.delta);
    return budget;
  }

  static PrivacyBudget from_sigma(double sigma, int iterations) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("PrivacyBudget: sigma must be nonnegative and finite");
    }
    if (iterations < 1) {
      throw std::invalid_argument("PrivacyBudget: iterations must be at least 1");
    }
    PrivacyBudget budget;
    budget.iterations = iterations;
    budget.sigma = sigma;
    return budget;
  }

  static PrivacyBudget none(int iterations) { return from_sigma(0.0, iterations); }
};

struct DpTrainConfig {
  TrainConfig base;
  // Empty disables clipping (an unbounded-sensitivity run: useful for
  // ablations, never for a calibrated budget).
  std::optional<double> clip_threshold = 1.0;
  ClippingMode clipping_mode = ClippingMode::per_example_mean;

  void validate() const {
    base.validate();
    if (clip_threshold &&
        (!(*clip_threshold > 0.0) || !std::isfinite(*clip_threshold))) {
      throw std::invalid_argument("DpTrainConfig: clip threshold must be positive and finite");
    }
  }
};

namespace detail {

inline double euclidean_norm(std::span<const double> v) {
  double squared = 0.0;
  for (double coord : v) {
    squared += coord * coord;
  }
  return std::sqrt(squared);
}

}  // namespace detail

// g scaled to norm at most the threshold: g / max(1, |g| / C). Inputs
// already inside the ball are returned unchanged, bit-for-bit. The scale
// is shaved by an ulp until the rescaled vector's own computed norm fits
// inside the ball, so the norm bound and idempotence hold exactly, not
// just up to rounding.
inline std::vector<double> clip_gradient(std::span<const double> gradient,
                                         double clip_threshold) {
  if (!(clip_threshold > 0.0) || !std::isfinite(clip_threshold)) {
    throw std::invalid_argument("clip_gradient: clip threshold must be positive and finite");
  }
  std::vector<double> clipped(gradient.begin(), gradient.end());
  const double norm = detail::euclidean_norm(clipped);
  if (norm > clip_threshold) {
    double scale = clip_threshold / norm;
    for (;;) {
      for (std::size_t j = 0; j < clipped.size(); ++j) {
        clipped[j] = gradient[j] * scale;
      }
      if (detail::euclidean_norm(clipped) <= clip_threshold) {
        break;
      }
      scale = std::nextafter(scale, 0.0);
    }
  }
  return clipped;
}

namespace detail {

// Clipped batch gradient in the configured mode. The per_example_mean
// branch accumulates in the same row order and with the same final 1/m
// scaling as loss_gradient, so with clipping inactive the two are
// bit-identical.
inline std::vector<double> clipped_batch_gradient(const ModelParams& params,
                                                  const Dataset& data,
                                                  const DpTrainConfig& cfg) {
  if (cfg.clipping_mode == ClippingMode::aggregate) {
    std::vector<double> grad = loss_gradient(params, data);
    if (cfg.clip_threshold) {
      grad = clip_gradient(grad, *cfg.clip_threshold);
    }
    return grad;
  }
  std::vector<double> total(data.feature_count() + 1, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> grad = per_example_gradient(params, data.row(i), data.label(i));
    if (cfg.clip_threshold) {
      grad = clip_gradient(grad, *cfg.clip_threshold);
    }
    for (std::size_t j = 0; j < total.size(); ++j) {
      total[j] += grad[j];
    }
  }
  const double scale = 1.0 / static_cast<double>(data.size());
  for (double& coord : total) {
    coord *= scale;
  }
  return total;
}

}  // namespace detail

// Noisy full-batch gradient descent: per step, clip the gradient, add
// N(0, sigma^2 I) across all d + 1 coordinates (intercept included), and
// take a plain descent step. Runs exactly budget.iterations steps.
//
// With sigma = 0 the noise stage is skipped entirely, no stream words are
// consumed, and the run is bit-identical to gradient_descent under the
// same config (given clipping never rescales).
//
// A calibrated budget is rejected unless the config's clip threshold, the
// dataset size, and the iteration count all match what the budget was
// calibrated for; the sigma in use then equals
// calibrate_sigma(C, n, split_budget(total, T, accounting)) by
// construction.
//
// Trace losses are exact losses of the noisy iterates. Publishing them
// would spend budget beyond the gradient releases; treat the trace as a
// diagnostic, not a private output.
inline std::pair<ModelParams, TrainTrace> noisy_gradient_descent(
    const Dataset& data, const DpTrainConfig& cfg, const PrivacyBudget& budget,
    RngState& rng) {
  cfg.validate();
  if (budget.iterations != cfg.base.iterations) {
    throw std::invalid_argument(
        "noisy_gradient_descent: budget covers a different iteration count than the config");
  }
  if (budget.calibrated()) {
    if (!cfg.clip_threshold) {
      throw std::invalid_argument(
          "noisy_gradient_descent: calibrated budget requires clipping enabled");
    }
    if (*cfg.clip_threshold != *budget.clip_threshold) {
      throw std::invalid_argument(
          "noisy_gradient_descent: clip threshold differs from the calibrated one");
    }
    if (data.size() != static_cast<std::size_t>(*budget.sample_count)) {
      throw std::invalid_argument(
          "noisy_gradient_descent: dataset size differs from the calibrated sample count");
    }
    if (cfg.clipping_mode != ClippingMode::per_example_mean) {
      throw std::invalid_argument(
          "noisy_gradient_descent: calibrated budgets cover per_example_mean clipping only");
    }
  }
  const double sigma = budget.sigma;
  return detail::descend(data, cfg.base, [&](const ModelParams& params) {
    std::vector<double> grad = detail::clipped_batch_gradient(params, data, cfg);
    if (sigma > 0.0) {
      for (double& coord : grad) {
        coord += sigma * rng.normal();
      }
    }
    return grad;
  });
}

struct PretrainResult {
  ModelParams params;
  TrainTrace pretrain_trace;
  TrainTrace finetune_trace;
};

// Plain descent on the public data, then noisy descent on the private
// data starting from the pretrained parameters. Any initial in
// finetune_cfg is overridden by the pretrained parameters. Only the
// private phase draws from rng or spends budget; the public phase is
// treated as free.
inline PretrainResult pretrain_finetune(const Dataset& public_data,
                                        const Dataset& private_data,
                                        const TrainConfig& pretrain_cfg,
                                        const DpTrainConfig& finetune_cfg,
                                        const PrivacyBudget& budget, RngState& rng) {
  if (public_data.feature_count() != private_data.feature_count()) {
    throw std::invalid_argument(
        "pretrain_finetune: public and private data have different feature counts");
  }
  auto [pretrained, pretrain_trace] = gradient_descent(public_data, pretrain_cfg);

  DpTrainConfig finetune = finetune_cfg;
  finetune.base.initial = pretrained;
  auto [params, finetune_trace] =
      noisy_gradient_descent(private_data, finetune, budget, rng);

  PretrainResult result;
  result.params = std::move(params);
  result.pretrain_trace = std::move(pretrain_trace);
  result.finetune_trace = std::move(finetune_trace);
  return result;
}

}  // namespace dplr
