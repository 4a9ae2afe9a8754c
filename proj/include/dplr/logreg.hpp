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
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dplr/dataset.hpp"

namespace dplr {

// Predicted probabilities are clamped to [kProbFloor, 1 - kProbFloor]
// before taking logs, so the loss is finite for arbitrary parameters.
inline constexpr double kProbFloor = 1e-12;

// Weights plus a separately stored intercept. Training treats the
// intercept as coordinate d + 1 of an augmented parameter vector, so it is
// clipped and noised together with the weights.
struct ModelParams {
  std::vector<double> weights;
  double intercept = 0.0;

  std::size_t dimension() const { return weights.size(); }

  static ModelParams zeros(std::size_t dimension) {
    ModelParams params;
    params.weights.assign(dimension, 0.0);
    return params;
  }

  std::vector<double> augmented() const {
    std::vector<double> stacked(weights);
    stacked.push_back(intercept);
    return stacked;
  }

  static ModelParams from_augmented(std::span<const double> stacked) {
    if (stacked.empty()) {
      throw std::invalid_argument("ModelParams::from_augmented: need at least 1 entry");
    }
    ModelParams params;
    params.weights.assign(stacked.begin(), stacked.end() - 1);
    params.intercept = stacked.back();
    return params;
  }

  bool finite() const {
    if (!std::isfinite(intercept)) {
      return false;
    }
    return std::all_of(weights.begin(), weights.end(),
                       [](double w) { return std::isfinite(w); });
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct TrainConfig {
  double learning_rate = 0.5;
  int iterations = 100;
  // Empty means all-zeros initialization.
  std::optional<ModelParams> initial;
  bool record_snapshots = false;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw std::invalid_argument("TrainConfig: learning_rate must be nonnegative and finite");
    }
    if (iterations < 1) {
      throw std::invalid_argument("TrainConfig: iterations must be at least 1");
    }
  }
};

// losses[t] is the loss before iteration t + 1; losses.front() is the loss
// at the initial parameters and losses.back() the final loss, so the
// vector has iterations + 1 entries. For noisy training the recorded loss
// is the exact loss of the noisy iterate, not a noised loss value.
struct TrainTrace {
  std::vector<double> losses;
  std::optional<std::vector<ModelParams>> snapshots;
};

class DivergedError : public std::runtime_error {
 public:
  explicit DivergedError(int iteration)
      : std::runtime_error("training diverged at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// Numerically stable in both tails; large |z| saturates to 0 or 1 without
// overflowing.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double predict_proba(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.weights.size()) {
    throw std::invalid_argument("predict_proba: feature count mismatch");
  }
  double z = params.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) {
    z += params.weights[j] * x[j];
  }
  return sigmoid(z);
}

// Ties go to class 1: probability exactly at the threshold predicts 1.
inline int classify(const ModelParams& params, std::span<const double> x,
                    double threshold = 0.5) {
  if (!(threshold > 0.0) || !(threshold < 1.0)) {
    throw std::invalid_argument("classify: threshold must lie in (0, 1)");
  }
  return predict_proba(params, x) >= threshold ? 1 : 0;
}

// Mean binary cross-entropy over the dataset.
inline double log_loss(const ModelParams& params, const Dataset& data) {
  if (data.empty()) {
    throw std::invalid_argument("log_loss: dataset is empty");
  }
  if (data.feature_count() != params.weights.size()) {
    throw std::invalid_argument("log_loss: feature count mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p = predict_proba(params, data.row(i));
    const double clamped = std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
    total += data.label(i) == 1 ? -std::log(clamped) : -std::log(1.0 - clamped);
  }
  return total / static_cast<double>(data.size());
}

// Gradient of the single-example loss with respect to (weights, intercept):
// ((p - y) x, p - y), returned in augmented layout.
inline std::vector<double> per_example_gradient(const ModelParams& params,
                                                std::span<const double> x, int label) {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("per_example_gradient: label must be 0 or 1");
  }
  const double residual = predict_proba(params, x) - static_cast<double>(label);
  std::vector<double> grad(x.size() + 1);
  for (std::size_t j = 0; j < x.size(); ++j) {
    grad[j] = residual * x[j];
  }
  grad[x.size()] = residual;
  return grad;
}

// Gradient of the mean loss: per-example gradients accumulated in row
// order, then scaled by 1/m. Noisy training reproduces this exact
// summation order so the two paths agree bit-for-bit when noise and
// clipping are inactive.
inline std::vector<double> loss_gradient(const ModelParams& params, const Dataset& data) {
  if (data.empty()) {
    throw std::invalid_argument("loss_gradient: dataset is empty");
  }
  if (data.feature_count() != params.weights.size()) {
    throw std::invalid_argument("loss_gradient: feature count mismatch");
  }
  std::vector<double> total(data.feature_count() + 1, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> grad = per_example_gradient(params, data.row(i), data.label(i));
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

namespace detail {

// Shared descent loop: plain and noisy training differ only in the
// gradient callback, so their float operation sequences are identical
// whenever the callbacks are. Runs exactly cfg.iterations steps; no early
// stopping.
template <typename GradientFn>
std::pair<ModelParams, TrainTrace> descend(const Dataset& data, const TrainConfig& cfg,
                                           GradientFn&& gradient_at) {
  cfg.validate();
  if (data.empty()) {
    throw std::invalid_argument("gradient_descent: dataset is empty");
  }
  ModelParams params =
      cfg.initial ? *cfg.initial : ModelParams::zeros(data.feature_count());
  if (params.weights.size() != data.feature_count()) {
    throw std::invalid_argument("gradient_descent: initial parameter dimension mismatch");
  }

  TrainTrace trace;
  trace.losses.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  trace.losses.push_back(log_loss(params, data));
  if (cfg.record_snapshots) {
    trace.snapshots.emplace();
    trace.snapshots->reserve(static_cast<std::size_t>(cfg.iterations) + 1);
    trace.snapshots->push_back(params);
  }

  const std::size_t d = data.feature_count();
  for (int t = 1; t <= cfg.iterations; ++t) {
    const std::vector<double> grad = gradient_at(params);
    for (std::size_t j = 0; j < d; ++j) {
      params.weights[j] -= cfg.learning_rate * grad[j];
    }
    params.intercept -= cfg.learning_rate * grad[d];
    const double loss = log_loss(params, data);
    if (!params.finite() || !std::isfinite(loss)) {
      throw DivergedError(t);
    }
    trace.losses.push_back(loss);
    if (cfg.record_snapshots) {
      trace.snapshots->push_back(params);
    }
  }
  return {std::move(params), std::move(trace)};
}

}  // namespace detail

// Full-batch gradient descent on the mean log loss.
inline std::pair<ModelParams, TrainTrace> gradient_descent(const Dataset& data,
                                                           const TrainConfig& cfg) {
  return detail::descend(data, cfg, [&data](const ModelParams& params) {
    return loss_gradient(params, data);
  });
}

}  // namespace dplr
