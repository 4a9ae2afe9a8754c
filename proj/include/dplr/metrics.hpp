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
#include <span>
#include <stdexcept>

#include "dplr/dataset.hpp"
#include "dplr/logreg.hpp"

namespace dplr {

// Fraction of rows whose thresholded prediction matches the label.
inline double accuracy(const ModelParams& params, const Dataset& data,
                       double threshold = 0.5) {
  if (data.empty()) {
    throw std::invalid_argument("accuracy: dataset is empty");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (classify(params, data.row(i), threshold) == data.label(i)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline double mean(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("mean: empty input");
  }
  double total = 0.0;
  for (double value : values) {
    total += value;
  }
  return total / static_cast<double>(values.size());
}

// Unbiased sample standard deviation; 0 for a single observation.
inline double sample_std(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("sample_std: empty input");
  }
  if (values.size() < 2) {
    return 0.0;
  }
  const double center = mean(values);
  double total = 0.0;
  for (double value : values) {
    const double deviation = value - center;
    total += deviation * deviation;
  }
  return std::sqrt(total / static_cast<double>(values.size() - 1));
}

inline double standard_error(std::span<const double> values) {
  return sample_std(values) / std::sqrt(static_cast<double>(values.size()));
}

}  // namespace dplr
