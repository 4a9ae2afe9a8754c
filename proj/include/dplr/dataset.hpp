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

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dplr/rng.hpp"

namespace dplr {

// Labeled binary-classification data: a flat row-major feature matrix plus
// a 0/1 label per row. Rows are exposed as spans into the matrix.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t feature_count, std::string name = {})
      : feature_count_(feature_count), name_(std::move(name)) {}

  void add_row(std::span<const double> features, int label) {
    if (features.size() != feature_count_) {
      throw std::invalid_argument("Dataset::add_row: feature count mismatch");
    }
    if (label != 0 && label != 1) {
      throw std::invalid_argument("Dataset::add_row: label must be 0 or 1");
    }
    features_.insert(features_.end(), features.begin(), features.end());
    labels_.push_back(label);
  }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * feature_count_, feature_count_};
  }

  int label(std::size_t i) const { return labels_[i]; }

  std::size_t size() const { return labels_.size(); }
  std::size_t feature_count() const { return feature_count_; }
  bool empty() const { return labels_.empty(); }

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  // Equality of contents only; the name tag is provenance, not identity.
  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.feature_count_ == b.feature_count_ && a.features_ == b.features_ &&
           a.labels_ == b.labels_;
  }

 private:
  std::size_t feature_count_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::string name_;
};

// Two isotropic Gaussian blobs in d dimensions. floor(balance * n) rows are
// drawn around center_low with label 0, the rest around center_high with
// label 1, then the rows are shuffled. Empty center vectors default to
// (-1, ..., -1) and (+1, ..., +1). shift is added to both centers when a
// public surrogate of the dataset is generated (shifted_for_public), which
// models public data whose distribution is close to, but not identical to,
// the private one.
struct SyntheticSpec {
  int sample_count = 400;
  int feature_count = 2;
  double class_balance = 0.5;
  std::vector<double> center_low;
  std::vector<double> center_high;
  double spread = 2.0;
  std::vector<double> shift;

  void validate() const {
    if (sample_count < 1) {
      throw std::invalid_argument("SyntheticSpec: sample_count must be at least 1");
    }
    if (feature_count < 1) {
      throw std::invalid_argument("SyntheticSpec: feature_count must be at least 1");
    }
    if (!(class_balance > 0.0) || !(class_balance < 1.0)) {
      throw std::invalid_argument("SyntheticSpec: class_balance must lie in (0, 1)");
    }
    if (!(spread >= 0.0) || !std::isfinite(spread)) {
      throw std::invalid_argument("SyntheticSpec: spread must be nonnegative and finite");
    }
    const std::size_t d = static_cast<std::size_t>(feature_count);
    for (const auto* centers : {&center_low, &center_high}) {
      if (!centers->empty() && centers->size() != d) {
        throw std::invalid_argument("SyntheticSpec: center length must match feature_count");
      }
    }
    if (!shift.empty() && shift.size() != d) {
      throw std::invalid_argument("SyntheticSpec: shift length must match feature_count");
    }
  }

  std::vector<double> resolved_center(int label) const {
    const std::size_t d = static_cast<std::size_t>(feature_count);
    const std::vector<double>& given = label == 0 ? center_low : center_high;
    if (!given.empty()) {
      return given;
    }
    return std::vector<double>(d, label == 0 ? -1.0 : 1.0);
  }

  // The same blobs translated by shift; used for the public arm of a
  // pretraining experiment. The returned spec has shift cleared.
  SyntheticSpec shifted_for_public() const {
    validate();
    SyntheticSpec moved = *this;
    moved.center_low = resolved_center(0);
    moved.center_high = resolved_center(1);
    if (!shift.empty()) {
      for (std::size_t j = 0; j < shift.size(); ++j) {
        moved.center_low[j] += shift[j];
        moved.center_high[j] += shift[j];
      }
    }
    moved.shift.clear();
    return moved;
  }
};

inline Dataset generate_synthetic(const SyntheticSpec& spec, RngState& rng) {
  spec.validate();
  const std::size_t n = static_cast<std::size_t>(spec.sample_count);
  const std::size_t d = static_cast<std::size_t>(spec.feature_count);
  const std::size_t low_count = static_cast<std::size_t>(
      std::floor(spec.class_balance * static_cast<double>(n)));
  const std::vector<double> center_low = spec.resolved_center(0);
  const std::vector<double> center_high = spec.resolved_center(1);

  Dataset data(d);
  std::vector<double> point(d);
  for (std::size_t i = 0; i < n; ++i) {
    const bool low = i < low_count;
    const std::vector<double>& center = low ? center_low : center_high;
    for (std::size_t j = 0; j < d; ++j) {
      point[j] = center[j] + spec.spread * rng.normal();
    }
    data.add_row(point, low ? 0 : 1);
  }

  // Fisher-Yates on row order so that class blocks are interleaved.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_below(i + 1);
    std::swap(order[i], order[j]);
  }
  Dataset shuffled(d, data.name());
  for (std::size_t i = 0; i < n; ++i) {
    shuffled.add_row(data.row(order[i]), data.label(order[i]));
  }
  return shuffled;
}

namespace detail {

// 17 significant digits round-trip any double exactly through decimal.
inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline double parse_double_field(const std::string& field, std::size_t line_number,
                                 const char* what) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE ||
      !std::isfinite(value)) {
    throw std::runtime_error("CSV line " + std::to_string(line_number) +
                             ": malformed " + what + " '" + field + "'");
  }
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

}  // namespace detail

// Layout: header "f1,...,fd,label", one row per sample, values with 17
// significant digits, "\n" line endings. Written in binary mode so the
// bytes are identical across platforms.
inline void save_csv(const Dataset& data, const std::filesystem::path& path) {
  if (data.feature_count() == 0) {
    throw std::invalid_argument("save_csv: dataset has no features");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_csv: cannot open '" + path.string() + "' for writing");
  }
  for (std::size_t j = 0; j < data.feature_count(); ++j) {
    out << 'f' << (j + 1) << ',';
  }
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::span<const double> row = data.row(i);
    for (double value : row) {
      out << detail::format_double(value) << ',';
    }
    out << data.label(i) << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_csv: write to '" + path.string() + "' failed");
  }
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_csv: '" + path.string() + "' is empty");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw std::runtime_error("load_csv: header must be f1,...,fd,label");
  }
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "f" + std::to_string(j + 1)) {
      throw std::runtime_error("load_csv: header must be f1,...,fd,label");
    }
  }

  Dataset data(d, path.stem().string());
  std::vector<double> features(d);
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != d + 1) {
      throw std::runtime_error("CSV line " + std::to_string(line_number) + ": expected " +
                               std::to_string(d + 1) + " fields, found " +
                               std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      features[j] = detail::parse_double_field(fields[j], line_number, "feature");
    }
    const std::string& label_field = fields[d];
    if (label_field != "0" && label_field != "1") {
      throw std::runtime_error("CSV line " + std::to_string(line_number) +
                               ": label must be 0 or 1, found '" + label_field + "'");
    }
    data.add_row(features, label_field == "1" ? 1 : 0);
  }
  if (data.empty()) {
    throw std::runtime_error("load_csv: '" + path.string() + "' has no data rows");
  }
  return data;
}

// Shuffles rows and returns (train, test) with ceil((1 - test_fraction) * m)
// training rows. Both parts must come out nonempty.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& data,
                                                    double test_fraction,
                                                    RngState& rng) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw std::invalid_argument("train_test_split: test_fraction must lie in (0, 1)");
  }
  const std::size_t m = data.size();
  if (m < 2) {
    throw std::invalid_argument("train_test_split: need at least 2 rows");
  }
  const std::size_t train_count = static_cast<std::size_t>(
      std::ceil((1.0 - test_fraction) * static_cast<double>(m)));
  if (train_count == 0 || train_count == m) {
    throw std::invalid_argument("train_test_split: split would leave an empty part");
  }

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) {
    order[i] = i;
  }
  for (std::size_t i = m - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_below(i + 1);
    std::swap(order[i], order[j]);
  }

  Dataset train(data.feature_count(), data.name());
  Dataset test(data.feature_count(), data.name());
  for (std::size_t i = 0; i < m; ++i) {
    Dataset& target = i < train_count ? train : test;
    target.add_row(data.row(order[i]), data.label(order[i]));
  }
  return {std::move(train), std::move(test)};
}

}  // namespace dplr
