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
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dplr/dataset.hpp"
#include "dplr/dp_train.hpp"
#include "dplr/logreg.hpp"
#include "dplr/metrics.hpp"
#include "dplr/noise.hpp"
#include "dplr/rng.hpp"

namespace dplr {

inline constexpr const char* kVersionTag = "dplr 0.1.0";

// Stream ids keep the independent random uses of one experiment seed from
// ever sharing engine state. Paired arms (with and without pretraining)
// deliberately construct the same (seed, kNoiseStream) state so they see
// identical noise draws.
inline constexpr std::uint64_t kPublicDataStream = 1;
inline constexpr std::uint64_t kPrivateDataStream = 2;
inline constexpr std::uint64_t kNoiseStream = 3;
inline constexpr std::uint64_t kSplitStream = 4;

// One experiment description, loadable from JSON. Either both CSV paths
// are set (fixed data, shared by every seed) or neither is (synthetic
// data regenerated per seed; the public copy uses the spec's shift).
struct ExperimentConfig {
  std::optional<std::string> public_csv;
  std::optional<std::string> private_csv;
  SyntheticSpec synthetic;
  std::vector<double> epsilon_grid = {0.01, 0.1, 0.5, 1.0, 5.0};
  bool include_no_privacy = true;
  double delta = 1e-5;
  int iterations = 100;
  double learning_rate = 0.5;
  std::optional<double> clip_threshold = 1.0;
  ClippingMode clipping_mode = ClippingMode::per_example_mean;
  Accounting accounting = Accounting::basic;
  double threshold = 0.5;
  std::vector<std::uint64_t> seeds = {1,  2,  3,  4,  5,  6,  7,  8,  9,  10,
                                      11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  std::optional<double> test_fraction;
  std::string output_dir = ".";

  void validate() const {
    synthetic.validate();
    if (public_csv.has_value() != private_csv.has_value()) {
      throw std::invalid_argument(
          "ExperimentConfig: set both public_csv and private_csv or neither");
    }
    if (epsilon_grid.empty() && !include_no_privacy) {
      throw std::invalid_argument(
          "ExperimentConfig: empty epsilon_grid with no no-privacy row leaves nothing to run");
    }
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
      if (!(epsilon_grid[i] > 0.0) || !std::isfinite(epsilon_grid[i])) {
        throw std::invalid_argument(
            "ExperimentConfig: epsilon_grid entries must be positive and finite");
      }
      if (i > 0 && !(epsilon_grid[i] > epsilon_grid[i - 1])) {
        throw std::invalid_argument(
            "ExperimentConfig: epsilon_grid must be strictly increasing");
      }
    }
    if (!epsilon_grid.empty()) {
      if (!clip_threshold) {
        throw std::invalid_argument(
            "ExperimentConfig: calibrated epsilon rows require a clip threshold");
      }
      if (!(delta > 0.0) || !(delta < 1.0)) {
        throw std::invalid_argument("ExperimentConfig: delta must lie in (0, 1)");
      }
    }
    if (seeds.empty()) {
      throw std::invalid_argument("ExperimentConfig: seeds must be nonempty");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw std::invalid_argument("ExperimentConfig: seeds must be distinct");
    }
    if (iterations < 1) {
      throw std::invalid_argument("ExperimentConfig: iterations must be at least 1");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw std::invalid_argument(
          "ExperimentConfig: learning_rate must be nonnegative and finite");
    }
    if (clip_threshold && (!(*clip_threshold > 0.0) || !std::isfinite(*clip_threshold))) {
      throw std::invalid_argument(
          "ExperimentConfig: clip_threshold must be positive and finite");
    }
    if (!(threshold > 0.0) || !(threshold < 1.0)) {
      throw std::invalid_argument("ExperimentConfig: threshold must lie in (0, 1)");
    }
    if (test_fraction && (!(*test_fraction > 0.0) || !(*test_fraction < 1.0))) {
      throw std::invalid_argument("ExperimentConfig: test_fraction must lie in (0, 1)");
    }
  }
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& spec) {
  j = nlohmann::json{{"sample_count", spec.sample_count},
                     {"feature_count", spec.feature_count},
                     {"class_balance", spec.class_balance},
                     {"center_low", spec.center_low},
                     {"center_high", spec.center_high},
                     {"spread", spec.spread},
                     {"shift", spec.shift}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& spec) {
  spec = SyntheticSpec{};
  spec.sample_count = j.value("sample_count", spec.sample_count);
  spec.feature_count = j.value("feature_count", spec.feature_count);
  spec.class_balance = j.value("class_balance", spec.class_balance);
  spec.center_low = j.value("center_low", spec.center_low);
  spec.center_high = j.value("center_high", spec.center_high);
  spec.spread = j.value("spread", spec.spread);
  spec.shift = j.value("shift", spec.shift);
}

namespace detail {

inline std::string accounting_name(Accounting accounting) {
  return accounting == Accounting::basic ? "basic" : "per_iteration";
}

inline Accounting accounting_from_name(const std::string& name) {
  if (name == "basic") {
    return Accounting::basic;
  }
  if (name == "per_iteration") {
    return Accounting::per_iteration;
  }
  throw std::invalid_argument("unknown accounting mode '" + name + "'");
}

inline std::string clipping_mode_name(ClippingMode mode) {
  return mode == ClippingMode::aggregate ? "aggregate" : "per_example_mean";
}

inline ClippingMode clipping_mode_from_name(const std::string& name) {
  if (name == "aggregate") {
    return ClippingMode::aggregate;
  }
  if (name == "per_example_mean") {
    return ClippingMode::per_example_mean;
  }
  throw std::invalid_argument("unknown clipping mode '" + name + "'");
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key,
                                std::optional<T> fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  if (j.at(key).is_null()) {
    return std::nullopt;
  }
  return j.at(key).get<T>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  j = nlohmann::json{{"synthetic", cfg.synthetic},
                     {"epsilon_grid", cfg.epsilon_grid},
                     {"include_no_privacy", cfg.include_no_privacy},
                     {"delta", cfg.delta},
                     {"iterations", cfg.iterations},
                     {"learning_rate", cfg.learning_rate},
                     {"clipping_mode", detail::clipping_mode_name(cfg.clipping_mode)},
                     {"accounting", detail::accounting_name(cfg.accounting)},
                     {"threshold", cfg.threshold},
                     {"seeds", cfg.seeds},
                     {"output_dir", cfg.output_dir}};
  j["public_csv"] = cfg.public_csv ? nlohmann::json(*cfg.public_csv) : nlohmann::json();
  j["private_csv"] = cfg.private_csv ? nlohmann::json(*cfg.private_csv) : nlohmann::json();
  j["clip_threshold"] =
      cfg.clip_threshold ? nlohmann::json(*cfg.clip_threshold) : nlohmann::json();
  j["test_fraction"] =
      cfg.test_fraction ? nlohmann::json(*cfg.test_fraction) : nlohmann::json();
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  cfg = ExperimentConfig{};
  cfg.public_csv = detail::optional_field<std::string>(j, "public_csv", cfg.public_csv);
  cfg.private_csv = detail::optional_field<std::string>(j, "private_csv", cfg.private_csv);
  if (j.contains("synthetic")) {
    cfg.synthetic = j.at("synthetic").get<SyntheticSpec>();
  }
  cfg.epsilon_grid = j.value("epsilon_grid", cfg.epsilon_grid);
  cfg.include_no_privacy = j.value("include_no_privacy", cfg.include_no_privacy);
  cfg.delta = j.value("delta", cfg.delta);
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.clip_threshold =
      detail::optional_field<double>(j, "clip_threshold", cfg.clip_threshold);
  if (j.contains("clipping_mode")) {
    cfg.clipping_mode =
        detail::clipping_mode_from_name(j.at("clipping_mode").get<std::string>());
  }
  if (j.contains("accounting")) {
    cfg.accounting = detail::accounting_from_name(j.at("accounting").get<std::string>());
  }
  cfg.threshold = j.value("threshold", cfg.threshold);
  cfg.seeds = j.value("seeds", cfg.seeds);
  cfg.test_fraction = detail::optional_field<double>(j, "test_fraction", cfg.test_fraction);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
}

// One row of an epsilon sweep. epsilon is +infinity for the no-privacy
// sentinel row (rendered as "inf" in the CSV). Means and standard errors
// cover the seeds whose paired runs both finished; a diverged run drops
// its seed from both arms and counts as a failure.
struct SweepRow {
  double epsilon = 0.0;
  double acc_plain_mean = 0.0;
  double acc_plain_se = 0.0;
  double acc_pre_mean = 0.0;
  double acc_pre_se = 0.0;
  double enhancement = 0.0;
  int n_seeds = 0;
  int failures = 0;
};

struct SigmaSweepRow {
  double sigma = 0.0;
  double acc_mean = 0.0;
  double acc_se = 0.0;
  int n_seeds = 0;
  int failures = 0;
};

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write to '" + path.string() + "' failed");
  }
}

inline void write_json_sidecar(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

struct SeedData {
  Dataset public_data;
  Dataset train_data;
  std::optional<Dataset> eval_data;
};

// Data for one seed: fixed CSVs if configured, fresh synthetic draws
// otherwise. The optional eval split is carved out of the private data.
inline SeedData materialize_seed_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedData out;
  if (cfg.public_csv) {
    out.public_data = load_csv(*cfg.public_csv);
    out.train_data = load_csv(*cfg.private_csv);
  } else {
    RngState public_rng(seed, kPublicDataStream);
    RngState private_rng(seed, kPrivateDataStream);
    out.public_data = generate_synthetic(cfg.synthetic.shifted_for_public(), public_rng);
    out.train_data = generate_synthetic(cfg.synthetic, private_rng);
  }
  if (cfg.test_fraction) {
    RngState split_rng(seed, kSplitStream);
    auto [train, test] = train_test_split(out.train_data, *cfg.test_fraction, split_rng);
    out.train_data = std::move(train);
    out.eval_data = std::move(test);
  }
  return out;
}

struct PairedOutcome {
  bool ok = false;
  double acc_plain = 0.0;
  double acc_pre = 0.0;
};

// Runs both arms of one (budget, seed) cell. The arms share the data and
// the noise stream: each one constructs RngState(seed, kNoiseStream) from
// scratch, so step t of fine-tuning sees the same noise vector in both.
inline PairedOutcome run_paired_cell(const ExperimentConfig& cfg, const SeedData& data,
                                     const PrivacyBudget& budget, std::uint64_t seed) {
  TrainConfig shared;
  shared.learning_rate = cfg.learning_rate;
  shared.iterations = cfg.iterations;

  DpTrainConfig fine;
  fine.base = shared;
  fine.clip_threshold = cfg.clip_threshold;
  fine.clipping_mode = cfg.clipping_mode;

  const Dataset& eval_data = data.eval_data ? *data.eval_data : data.train_data;
  PairedOutcome outcome;
  try {
    RngState plain_noise(seed, kNoiseStream);
    const auto [plain_params, plain_trace] =
        noisy_gradient_descent(data.train_data, fine, budget, plain_noise);
    RngState pre_noise(seed, kNoiseStream);
    const PretrainResult pre = pretrain_finetune(data.public_data, data.train_data,
                                                 shared, fine, budget, pre_noise);
    outcome.acc_plain = accuracy(plain_params, eval_data, cfg.threshold);
    outcome.acc_pre = accuracy(pre.params, eval_data, cfg.threshold);
    outcome.ok = true;
  } catch (const DivergedError&) {
    outcome.ok = false;
  }
  return outcome;
}

inline std::vector<std::uint64_t> sorted_seeds(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

inline std::string sweep_csv_row(const SweepRow& row) {
  std::string line = format_double(row.epsilon);
  for (double value : {row.acc_plain_mean, row.acc_plain_se, row.acc_pre_mean,
                       row.acc_pre_se, row.enhancement}) {
    line += ',';
    line += format_double(value);
  }
  line += ',';
  line += std::to_string(row.n_seeds);
  line += '\n';
  return line;
}

}  // namespace detail

// Paired epsilon sweep over cfg.epsilon_grid plus an optional no-privacy
// sentinel row. Writes sweep.csv and sweep.meta.json into cfg.output_dir
// and returns the rows. Seeds are processed in sorted order and all
// aggregation runs in that fixed order, so reordering cfg.seeds changes
// nothing in the output and a rerun is byte-identical.
inline std::vector<SweepRow> run_epsilon_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<std::uint64_t> seeds = detail::sorted_seeds(cfg);

  struct BudgetPoint {
    double epsilon;
    bool no_privacy;
  };
  std::vector<BudgetPoint> points;
  for (double epsilon : cfg.epsilon_grid) {
    points.push_back({epsilon, false});
  }
  if (cfg.include_no_privacy) {
    points.push_back({std::numeric_limits<double>::infinity(), true});
  }

  std::vector<SweepRow> rows;
  nlohmann::json meta_rows = nlohmann::json::array();
  for (const BudgetPoint& point : points) {
    std::vector<double> acc_plain;
    std::vector<double> acc_pre;
    int failures = 0;
    std::optional<double> sigma_used;
    for (std::uint64_t seed : seeds) {
      const detail::SeedData data = detail::materialize_seed_data(cfg, seed);
      const PrivacyBudget budget =
          point.no_privacy
              ? PrivacyBudget::none(cfg.iterations)
              : PrivacyBudget::from_total(
                    PrivacyPair{point.epsilon, cfg.delta}, cfg.iterations,
                    cfg.accounting, *cfg.clip_threshold,
                    static_cast<int>(data.train_data.size()));
      sigma_used = budget.sigma;
      const detail::PairedOutcome outcome =
          detail::run_paired_cell(cfg, data, budget, seed);
      if (outcome.ok) {
        acc_plain.push_back(outcome.acc_plain);
        acc_pre.push_back(outcome.acc_pre);
      } else {
        ++failures;
      }
    }

    SweepRow row;
    row.epsilon = point.epsilon;
    row.n_seeds = static_cast<int>(acc_plain.size());
    row.failures = failures;
    if (row.n_seeds > 0) {
      row.acc_plain_mean = mean(acc_plain);
      row.acc_plain_se = standard_error(acc_plain);
      row.acc_pre_mean = mean(acc_pre);
      row.acc_pre_se = standard_error(acc_pre);
      row.enhancement = row.acc_pre_mean - row.acc_plain_mean;
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.acc_plain_mean = row.acc_plain_se = nan;
      row.acc_pre_mean = row.acc_pre_se = nan;
      row.enhancement = nan;
    }
    rows.push_back(row);

    nlohmann::json meta_row{{"n_seeds", row.n_seeds}, {"failures", row.failures}};
    if (point.no_privacy) {
      meta_row["epsilon"] = "no_privacy";
      meta_row["sigma"] = 0.0;
    } else {
      const PrivacyPair per_release = split_budget(
          PrivacyPair{point.epsilon, cfg.delta}, cfg.iterations, cfg.accounting);
      meta_row["epsilon"] = point.epsilon;
      meta_row["sigma"] = sigma_used.value_or(0.0);
      meta_row["per_release_epsilon"] = per_release.epsilon;
      meta_row["per_release_delta"] = per_release.delta;
    }
    meta_rows.push_back(meta_row);
  }

  std::filesystem::create_directories(cfg.output_dir);
  std::string csv = "epsilon,acc_plain_mean,acc_plain_se,acc_pre_mean,acc_pre_se,enhancement,n_seeds\n";
  for (const SweepRow& row : rows) {
    csv += detail::sweep_csv_row(row);
  }
  const std::filesystem::path dir(cfg.output_dir);
  detail::write_text_file(dir / "sweep.csv", csv);

  nlohmann::json meta{{"version", kVersionTag},
                      {"kind", "epsilon_sweep"},
                      {"config", cfg},
                      {"seeds_used", seeds},
                      {"accounting", detail::accounting_name(cfg.accounting)},
                      {"accuracy_kind", cfg.test_fraction ? "held_out" : "training"},
                      {"rows", meta_rows}};
  detail::write_json_sidecar(dir / "sweep.meta.json", meta);
  return rows;
}

// Accuracy of the pretrained pipeline as a function of the raw noise
// scale, budget-free. Writes sigma_sweep.csv and sigma_sweep.meta.json.
inline std::vector<SigmaSweepRow> run_sigma_sweep(const ExperimentConfig& cfg,
                                                  const std::vector<double>& sigma_grid) {
  cfg.validate();
  if (sigma_grid.empty()) {
    throw std::invalid_argument("run_sigma_sweep: sigma_grid must be nonempty");
  }
  for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
    if (!(sigma_grid[i] >= 0.0) || !std::isfinite(sigma_grid[i])) {
      throw std::invalid_argument(
          "run_sigma_sweep: sigma_grid entries must be nonnegative and finite");
    }
    if (i > 0 && !(sigma_grid[i] > sigma_grid[i - 1])) {
      throw std::invalid_argument("run_sigma_sweep: sigma_grid must be strictly increasing");
    }
  }
  const std::vector<std::uint64_t> seeds = detail::sorted_seeds(cfg);

  TrainConfig shared;
  shared.learning_rate = cfg.learning_rate;
  shared.iterations = cfg.iterations;
  DpTrainConfig fine;
  fine.base = shared;
  fine.clip_threshold = cfg.clip_threshold;
  fine.clipping_mode = cfg.clipping_mode;

  std::vector<SigmaSweepRow> rows;
  for (double sigma : sigma_grid) {
    std::vector<double> accs;
    int failures = 0;
    for (std::uint64_t seed : seeds) {
      const detail::SeedData data = detail::materialize_seed_data(cfg, seed);
      const PrivacyBudget budget = PrivacyBudget::from_sigma(sigma, cfg.iterations);
      try {
        RngState noise(seed, kNoiseStream);
        const PretrainResult pre = pretrain_finetune(data.public_data, data.train_data,
                                                     shared, fine, budget, noise);
        const Dataset& eval_data = data.eval_data ? *data.eval_data : data.train_data;
        accs.push_back(accuracy(pre.params, eval_data, cfg.threshold));
      } catch (const DivergedError&) {
        ++failures;
      }
    }
    SigmaSweepRow row;
    row.sigma = sigma;
    row.n_seeds = static_cast<int>(accs.size());
    row.failures = failures;
    if (row.n_seeds > 0) {
      row.acc_mean = mean(accs);
      row.acc_se = standard_error(accs);
    } else {
      row.acc_mean = std::numeric_limits<double>::quiet_NaN();
      row.acc_se = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }

  std::filesystem::create_directories(cfg.output_dir);
  std::string csv = "sigma,acc_mean,acc_se,n_seeds\n";
  for (const SigmaSweepRow& row : rows) {
    csv += detail::format_double(row.sigma);
    csv += ',';
    csv += detail::format_double(row.acc_mean);
    csv += ',';
    csv += detail::format_double(row.acc_se);
    csv += ',';
    csv += std::to_string(row.n_seeds);
    csv += '\n';
  }
  const std::filesystem::path dir(cfg.output_dir);
  detail::write_text_file(dir / "sigma_sweep.csv", csv);

  nlohmann::json meta_rows = nlohmann::json::array();
  for (const SigmaSweepRow& row : rows) {
    meta_rows.push_back(nlohmann::json{
        {"sigma", row.sigma}, {"n_seeds", row.n_seeds}, {"failures", row.failures}});
  }
  nlohmann::json meta{{"version", kVersionTag},
                      {"kind", "sigma_sweep"},
                      {"config", cfg},
                      {"seeds_used", seeds},
                      {"accuracy_kind", cfg.test_fraction ? "held_out" : "training"},
                      {"rows", meta_rows}};
  detail::write_json_sidecar(dir / "sigma_sweep.meta.json", meta);
  return rows;
}

namespace detail {

inline void require_tag(const std::string& tag) {
  if (tag.empty()) {
    throw std::invalid_argument("tag must be nonempty");
  }
  for (char c : tag) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) {
      throw std::invalid_argument("tag may contain only letters, digits, '_' and '-'");
    }
  }
}

}  // namespace detail

// Writes trace_<tag>.csv (columns iteration,loss; iteration 0 is the loss
// at the initial parameters) plus a JSON sidecar. provenance is stored
// verbatim in the sidecar.
inline std::filesystem::path export_loss_trace(
    const TrainTrace& trace, const std::string& tag, const std::filesystem::path& dir,
    const nlohmann::json& provenance = nlohmann::json::object()) {
  detail::require_tag(tag);
  if (trace.losses.empty()) {
    throw std::invalid_argument("export_loss_trace: trace has no recorded losses");
  }
  std::filesystem::create_directories(dir);
  std::string csv = "iteration,loss\n";
  for (std::size_t t = 0; t < trace.losses.size(); ++t) {
    csv += std::to_string(t);
    csv += ',';
    csv += detail::format_double(trace.losses[t]);
    csv += '\n';
  }
  const std::filesystem::path csv_path = dir / ("trace_" + tag + ".csv");
  detail::write_text_file(csv_path, csv);

  nlohmann::json meta{{"version", kVersionTag},
                      {"kind", "loss_trace"},
                      {"tag", tag},
                      {"iterations", trace.losses.size() - 1},
                      {"provenance", provenance}};
  detail::write_json_sidecar(dir / ("trace_" + tag + ".meta.json"), meta);
  return csv_path;
}

struct BoundaryExport {
  std::filesystem::path boundary_csv;
  std::filesystem::path grid_csv;
  bool degenerate = false;
  // Endpoints of the boundary segment inside the data bounding box;
  // empty when degenerate.
  std::vector<std::array<double, 2>> endpoints;
};

// Exports the decision boundary of a 2-feature model over the axis-aligned
// bounding box of the data. boundary.csv holds the two endpoints of the
// segment where w . x + intercept = 0 crosses the box; when the weight
// vector is zero or the line misses the box, the file instead holds the
// single word "degenerate" under the header. grid.csv labels a
// resolution x resolution evenly spaced grid via classify.
inline BoundaryExport export_decision_boundary(
    const ModelParams& params, const Dataset& data, const std::filesystem::path& dir,
    int resolution = 50, double threshold = 0.5,
    const nlohmann::json& provenance = nlohmann::json::object()) {
  if (params.dimension() != 2 || data.feature_count() != 2) {
    throw std::invalid_argument(
        "export_decision_boundary: needs 2 features in both model and data");
  }
  if (data.empty()) {
    throw std::invalid_argument("export_decision_boundary: dataset is empty");
  }
  if (resolution < 2) {
    throw std::invalid_argument("export_decision_boundary: resolution must be at least 2");
  }
  if (!(threshold > 0.0) || !(threshold < 1.0)) {
    throw std::invalid_argument("export_decision_boundary: threshold must lie in (0, 1)");
  }

  double lo[2];
  double hi[2];
  for (int axis = 0; axis < 2; ++axis) {
    lo[axis] = hi[axis] = data.row(0)[static_cast<std::size_t>(axis)];
  }
  for (std::size_t i = 1; i < data.size(); ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      const double v = data.row(i)[static_cast<std::size_t>(axis)];
      lo[axis] = std::min(lo[axis], v);
      hi[axis] = std::max(hi[axis], v);
    }
  }

  BoundaryExport out;
  const double w1 = params.weights[0];
  const double w2 = params.weights[1];
  const double norm_sq = w1 * w1 + w2 * w2;
  if (norm_sq == 0.0) {
    out.degenerate = true;
  } else {
    // Clip the line p0 + t u against the box, where p0 is the point of the
    // line closest to the origin and u is a unit direction along it.
    const double norm = std::sqrt(norm_sq);
    const double p0[2] = {-params.intercept * w1 / norm_sq,
                          -params.intercept * w2 / norm_sq};
    const double u[2] = {-w2 / norm, w1 / norm};
    double t_lo = -std::numeric_limits<double>::infinity();
    double t_hi = std::numeric_limits<double>::infinity();
    bool empty = false;
    for (int axis = 0; axis < 2; ++axis) {
      if (u[axis] == 0.0) {
        if (p0[axis] < lo[axis] || p0[axis] > hi[axis]) {
          empty = true;
        }
        continue;
      }
      double t_enter = (lo[axis] - p0[axis]) / u[axis];
      double t_exit = (hi[axis] - p0[axis]) / u[axis];
      if (t_enter > t_exit) {
        std::swap(t_enter, t_exit);
      }
      t_lo = std::max(t_lo, t_enter);
      t_hi = std::min(t_hi, t_exit);
    }
    if (empty || !(t_lo <= t_hi)) {
      out.degenerate = true;
    } else {
      for (double t : {t_lo, t_hi}) {
        out.endpoints.push_back({p0[0] + t * u[0], p0[1] + t * u[1]});
      }
    }
  }

  std::filesystem::create_directories(dir);
  std::string boundary_csv = "x1,x2\n";
  if (out.degenerate) {
    boundary_csv += "degenerate\n";
  } else {
    for (const auto& endpoint : out.endpoints) {
      boundary_csv += detail::format_double(endpoint[0]);
      boundary_csv += ',';
      boundary_csv += detail::format_double(endpoint[1]);
      boundary_csv += '\n';
    }
  }
  out.boundary_csv = dir / "boundary.csv";
  detail::write_text_file(out.boundary_csv, boundary_csv);

  std::string grid_csv = "x1,x2,label\n";
  for (int i = 0; i < resolution; ++i) {
    const double x1 =
        lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) / (resolution - 1);
    for (int k = 0; k < resolution; ++k) {
      const double x2 =
          lo[1] + (hi[1] - lo[1]) * static_cast<double>(k) / (resolution - 1);
      const double point[2] = {x1, x2};
      grid_csv += detail::format_double(x1);
      grid_csv += ',';
      grid_csv += detail::format_double(x2);
      grid_csv += ',';
      grid_csv += std::to_string(classify(params, point, threshold));
      grid_csv += '\n';
    }
  }
  out.grid_csv = dir / "grid.csv";
  detail::write_text_file(out.grid_csv, grid_csv);

  nlohmann::json meta{{"version", kVersionTag},
                      {"kind", "decision_boundary"},
                      {"weights", params.weights},
                      {"intercept", params.intercept},
                      {"threshold", threshold},
                      {"resolution", resolution},
                      {"box", {{"x1", {lo[0], hi[0]}}, {"x2", {lo[1], hi[1]}}}},
                      {"degenerate", out.degenerate},
                      {"provenance", provenance}};
  detail::write_json_sidecar(dir / "boundary.meta.json", meta);
  detail::write_json_sidecar(dir / "grid.meta.json", meta);
  return out;
}

}  // namespace dplr
