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

#include "dplr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <unistd.h>

#include "dplr/dataset.hpp"
#include "dplr/dp_train.hpp"
#include "dplr/logreg.hpp"
#include "dplr/metrics.hpp"
#include "dplr/rng.hpp"

namespace dplr {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("dplr_experiments_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

// A sweep configuration small enough for unit tests.
ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.synthetic.sample_count = 60;
  cfg.epsilon_grid = {0.5, 5.0};
  cfg.iterations = 15;
  cfg.seeds = {1, 2, 3};
  cfg.output_dir = out.string();
  return cfg;
}

TEST(ExperimentConfigJson, RoundTripsThroughJson) {
  ExperimentConfig cfg;
  cfg.synthetic.sample_count = 123;
  cfg.synthetic.shift = {0.1, -0.2};
  cfg.epsilon_grid = {0.25, 2.5};
  cfg.include_no_privacy = false;
  cfg.delta = 1e-6;
  cfg.iterations = 42;
  cfg.learning_rate = 0.125;
  cfg.clip_threshold = 3.0;
  cfg.clipping_mode = ClippingMode::aggregate;
  cfg.accounting = Accounting::per_iteration;
  cfg.threshold = 0.6;
  cfg.seeds = {5, 9};
  cfg.test_fraction = 0.25;
  cfg.output_dir = "/tmp/somewhere";

  const nlohmann::json j = cfg;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  EXPECT_EQ(back.synthetic.sample_count, 123);
  EXPECT_EQ(back.synthetic.shift, (std::vector<double>{0.1, -0.2}));
  EXPECT_EQ(back.epsilon_grid, cfg.epsilon_grid);
  EXPECT_FALSE(back.include_no_privacy);
  EXPECT_DOUBLE_EQ(back.delta, 1e-6);
  EXPECT_EQ(back.iterations, 42);
  EXPECT_DOUBLE_EQ(back.learning_rate, 0.125);
  EXPECT_EQ(back.clip_threshold, cfg.clip_threshold);
  EXPECT_EQ(back.clipping_mode, ClippingMode::aggregate);
  EXPECT_EQ(back.accounting, Accounting::per_iteration);
  EXPECT_DOUBLE_EQ(back.threshold, 0.6);
  EXPECT_EQ(back.seeds, cfg.seeds);
  EXPECT_EQ(back.test_fraction, cfg.test_fraction);
  EXPECT_EQ(back.output_dir, "/tmp/somewhere");
}

TEST(ExperimentConfigJson, MissingFieldsFallBackToDefaults) {
  const nlohmann::json j = nlohmann::json::parse(R"({"iterations": 7})");
  const ExperimentConfig cfg = j.get<ExperimentConfig>();
  EXPECT_EQ(cfg.iterations, 7);
  EXPECT_EQ(cfg.seeds.size(), 20u);
  EXPECT_TRUE(cfg.include_no_privacy);
  EXPECT_EQ(cfg.clip_threshold, 1.0);
  EXPECT_FALSE(cfg.test_fraction.has_value());
}

TEST(ExperimentConfigJson, NullClipThresholdDisablesClipping) {
  const nlohmann::json j = nlohmann::json::parse(
      R"({"clip_threshold": null, "epsilon_grid": [], "include_no_privacy": true})");
  const ExperimentConfig cfg = j.get<ExperimentConfig>();
  EXPECT_FALSE(cfg.clip_threshold.has_value());
  EXPECT_NO_THROW(cfg.validate());
}

TEST(ExperimentConfigValidation, CatchesContradictions) {
  ExperimentConfig cfg;
  cfg.epsilon_grid = {1.0, 0.5};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);

  cfg = ExperimentConfig{};
  cfg.epsilon_grid.clear();
  cfg.include_no_privacy = false;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);

  cfg = ExperimentConfig{};
  cfg.clip_threshold.reset();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);

  cfg = ExperimentConfig{};
  cfg.seeds = {1, 1};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);

  cfg = ExperimentConfig{};
  cfg.public_csv = "only_one.csv";
  EXPECT_THROW(cfg.validate(), std::invalid_argument);

  cfg = ExperimentConfig{};
  cfg.test_fraction = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(RunEpsilonSweep, WritesTheDocumentedSchema) {
  TempDir dir;
  const ExperimentConfig cfg = tiny_config(dir.path());
  const std::vector<SweepRow> rows = run_epsilon_sweep(cfg);

  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[0].epsilon, 0.5);
  EXPECT_DOUBLE_EQ(rows[1].epsilon, 5.0);
  EXPECT_TRUE(std::isinf(rows[2].epsilon));
  for (const SweepRow& row : rows) {
    EXPECT_EQ(row.n_seeds, 3);
    EXPECT_EQ(row.failures, 0);
    EXPECT_NEAR(row.enhancement, row.acc_pre_mean - row.acc_plain_mean, 1e-15);
  }

  const std::string csv = read_file(dir.path() / "sweep.csv");
  EXPECT_EQ(first_line(csv),
            "epsilon,acc_plain_mean,acc_plain_se,acc_pre_mean,acc_pre_se,enhancement,n_seeds");
  std::istringstream lines(csv);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
  }
  EXPECT_EQ(count, 4);
  EXPECT_NE(csv.find("\ninf,"), std::string::npos);

  const nlohmann::json meta =
      nlohmann::json::parse(read_file(dir.path() / "sweep.meta.json"));
  EXPECT_EQ(meta.at("version"), kVersionTag);
  EXPECT_EQ(meta.at("accounting"), "basic");
  EXPECT_EQ(meta.at("accuracy_kind"), "training");
  EXPECT_EQ(meta.at("seeds_used"), (std::vector<std::uint64_t>{1, 2, 3}));
  ASSERT_EQ(meta.at("rows").size(), 3u);
  EXPECT_EQ(meta.at("rows")[2].at("epsilon"), "no_privacy");
  EXPECT_GT(meta.at("rows")[0].at("sigma").get<double>(),
            meta.at("rows")[1].at("sigma").get<double>());
  EXPECT_EQ(meta.at("config").at("iterations"), 15);
}

TEST(RunEpsilonSweep, RerunsAndSeedPermutationsAreByteIdentical) {
  TempDir dir_a;
  TempDir dir_b;
  ExperimentConfig cfg = tiny_config(dir_a.path());
  run_epsilon_sweep(cfg);
  const std::string csv_a = read_file(dir_a.path() / "sweep.csv");

  cfg.seeds = {3, 1, 2};
  cfg.output_dir = dir_b.path().string();
  run_epsilon_sweep(cfg);
  const std::string csv_b = read_file(dir_b.path() / "sweep.csv");
  EXPECT_EQ(csv_a, csv_b);

  run_epsilon_sweep(cfg);
  EXPECT_EQ(read_file(dir_b.path() / "sweep.csv"), csv_b);
}

// One seed, sentinel row only: the harness must agree exactly with a
// by-hand composition of the library calls it wraps.
TEST(RunEpsilonSweep, SentinelRowMatchesDirectComputation) {
  TempDir dir;
  ExperimentConfig cfg = tiny_config(dir.path());
  cfg.epsilon_grid.clear();
  cfg.seeds = {7};
  const std::vector<SweepRow> rows = run_epsilon_sweep(cfg);
  ASSERT_EQ(rows.size(), 1u);

  RngState public_rng(7, kPublicDataStream);
  RngState private_rng(7, kPrivateDataStream);
  const Dataset public_data =
      generate_synthetic(cfg.synthetic.shifted_for_public(), public_rng);
  const Dataset private_data = generate_synthetic(cfg.synthetic, private_rng);

  TrainConfig shared;
  shared.learning_rate = cfg.learning_rate;
  shared.iterations = cfg.iterations;
  DpTrainConfig fine;
  fine.base = shared;
  fine.clip_threshold = cfg.clip_threshold;

  RngState plain_rng(7, kNoiseStream);
  const auto [plain_params, plain_trace] = noisy_gradient_descent(
      private_data, fine, PrivacyBudget::none(cfg.iterations), plain_rng);
  RngState pre_rng(7, kNoiseStream);
  const PretrainResult pre = pretrain_finetune(public_data, private_data, shared, fine,
                                               PrivacyBudget::none(cfg.iterations), pre_rng);

  EXPECT_DOUBLE_EQ(rows[0].acc_plain_mean, accuracy(plain_params, private_data));
  EXPECT_DOUBLE_EQ(rows[0].acc_pre_mean, accuracy(pre.params, private_data));
  EXPECT_EQ(rows[0].acc_plain_se, 0.0);
  EXPECT_EQ(rows[0].acc_pre_se, 0.0);
}

TEST(RunEpsilonSweep, FixedCsvDataIsSharedAcrossSeeds) {
  TempDir dir;
  SyntheticSpec spec;
  spec.sample_count = 40;
  RngState public_rng(100, 1);
  RngState private_rng(100, 2);
  const Dataset public_data = generate_synthetic(spec.shifted_for_public(), public_rng);
  const Dataset private_data = generate_synthetic(spec, private_rng);
  const fs::path public_path = dir.path() / "public.csv";
  const fs::path private_path = dir.path() / "private.csv";
  save_csv(public_data, public_path);
  save_csv(private_data, private_path);

  ExperimentConfig cfg = tiny_config(dir.path());
  cfg.public_csv = public_path.string();
  cfg.private_csv = private_path.string();
  cfg.epsilon_grid.clear();
  cfg.seeds = {1, 2};
  const std::vector<SweepRow> rows = run_epsilon_sweep(cfg);
  ASSERT_EQ(rows.size(), 1u);
  // Without noise the seeds differ in nothing, so the per-seed accuracies
  // coincide and the standard error collapses to zero.
  EXPECT_EQ(rows[0].acc_plain_se, 0.0);
  EXPECT_EQ(rows[0].acc_pre_se, 0.0);
}

TEST(RunEpsilonSweep, HeldOutSplitChangesAccuracyKind) {
  TempDir dir;
  ExperimentConfig cfg = tiny_config(dir.path());
  cfg.epsilon_grid.clear();
  cfg.synthetic.sample_count = 80;
  cfg.test_fraction = 0.25;
  run_epsilon_sweep(cfg);
  const nlohmann::json meta =
      nlohmann::json::parse(read_file(dir.path() / "sweep.meta.json"));
  EXPECT_EQ(meta.at("accuracy_kind"), "held_out");
}

TEST(RunSigmaSweep, ZeroSigmaRowEqualsNoiselessPipeline) {
  TempDir dir;
  ExperimentConfig cfg = tiny_config(dir.path());
  cfg.seeds = {4};
  const std::vector<SigmaSweepRow> rows = run_sigma_sweep(cfg, {0.0, 0.3});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].sigma, 0.0);

  RngState public_rng(4, kPublicDataStream);
  RngState private_rng(4, kPrivateDataStream);
  const Dataset public_data =
      generate_synthetic(cfg.synthetic.shifted_for_public(), public_rng);
  const Dataset private_data = generate_synthetic(cfg.synthetic, private_rng);
  TrainConfig shared;
  shared.learning_rate = cfg.learning_rate;
  shared.iterations = cfg.iterations;
  DpTrainConfig fine;
  fine.base = shared;
  fine.clip_threshold = cfg.clip_threshold;
  RngState rng(4, kNoiseStream);
  const PretrainResult pre = pretrain_finetune(public_data, private_data, shared, fine,
                                               PrivacyBudget::none(cfg.iterations), rng);
  EXPECT_DOUBLE_EQ(rows[0].acc_mean, accuracy(pre.params, private_data));

  const std::string csv = read_file(dir.path() / "sigma_sweep.csv");
  EXPECT_EQ(first_line(csv), "sigma,acc_mean,acc_se,n_seeds");
  const nlohmann::json meta =
      nlohmann::json::parse(read_file(dir.path() / "sigma_sweep.meta.json"));
  EXPECT_EQ(meta.at("kind"), "sigma_sweep");
}

TEST(RunSigmaSweep, RejectsBadGrids) {
  TempDir dir;
  const ExperimentConfig cfg = tiny_config(dir.path());
  EXPECT_THROW(run_sigma_sweep(cfg, {}), std::invalid_argument);
  EXPECT_THROW(run_sigma_sweep(cfg, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(run_sigma_sweep(cfg, {-0.1, 0.5}), std::invalid_argument);
}

TEST(ExportLossTrace, WritesIterationIndexedRows) {
  TempDir dir;
  TrainTrace trace;
  trace.losses = {0.6931, 0.5, 0.25};
  const fs::path path =
      export_loss_trace(trace, "demo", dir.path(), nlohmann::json{{"note", "unit"}});
  const std::string csv = read_file(path);
  EXPECT_EQ(csv, "iteration,loss\n0,0.69310000000000005\n1,0.5\n2,0.25\n");
  const nlohmann::json meta =
      nlohmann::json::parse(read_file(dir.path() / "trace_demo.meta.json"));
  EXPECT_EQ(meta.at("kind"), "loss_trace");
  EXPECT_EQ(meta.at("iterations"), 2);
  EXPECT_EQ(meta.at("provenance").at("note"), "unit");
}

TEST(ExportLossTrace, RejectsEmptyTraceAndBadTags) {
  TempDir dir;
  TrainTrace empty;
  EXPECT_THROW(export_loss_trace(empty, "x", dir.path()), std::invalid_argument);
  TrainTrace trace;
  trace.losses = {1.0};
  EXPECT_THROW(export_loss_trace(trace, "", dir.path()), std::invalid_argument);
  EXPECT_THROW(export_loss_trace(trace, "../breakout", dir.path()), std::invalid_argument);
  EXPECT_THROW(export_loss_trace(trace, "has space", dir.path()), std::invalid_argument);
}

TEST(ExportDecisionBoundary, EndpointsLieOnTheSeparatingLine) {
  TempDir dir;
  const Dataset data = [] {
    SyntheticSpec spec;
    spec.sample_count = 100;
    RngState rng(6, 2);
    return generate_synthetic(spec, rng);
  }();
  ModelParams params;
  params.weights = {0.8, -1.3};
  params.intercept = 0.21;
  const BoundaryExport result = export_decision_boundary(params, data, dir.path());
  EXPECT_FALSE(result.degenerate);
  ASSERT_EQ(result.endpoints.size(), 2u);
  for (const auto& endpoint : result.endpoints) {
    const double score = params.weights[0] * endpoint[0] +
                         params.weights[1] * endpoint[1] + params.intercept;
    EXPECT_LT(std::abs(score), 1e-9);
  }

  const std::string boundary_csv = read_file(result.boundary_csv);
  EXPECT_EQ(first_line(boundary_csv), "x1,x2");
  EXPECT_EQ(std::count(boundary_csv.begin(), boundary_csv.end(), '\n'), 3);
}

TEST(ExportDecisionBoundary, VerticalLineIsHandled) {
  TempDir dir;
  Dataset data(2);
  data.add_row(std::vector<double>{-2.0, -1.0}, 0);
  data.add_row(std::vector<double>{2.0, 1.0}, 1);
  ModelParams params;
  params.weights = {1.0, 0.0};
  params.intercept = -0.5;
  const BoundaryExport result = export_decision_boundary(params, data, dir.path(), 5);
  ASSERT_FALSE(result.degenerate);
  ASSERT_EQ(result.endpoints.size(), 2u);
  for (const auto& endpoint : result.endpoints) {
    EXPECT_DOUBLE_EQ(endpoint[0], 0.5);
  }
}

TEST(ExportDecisionBoundary, GridLabelsMatchClassify) {
  TempDir dir;
  const Dataset data = [] {
    SyntheticSpec spec;
    spec.sample_count = 50;
    RngState rng(7, 2);
    return generate_synthetic(spec, rng);
  }();
  ModelParams params;
  params.weights = {1.1, 0.4};
  params.intercept = -0.2;
  const int resolution = 12;
  const double threshold = 0.35;
  const BoundaryExport result =
      export_decision_boundary(params, data, dir.path(), resolution, threshold);

  std::ifstream grid(result.grid_csv);
  std::string line;
  std::getline(grid, line);
  EXPECT_EQ(line, "x1,x2,label");
  int rows = 0;
  while (std::getline(grid, line)) {
    const auto first_comma = line.find(',');
    const auto second_comma = line.find(',', first_comma + 1);
    const double x1 = std::stod(line.substr(0, first_comma));
    const double x2 = std::stod(line.substr(first_comma + 1, second_comma - first_comma - 1));
    const int label = std::stoi(line.substr(second_comma + 1));
    const std::vector<double> point = {x1, x2};
    EXPECT_EQ(label, classify(params, point, threshold));
    ++rows;
  }
  EXPECT_EQ(rows, resolution * resolution);
}

TEST(ExportDecisionBoundary, ZeroWeightsWriteTheDegenerateMarker) {
  TempDir dir;
  const Dataset data = [] {
    SyntheticSpec spec;
    spec.sample_count = 10;
    RngState rng(8, 2);
    return generate_synthetic(spec, rng);
  }();
  const ModelParams params = ModelParams::zeros(2);
  const BoundaryExport result = export_decision_boundary(params, data, dir.path());
  EXPECT_TRUE(result.degenerate);
  EXPECT_TRUE(result.endpoints.empty());
  const std::string csv = read_file(result.boundary_csv);
  EXPECT_EQ(csv, "x1,x2\ndegenerate\n");
  const nlohmann::json meta =
      nlohmann::json::parse(read_file(dir.path() / "boundary.meta.json"));
  EXPECT_TRUE(meta.at("degenerate").get<bool>());
}

TEST(ExportDecisionBoundary, LineOutsideTheBoxIsDegenerate) {
  TempDir dir;
  Dataset data(2);
  data.add_row(std::vector<double>{0.0, 0.0}, 0);
  data.add_row(std::vector<double>{1.0, 1.0}, 1);
  ModelParams params;
  params.weights = {1.0, 0.0};
  params.intercept = -50.0;
  const BoundaryExport result = export_decision_boundary(params, data, dir.path());
  EXPECT_TRUE(result.degenerate);
}

TEST(ExportDecisionBoundary, RejectsUnsupportedShapes) {
  TempDir dir;
  const Dataset data = [] {
    SyntheticSpec spec;
    spec.sample_count = 10;
    spec.feature_count = 3;
    RngState rng(9, 2);
    return generate_synthetic(spec, rng);
  }();
  EXPECT_THROW(export_decision_boundary(ModelParams::zeros(3), data, dir.path()),
               std::invalid_argument);

  const Dataset flat = [] {
    SyntheticSpec spec;
    spec.sample_count = 10;
    RngState rng(10, 2);
    return generate_synthetic(spec, rng);
  }();
  EXPECT_THROW(export_decision_boundary(ModelParams::zeros(2), flat, dir.path(), 1),
               std::invalid_argument);
}

}  // namespace
}  // namespace dplr
