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

// Command line front end. Every subcommand reads an optional JSON config
// file (the same schema the sweep sidecars echo under "config"), applies
// explicit flags on top, and writes CSV artifacts with JSON sidecars. On
// failure a machine-readable error record goes to stderr and the exit
// code is nonzero.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dplr/dplr.hpp"

namespace {

using namespace dplr;

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  return nlohmann::json::parse(in);
}

// The config file is applied before CLI11 writes flag values, so flags
// override the file and the file overrides compiled defaults.
void preload_config(int argc, char** argv, ExperimentConfig& cfg) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(std::string("--config=").size());
    }
  }
  if (!path.empty()) {
    cfg = load_json_file(path).get<ExperimentConfig>();
  }
}

struct OptionalFlags {
  double clip = 1.0;
  bool no_clip = false;
  double test_fraction = 0.2;
  std::string public_csv;
  std::string private_csv;
  std::string clipping_mode;
  std::string accounting;

  CLI::Option* clip_opt = nullptr;
  CLI::Option* no_clip_opt = nullptr;
  CLI::Option* test_fraction_opt = nullptr;
  CLI::Option* public_csv_opt = nullptr;
  CLI::Option* private_csv_opt = nullptr;
  CLI::Option* clipping_mode_opt = nullptr;
  CLI::Option* accounting_opt = nullptr;

  void apply(ExperimentConfig& cfg) const {
    if (no_clip) {
      cfg.clip_threshold.reset();
    } else if (clip_opt->count() > 0) {
      cfg.clip_threshold = clip;
    }
    if (test_fraction_opt->count() > 0) {
      cfg.test_fraction = test_fraction;
    }
    if (public_csv_opt->count() > 0) {
      cfg.public_csv = public_csv;
    }
    if (private_csv_opt->count() > 0) {
      cfg.private_csv = private_csv;
    }
    if (clipping_mode_opt->count() > 0) {
      cfg.clipping_mode = detail::clipping_mode_from_name(clipping_mode);
    }
    if (accounting_opt->count() > 0) {
      cfg.accounting = detail::accounting_from_name(accounting);
    }
  }
};

// Registers the flags shared by train and the sweeps. Values land in cfg
// directly except for the optional-valued ones collected in flags.
void add_config_flags(CLI::App* sub, ExperimentConfig& cfg, OptionalFlags& flags) {
  sub->add_option("--config", "JSON config file; flags given here override it")
      ->check(CLI::ExistingFile);
  sub->add_option("--out-dir", cfg.output_dir, "directory for output artifacts")
      ->capture_default_str();
  sub->add_option("--samples", cfg.synthetic.sample_count,
                  "synthetic rows per dataset")
      ->capture_default_str();
  sub->add_option("--features", cfg.synthetic.feature_count, "synthetic feature count")
      ->capture_default_str();
  sub->add_option("--balance", cfg.synthetic.class_balance,
                  "synthetic fraction of label-0 rows")
      ->capture_default_str();
  sub->add_option("--spread", cfg.synthetic.spread, "synthetic per-class noise scale")
      ->capture_default_str();
  sub->add_option("--shift", cfg.synthetic.shift,
                  "translation of the private blobs relative to the public ones");
  sub->add_option("--center-low", cfg.synthetic.center_low,
                  "center of the label-0 blob (default: all -1)");
  sub->add_option("--center-high", cfg.synthetic.center_high,
                  "center of the label-1 blob (default: all +1)");
  flags.public_csv_opt = sub->add_option("--public-csv", flags.public_csv,
                                         "pretraining data CSV (default: synthetic)");
  flags.private_csv_opt = sub->add_option("--private-csv", flags.private_csv,
                                          "training data CSV (default: synthetic)");
  sub->add_option("--delta", cfg.delta, "privacy parameter delta")->capture_default_str();
  sub->add_option("--iterations", cfg.iterations, "gradient descent steps")
      ->capture_default_str();
  sub->add_option("--learning-rate", cfg.learning_rate, "gradient descent step size")
      ->capture_default_str();
  flags.clip_opt = sub->add_option("--clip", flags.clip,
                                   "gradient clipping threshold (default: 1)");
  flags.no_clip_opt =
      sub->add_flag("--no-clip", flags.no_clip, "disable gradient clipping");
  flags.no_clip_opt->excludes(flags.clip_opt);
  flags.clipping_mode_opt =
      sub->add_option("--clipping-mode", flags.clipping_mode,
                      "per_example_mean or aggregate (default: per_example_mean)")
          ->check(CLI::IsMember({"per_example_mean", "aggregate"}));
  flags.accounting_opt =
      sub->add_option("--accounting", flags.accounting,
                      "budget split across iterations: basic or per_iteration "
                      "(default: basic)")
          ->check(CLI::IsMember({"basic", "per_iteration"}));
  sub->add_option("--threshold", cfg.threshold, "classification probability threshold")
      ->capture_default_str();
  flags.test_fraction_opt =
      sub->add_option("--test-fraction", flags.test_fraction,
                      "hold out this fraction of the training data for accuracy "
                      "(default: accuracy on the training data itself)");
}

void write_sidecar_for(const std::filesystem::path& csv_path, const nlohmann::json& meta) {
  std::filesystem::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  std::ofstream out(meta_path, std::ios::binary);
  out << meta.dump(2) << '\n';
  if (!out) {
    throw std::runtime_error("failed to write " + meta_path.string());
  }
}

int run_gen_data(const ExperimentConfig& cfg, const std::string& out,
                 std::uint64_t seed, const std::string& role) {
  const bool public_role = role == "public";
  const SyntheticSpec spec =
      public_role ? cfg.synthetic.shifted_for_public() : cfg.synthetic;
  RngState rng(seed, public_role ? kPublicDataStream : kPrivateDataStream);
  const Dataset data = generate_synthetic(spec, rng);
  save_csv(data, out);
  write_sidecar_for(out, nlohmann::json{{"version", kVersionTag},
                                        {"kind", "dataset"},
                                        {"role", role},
                                        {"seed", seed},
                                        {"sample_count", data.size()},
                                        {"feature_count", data.feature_count()},
                                        {"synthetic", cfg.synthetic}});
  std::printf("wrote %s (%zu rows, %zu features)\n", out.c_str(), data.size(),
              data.feature_count());
  return 0;
}

nlohmann::json budget_record(const PrivacyBudget& budget) {
  nlohmann::json record{{"sigma", budget.sigma},
                        {"iterations", budget.iterations}};
  if (budget.calibrated()) {
    const PrivacyPair per_release = *budget.per_release;
    record["epsilon"] = budget.total->epsilon;
    record["delta"] = budget.total->delta;
    record["accounting"] = detail::accounting_name(budget.accounting);
    record["per_release_epsilon"] = per_release.epsilon;
    record["per_release_delta"] = per_release.delta;
  } else if (budget.sigma == 0.0) {
    record["no_privacy"] = true;
  }
  return record;
}

int run_train(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& tag,
              std::optional<double> epsilon, std::optional<double> sigma,
              bool no_privacy, bool pretrain) {
  detail::require_tag(tag);

  Dataset train_data;
  if (cfg.private_csv) {
    train_data = load_csv(*cfg.private_csv);
  } else {
    RngState data_rng(seed, kPrivateDataStream);
    train_data = generate_synthetic(cfg.synthetic, data_rng);
  }
  std::optional<Dataset> eval_data;
  if (cfg.test_fraction) {
    RngState split_rng(seed, kSplitStream);
    auto [train_part, test_part] = train_test_split(train_data, *cfg.test_fraction, split_rng);
    train_data = std::move(train_part);
    eval_data = std::move(test_part);
  }

  TrainConfig base;
  base.learning_rate = cfg.learning_rate;
  base.iterations = cfg.iterations;
  DpTrainConfig fine;
  fine.base = base;
  fine.clip_threshold = cfg.clip_threshold;
  fine.clipping_mode = cfg.clipping_mode;
  fine.validate();
  if (!(cfg.threshold > 0.0) || !(cfg.threshold < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0, 1)");
  }

  PrivacyBudget budget = PrivacyBudget::none(cfg.iterations);
  if (epsilon) {
    if (!cfg.clip_threshold) {
      throw std::invalid_argument("--epsilon needs a clip threshold; drop --no-clip");
    }
    budget = PrivacyBudget::from_total(PrivacyPair{*epsilon, cfg.delta}, cfg.iterations,
                                       cfg.accounting, *cfg.clip_threshold,
                                       static_cast<int>(train_data.size()));
  } else if (sigma) {
    budget = PrivacyBudget::from_sigma(*sigma, cfg.iterations);
  }

  RngState noise_rng(seed, kNoiseStream);
  ModelParams params;
  TrainTrace trace;
  std::optional<TrainTrace> pretrain_trace;
  if (pretrain) {
    Dataset public_data;
    if (cfg.public_csv) {
      public_data = load_csv(*cfg.public_csv);
    } else {
      RngState public_rng(seed, kPublicDataStream);
      public_data = generate_synthetic(cfg.synthetic.shifted_for_public(), public_rng);
    }
    PretrainResult result =
        pretrain_finetune(public_data, train_data, base, fine, budget, noise_rng);
    params = std::move(result.params);
    trace = std::move(result.finetune_trace);
    pretrain_trace = std::move(result.pretrain_trace);
  } else {
    auto [trained, recorded] = noisy_gradient_descent(train_data, fine, budget, noise_rng);
    params = std::move(trained);
    trace = std::move(recorded);
  }

  const Dataset& scored = eval_data ? *eval_data : train_data;
  const double acc = accuracy(params, scored, cfg.threshold);

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  nlohmann::json record{{"version", kVersionTag},
                        {"kind", "train_run"},
                        {"tag", tag},
                        {"seed", seed},
                        {"mode", pretrain ? "pretrain_finetune" : "direct"},
                        {"budget", budget_record(budget)},
                        {"no_privacy", no_privacy},
                        {"accuracy_kind", cfg.test_fraction ? "held_out" : "training"},
                        {"config", cfg},
                        {"params", {{"weights", params.weights}, {"intercept", params.intercept}}},
                        {"accuracy", acc},
                        {"final_loss", trace.losses.back()},
                        {"losses", trace.losses}};
  if (pretrain_trace) {
    record["pretrain_losses"] = pretrain_trace->losses;
  }
  const std::filesystem::path run_path = dir / ("run_" + tag + ".json");
  std::ofstream out(run_path, std::ios::binary);
  out << record.dump(2) << '\n';
  if (!out) {
    throw std::runtime_error("failed to write " + run_path.string());
  }

  const nlohmann::json provenance{{"source_run", run_path.filename().string()},
                                  {"seed", seed}};
  export_loss_trace(trace, tag, dir, provenance);
  if (pretrain_trace) {
    export_loss_trace(*pretrain_trace, tag + "-pretrain", dir, provenance);
  }

  std::printf("wrote %s\n", run_path.string().c_str());
  std::printf("accuracy (%s): %.4f, final loss %.6f, sigma %.6g\n",
              cfg.test_fraction ? "held out" : "training", acc, trace.losses.back(),
              budget.sigma);
  return 0;
}

int run_sweep_eps(const ExperimentConfig& cfg) {
  const std::vector<SweepRow> rows = run_epsilon_sweep(cfg);
  std::printf("wrote %s\n",
              (std::filesystem::path(cfg.output_dir) / "sweep.csv").string().c_str());
  for (const SweepRow& row : rows) {
    if (std::isinf(row.epsilon)) {
      std::printf("no_privacy  ");
    } else {
      std::printf("eps=%-7g ", row.epsilon);
    }
    std::printf("plain=%.4f+-%.4f  pretrained=%.4f+-%.4f  enhancement=%+.4f  seeds=%d\n",
                row.acc_plain_mean, row.acc_plain_se, row.acc_pre_mean, row.acc_pre_se,
                row.enhancement, row.n_seeds);
  }
  return 0;
}

int run_sweep_sigma(const ExperimentConfig& cfg, const std::vector<double>& sigma_grid) {
  const std::vector<SigmaSweepRow> rows = run_sigma_sweep(cfg, sigma_grid);
  std::printf("wrote %s\n",
              (std::filesystem::path(cfg.output_dir) / "sigma_sweep.csv").string().c_str());
  for (const SigmaSweepRow& row : rows) {
    std::printf("sigma=%-9g acc=%.4f+-%.4f  seeds=%d\n", row.sigma, row.acc_mean,
                row.acc_se, row.n_seeds);
  }
  return 0;
}

int run_export_trace(const std::string& run_path, const std::string& out_dir,
                     std::string tag, const std::string& phase) {
  const nlohmann::json record = load_json_file(run_path);
  const char* key = phase == "pretrain" ? "pretrain_losses" : "losses";
  if (!record.contains(key)) {
    throw std::runtime_error(run_path + " has no " + key + " field");
  }
  TrainTrace trace;
  trace.losses = record.at(key).get<std::vector<double>>();
  if (tag.empty()) {
    tag = record.at("tag").get<std::string>();
    if (phase == "pretrain") {
      tag += "-pretrain";
    }
  }
  const nlohmann::json provenance{{"source_run", run_path},
                                  {"phase", phase},
                                  {"source_version", record.value("version", "")}};
  const std::filesystem::path csv = export_loss_trace(trace, tag, out_dir, provenance);
  std::printf("wrote %s (%zu losses)\n", csv.string().c_str(), trace.losses.size());
  return 0;
}

int run_export_boundary(const std::string& run_path, const std::string& data_path,
                        const std::string& out_dir, int resolution, double threshold) {
  const nlohmann::json record = load_json_file(run_path);
  ModelParams params;
  params.weights = record.at("params").at("weights").get<std::vector<double>>();
  params.intercept = record.at("params").at("intercept").get<double>();
  const Dataset data = load_csv(data_path);
  const nlohmann::json provenance{{"source_run", run_path}, {"data", data_path}};
  const BoundaryExport result = export_decision_boundary(
      params, data, out_dir, resolution, threshold, provenance);
  std::printf("wrote %s and %s\n", result.boundary_csv.string().c_str(),
              result.grid_csv.string().c_str());
  if (result.degenerate) {
    std::printf("boundary is degenerate (zero weights or line outside the data box)\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private logistic regression toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersionTag));

  ExperimentConfig cfg;
  OptionalFlags gen_flags;
  OptionalFlags train_flags;
  OptionalFlags sweep_flags;
  OptionalFlags sigma_flags;
  std::uint64_t seed = 1;
  std::string tag = "run";
  std::string out_path = "data.csv";
  std::string role = "private";
  double epsilon = 1.0;
  double sigma = 0.0;
  bool no_privacy = false;
  bool pretrain = false;
  std::vector<double> sigma_grid;
  std::string run_path;
  std::string data_path;
  std::string phase = "train";
  int resolution = 50;
  double boundary_threshold = 0.5;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
  {
    add_config_flags(gen, cfg, gen_flags);
    gen->add_option("--out", out_path, "output CSV path")->capture_default_str();
    gen->add_option("--seed", seed, "dataset seed")->capture_default_str();
    gen->add_option("--role", role,
                    "private draws the training distribution; public draws the "
                    "same blobs with centers translated by the configured shift")
        ->check(CLI::IsMember({"public", "private"}))
        ->capture_default_str();
    gen->callback([&] {
      gen_flags.apply(cfg);
      run_gen_data(cfg, out_path, seed, role);
    });
  }

  CLI::App* train = app.add_subcommand("train", "train one model and record the run");
  {
    add_config_flags(train, cfg, train_flags);
    train->add_option("--seed", seed, "data and noise seed")->capture_default_str();
    train->add_option("--tag", tag, "artifact tag: run_<tag>.json, trace_<tag>.csv")
        ->capture_default_str();
    CLI::Option* eps_opt =
        train->add_option("--epsilon", epsilon, "total privacy budget epsilon");
    CLI::Option* sigma_opt =
        train->add_option("--sigma", sigma, "raw per-iteration noise scale");
    CLI::Option* none_opt =
        train->add_flag("--no-privacy", no_privacy, "train without noise");
    eps_opt->excludes(sigma_opt)->excludes(none_opt);
    sigma_opt->excludes(none_opt);
    train->add_flag("--pretrain", pretrain,
                    "pretrain on the public data, then fine-tune privately");
    train->callback([&, eps_opt, sigma_opt, none_opt] {
      train_flags.apply(cfg);
      if (eps_opt->count() + sigma_opt->count() + none_opt->count() != 1) {
        throw CLI::ValidationError(
            "train", "pass exactly one of --epsilon, --sigma, --no-privacy");
      }
      run_train(cfg, seed, tag,
                eps_opt->count() ? std::optional<double>(epsilon) : std::nullopt,
                sigma_opt->count() ? std::optional<double>(sigma) : std::nullopt,
                no_privacy, pretrain);
    });
  }

  CLI::App* sweep = app.add_subcommand(
      "sweep-eps", "paired accuracy sweep over the epsilon grid, plus a "
                   "no-privacy sentinel row");
  {
    add_config_flags(sweep, cfg, sweep_flags);
    sweep->add_option("--grid", cfg.epsilon_grid, "epsilon grid, strictly increasing");
    sweep->add_option("--seeds", cfg.seeds, "seeds to average over (default: 1..20)");
    sweep->add_flag_callback(
        "--no-sentinel", [&] { cfg.include_no_privacy = false; },
        "drop the no-privacy sentinel row");
    sweep->callback([&] {
      sweep_flags.apply(cfg);
      run_sweep_eps(cfg);
    });
  }

  CLI::App* sweep_s = app.add_subcommand(
      "sweep-sigma", "pretrained-pipeline accuracy over raw noise scales");
  {
    add_config_flags(sweep_s, cfg, sigma_flags);
    sweep_s->add_option("--sigma-grid", sigma_grid,
                        "noise scales, nonnegative and strictly increasing")
        ->required();
    sweep_s->add_option("--seeds", cfg.seeds, "seeds to average over (default: 1..20)");
    sweep_s->callback([&] {
      sigma_flags.apply(cfg);
      run_sweep_sigma(cfg, sigma_grid);
    });
  }

  CLI::App* trace = app.add_subcommand("export-trace",
                                       "re-export the loss trace of a recorded run");
  {
    trace->add_option("--run", run_path, "run_<tag>.json produced by train")
        ->required()
        ->check(CLI::ExistingFile);
    trace->add_option("--out-dir", cfg.output_dir, "directory for output artifacts")
        ->capture_default_str();
    trace->add_option("--tag", tag, "output tag (default: the run's own tag)");
    trace->add_option("--phase", phase, "train or pretrain")
        ->check(CLI::IsMember({"train", "pretrain"}))
        ->capture_default_str();
    trace->callback([&] {
      run_export_trace(run_path, cfg.output_dir,
                       trace->get_option("--tag")->count() ? tag : "", phase);
    });
  }

  CLI::App* boundary = app.add_subcommand(
      "export-boundary", "export the decision line and a labeled grid for a "
                         "2-feature model");
  {
    boundary->add_option("--run", run_path, "run_<tag>.json produced by train")
        ->required()
        ->check(CLI::ExistingFile);
    boundary->add_option("--data", data_path, "dataset CSV fixing the bounding box")
        ->required()
        ->check(CLI::ExistingFile);
    boundary->add_option("--out-dir", cfg.output_dir, "directory for output artifacts")
        ->capture_default_str();
    boundary->add_option("--resolution", resolution, "grid points per axis")
        ->capture_default_str();
    boundary->add_option("--threshold", boundary_threshold,
                         "classification probability threshold")
        ->capture_default_str();
    boundary->callback([&] {
      run_export_boundary(run_path, data_path, cfg.output_dir, resolution,
                          boundary_threshold);
    });
  }

  try {
    preload_config(argc, argv, cfg);
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const nlohmann::json record{
        {"error", {{"kind", "usage"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", record.dump().c_str());
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  } catch (const std::exception& e) {
    const nlohmann::json record{
        {"error", {{"kind", "runtime"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", record.dump().c_str());
    return 1;
  }
  return 0;
}
