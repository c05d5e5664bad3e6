/*
 * Copyright 2026 The pacstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pacstab/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pacstab/config.hpp"
#include "pacstab/dataset.hpp"
#include "pacstab/error.hpp"
#include "pacstab/experiments.hpp"
#include "pacstab/model.hpp"
#include "pacstab/noise.hpp"
#include "pacstab/random.hpp"
#include "pacstab/stability.hpp"
#include "pacstab/text_format.hpp"
#include "pacstab/trainer.hpp"
#include "pacstab/treenet.hpp"

namespace pacstab {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kInitTag = 0x696e6974;

// Flag values destined for the key=value config; they override the file.
struct Overrides {
  ConfigMap values;

  void Add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }
};

void AddTrainingFlags(CLI::App* app, Overrides& o) {
  o.Add(app, "--lr", "lr", "Learning rate (default 0.1)");
  o.Add(app, "--epochs", "epochs", "Full-batch epochs (default 100)");
  o.Add(app, "--momentum", "momentum", "Momentum in [0,1) (default 0.9)");
  o.Add(app, "--nesterov", "nesterov", "Nesterov momentum: true|false (default true)");
  o.Add(app, "--weight-decay", "weight_decay", "Coupled weight decay (default 0)");
  o.Add(app, "--clip", "clip",
        "Clipping: none|whole_batch|group_sample|per_sample (default none)");
  o.Add(app, "--clip-threshold", "clip_threshold", "Clip threshold c > 0");
  o.Add(app, "--group-size", "group_size", "Rows per group for group_sample");
  o.Add(app, "--prune-fraction", "prune_fraction",
        "Fraction of smallest-magnitude weights to zero (default 0)");
  o.Add(app, "--prune-when", "prune_when", "before_training|after_training");
  o.Add(app, "--record-every", "record_every", "Trace recording period (default 1)");
  o.Add(app, "--freeze", "freeze", "Frozen parameter indices, e.g. 0-63,260");
}

struct DataOptions {
  std::string data;
  std::string test;
  std::optional<std::size_t> classes;
};

void AddDataFlags(CLI::App* app, DataOptions& d, bool required) {
  auto* opt = app->add_option("--data", d.data, "Training set (.fds or .csv)")
                  ->check(CLI::ExistingFile);
  if (required) opt->required();
  app->add_option("--test", d.test, "Held-out test set for accuracy")
      ->check(CLI::ExistingFile);
  app->add_option("--classes", d.classes, "Class count for CSV inputs");
}

FeatureDataset Load(const std::string& path, std::optional<std::size_t> classes) {
  return LoadDataset(path, FormatFromExtension(path), classes);
}

std::optional<FeatureDataset> LoadTest(const DataOptions& d,
                                       const FeatureDataset& train) {
  if (d.test.empty()) return std::nullopt;
  return Load(d.test, d.classes ? d.classes : std::optional(train.n_classes()));
}

void PrintHeader(std::ostream& out, const std::string& command) {
  out << "[config]\ncommand = " << command << '\n';
}

void PrintKey(std::ostream& out, const std::string& key, const std::string& value) {
  out << key << " = " << (value.empty() ? "none" : value) << '\n';
}

void WriteFile(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error("cannot create output directory " + dir.string());
  }
}

void PrintReport(std::ostream& out, const DeviationReport& r) {
  out << "[result]\n"
      << "n_models = " << r.n_models << '\n'
      << "deviation_l2 = " << FormatReal(r.deviation_l2) << '\n'
      << "mean_model_l2 = " << FormatReal(r.mean_model_l2) << '\n'
      << "percent_deviation = " << FormatReal(r.percent_deviation) << '\n'
      << "sqrt_sum = " << FormatReal(r.spectrum.sqrt_sum) << '\n'
      << "sqrt_total = " << FormatReal(r.spectrum.sqrt_total) << '\n'
      << "eigenvalues =";
  for (double v : r.spectrum.eigenvalues) out << ' ' << FormatReal(v);
  out << '\n';
}

ParamVector InitialParams(const std::string& init_path, ParamLayout layout,
                          double stddev, std::uint64_t seed,
                          std::string_view command) {
  if (!init_path.empty()) {
    ParamVector p = LoadParamVector(init_path);
    if (p.layout().feature_dim != layout.feature_dim ||
        p.layout().n_classes != layout.n_classes) {
      throw DimensionMismatch("initial model " + init_path +
                              " does not match the dataset shape");
    }
    return p;
  }
  return RandomParams(layout, stddev, Hash64({seed, Fnv1a64(command), kInitTag}));
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t n = 0, d = 0, classes = 0;
  double sep = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunSynth(const SynthArgs& a, std::ostream& out) {
  PrintHeader(out, "synth");
  out << "n = " << a.n << "\nd = " << a.d << "\nclasses = " << a.classes
      << "\nsep = " << FormatReal(a.sep) << "\nseed = " << a.seed
      << "\nout = " << a.out << '\n';
  const FeatureDataset ds = SynthesizeDataset(a.n, a.d, a.classes, a.sep, a.seed);
  SaveDataset(ds, a.out, FormatFromExtension(a.out));
  out << "[result]\nwrote " << ds.n_samples() << " rows to " << a.out << '\n';
}

struct ConvertArgs {
  std::string in, out;
  std::optional<std::size_t> classes;
};

void RunConvert(const ConvertArgs& a, std::ostream& out) {
  PrintHeader(out, "convert");
  PrintKey(out, "in", a.in);
  PrintKey(out, "out", a.out);
  PrintKey(out, "classes", a.classes ? std::to_string(*a.classes) : "inferred");
  const FeatureDataset ds = Load(a.in, a.classes);
  SaveDataset(ds, a.out, FormatFromExtension(a.out));
  out << "[result]\nrows = " << ds.n_samples() << "\nfeature_dim = "
      << ds.feature_dim() << "\nn_classes = " << ds.n_classes() << '\n';
}

struct TrainArgs {
  DataOptions data;
  std::string config, init, out, trace;
  std::string loss = "softmax";
  double init_stddev = 0.01;
  std::uint64_t seed = 0;
  std::size_t subset_size = 0;
  std::size_t remove = 0;
  std::size_t models = 8;
  std::size_t workers = 1;
  Overrides overrides;
};

TrainingConfig ResolveTraining(const TrainArgs& a, std::size_t n_params) {
  ConfigMap file;
  if (!a.config.empty()) file = LoadConfig(a.config);
  const ConfigMap merged = MergeConfig(file, a.overrides.values);
  CheckKeys(merged, TrainingKeys());
  return TrainingConfigFromMap(merged, n_params);
}

void RunTrain(const TrainArgs& a, std::ostream& out) {
  const FeatureDataset train = Load(a.data.data, a.data.classes);
  const auto test = LoadTest(a.data, train);
  const ParamLayout layout{train.feature_dim(), train.n_classes()};
  const TrainingConfig cfg = ResolveTraining(a, layout.size());
  const LossKind loss = ParseLossKind(a.loss);

  PrintHeader(out, "train");
  PrintKey(out, "data", a.data.data);
  PrintKey(out, "test", a.data.test);
  PrintKey(out, "loss", std::string(ToString(loss)));
  PrintKey(out, "init", a.init.empty() ? "random" : a.init);
  PrintKey(out, "init_stddev", FormatReal(a.init_stddev));
  PrintKey(out, "seed", std::to_string(a.seed));
  PrintKey(out, "out", a.out);
  PrintKey(out, "trace", a.trace);
  out << FormatTrainingConfig(cfg);

  const ParamVector p0 = InitialParams(a.init, layout, a.init_stddev, a.seed, "train");
  const TrainResult result = Train(p0, train, test ? &*test : nullptr, loss, cfg);
  SaveParamVector(result.params, a.out);
  if (!a.trace.empty()) {
    std::ofstream trace(a.trace, std::ios::binary);
    if (!trace) throw Error("cannot write " + a.trace);
    WriteTraceCsv(result.trace, trace);
  }
  const TraceRecord& last = result.trace.records.back();
  out << "[result]\nfinal_loss = " << FormatReal(last.loss)
      << "\ntrain_accuracy = " << FormatReal(Accuracy(result.params, train))
      << "\ntest_accuracy = " << FormatReal(last.test_accuracy) << '\n';
}

void RunEnsemble(const TrainArgs& a, std::ostream& out) {
  const FeatureDataset train = Load(a.data.data, a.data.classes);
  const auto test = LoadTest(a.data, train);
  const ParamLayout layout{train.feature_dim(), train.n_classes()};
  const TrainingConfig cfg = ResolveTraining(a, layout.size());
  const LossKind loss = ParseLossKind(a.loss);
  if (a.models < 2) throw InvalidArgument("--models must be >= 2");
  if (a.subset_size > 0 && a.remove > 0) {
    throw InvalidArgument("--subset-size and --remove are mutually exclusive");
  }

  PrintHeader(out, "ensemble");
  PrintKey(out, "data", a.data.data);
  PrintKey(out, "test", a.data.test);
  PrintKey(out, "loss", std::string(ToString(loss)));
  PrintKey(out, "models", std::to_string(a.models));
  PrintKey(out, "subset_size", std::to_string(a.subset_size));
  PrintKey(out, "remove", std::to_string(a.remove));
  PrintKey(out, "init", a.init.empty() ? "random" : a.init);
  PrintKey(out, "init_stddev", FormatReal(a.init_stddev));
  PrintKey(out, "seed", std::to_string(a.seed));
  PrintKey(out, "workers", std::to_string(a.workers));
  PrintKey(out, "out", a.out);
  out << FormatTrainingConfig(cfg);

  const fs::path dir(a.out);
  EnsureDir(dir / "models");
  const ParamVector p0 =
      InitialParams(a.init, layout, a.init_stddev, a.seed, "ensemble");
  std::vector<FeatureDataset> sets;
  for (std::size_t i = 0; i < a.models; ++i) {
    const std::uint64_t seed = MemberSeed(a.seed, "ensemble", 0, i);
    if (a.subset_size > 0) {
      sets.push_back(
          ResolveSubset(train, {SubsetMode::random_subset, a.subset_size, seed}));
    } else if (a.remove > 0) {
      sets.push_back(ResolveSubset(train, {SubsetMode::point_removal, a.remove, seed}));
    } else {
      sets.push_back(train);
    }
  }
  auto members =
      TrainEnsemble(p0, sets, test ? &*test : nullptr, loss, cfg, a.workers);

  const auto epochs = members[0].trace.Epochs();
  std::vector<std::vector<ParamVector>> snapshots;
  std::vector<ParamVector> finals;
  for (std::size_t i = 0; i < members.size(); ++i) {
    SaveParamVector(members[i].params,
                    dir / "models" / ("member_" + std::to_string(i) + ".pvc"));
    std::ofstream trace(dir / ("trace_" + std::to_string(i) + ".csv"), std::ios::binary);
    WriteTraceCsv(members[i].trace, trace);
    snapshots.push_back(std::move(members[i].trace.snapshots));
    finals.push_back(members[i].params);
  }
  const auto series = PercentSeries(snapshots, epochs);
  {
    std::ofstream csv(dir / "deviation.csv", std::ios::binary);
    WriteSeriesCsv(series, csv);
  }
  const DeviationReport report = ComputeDeviationReport(finals);
  nlohmann::ordered_json j = {{"config", TrainingConfigToJson(cfg)},
                              {"models", a.models},
                              {"seed", a.seed},
                              {"report", ReportToJson(report, false)}};
  const auto accuracy = MeanAccuracy(members);
  if (test) j["final_mean_accuracy"] = accuracy.back();
  WriteFile(dir / "report.json", j.dump(2) + "\n");
  PrintReport(out, report);
  if (test) out << "mean_test_accuracy = " << FormatReal(accuracy.back()) << '\n';
}

struct StabilityArgs {
  std::vector<std::string> models;
  std::string json;
  bool directions = false;
};

std::vector<ParamVector> LoadModels(const std::vector<std::string>& paths) {
  std::vector<ParamVector> models;
  for (const auto& path : paths) models.push_back(LoadParamVector(path));
  for (const auto& m : models) {
    if (!(m.layout().feature_dim == models[0].layout().feature_dim &&
          m.layout().n_classes == models[0].layout().n_classes)) {
      throw DimensionMismatch("models do not share one parameter layout");
    }
  }
  return models;
}

void RunStability(const StabilityArgs& a, std::ostream& out) {
  PrintHeader(out, "stability");
  std::string list;
  for (const auto& m : a.models) list += (list.empty() ? "" : " ") + m;
  PrintKey(out, "models", list);
  PrintKey(out, "json", a.json);
  PrintKey(out, "directions", a.directions ? "true" : "false");
  const auto models = LoadModels(a.models);
  const DeviationReport report =
      ComputeDeviationReport(models, ReportOptions{.with_directions = a.directions});
  if (!a.json.empty()) {
    std::ofstream j(a.json, std::ios::binary);
    if (!j) throw Error("cannot write " + a.json);
    WriteReportJson(report, j, a.directions);
  }
  PrintReport(out, report);
}

struct PrivatizeArgs {
  std::string model;
  std::vector<std::string> ensemble;
  std::string data;
  std::optional<std::size_t> classes;
  double input_sigma = 0.0;
  std::string mode = "anisotropic";
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunPrivatize(const PrivatizeArgs& a, std::ostream& out) {
  PrintHeader(out, "privatize");
  if (!a.data.empty()) {
    if (!a.model.empty() || !a.ensemble.empty()) {
      throw InvalidArgument("--data cannot be combined with --model/--ensemble");
    }
    PrintKey(out, "data", a.data);
    PrintKey(out, "input_sigma", FormatReal(a.input_sigma));
    PrintKey(out, "noise_seed", std::to_string(a.seed));
    PrintKey(out, "out", a.out);
    const FeatureDataset ds = Load(a.data, a.classes);
    SaveDataset(PerturbInputs(ds, a.input_sigma, a.seed), a.out,
                FormatFromExtension(a.out));
    out << "[result]\nrows = " << ds.n_samples() << '\n';
    return;
  }
  if (a.model.empty() || a.ensemble.size() < 2) {
    throw InvalidArgument(
        "privatize needs --model and an --ensemble of >= 2 models, or --data");
  }
  const NoiseSpec spec{ParseNoiseMode(a.mode), a.scale, a.seed};
  std::string list;
  for (const auto& m : a.ensemble) list += (list.empty() ? "" : " ") + m;
  PrintKey(out, "model", a.model);
  PrintKey(out, "ensemble", list);
  PrintKey(out, "noise_mode", std::string(ToString(spec.mode)));
  PrintKey(out, "noise_scale", FormatReal(spec.scale));
  PrintKey(out, "noise_seed", std::to_string(spec.seed));
  PrintKey(out, "out", a.out);
  const ParamVector p = LoadParamVector(a.model);
  const auto models = LoadModels(a.ensemble);
  if (p.size() != models[0].size()) {
    throw DimensionMismatch("model and ensemble have different sizes");
  }
  const DeviationReport report = ComputeDeviationReport(models);
  const PrivatizeResult result = Privatize(p, report, spec);
  SaveParamVector(result.params, a.out);
  PrintReport(out, report);
  double moved = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    moved += (result.params[i] - p[i]) * (result.params[i] - p[i]);
  }
  out << "noise_l2 = " << FormatReal(std::sqrt(moved)) << '\n'
      << "degenerate_spectrum = " << (result.degenerate_spectrum ? "true" : "false")
      << '\n';
  if (result.degenerate_spectrum) {
    out << "warning: ensemble has no deviation; model written unchanged\n";
  }
}

struct TreeArgs {
  TrainArgs train;
  std::string skeleton;
};

void RunTree(const TreeArgs& t, std::ostream& out) {
  const TrainArgs& a = t.train;
  const FeatureDataset train = Load(a.data.data, a.data.classes);
  const auto test = LoadTest(a.data, train);
  const std::size_t C = train.n_classes();
  TreeSpec skeleton;
  if (t.skeleton.empty() || t.skeleton == "balanced") {
    skeleton = C == 10 && t.skeleton.empty() ? Cifar10Skeleton() : BalancedSkeleton(C);
  } else if (t.skeleton == "cifar10") {
    if (C != 10) throw InvalidArgument("the cifar10 skeleton needs 10 classes");
    skeleton = Cifar10Skeleton();
  } else {
    skeleton = ParseSkeleton(t.skeleton, C);
  }
  const ParamLayout node_layout{train.feature_dim(), 2};
  const TrainingConfig cfg = ResolveTraining(a, node_layout.size());
  const LossKind loss = ParseLossKind(a.loss);

  PrintHeader(out, "tree");
  PrintKey(out, "data", a.data.data);
  PrintKey(out, "test", a.data.test);
  PrintKey(out, "loss", std::string(ToString(loss)));
  PrintKey(out, "skeleton", SkeletonToString(skeleton));
  PrintKey(out, "workers", std::to_string(a.workers));
  PrintKey(out, "out", a.out);
  out << FormatTrainingConfig(cfg);

  const TreeSpec tree = TrainTree(skeleton, train, loss, cfg, a.workers);
  EnsureDir(a.out);
  SaveTree(tree, a.out);
  out << "[result]\nnode_classifiers = " << tree.InternalCount()
      << "\ndepth = " << tree.Depth()
      << "\ntrain_accuracy = " << FormatReal(TreeAccuracy(tree, train)) << '\n';
  if (test) out << "test_accuracy = " << FormatReal(TreeAccuracy(tree, *test)) << '\n';
}

struct ExperimentArgs {
  std::string spec;
  std::string out;
  std::size_t workers = 1;
  DataOptions data;
  Overrides overrides;
};

void RunExperimentCommand(const ExperimentArgs& a, std::ostream& out) {
  ConfigMap file;
  fs::path base_dir;
  if (!a.spec.empty()) {
    file = LoadConfig(a.spec);
    base_dir = fs::path(a.spec).parent_path();
  }
  ConfigMap merged = MergeConfig(file, a.overrides.values);
  auto take_path = [&](const char* key, const std::string& flag) {
    std::string path = flag;
    if (path.empty()) {
      if (auto it = merged.find(key); it != merged.end()) {
        fs::path p(it->second);
        path = (p.is_relative() ? base_dir / p : p).string();
      }
    }
    merged.erase(key);
    if (!path.empty() && !fs::is_regular_file(path)) {
      throw Error(std::string(key) + " file not found: " + path);
    }
    return path;
  };
  const std::string data_path = take_path("data", a.data.data);
  const std::string test_path = take_path("test", a.data.test);
  if (data_path.empty()) throw InvalidArgument("experiment needs --data or a 'data' key");
  CheckKeys(merged, ExperimentKeys());

  const FeatureDataset train = Load(data_path, a.data.classes);
  std::optional<FeatureDataset> test;
  if (!test_path.empty()) {
    test = Load(test_path, a.data.classes ? a.data.classes
                                          : std::optional(train.n_classes()));
  }
  const ParamLayout layout{train.feature_dim(), train.n_classes()};
  const ExperimentSpec spec = ExperimentSpecFromMap(merged, layout.size());

  PrintHeader(out, "experiment");
  PrintKey(out, "data", data_path);
  PrintKey(out, "test", test_path);
  PrintKey(out, "workers", std::to_string(a.workers));
  PrintKey(out, "out", a.out);
  out << FormatExperimentSpec(spec);

  const fs::path dir(a.out);
  EnsureDir(dir);
  WriteFile(dir / "config.txt", "data = " + data_path + "\ntest = " +
                                    (test_path.empty() ? "none" : test_path) +
                                    "\n" + FormatExperimentSpec(spec));
  const ExperimentReport report = RunExperiment(
      spec, train, test ? &*test : nullptr, RunOptions{a.workers, dir});
  out << "[result]\n";
  for (std::size_t s = 0; s < report.cells.size(); ++s) {
    const SweepCell& cell = report.cells[s];
    out << "cell " << s << ": value = " << FormatReal(cell.value)
        << ", deviation_l2 = " << FormatReal(cell.final_report.deviation_l2)
        << ", percent_deviation = " << FormatReal(cell.final_report.percent_deviation)
        << ", sqrt_sum = " << FormatReal(cell.final_report.spectrum.sqrt_sum);
    if (test && !cell.mean_accuracy.empty()) {
      out << ", mean_accuracy = " << FormatReal(cell.mean_accuracy.back());
    }
    if (cell.privatized_accuracy) {
      out << ", privatized_accuracy = " << FormatReal(*cell.privatized_accuracy);
    }
    out << '\n';
  }
  out << "wrote " << (dir / "report.json").string() << '\n';
}

}  // namespace

int ParseAndDispatch(int argc, const char* const* argv, std::ostream& out,
                     std::ostream& err) {
  CLI::App app{"Stability measurement and noise calibration for linear-model ensembles",
               "pacstab"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded Gaussian-cluster dataset");
  synth_cmd->add_option("--n", synth.n, "Rows")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--d", synth.d, "Feature dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--classes", synth.classes, "Class count (>= 2)")->required();
  synth_cmd->add_option("--sep", synth.sep, "Distance between class means")->required();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->required();
  synth_cmd->add_option("--out", synth.out, "Output file (.fds or .csv)")->required();

  ConvertArgs convert;
  auto* convert_cmd = app.add_subcommand("convert", "Convert between CSV and FDS1");
  convert_cmd->add_option("--in", convert.in, "Input dataset")
      ->required()
      ->check(CLI::ExistingFile);
  convert_cmd->add_option("--out", convert.out, "Output dataset")->required();
  convert_cmd->add_option("--classes", convert.classes,
                          "Class count (CSV input; default max label + 1)");

  auto add_train_common = [](CLI::App* cmd, TrainArgs& a) {
    AddDataFlags(cmd, a.data, true);
    cmd->add_option("--config", a.config, "key=value training config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--loss", a.loss, "least_squares|softmax (default softmax)");
    AddTrainingFlags(cmd, a.overrides);
  };

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  add_train_common(train_cmd, train);
  train_cmd->add_option("--init", train.init, "Initial model (.pvc)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--init-stddev", train.init_stddev,
                        "Stddev of random initial weights (default 0.01)");
  train_cmd->add_option("--seed", train.seed, "Seed for random initial weights");
  train_cmd->add_option("--out", train.out, "Output model (.pvc)")->required();
  train_cmd->add_option("--trace", train.trace, "Trace CSV output");

  TrainArgs ens;
  auto* ens_cmd = app.add_subcommand("ensemble", "Train an ensemble and measure it");
  add_train_common(ens_cmd, ens);
  ens_cmd->add_option("--models", ens.models, "Ensemble size (default 8)");
  ens_cmd->add_option("--subset-size", ens.subset_size,
                      "Rows in each member's random subset (0: all rows)");
  ens_cmd->add_option("--remove", ens.remove, "Rows removed per member instead");
  ens_cmd->add_option("--init", ens.init, "Shared initial model (.pvc)")
      ->check(CLI::ExistingFile);
  ens_cmd->add_option("--init-stddev", ens.init_stddev,
                      "Stddev of random initial weights (default 0.01)");
  ens_cmd->add_option("--seed", ens.seed, "Seed for subsets and initial weights");
  ens_cmd->add_option("--workers", ens.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  ens_cmd->add_option("--out", ens.out, "Output directory")->required();

  StabilityArgs stab;
  auto* stab_cmd = app.add_subcommand("stability", "Deviation report for model files");
  stab_cmd->add_option("--models", stab.models, "Two or more .pvc files")
      ->required()
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  stab_cmd->add_option("--json", stab.json, "Write the report as JSON");
  stab_cmd->add_flag("--directions", stab.directions,
                     "Include noise directions in the JSON report");

  PrivatizeArgs priv;
  auto* priv_cmd = app.add_subcommand(
      "privatize", "Add calibrated noise to a model, or Gaussian noise to inputs");
  priv_cmd->add_option("--model", priv.model, "Model to privatize")
      ->check(CLI::ExistingFile);
  priv_cmd->add_option("--ensemble", priv.ensemble,
                       "Ensemble whose deviation calibrates the noise")
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  priv_cmd->add_option("--noise-mode", priv.mode, "anisotropic|isotropic");
  priv_cmd->add_option("--noise-scale", priv.scale, "Noise multiplier (default 1)");
  priv_cmd->add_option("--noise-seed", priv.seed, "Noise seed")->required();
  priv_cmd->add_option("--data", priv.data, "Dataset to perturb instead of a model")
      ->check(CLI::ExistingFile);
  priv_cmd->add_option("--classes", priv.classes, "Class count for CSV inputs");
  priv_cmd->add_option("--input-sigma", priv.input_sigma,
                       "Per-feature Gaussian noise stddev for --data");
  priv_cmd->add_option("--out", priv.out, "Output file")->required();

  TreeArgs tree;
  auto* tree_cmd = app.add_subcommand("tree", "Train a tree of binary classifiers");
  add_train_common(tree_cmd, tree.train);
  tree_cmd->add_option("--skeleton", tree.skeleton,
                       "balanced | cifar10 | split expression like "
                       "\"({0,1,8,9},{2,3,4,5,6,7})\" (default: cifar10 for 10 "
                       "classes, else balanced)");
  tree_cmd->add_option("--workers", tree.train.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  tree_cmd->add_option("--out", tree.train.out, "Output directory")->required();

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a named experiment sweep");
  exp_cmd->add_option("--spec", exp.spec, "key=value experiment file")
      ->check(CLI::ExistingFile);
  AddDataFlags(exp_cmd, exp.data, false);
  exp.overrides.Add(exp_cmd, "--experiment", "experiment",
                    "point_removal_sweep|subset_divergence|clipping_sweep|"
                    "regularization_sweep|group_clip_sweep|dynamic_baseline|"
                    "combination");
  exp.overrides.Add(exp_cmd, "--ensemble-size", "ensemble_size", "Models per cell");
  exp.overrides.Add(exp_cmd, "--sweep", "sweep", "Comma-separated sweep values");
  exp.overrides.Add(exp_cmd, "--loss", "loss", "least_squares|softmax");
  exp.overrides.Add(exp_cmd, "--seed", "seed", "Master seed");
  exp.overrides.Add(exp_cmd, "--subset-size", "subset_size", "Rows per member subset");
  exp.overrides.Add(exp_cmd, "--init-stddev", "init_stddev",
                    "Stddev of the shared initial weights");
  AddTrainingFlags(exp_cmd, exp.overrides);
  exp_cmd->add_option("--workers", exp.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  exp_cmd->add_option("--out", exp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands()[0]) {
      err << "run '" << app.get_name() << ' ' << sub->get_name()
          << " --help' for usage\n";
    } else {
      err << "run '" << app.get_name() << " --help' for usage\n";
    }
    return kExitError;
  }

  try {
    if (*synth_cmd) {
      RunSynth(synth, out);
    } else if (*convert_cmd) {
      RunConvert(convert, out);
    } else if (*train_cmd) {
      RunTrain(train, out);
    } else if (*ens_cmd) {
      RunEnsemble(ens, out);
    } else if (*stab_cmd) {
      RunStability(stab, out);
    } else if (*priv_cmd) {
      RunPrivatize(priv, out);
    } else if (*tree_cmd) {
      RunTree(tree, out);
    } else if (*exp_cmd) {
      RunExperimentCommand(exp, out);
    }
  } catch (const std::exception& e) {
    out.flush();
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

}  // namespace pacstab
