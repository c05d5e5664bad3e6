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

#include "pacstab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "pacstab/error.hpp"
#include "pacstab/random.hpp"

namespace pacstab {
namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;   // "init"
constexpr std::uint64_t kBaseTag = 0x62617365;   // "base"
constexpr std::uint64_t kNoiseTag = 0x6e6f6973;  // "nois"

bool SweepIsCount(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::point_removal_sweep:
    case ExperimentKind::subset_divergence:
    case ExperimentKind::group_clip_sweep:
    case ExperimentKind::dynamic_baseline:
      return true;
    default:
      return false;
  }
}

std::size_t AsCount(double v) { return static_cast<std::size_t>(std::llround(v)); }

std::string CellFile(const char* prefix, std::size_t sweep, const char* ext) {
  return std::string(prefix) + std::to_string(sweep) + ext;
}

void DropSnapshots(std::vector<EnsembleMember>& members,
                   std::vector<std::vector<ParamVector>>& snapshots,
                   std::vector<TrainTrace>& traces) {
  for (auto& member : members) {
    snapshots.push_back(std::move(member.trace.snapshots));
    member.trace.snapshots.clear();
    traces.push_back(std::move(member.trace));
  }
}

}  // namespace

std::string_view ToString(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::point_removal_sweep:
      return "point_removal_sweep";
    case ExperimentKind::subset_divergence:
      return "subset_divergence";
    case ExperimentKind::clipping_sweep:
      return "clipping_sweep";
    case ExperimentKind::regularization_sweep:
      return "regularization_sweep";
    case ExperimentKind::group_clip_sweep:
      return "group_clip_sweep";
    case ExperimentKind::dynamic_baseline:
      return "dynamic_baseline";
    case ExperimentKind::combination:
      return "combination";
  }
  return "unknown";
}

ExperimentKind ParseExperimentKind(std::string_view text) {
  for (auto kind : {ExperimentKind::point_removal_sweep,
                    ExperimentKind::subset_divergence,
                    ExperimentKind::clipping_sweep,
                    ExperimentKind::regularization_sweep,
                    ExperimentKind::group_clip_sweep,
                    ExperimentKind::dynamic_baseline,
                    ExperimentKind::combination}) {
    if (ToString(kind) == text) return kind;
  }
  throw InvalidArgument("unknown experiment '" + std::string(text) + "'");
}

void ExperimentSpec::Validate() const {
  if (ensemble_size < 2) throw InvalidArgument("ensemble_size must be >= 2");
  if (sweep.empty()) throw InvalidArgument("sweep must not be empty");
  base.Validate();
  if (!(init_stddev >= 0.0)) throw InvalidArgument("init_stddev must be >= 0");
  for (double v : sweep) {
    if (!std::isfinite(v)) throw InvalidArgument("sweep values must be finite");
    if (SweepIsCount(kind) && (v != std::floor(v) || v < 0.0)) {
      throw InvalidArgument(std::string(ToString(kind)) +
                            " sweep values must be nonnegative integers");
    }
  }
  switch (kind) {
    case ExperimentKind::point_removal_sweep:
      break;
    case ExperimentKind::subset_divergence:
    case ExperimentKind::group_clip_sweep:
    case ExperimentKind::dynamic_baseline:
      for (double v : sweep) {
        if (v < 1.0) {
          throw InvalidArgument(std::string(ToString(kind)) +
                                " sweep values must be >= 1");
        }
      }
      if (kind == ExperimentKind::group_clip_sweep && !(clip_threshold > 0.0)) {
        throw InvalidArgument("clip_threshold must be > 0");
      }
      if (kind == ExperimentKind::dynamic_baseline && subset_size == 0) {
        throw InvalidArgument("dynamic_baseline needs subset_size > 0");
      }
      break;
    case ExperimentKind::clipping_sweep:
      for (double v : sweep) {
        if (!(v > 0.0)) throw InvalidArgument("clip thresholds must be > 0");
      }
      break;
    case ExperimentKind::regularization_sweep:
    case ExperimentKind::combination:
      for (double v : sweep) {
        if (v < 0.0) throw InvalidArgument("sweep values must be >= 0");
      }
      break;
  }
}

std::vector<double> RegularizationSweepDefaults() { return {0.0, 1e-3, 1e-2, 1e-1}; }
std::vector<double> ClippingSweepDefaults() { return {0.5, 0.25, 0.05}; }
std::vector<double> GroupSizeSweepDefaults() { return {10, 25, 100, 400}; }
std::vector<double> RemovalSweepDefaults() { return {1, 10, 100, 1000, 2500, 5000}; }
std::vector<double> SubsetSizeSweepDefaults() { return {1000, 5000, 10000, 20000}; }

TrainingConfig CombinationDefaults() {
  TrainingConfig config;
  config.epochs = 50;
  config.prune = PruneConfig{0.3, PruneTiming::before_training};
  config.clipping = ClippingPolicy::WholeBatch(0.5);
  config.weight_decay = 1e-2;
  return config;
}

ExperimentSpec DefaultExperimentSpec(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.base.learning_rate = 0.1;
  switch (kind) {
    case ExperimentKind::point_removal_sweep:
      spec.sweep = RemovalSweepDefaults();
      spec.subset_size = 10000;
      spec.base.epochs = 100;
      break;
    case ExperimentKind::subset_divergence:
      spec.sweep = SubsetSizeSweepDefaults();
      spec.base.epochs = 75;
      break;
    case ExperimentKind::clipping_sweep:
      spec.sweep = ClippingSweepDefaults();
      spec.subset_size = 10000;
      spec.base.epochs = 100;
      break;
    case ExperimentKind::regularization_sweep:
      spec.sweep = RegularizationSweepDefaults();
      spec.subset_size = 10000;
      spec.base.epochs = 75;
      break;
    case ExperimentKind::group_clip_sweep:
      spec.sweep = GroupSizeSweepDefaults();
      spec.subset_size = 20000;
      spec.base.epochs = 100;
      spec.base.momentum = 0.0;
      spec.base.nesterov = false;
      spec.clip_threshold = 1.0;
      break;
    case ExperimentKind::dynamic_baseline:
      spec.sweep = {8};
      spec.ensemble_size = 16;
      spec.subset_size = 1000;
      spec.base.epochs = 16;
      break;
    case ExperimentKind::combination:
      spec.sweep = {1.0};
      spec.base = CombinationDefaults();
      spec.subset_size = 10000;
      break;
  }
  return spec;
}

std::uint64_t MemberSeed(std::uint64_t master_seed, std::string_view name,
                         std::size_t sweep_index, std::size_t member_index) {
  return Hash64({master_seed, Fnv1a64(name), sweep_index, member_index});
}

ExperimentReport RunExperiment(const ExperimentSpec& spec,
                               const FeatureDataset& train_set,
                               const FeatureDataset* test_set,
                               const RunOptions& options) {
  spec.Validate();
  const std::string name(ToString(spec.kind));
  const std::uint64_t name_hash = Fnv1a64(name);
  const ParamLayout layout{train_set.feature_dim(), train_set.n_classes()};
  if (test_set != nullptr && (test_set->feature_dim() != layout.feature_dim ||
                              test_set->n_classes() != layout.n_classes)) {
    throw DimensionMismatch("test set shape does not match the training set");
  }
  const ParamVector p0 = RandomParams(
      layout, spec.init_stddev, Hash64({spec.master_seed, name_hash, kInitTag}));

  const std::size_t n = train_set.n_samples();
  if (spec.subset_size > n) {
    throw InvalidArgument("subset_size " + std::to_string(spec.subset_size) +
                          " exceeds the training set (" + std::to_string(n) +
                          " rows)");
  }
  std::optional<FeatureDataset> removal_base;
  if (spec.kind == ExperimentKind::point_removal_sweep) {
    if (spec.subset_size > 0 && spec.subset_size < n) {
      removal_base = ResolveSubset(
          train_set, {SubsetMode::random_subset, spec.subset_size,
                      Hash64({spec.master_seed, name_hash, kBaseTag})});
    } else {
      removal_base = train_set;
    }
  }

  ExperimentReport report;
  report.spec = spec;
  auto flush = [&] {
    if (options.output_dir) WriteExperimentReport(report, *options.output_dir);
  };

  auto member_sets = [&](std::size_t s, double value) {
    std::vector<FeatureDataset> sets;
    sets.reserve(spec.ensemble_size);
    for (std::size_t i = 0; i < spec.ensemble_size; ++i) {
      const std::uint64_t seed = MemberSeed(spec.master_seed, name, s, i);
      switch (spec.kind) {
        case ExperimentKind::point_removal_sweep:
          sets.push_back(ResolveSubset(
              *removal_base, {SubsetMode::point_removal, AsCount(value), seed}));
          break;
        case ExperimentKind::subset_divergence:
          sets.push_back(ResolveSubset(
              train_set, {SubsetMode::random_subset, AsCount(value), seed}));
          break;
        default:
          if (spec.subset_size == 0) {
            sets.push_back(train_set);
          } else {
            sets.push_back(ResolveSubset(
                train_set, {SubsetMode::random_subset, spec.subset_size, seed}));
          }
          break;
      }
    }
    return sets;
  };

  try {
    for (std::size_t s = 0; s < spec.sweep.size(); ++s) {
      const double value = spec.sweep[s];
      SweepCell cell;
      cell.value = value;
      TrainingConfig config = spec.base;

      if (spec.kind == ExperimentKind::dynamic_baseline) {
        const std::vector<ParamVector> start(spec.ensemble_size, p0);
        const SubsetSpec subset_template{SubsetMode::random_subset, spec.subset_size,
                                         Hash64({spec.master_seed, name_hash, s})};
        DynamicBaselineResult result = DynamicBaselineTrain(
            start, train_set, AsCount(value), config.epochs, subset_template,
            spec.loss, config, test_set, options.workers);
        cell.traces.resize(spec.ensemble_size);
        for (std::size_t r = 0; r < result.rounds.size(); ++r) {
          const BaselineRound& round = result.rounds[r];
          const std::size_t offset = r * config.epochs;
          for (std::size_t k = 0; k < round.series.size(); ++k) {
            SeriesPoint point = round.series[k];
            point.epoch += offset;
            cell.series.push_back(std::move(point));
            cell.mean_accuracy.push_back(round.mean_accuracy[k]);
          }
          for (std::size_t i = 0; i < spec.ensemble_size; ++i) {
            for (TraceRecord rec : round.member_traces[i].records) {
              rec.epoch += offset;
              rec.snapshot = 0;
              cell.traces[i].records.push_back(rec);
            }
          }
        }
        cell.final_report = result.rounds.back().report;
        cell.models = std::move(result.models);
        cell.rounds = std::move(result.rounds);
      } else {
        switch (spec.kind) {
          case ExperimentKind::clipping_sweep:
            config.clipping = ClippingPolicy::WholeBatch(value);
            break;
          case ExperimentKind::regularization_sweep:
            config.weight_decay = value;
            break;
          case ExperimentKind::group_clip_sweep:
            config.clipping = ClippingPolicy::GroupSample(spec.clip_threshold,
                                                          AsCount(value));
            break;
          default:
            break;
        }
        const bool reuse = spec.kind == ExperimentKind::combination && s > 0;
        if (reuse) {
          // Every noise scale privatizes the same trained ensemble.
          const SweepCell& first = report.cells.front();
          cell.series = first.series;
          cell.mean_accuracy = first.mean_accuracy;
          cell.traces = first.traces;
          cell.models = first.models;
          cell.final_report = ComputeDeviationReport(cell.models);
        } else {
          const auto sets = member_sets(s, value);
          auto members =
              TrainEnsemble(p0, sets, test_set, spec.loss, config, options.workers);
          cell.mean_accuracy = MeanAccuracy(members);
          const auto epochs = members[0].trace.Epochs();
          std::vector<std::vector<ParamVector>> snapshots;
          DropSnapshots(members, snapshots, cell.traces);
          cell.series = PercentSeries(snapshots, epochs);
          snapshots.clear();
          for (auto& member : members) cell.models.push_back(std::move(member.params));
          cell.final_report = ComputeDeviationReport(
              cell.models,
              ReportOptions{.with_directions = spec.kind == ExperimentKind::combination});
        }

        if (spec.kind == ExperimentKind::combination) {
          const NoiseSpec noise{NoiseMode::anisotropic, value,
                                Hash64({spec.master_seed, name_hash, s, kNoiseTag})};
          const PrivatizeResult priv = Privatize(cell.models[0], cell.final_report, noise);
          cell.degenerate_spectrum = priv.degenerate_spectrum;
          if (test_set != nullptr) {
            cell.reference_accuracy = Accuracy(cell.models[0], *test_set);
            cell.privatized_accuracy = Accuracy(priv.params, *test_set);
          }
          cell.final_report.spectrum.directions.clear();
        }
      }
      report.cells.push_back(std::move(cell));
      flush();
    }
    report.complete = true;
    flush();
  } catch (const std::exception& e) {
    report.error = e.what();
    try {
      flush();
    } catch (...) {
    }
    throw;
  }
  return report;
}

nlohmann::ordered_json TrainingConfigToJson(const TrainingConfig& config) {
  nlohmann::ordered_json j = {
      {"learning_rate", config.learning_rate},
      {"epochs", config.epochs},
      {"momentum", config.momentum},
      {"nesterov", config.nesterov},
      {"weight_decay", config.weight_decay},
      {"clipping", ToString(config.clipping.kind)},
      {"clip_threshold", config.clipping.threshold},
      {"group_size", config.clipping.group_size},
      {"record_every", config.record_every},
  };
  if (config.prune) {
    j["prune_fraction"] = config.prune->fraction;
    j["prune_when"] = config.prune->when == PruneTiming::before_training
                          ? "before_training"
                          : "after_training";
  } else {
    j["prune_fraction"] = 0.0;
    j["prune_when"] = "none";
  }
  if (config.freeze_mask) {
    j["frozen_coordinates"] = std::count_if(config.freeze_mask->begin(),
                                            config.freeze_mask->end(),
                                            [](std::uint8_t b) { return b != 0; });
  } else {
    j["frozen_coordinates"] = 0;
  }
  return j;
}

nlohmann::ordered_json ExperimentSpecToJson(const ExperimentSpec& spec) {
  return {
      {"experiment", ToString(spec.kind)},
      {"ensemble_size", spec.ensemble_size},
      {"sweep", spec.sweep},
      {"loss", ToString(spec.loss)},
      {"seed", spec.master_seed},
      {"subset_size", spec.subset_size},
      {"init_stddev", spec.init_stddev},
      {"clip_threshold", spec.clip_threshold},
      {"training", TrainingConfigToJson(spec.base)},
  };
}

nlohmann::ordered_json ExperimentReportToJson(const ExperimentReport& report) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < report.cells.size(); ++s) {
    const SweepCell& cell = report.cells[s];
    nlohmann::ordered_json series = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < cell.series.size(); ++k) {
      const auto& point = cell.series[k];
      series.push_back({{"epoch", point.epoch},
                        {"deviation_l2", point.report.deviation_l2},
                        {"percent_deviation", point.report.percent_deviation},
                        {"sqrt_sum", point.report.spectrum.sqrt_sum},
                        {"mean_accuracy", cell.mean_accuracy[k]}});
    }
    nlohmann::ordered_json j = {
        {"sweep_index", s},
        {"value", cell.value},
        {"final", ReportToJson(cell.final_report)},
        {"final_mean_accuracy",
         cell.mean_accuracy.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : cell.mean_accuracy.back()},
        {"series", series},
    };
    if (!cell.rounds.empty()) {
      nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
      for (std::size_t r = 0; r < cell.rounds.size(); ++r) {
        const auto& round = cell.rounds[r];
        rounds.push_back({{"round", r},
                          {"start_deviation_l2", round.series.front().report.deviation_l2},
                          {"final", ReportToJson(round.report)}});
      }
      j["rounds"] = rounds;
    }
    if (report.spec.kind == ExperimentKind::combination) {
      j["degenerate_spectrum"] = cell.degenerate_spectrum;
      if (cell.reference_accuracy) j["reference_accuracy"] = *cell.reference_accuracy;
      if (cell.privatized_accuracy) j["privatized_accuracy"] = *cell.privatized_accuracy;
    }
    cells.push_back(std::move(j));
  }
  nlohmann::ordered_json out = {
      {"status", report.complete ? "complete" : (report.error.empty() ? "running" : "aborted")},
      {"spec", ExperimentSpecToJson(report.spec)},
      {"cells", cells},
  };
  if (!report.error.empty()) out["error"] = report.error;
  return out;
}

void WriteExperimentReport(const ExperimentReport& report,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "models");
  for (std::size_t s = 0; s < report.cells.size(); ++s) {
    const SweepCell& cell = report.cells[s];
    {
      std::ofstream out(dir / CellFile("deviation_", s, ".csv"));
      if (!out) throw Error("cannot write into " + dir.string());
      WriteSeriesCsv(cell.series, out);
    }
    for (std::size_t i = 0; i < cell.traces.size(); ++i) {
      std::ofstream out(dir / ("series_" + std::to_string(s) + "_" +
                               std::to_string(i) + ".csv"));
      WriteTraceCsv(cell.traces[i], out);
    }
    for (std::size_t i = 0; i < cell.models.size(); ++i) {
      SaveParamVector(cell.models[i], dir / "models" /
                                          ("sweep_" + std::to_string(s) +
                                           "_member_" + std::to_string(i) + ".pvc"));
    }
  }
  std::ofstream out(dir / "report.json");
  if (!out) throw Error("cannot write " + (dir / "report.json").string());
  out << ExperimentReportToJson(report).dump(2) << '\n';
}

}  // namespace pacstab
