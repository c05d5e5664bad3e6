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

// Reproducible ensemble experiments.
//
// An experiment trains one ensemble per sweep value ("cell"). All members of
// all cells start from the same seeded initialisation; member i of cell s
// trains on a subset drawn with
//
//   MemberSeed(master_seed, name, s, i)
//     = Hash64({master_seed, Fnv1a64(name), s, i})
//
// so adding members or cells never changes the data of existing ones.
//
// What a sweep value means depends on the experiment:
//
//   point_removal_sweep   rows removed from a fixed base set (per member)
//   subset_divergence     rows in each member's random subset
//   clipping_sweep        whole-batch clip threshold
//   regularization_sweep  weight decay
//   group_clip_sweep      group size (threshold from clip_threshold)
//   dynamic_baseline      number of rounds (base epochs per round)
//   combination           anisotropic noise scale applied to member 0 after
//                         training one ensemble (shared by all cells)

#ifndef PACSTAB_EXPERIMENTS_HPP_
#define PACSTAB_EXPERIMENTS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pacstab/dataset.hpp"
#include "pacstab/model.hpp"
#include "pacstab/noise.hpp"
#include "pacstab/stability.hpp"
#include "pacstab/trainer.hpp"

namespace pacstab {

enum class ExperimentKind {
  point_removal_sweep,
  subset_divergence,
  clipping_sweep,
  regularization_sweep,
  group_clip_sweep,
  dynamic_baseline,
  combination,
};

std::string_view ToString(ExperimentKind kind);
ExperimentKind ParseExperimentKind(std::string_view text);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::subset_divergence;
  std::size_t ensemble_size = 8;
  std::vector<double> sweep;
  TrainingConfig base;
  LossKind loss = LossKind::softmax_cross_entropy;
  std::uint64_t master_seed = 0;
  // Rows per member subset (0: the whole training set). For
  // point_removal_sweep it is the size of the shared base set instead.
  std::size_t subset_size = 0;
  // Standard deviation of the shared initial weights.
  double init_stddev = 0.01;
  // Threshold used by group_clip_sweep.
  double clip_threshold = 1.0;

  void Validate() const;
};

// Starting points for each experiment.
ExperimentSpec DefaultExperimentSpec(ExperimentKind kind);

std::vector<double> RegularizationSweepDefaults();  // {0, 1e-3, 1e-2, 1e-1}
std::vector<double> ClippingSweepDefaults();        // {0.5, 0.25, 0.05}
std::vector<double> GroupSizeSweepDefaults();       // {10, 25, 100, 400}
std::vector<double> RemovalSweepDefaults();  // {1, 10, 100, 1000, 2500, 5000}
std::vector<double> SubsetSizeSweepDefaults();  // {1000, 5000, 10000, 20000}
// Prune 30% before training, whole-batch clip 0.5, weight decay 1e-2,
// 50 epochs.
TrainingConfig CombinationDefaults();

std::uint64_t MemberSeed(std::uint64_t master_seed, std::string_view name,
                         std::size_t sweep_index, std::size_t member_index);

struct SweepCell {
  double value = 0.0;
  // Deviation per recorded epoch (dynamic baseline: concatenated rounds,
  // epochs counted globally).
  std::vector<SeriesPoint> series;
  // Mean member test accuracy per entry of `series`.
  std::vector<double> mean_accuracy;
  DeviationReport final_report;
  std::vector<TrainTrace> traces;  // per member, snapshots dropped
  std::vector<ParamVector> models;
  // Dynamic baseline only.
  std::vector<BaselineRound> rounds;
  // Combination only: member 0 test accuracy before and after noise.
  std::optional<double> reference_accuracy;
  std::optional<double> privatized_accuracy;
  bool degenerate_spectrum = false;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<SweepCell> cells;
  bool complete = false;
  std::string error;
};

struct RunOptions {
  std::size_t workers = 1;
  // When set, each cell is written as soon as it finishes and report.json is
  // refreshed, so an aborted run keeps its completed cells.
  std::optional<std::filesystem::path> output_dir;
};

ExperimentReport RunExperiment(const ExperimentSpec& spec,
                               const FeatureDataset& train_set,
                               const FeatureDataset* test_set,
                               const RunOptions& options = {});

nlohmann::ordered_json TrainingConfigToJson(const TrainingConfig& config);
nlohmann::ordered_json ExperimentSpecToJson(const ExperimentSpec& spec);
nlohmann::ordered_json ExperimentReportToJson(const ExperimentReport& report);

// report.json, series_<sweep>_<member>.csv, deviation_<sweep>.csv and
// models/sweep_<sweep>_member_<member>.pvc.
void WriteExperimentReport(const ExperimentReport& report,
                           const std::filesystem::path& dir);

}  // namespace pacstab

#endif  // PACSTAB_EXPERIMENTS_HPP_
