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

#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "pacstab/error.hpp"
#include "pacstab/experiments.hpp"
#include "pacstab/random.hpp"
#include "test_util.hpp"

namespace pacstab {
namespace {

using testing::TempDir;

ExperimentSpec SmallSpec(ExperimentKind kind) {
  ExperimentSpec spec = DefaultExperimentSpec(kind);
  spec.ensemble_size = 3;
  spec.base.epochs = 8;
  spec.base.record_every = 4;
  spec.master_seed = 17;
  spec.subset_size = 0;
  return spec;
}

TEST(Defaults, SweepLists) {
  EXPECT_EQ(RegularizationSweepDefaults(), (std::vector<double>{0, 1e-3, 1e-2, 1e-1}));
  EXPECT_EQ(ClippingSweepDefaults(), (std::vector<double>{0.5, 0.25, 0.05}));
  EXPECT_EQ(GroupSizeSweepDefaults(), (std::vector<double>{10, 25, 100, 400}));
  EXPECT_EQ(RemovalSweepDefaults(), (std::vector<double>{1, 10, 100, 1000, 2500, 5000}));
  EXPECT_EQ(SubsetSizeSweepDefaults(), (std::vector<double>{1000, 5000, 10000, 20000}));
  const TrainingConfig combo = CombinationDefaults();
  ASSERT_TRUE(combo.prune.has_value());
  EXPECT_DOUBLE_EQ(combo.prune->fraction, 0.3);
  EXPECT_EQ(combo.prune->when, PruneTiming::before_training);
  EXPECT_EQ(combo.clipping, ClippingPolicy::WholeBatch(0.5));
  EXPECT_DOUBLE_EQ(combo.weight_decay, 1e-2);
  EXPECT_EQ(combo.epochs, 50u);
}

TEST(Defaults, EveryKindValidates) {
  for (auto kind : {ExperimentKind::point_removal_sweep, ExperimentKind::subset_divergence,
                    ExperimentKind::clipping_sweep, ExperimentKind::regularization_sweep,
                    ExperimentKind::group_clip_sweep, ExperimentKind::dynamic_baseline,
                    ExperimentKind::combination}) {
    const auto spec = DefaultExperimentSpec(kind);
    EXPECT_NO_THROW(spec.Validate()) << ToString(kind);
    EXPECT_EQ(ParseExperimentKind(ToString(kind)), kind);
  }
  EXPECT_THROW(ParseExperimentKind("bogus"), InvalidArgument);
}

TEST(Validate, RejectsBadSweeps) {
  auto spec = DefaultExperimentSpec(ExperimentKind::group_clip_sweep);
  spec.sweep = {2.5};
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec.sweep = {0};
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec = DefaultExperimentSpec(ExperimentKind::clipping_sweep);
  spec.sweep = {0.0};
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec = DefaultExperimentSpec(ExperimentKind::regularization_sweep);
  spec.sweep = {-1e-3};
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec.sweep = {};
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec = DefaultExperimentSpec(ExperimentKind::dynamic_baseline);
  spec.subset_size = 0;
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec = DefaultExperimentSpec(ExperimentKind::subset_divergence);
  spec.ensemble_size = 1;
  EXPECT_THROW(spec.Validate(), InvalidArgument);
}

TEST(MemberSeed, MatchesHashAndIsolatesMembers) {
  EXPECT_EQ(MemberSeed(5, "group_clip_sweep", 2, 7),
            Hash64({5, Fnv1a64("group_clip_sweep"), 2, 7}));
  EXPECT_NE(MemberSeed(5, "a", 0, 1), MemberSeed(5, "a", 1, 0));
  EXPECT_NE(MemberSeed(5, "a", 0, 0), MemberSeed(5, "b", 0, 0));
}

TEST(RunExperiment, AddingMembersKeepsExistingModels) {
  const auto ds = testing::RandomDataset(300, 5, 3, 1);
  auto spec = SmallSpec(ExperimentKind::subset_divergence);
  spec.sweep = {100};
  const auto small = RunExperiment(spec, ds, nullptr);
  spec.ensemble_size = 4;
  const auto large = RunExperiment(spec, ds, nullptr);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(small.cells[0].models[i], large.cells[0].models[i]);
  }
}

TEST(RunExperiment, DeterministicAndWorkerInvariant) {
  const auto ds = testing::RandomDataset(200, 4, 3, 2);
  const auto test = testing::RandomDataset(50, 4, 3, 3);
  auto spec = SmallSpec(ExperimentKind::regularization_sweep);
  spec.sweep = {0, 0.1};
  spec.subset_size = 120;
  const auto a = RunExperiment(spec, ds, &test, {.workers = 1});
  const auto b = RunExperiment(spec, ds, &test, {.workers = 3});
  ASSERT_EQ(a.cells.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_EQ(a.cells[s].models, b.cells[s].models);
    EXPECT_EQ(a.cells[s].final_report.deviation_l2, b.cells[s].final_report.deviation_l2);
    EXPECT_EQ(a.cells[s].mean_accuracy, b.cells[s].mean_accuracy);
  }
  EXPECT_EQ(ExperimentReportToJson(a).dump(), ExperimentReportToJson(b).dump());
  // Records at epochs 0, 4 and 8.
  ASSERT_EQ(a.cells[0].series.size(), 3u);
  EXPECT_EQ(a.cells[0].series[2].epoch, 8u);
  EXPECT_EQ(a.cells[0].series[0].report.deviation_l2, 0.0);
}

TEST(RunExperiment, PointRemovalSetsAreNested) {
  const auto ds = testing::RandomDataset(120, 3, 2, 4);
  auto spec = SmallSpec(ExperimentKind::point_removal_sweep);
  spec.sweep = {0, 5};
  spec.subset_size = 100;
  const auto report = RunExperiment(spec, ds, nullptr);
  // Removing nothing leaves every member on the same base set.
  EXPECT_EQ(report.cells[0].final_report.deviation_l2, 0.0);
  EXPECT_GT(report.cells[1].final_report.deviation_l2, 0.0);
}

TEST(RunExperiment, DynamicBaselineSeries) {
  const auto ds = testing::RandomDataset(200, 4, 3, 5);
  auto spec = SmallSpec(ExperimentKind::dynamic_baseline);
  spec.sweep = {3};
  spec.subset_size = 50;
  spec.base.epochs = 4;
  spec.base.record_every = 2;
  const auto report = RunExperiment(spec, ds, nullptr);
  const auto& cell = report.cells[0];
  ASSERT_EQ(cell.rounds.size(), 3u);
  ASSERT_EQ(cell.series.size(), 9u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(cell.series[3 * r].epoch, 4 * r);
    EXPECT_EQ(cell.series[3 * r].report.deviation_l2, 0.0);
    EXPECT_GT(cell.series[3 * r + 2].report.deviation_l2, 0.0);
  }
  EXPECT_EQ(cell.traces[0].records.size(), 9u);
}

TEST(RunExperiment, CombinationSharesOneEnsemble) {
  const auto ds = testing::RandomDataset(200, 4, 3, 6);
  const auto test = testing::RandomDataset(60, 4, 3, 7);
  auto spec = SmallSpec(ExperimentKind::combination);
  spec.sweep = {0, 1, 4};
  spec.subset_size = 120;
  const auto report = RunExperiment(spec, ds, &test);
  ASSERT_EQ(report.cells.size(), 3u);
  for (const auto& cell : report.cells) {
    EXPECT_EQ(cell.models, report.cells[0].models);
    EXPECT_EQ(cell.final_report.deviation_l2, report.cells[0].final_report.deviation_l2);
    EXPECT_TRUE(cell.final_report.spectrum.directions.empty());
    ASSERT_TRUE(cell.reference_accuracy.has_value());
    EXPECT_EQ(*cell.reference_accuracy, *report.cells[0].reference_accuracy);
  }
  // Zero noise leaves member 0 untouched.
  EXPECT_EQ(*report.cells[0].privatized_accuracy, *report.cells[0].reference_accuracy);
}

TEST(RunExperiment, WritesFilesAndFlushesOnAbort) {
  const auto dir = TempDir("experiment");
  const auto ds = testing::RandomDataset(100, 3, 2, 8);
  auto spec = SmallSpec(ExperimentKind::subset_divergence);
  spec.sweep = {50, 500};  // the second cell asks for more rows than exist
  EXPECT_THROW(RunExperiment(spec, ds, nullptr, {.workers = 1, .output_dir = dir}),
               InvalidArgument);
  std::ifstream in(dir / "report.json");
  ASSERT_TRUE(in);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["status"], "aborted");
  EXPECT_EQ(j["cells"].size(), 1u);
  EXPECT_TRUE(j.contains("error"));
  EXPECT_TRUE(std::filesystem::exists(dir / "deviation_0.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "series_0_2.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "models" / "sweep_0_member_2.pvc"));
  EXPECT_FALSE(std::filesystem::exists(dir / "deviation_1.csv"));

  spec.sweep = {50};
  const auto report = RunExperiment(spec, ds, nullptr, {.workers = 1, .output_dir = dir});
  std::ifstream again(dir / "report.json");
  const auto k = nlohmann::json::parse(again);
  EXPECT_EQ(k["status"], "complete");
  EXPECT_EQ(LoadParamVector(dir / "models" / "sweep_0_member_1.pvc"),
            report.cells[0].models[1]);
  std::filesystem::remove_all(dir);
}

TEST(RunExperiment, RejectsMismatchedTestSet) {
  const auto ds = testing::RandomDataset(50, 3, 2, 9);
  const auto test = testing::RandomDataset(10, 4, 2, 9);
  auto spec = SmallSpec(ExperimentKind::regularization_sweep);
  EXPECT_THROW(RunExperiment(spec, ds, &test), DimensionMismatch);
  spec.subset_size = 51;
  EXPECT_THROW(RunExperiment(spec, ds, nullptr), InvalidArgument);
}

}  // namespace
}  // namespace pacstab
