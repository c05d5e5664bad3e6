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

// Deterministic full-batch gradient descent.
//
// One step of `Train`:
//
//   g = BatchGradient(p)            clipped per policy, frozen entries zeroed
//   v = momentum * v + g
//   p = p - lr * (g + momentum * v)  (nesterov)
//   p = p - lr * v                   (plain momentum)
//
// Weight decay adds weight_decay * p to g on unfrozen coordinates. For
// whole-batch clipping the decay term is added before clipping (the combined
// vector is clipped); for group and per-sample clipping it is added after the
// clipped data gradients are averaged, so the clip bounds only data-dependent
// contributions.

#ifndef PACSTAB_TRAINER_HPP_
#define PACSTAB_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacstab/dataset.hpp"
#include "pacstab/model.hpp"
#include "pacstab/stability.hpp"

namespace pacstab {

struct ClippingPolicy {
  enum class Kind { none, whole_batch, group_sample, per_sample };

  Kind kind = Kind::none;
  double threshold = 0.0;      // c, used by every kind except none
  std::size_t group_size = 0;  // used by group_sample

  static ClippingPolicy None() { return {}; }
  static ClippingPolicy WholeBatch(double c) { return {Kind::whole_batch, c, 0}; }
  static ClippingPolicy GroupSample(double c, std::size_t group_size) {
    return {Kind::group_sample, c, group_size};
  }
  static ClippingPolicy PerSample(double c) { return {Kind::per_sample, c, 0}; }

  void Validate() const;
  std::string Describe() const;

  friend bool operator==(const ClippingPolicy&, const ClippingPolicy&) = default;
};

std::string_view ToString(ClippingPolicy::Kind kind);
ClippingPolicy::Kind ParseClippingKind(std::string_view text);

// One byte per parameter; nonzero means frozen.
using FreezeMask = std::vector<std::uint8_t>;

enum class PruneTiming { before_training, after_training };

struct PruneConfig {
  double fraction = 0.0;
  PruneTiming when = PruneTiming::before_training;
};

struct TrainingConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 100;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 0.0;
  ClippingPolicy clipping;
  std::optional<FreezeMask> freeze_mask;
  std::optional<PruneConfig> prune;
  std::size_t record_every = 1;

  // Throws InvalidArgument on a violated field constraint; checks the freeze
  // mask length against `n_params` when nonzero.
  void Validate(std::size_t n_params = 0) const;
};

struct TraceRecord {
  std::size_t epoch = 0;
  double loss = 0.0;           // mean data loss at the recorded parameters
  double test_accuracy = 0.0;  // NaN when no test set was given
  std::size_t snapshot = 0;    // index into TrainTrace::snapshots
};

// Epoch 0 (the starting point), every `record_every` epochs, and the final
// epoch are recorded.
struct TrainTrace {
  std::vector<TraceRecord> records;
  std::vector<ParamVector> snapshots;

  std::vector<std::size_t> Epochs() const;
};

struct TrainResult {
  ParamVector params;
  TrainTrace trace;
};

// Returns g unchanged if ||g|| <= c, else g * (c / ||g||).
ParamVector ClipVector(const ParamVector& g, double c);

// In-place form; returns the norm before clipping.
double ClipInPlace(std::span<double> g, double c);

struct GradientOptions {
  double weight_decay = 0.0;
  std::span<const std::uint8_t> freeze_mask;  // empty: nothing frozen
  // Called with (norm before, norm after) for every clipped unit.
  std::function<void(double, double)> on_clip;
};

// Mean data gradient under `policy`. Groups are contiguous runs of
// group_size rows in batch order; a short final group is clipped like the
// others and every group counts equally in the average.
ParamVector BatchGradient(const ParamVector& p, const FeatureDataset& batch,
                          LossKind kind, const ClippingPolicy& policy,
                          const GradientOptions& options = {});

TrainResult Train(const ParamVector& p0, const FeatureDataset& train_set,
                  const FeatureDataset* test_set, LossKind kind,
                  const TrainingConfig& config);

// Indices of the floor(fraction * m) smallest-magnitude coordinates; ties go
// to the lower index first. Returned in ascending index order.
std::vector<std::size_t> PruneIndices(const ParamVector& p, double fraction);

ParamVector PruneL1(const ParamVector& p, double fraction);

// CSV `epoch,loss,test_accuracy`.
void WriteTraceCsv(const TrainTrace& trace, std::ostream& out);

struct EnsembleMember {
  ParamVector params;
  TrainTrace trace;
};

// Trains one copy of `p0` per dataset, in parallel on `workers` threads.
std::vector<EnsembleMember> TrainEnsemble(
    const ParamVector& p0, std::span<const FeatureDataset> member_sets,
    const FeatureDataset* test_set, LossKind kind, const TrainingConfig& config,
    std::size_t workers = 1);

// Mean of test_accuracy across members for each recorded epoch.
std::vector<double> MeanAccuracy(std::span<const EnsembleMember> members);

struct BaselineRound {
  // Parameters every member started the round from.
  ParamVector start;
  // Recorded epochs within the round (0 = right after the reset).
  std::vector<SeriesPoint> series;
  // Mean member test accuracy per entry of `series` (NaN without a test set).
  std::vector<double> mean_accuracy;
  // Per-member traces for the round, snapshots dropped.
  std::vector<TrainTrace> member_traces;
  // Deviation of the members at the end of the round, with directions.
  DeviationReport report;
};

struct DynamicBaselineResult {
  // Members as they stand after the last round (no reset after the last one).
  std::vector<ParamVector> models;
  std::vector<BaselineRound> rounds;
};

// Subset seed for member `member` in round `round`.
std::uint64_t BaselineSubsetSeed(std::uint64_t template_seed, std::size_t round,
                                 std::size_t member);

// Each round: every member trains `epochs_per_round` epochs on a fresh subset
// drawn with BaselineSubsetSeed, a report is recorded, then every member is
// reset to member 0 and its momentum cleared. `config.epochs` is ignored.
DynamicBaselineResult DynamicBaselineTrain(
    std::span<const ParamVector> models, const FeatureDataset& source,
    std::size_t rounds, std::size_t epochs_per_round,
    const SubsetSpec& subset_template, LossKind kind,
    const TrainingConfig& config, const FeatureDataset* test_set = nullptr,
    std::size_t workers = 1);

}  // namespace pacstab

#endif  // PACSTAB_TRAINER_HPP_
