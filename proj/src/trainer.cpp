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

#include "pacstab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "pacstab/error.hpp"
#include "pacstab/parallel.hpp"
#include "pacstab/random.hpp"
#include "pacstab/text_format.hpp"

namespace pacstab {
namespace {

double Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool Frozen(std::span<const std::uint8_t> mask, std::size_t j) {
  return !mask.empty() && mask[j] != 0;
}

void CheckShapes(const ParamVector& p, const FeatureDataset& ds,
                 const char* what) {
  if (p.layout().feature_dim != ds.feature_dim() ||
      p.layout().n_classes != ds.n_classes()) {
    throw DimensionMismatch(std::string(what) + " shape (d=" +
                            std::to_string(ds.feature_dim()) + ", C=" +
                            std::to_string(ds.n_classes()) +
                            ") does not match the model");
  }
}

}  // namespace

void ClippingPolicy::Validate() const {
  if (kind == Kind::none) return;
  if (!(threshold > 0.0)) {
    throw InvalidArgument("clipping threshold must be > 0");
  }
  if (kind == Kind::group_sample && group_size < 1) {
    throw InvalidArgument("group_sample clipping needs group_size >= 1");
  }
}

std::string ClippingPolicy::Describe() const {
  switch (kind) {
    case Kind::none:
      return "none";
    case Kind::whole_batch:
      return "whole_batch(c=" + FormatReal(threshold) + ")";
    case Kind::group_sample:
      return "group_sample(c=" + FormatReal(threshold) +
             ", group_size=" + std::to_string(group_size) + ")";
    case Kind::per_sample:
      return "per_sample(c=" + FormatReal(threshold) + ")";
  }
  return "unknown";
}

std::string_view ToString(ClippingPolicy::Kind kind) {
  switch (kind) {
    case ClippingPolicy::Kind::none:
      return "none";
    case ClippingPolicy::Kind::whole_batch:
      return "whole_batch";
    case ClippingPolicy::Kind::group_sample:
      return "group_sample";
    case ClippingPolicy::Kind::per_sample:
      return "per_sample";
  }
  return "unknown";
}

ClippingPolicy::Kind ParseClippingKind(std::string_view text) {
  if (text == "none") return ClippingPolicy::Kind::none;
  if (text == "whole_batch") return ClippingPolicy::Kind::whole_batch;
  if (text == "group_sample") return ClippingPolicy::Kind::group_sample;
  if (text == "per_sample") return ClippingPolicy::Kind::per_sample;
  throw InvalidArgument("unknown clipping policy '" + std::string(text) +
                        "' (expected none, whole_batch, group_sample or "
                        "per_sample)");
}

void TrainingConfig::Validate(std::size_t n_params) const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw InvalidArgument("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidArgument("weight_decay must be finite and >= 0");
  }
  if (record_every < 1) throw InvalidArgument("record_every must be >= 1");
  clipping.Validate();
  if (prune && !(prune->fraction >= 0.0 && prune->fraction < 1.0)) {
    throw InvalidArgument("prune fraction must lie in [0, 1)");
  }
  if (freeze_mask && n_params != 0 && freeze_mask->size() != n_params) {
    throw DimensionMismatch("freeze mask has " +
                            std::to_string(freeze_mask->size()) +
                            " entries, model has " + std::to_string(n_params));
  }
}

std::vector<std::size_t> TrainTrace::Epochs() const {
  std::vector<std::size_t> epochs;
  epochs.reserve(records.size());
  for (const auto& r : records) epochs.push_back(r.epoch);
  return epochs;
}

double ClipInPlace(std::span<double> g, double c) {
  if (!(c > 0.0)) throw InvalidArgument("clip threshold must be > 0");
  const double norm = Norm(g);
  if (norm > c) {
    const double scale = c / norm;
    for (double& x : g) x *= scale;
  }
  return norm;
}

ParamVector ClipVector(const ParamVector& g, double c) {
  ParamVector out = g;
  ClipInPlace(out.mutable_values(), c);
  return out;
}

ParamVector BatchGradient(const ParamVector& p, const FeatureDataset& batch,
                          LossKind kind, const ClippingPolicy& policy,
                          const GradientOptions& options) {
  CheckShapes(p, batch, "batch");
  policy.Validate();
  const ParamLayout& layout = p.layout();
  const std::size_t m = layout.size();
  const std::size_t n = batch.n_samples();
  if (!options.freeze_mask.empty() && options.freeze_mask.size() != m) {
    throw DimensionMismatch("freeze mask length does not match the model");
  }

  // Every policy is the same grouped loop: none and whole_batch are one group
  // of n, per_sample is groups of one.
  std::size_t group_size = n;
  bool clip = true;
  switch (policy.kind) {
    case ClippingPolicy::Kind::none:
      clip = false;
      break;
    case ClippingPolicy::Kind::whole_batch:
      break;
    case ClippingPolicy::Kind::group_sample:
      group_size = policy.group_size;
      break;
    case ClippingPolicy::Kind::per_sample:
      group_size = 1;
      break;
  }
  const bool decay_inside =
      policy.kind == ClippingPolicy::Kind::whole_batch ||
      policy.kind == ClippingPolicy::Kind::none;
  const auto values = p.values();
  auto add_decay = [&](std::span<double> target) {
    if (options.weight_decay == 0.0) return;
    for (std::size_t j = 0; j < m; ++j) {
      if (!Frozen(options.freeze_mask, j)) target[j] += options.weight_decay * values[j];
    }
  };

  std::vector<double> total(m, 0.0);
  std::vector<double> unit(m);
  std::vector<double> residual(layout.n_classes);
  std::size_t n_groups = 0;
  for (std::size_t start = 0; start < n; start += group_size) {
    const std::size_t end = std::min(n, start + group_size);
    std::fill(unit.begin(), unit.end(), 0.0);
    for (std::size_t i = start; i < end; ++i) {
      const double loss = detail::SampleLossResidual(p, batch.row(i), batch.label(i),
                                                     kind, residual);
      if (!std::isfinite(loss)) throw NonFiniteLoss(i);
      detail::AccumulateOuter(layout, residual, batch.row(i), 1.0, unit);
    }
    const double count = static_cast<double>(end - start);
    for (double& x : unit) x /= count;
    if (!options.freeze_mask.empty()) {
      for (std::size_t j = 0; j < m; ++j) {
        if (options.freeze_mask[j]) unit[j] = 0.0;
      }
    }
    if (decay_inside) add_decay(unit);
    if (clip) {
      const double before = ClipInPlace(unit, policy.threshold);
      if (options.on_clip) options.on_clip(before, Norm(unit));
    }
    for (std::size_t j = 0; j < m; ++j) total[j] += unit[j];
    ++n_groups;
  }
  const double groups = static_cast<double>(n_groups);
  for (double& x : total) x /= groups;
  if (!decay_inside) add_decay(total);
  return ParamVector(layout, std::move(total));
}

std::vector<std::size_t> PruneIndices(const ParamVector& p, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw InvalidArgument("prune fraction must lie in [0, 1)");
  }
  const std::size_t m = p.size();
  // The small epsilon keeps products such as 0.29 * 100 from flooring to 28.
  const auto k = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(m) + 1e-9));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto values = p.values();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(values[a]) < std::abs(values[b]);
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

ParamVector PruneL1(const ParamVector& p, double fraction) {
  ParamVector out = p;
  for (std::size_t i : PruneIndices(p, fraction)) out[i] = 0.0;
  return out;
}

TrainResult Train(const ParamVector& p0, const FeatureDataset& train_set,
                  const FeatureDataset* test_set, LossKind kind,
                  const TrainingConfig& config) {
  CheckShapes(p0, train_set, "training set");
  if (test_set != nullptr) CheckShapes(p0, *test_set, "test set");
  const std::size_t m = p0.size();
  config.Validate(m);
  if (!p0.AllFinite()) throw InvalidArgument("initial parameters are not finite");

  ParamVector p = p0;
  FreezeMask mask = config.freeze_mask.value_or(FreezeMask(m, 0));
  if (config.prune && config.prune->when == PruneTiming::before_training) {
    for (std::size_t i : PruneIndices(p, config.prune->fraction)) {
      p[i] = 0.0;
      mask[i] = 1;
    }
  }
  const bool any_frozen =
      std::any_of(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; });

  TrainResult result;
  auto record = [&](std::size_t epoch) {
    TraceRecord rec;
    rec.epoch = epoch;
    rec.loss = ComputeLoss(p, train_set, kind);
    rec.test_accuracy = test_set != nullptr
                            ? Accuracy(p, *test_set)
                            : std::numeric_limits<double>::quiet_NaN();
    rec.snapshot = result.trace.snapshots.size();
    result.trace.snapshots.push_back(p);
    result.trace.records.push_back(rec);
  };
  auto prune_after = [&] {
    if (config.prune && config.prune->when == PruneTiming::after_training) {
      p = PruneL1(p, config.prune->fraction);
    }
  };

  if (config.epochs == 0) {
    prune_after();
    record(0);
    result.params = p;
    return result;
  }
  record(0);

  GradientOptions options;
  options.weight_decay = config.weight_decay;
  if (any_frozen) options.freeze_mask = mask;

  const double lr = config.learning_rate;
  const double mu = config.momentum;
  std::vector<double> velocity(m, 0.0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    ParamVector grad;
    try {
      grad = BatchGradient(p, train_set, kind, config.clipping, options);
    } catch (const NonFiniteLoss&) {
      throw Divergence(epoch);
    }
    const auto g = grad.values();
    auto values = p.mutable_values();
    for (std::size_t j = 0; j < m; ++j) {
      if (mask[j]) continue;
      velocity[j] = mu * velocity[j] + g[j];
      const double step = config.nesterov ? g[j] + mu * velocity[j] : velocity[j];
      values[j] -= lr * step;
    }
    if (!p.AllFinite()) throw Divergence(epoch);
    if (epoch == config.epochs) prune_after();
    if (epoch % config.record_every == 0 || epoch == config.epochs) {
      try {
        record(epoch);
      } catch (const NonFiniteLoss&) {
        throw Divergence(epoch);
      }
    }
  }
  result.params = std::move(p);
  return result;
}

void WriteTraceCsv(const TrainTrace& trace, std::ostream& out) {
  out << "epoch,loss,test_accuracy\n";
  for (const auto& r : trace.records) {
    out << r.epoch << ',' << FormatReal(r.loss) << ','
        << FormatReal(r.test_accuracy) << '\n';
  }
}

std::vector<EnsembleMember> TrainEnsemble(
    const ParamVector& p0, std::span<const FeatureDataset> member_sets,
    const FeatureDataset* test_set, LossKind kind, const TrainingConfig& config,
    std::size_t workers) {
  std::vector<EnsembleMember> members(member_sets.size());
  ParallelFor(member_sets.size(), workers, [&](std::size_t i) {
    TrainResult r = Train(p0, member_sets[i], test_set, kind, config);
    members[i] = {std::move(r.params), std::move(r.trace)};
  });
  return members;
}

std::vector<double> MeanAccuracy(std::span<const EnsembleMember> members) {
  if (members.empty()) return {};
  std::vector<double> mean(members[0].trace.records.size(), 0.0);
  for (const auto& member : members) {
    if (member.trace.records.size() != mean.size()) {
      throw DimensionMismatch("members recorded different epochs");
    }
    for (std::size_t k = 0; k < mean.size(); ++k) {
      mean[k] += member.trace.records[k].test_accuracy;
    }
  }
  for (double& a : mean) a /= static_cast<double>(members.size());
  return mean;
}

std::uint64_t BaselineSubsetSeed(std::uint64_t template_seed, std::size_t round,
                                 std::size_t member) {
  return Hash64({template_seed, round, member});
}

DynamicBaselineResult DynamicBaselineTrain(
    std::span<const ParamVector> models, const FeatureDataset& source,
    std::size_t rounds, std::size_t epochs_per_round,
    const SubsetSpec& subset_template, LossKind kind,
    const TrainingConfig& config, const FeatureDataset* test_set,
    std::size_t workers) {
  if (models.size() < 2) {
    throw InvalidArgument("dynamic baseline needs at least 2 models");
  }
  if (rounds < 1) throw InvalidArgument("dynamic baseline needs rounds >= 1");
  for (const auto& model : models) {
    if (!(model == models[0])) {
      throw InvalidArgument("dynamic baseline models must start identical");
    }
  }
  const std::size_t n_models = models.size();
  TrainingConfig round_config = config;
  round_config.epochs = epochs_per_round;

  DynamicBaselineResult result;
  std::vector<ParamVector> current(models.begin(), models.end());
  for (std::size_t round = 0; round < rounds; ++round) {
    std::vector<FeatureDataset> sets;
    sets.reserve(n_models);
    for (std::size_t i = 0; i < n_models; ++i) {
      SubsetSpec spec = subset_template;
      spec.seed = BaselineSubsetSeed(subset_template.seed, round, i);
      sets.push_back(ResolveSubset(source, spec));
    }
    std::vector<EnsembleMember> members(n_models);
    ParallelFor(n_models, workers, [&](std::size_t i) {
      TrainResult r = Train(current[i], sets[i], test_set, kind, round_config);
      members[i] = {std::move(r.params), std::move(r.trace)};
    });

    BaselineRound record;
    record.start = current[0];
    const auto epochs = members[0].trace.Epochs();
    record.mean_accuracy = MeanAccuracy(members);
    std::vector<std::vector<ParamVector>> snapshots;
    snapshots.reserve(n_models);
    for (auto& member : members) {
      snapshots.push_back(std::move(member.trace.snapshots));
      member.trace.snapshots.clear();
      record.member_traces.push_back(member.trace);
    }
    record.series = PercentSeries(snapshots, epochs);
    for (std::size_t i = 0; i < n_models; ++i) current[i] = std::move(members[i].params);
    record.report = ComputeDeviationReport(current);
    result.rounds.push_back(std::move(record));

    if (round + 1 < rounds) {
      const ParamVector anchor = current[0];
      std::fill(current.begin(), current.end(), anchor);
    }
  }
  result.models = std::move(current);
  return result;
}

}  // namespace pacstab
