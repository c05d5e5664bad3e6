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

// Flat key=value configuration files.
//
//   # comment
//   experiment = group_clip_sweep
//   sweep = 10, 25, 100, 400
//   lr = 0.1
//
// Keys are case-sensitive; a key may appear only once per file. Values keep
// their inner whitespace but are trimmed at both ends.

#ifndef PACSTAB_CONFIG_HPP_
#define PACSTAB_CONFIG_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pacstab/experiments.hpp"
#include "pacstab/trainer.hpp"

namespace pacstab {

using ConfigMap = std::map<std::string, std::string>;

ConfigMap ParseConfig(std::istream& in);
ConfigMap LoadConfig(const std::filesystem::path& path);

// Entries of `overrides` replace those of `base`.
ConfigMap MergeConfig(ConfigMap base, const ConfigMap& overrides);

// Throws InvalidArgument naming the first key not in `allowed`.
void CheckKeys(const ConfigMap& config, std::span<const std::string_view> allowed);

// Keys read by TrainingConfigFromMap:
//   lr epochs momentum nesterov weight_decay clip clip_threshold group_size
//   prune_fraction prune_when record_every freeze
std::span<const std::string_view> TrainingKeys();
// TrainingKeys() plus: experiment ensemble_size sweep loss seed subset_size
//   init_stddev
std::span<const std::string_view> ExperimentKeys();

// `freeze` is a list of parameter indices and inclusive ranges, e.g.
// "0-63,260"; it needs `n_params` to build the mask.
TrainingConfig TrainingConfigFromMap(const ConfigMap& config, std::size_t n_params,
                                     TrainingConfig defaults = {});

// Starts from DefaultExperimentSpec(experiment) and applies every key given.
// For group_clip_sweep, clip_threshold sets the group threshold.
ExperimentSpec ExperimentSpecFromMap(const ConfigMap& config, std::size_t n_params);

// Fully-resolved config as key=value lines that parse back to the same values.
std::string FormatTrainingConfig(const TrainingConfig& config);
std::string FormatExperimentSpec(const ExperimentSpec& spec);

// "0-3,7" -> mask of n_params bytes.
FreezeMask ParseFreezeRanges(std::string_view text, std::size_t n_params);
std::string FormatFreezeRanges(const FreezeMask& mask);

double ParseReal(std::string_view key, std::string_view text);
std::size_t ParseCount(std::string_view key, std::string_view text);
bool ParseFlag(std::string_view key, std::string_view text);
std::vector<double> ParseRealList(std::string_view key, std::string_view text);

}  // namespace pacstab

#endif  // PACSTAB_CONFIG_HPP_
