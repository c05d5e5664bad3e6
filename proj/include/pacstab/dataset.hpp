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

#ifndef PACSTAB_DATASET_HPP_
#define PACSTAB_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace pacstab {

// Row-major float32 feature matrix with integer class labels.
//
// Immutable once constructed; the constructor enforces that every feature is
// finite, every label lies in [0, n_classes), n_samples >= 1,
// feature_dim >= 1 and n_classes >= 2.
class FeatureDataset {
 public:
  FeatureDataset(std::size_t n_samples, std::size_t feature_dim,
                 std::size_t n_classes, std::vector<float> features,
                 std::vector<std::uint16_t> labels);

  std::size_t n_samples() const { return n_samples_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t n_classes() const { return n_classes_; }

  std::span<const float> features() const { return features_; }
  std::span<const std::uint16_t> labels() const { return labels_; }

  std::span<const float> row(std::size_t i) const {
    return {features_.data() + i * feature_dim_, feature_dim_};
  }
  std::uint16_t label(std::size_t i) const { return labels_[i]; }

  // New dataset holding the given rows, in the given order.
  FeatureDataset SelectRows(std::span<const std::size_t> rows) const;

  // Same features with labels remapped through `mapping` (old -> new) and a
  // new class count.
  FeatureDataset Relabel(std::span<const std::uint16_t> mapping,
                         std::size_t n_classes) const;

  friend bool operator==(const FeatureDataset&,
                         const FeatureDataset&) = default;

 private:
  std::size_t n_samples_;
  std::size_t feature_dim_;
  std::size_t n_classes_;
  std::vector<float> features_;
  std::vector<std::uint16_t> labels_;
};

enum class DatasetFormat { binary, csv };

// Binary "FDS1" format, little-endian:
//   "FDS1" | u32 n_samples | u32 feature_dim | u32 n_classes |
//   n_samples*feature_dim float32 (row-major) | n_samples u16 labels
FeatureDataset ReadBinaryDataset(std::istream& in);
void WriteBinaryDataset(const FeatureDataset& ds, std::ostream& out);

// CSV with header `label,f0,f1,...`. The class count is not stored in CSV, so
// it is supplied by the caller; when absent it is inferred as max label + 1
// (at least 2).
FeatureDataset ReadCsvDataset(std::istream& in,
                              std::optional<std::size_t> n_classes = {});
void WriteCsvDataset(const FeatureDataset& ds, std::ostream& out);

FeatureDataset LoadDataset(const std::filesystem::path& path,
                           DatasetFormat format,
                           std::optional<std::size_t> n_classes = {});
void SaveDataset(const FeatureDataset& ds, const std::filesystem::path& path,
                 DatasetFormat format);

// Picks the format from the file extension: ".csv" is CSV, anything else is
// binary.
DatasetFormat FormatFromExtension(const std::filesystem::path& path);

// Gaussian class clusters with unit within-class variance. Class means sit at
// pairwise distance `class_separation` (orthogonal axes when C <= d, seeded
// random unit directions otherwise). Labels cycle 0, 1, ..., C-1.
FeatureDataset SynthesizeDataset(std::size_t n, std::size_t d, std::size_t C,
                                 double class_separation, std::uint64_t seed);

enum class SubsetMode { random_subset, point_removal };

struct SubsetSpec {
  SubsetMode mode = SubsetMode::random_subset;
  std::size_t count = 0;  // rows kept (random_subset) or removed (point_removal)
  std::uint64_t seed = 0;
};

// Sorted, unique row indices selected by `spec` from a source of `n_samples`
// rows. Sampling is without replacement (partial Fisher-Yates over the
// identity permutation driven by Rng(spec.seed)).
std::vector<std::size_t> ResolveSubsetIndices(std::size_t n_samples,
                                              const SubsetSpec& spec);

FeatureDataset ResolveSubset(const FeatureDataset& ds, const SubsetSpec& spec);

}  // namespace pacstab

#endif  // PACSTAB_DATASET_HPP_
