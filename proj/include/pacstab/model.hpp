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

#ifndef PACSTAB_MODEL_HPP_
#define PACSTAB_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "pacstab/dataset.hpp"

namespace pacstab {

// Shape of a single-layer linear classifier: C rows of d weights followed by
// C biases.
struct ParamLayout {
  std::size_t feature_dim = 0;
  std::size_t n_classes = 0;

  std::size_t size() const { return feature_dim * n_classes + n_classes; }
  std::size_t weight_index(std::size_t c, std::size_t j) const {
    return c * feature_dim + j;
  }
  std::size_t bias_index(std::size_t c) const {
    return feature_dim * n_classes + c;
  }

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

// Flat parameter state of one model, laid out as described by ParamLayout.
class ParamVector {
 public:
  ParamVector() = default;
  // All zeros.
  explicit ParamVector(ParamLayout layout);
  // Takes ownership of `values`, which must have layout.size() finite
  // entries.
  ParamVector(ParamLayout layout, std::vector<double> values);

  const ParamLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double weight(std::size_t c, std::size_t j) const {
    return values_[layout_.weight_index(c, j)];
  }
  double bias(std::size_t c) const { return values_[layout_.bias_index(c)]; }

  bool AllFinite() const;
  double Norm() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  ParamLayout layout_;
  std::vector<double> values_;
};

// Seeded N(0, stddev^2) initialisation, drawn in layout order.
ParamVector RandomParams(ParamLayout layout, double stddev, std::uint64_t seed);

// "PVC1" | u32 d | u32 C | float64 values in layout order (little-endian).
ParamVector ReadParamVector(std::istream& in);
void WriteParamVector(const ParamVector& p, std::ostream& out);
ParamVector LoadParamVector(const std::filesystem::path& path);
void SaveParamVector(const ParamVector& p, const std::filesystem::path& path);

enum class LossKind { least_squares_onehot, softmax_cross_entropy };

std::string_view ToString(LossKind kind);
LossKind ParseLossKind(std::string_view text);

// score_c = sum_j w[c,j] * x[j] + b[c]
std::vector<double> Predict(const ParamVector& p, std::span<const float> x);

// Arg-max class of Predict (lowest index wins ties).
std::size_t PredictClass(const ParamVector& p, std::span<const float> x);

// Fraction of rows whose predicted class equals the label.
double Accuracy(const ParamVector& p, const FeatureDataset& ds);

struct LossAndGradient {
  double loss = 0.0;
  ParamVector gradient;
};

// Mean per-sample loss over `batch` and its exact gradient.
//
// least_squares_onehot: 0.5 * ||scores - onehot(label)||^2
// softmax_cross_entropy: logsumexp(scores) - scores[label]
//
// Samples are accumulated in ascending index order.
LossAndGradient ComputeLossAndGradient(const ParamVector& p,
                                       const FeatureDataset& batch,
                                       LossKind kind);

// Mean loss only.
double ComputeLoss(const ParamVector& p, const FeatureDataset& batch,
                   LossKind kind);

// Minimum-norm least-squares fit of one-hot targets, solved on the
// bias-augmented design matrix with a complete orthogonal decomposition.
ParamVector LeastSquaresClosedForm(const FeatureDataset& batch);

namespace detail {

// Loss of one sample; writes d(loss)/d(score) into `residual` (length C).
double SampleLossResidual(const ParamVector& p, std::span<const float> x,
                          std::size_t label, LossKind kind,
                          std::span<double> residual);

// grad += scale * residual (outer) [x, 1]
void AccumulateOuter(const ParamLayout& layout, std::span<const double> residual,
                     std::span<const float> x, double scale,
                     std::span<double> grad);

}  // namespace detail

}  // namespace pacstab

#endif  // PACSTAB_MODEL_HPP_
