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

#include "pacstab/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "pacstab/error.hpp"
#include "pacstab/random.hpp"

namespace pacstab {
namespace {

constexpr std::array<char, 4> kParamMagic = {'P', 'V', 'C', '1'};

std::uint64_t ReadLittle(std::istream& in, int bytes, std::size_t& offset,
                         const char* what) {
  unsigned char buf[8] = {};
  in.read(reinterpret_cast<char*>(buf), bytes);
  if (in.gcount() != bytes) {
    throw TruncatedData(std::string("unexpected end of file reading ") + what,
                        FormatError::Location::byte, offset);
  }
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | buf[i];
  offset += static_cast<std::size_t>(bytes);
  return v;
}

void WriteLittle(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, bytes);
}

}  // namespace

ParamVector::ParamVector(ParamLayout layout)
    : layout_(layout), values_(layout.size(), 0.0) {}

ParamVector::ParamVector(ParamLayout layout, std::vector<double> values)
    : layout_(layout), values_(std::move(values)) {
  if (values_.size() != layout_.size()) {
    throw DimensionMismatch("parameter vector has " +
                            std::to_string(values_.size()) +
                            " entries, layout requires " +
                            std::to_string(layout_.size()));
  }
  if (!AllFinite()) throw InvalidArgument("parameter vector has non-finite entries");
}

bool ParamVector::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double ParamVector::Norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

ParamVector RandomParams(ParamLayout layout, double stddev, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values(layout.size());
  for (double& v : values) v = stddev * rng.Gaussian();
  return ParamVector(layout, std::move(values));
}

ParamVector ReadParamVector(std::istream& in) {
  std::size_t offset = 0;
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kParamMagic.begin())) {
    throw MalformedHeader("bad magic, expected \"PVC1\"",
                          FormatError::Location::byte, 0);
  }
  offset = 4;
  const auto d = static_cast<std::size_t>(ReadLittle(in, 4, offset, "feature_dim"));
  const auto c = static_cast<std::size_t>(ReadLittle(in, 4, offset, "n_classes"));
  if (c < 1) throw MalformedHeader("n_classes must be >= 1", FormatError::Location::byte, 8);
  const ParamLayout layout{d, c};
  std::vector<double> values(layout.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t at = offset;
    const double v = std::bit_cast<double>(ReadLittle(in, 8, offset, "values"));
    if (!std::isfinite(v)) {
      throw NonFiniteValue("non-finite parameter " + std::to_string(i),
                           FormatError::Location::byte, at);
    }
    values[i] = v;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ShapeMismatch("trailing bytes after parameter block",
                        FormatError::Location::byte, offset);
  }
  return ParamVector(layout, std::move(values));
}

void WriteParamVector(const ParamVector& p, std::ostream& out) {
  out.write(kParamMagic.data(), kParamMagic.size());
  WriteLittle(out, p.layout().feature_dim, 4);
  WriteLittle(out, p.layout().n_classes, 4);
  for (double v : p.values()) WriteLittle(out, std::bit_cast<std::uint64_t>(v), 8);
}

ParamVector LoadParamVector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw Error("cannot open parameter file " + path.string());
  return ReadParamVector(in);
}

void SaveParamVector(const ParamVector& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::out | std::ios::binary);
  if (!out) throw Error("cannot write parameter file " + path.string());
  WriteParamVector(p, out);
  if (!out) throw Error("write failed for " + path.string());
}

std::string_view ToString(LossKind kind) {
  switch (kind) {
    case LossKind::least_squares_onehot:
      return "least_squares";
    case LossKind::softmax_cross_entropy:
      return "softmax";
  }
  return "unknown";
}

LossKind ParseLossKind(std::string_view text) {
  if (text == "least_squares" || text == "least_squares_onehot") {
    return LossKind::least_squares_onehot;
  }
  if (text == "softmax" || text == "softmax_cross_entropy") {
    return LossKind::softmax_cross_entropy;
  }
  throw InvalidArgument("unknown loss kind '" + std::string(text) +
                        "' (expected least_squares or softmax)");
}

namespace {

void ScoresInto(const ParamVector& p, std::span<const float> x,
                std::span<double> scores) {
  const ParamLayout& layout = p.layout();
  if (x.size() != layout.feature_dim) {
    throw DimensionMismatch("feature row has length " + std::to_string(x.size()) +
                            ", model expects " +
                            std::to_string(layout.feature_dim));
  }
  const auto values = p.values();
  for (std::size_t c = 0; c < layout.n_classes; ++c) {
    const double* w = values.data() + layout.weight_index(c, 0);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
    scores[c] = s + values[layout.bias_index(c)];
  }
}

}  // namespace

std::vector<double> Predict(const ParamVector& p, std::span<const float> x) {
  std::vector<double> scores(p.layout().n_classes);
  ScoresInto(p, x, scores);
  return scores;
}

std::size_t PredictClass(const ParamVector& p, std::span<const float> x) {
  const auto scores = Predict(p, x);
  return static_cast<std::size_t>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
}

double Accuracy(const ParamVector& p, const FeatureDataset& ds) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    if (PredictClass(p, ds.row(i)) == ds.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.n_samples());
}

namespace detail {

double SampleLossResidual(const ParamVector& p, std::span<const float> x,
                          std::size_t label, LossKind kind,
                          std::span<double> residual) {
  // `residual` holds the raw scores until overwritten.
  ScoresInto(p, x, residual);
  const std::size_t n_classes = p.layout().n_classes;
  switch (kind) {
    case LossKind::least_squares_onehot: {
      double loss = 0.0;
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double r = residual[c] - (c == label ? 1.0 : 0.0);
        residual[c] = r;
        loss += r * r;
      }
      return 0.5 * loss;
    }
    case LossKind::softmax_cross_entropy: {
      const double top = *std::max_element(residual.begin(), residual.end());
      const double label_score = residual[label];
      double total = 0.0;
      for (std::size_t c = 0; c < n_classes; ++c) {
        residual[c] = std::exp(residual[c] - top);
        total += residual[c];
      }
      for (std::size_t c = 0; c < n_classes; ++c) {
        residual[c] = residual[c] / total - (c == label ? 1.0 : 0.0);
      }
      return top + std::log(total) - label_score;
    }
  }
  return 0.0;
}

void AccumulateOuter(const ParamLayout& layout, std::span<const double> residual,
                     std::span<const float> x, double scale,
                     std::span<double> grad) {
  for (std::size_t c = 0; c < layout.n_classes; ++c) {
    const double r = scale * residual[c];
    if (r == 0.0) continue;
    double* w = grad.data() + layout.weight_index(c, 0);
    for (std::size_t j = 0; j < x.size(); ++j) w[j] += r * x[j];
    grad[layout.bias_index(c)] += r;
  }
}

}  // namespace detail

namespace {

void CheckBatch(const ParamVector& p, const FeatureDataset& batch) {
  if (p.layout().feature_dim != batch.feature_dim() ||
      p.layout().n_classes != batch.n_classes()) {
    throw DimensionMismatch(
        "model shape (d=" + std::to_string(p.layout().feature_dim) +
        ", C=" + std::to_string(p.layout().n_classes) +
        ") does not match batch (d=" + std::to_string(batch.feature_dim()) +
        ", C=" + std::to_string(batch.n_classes()) + ")");
  }
}

}  // namespace

LossAndGradient ComputeLossAndGradient(const ParamVector& p,
                                       const FeatureDataset& batch,
                                       LossKind kind) {
  CheckBatch(p, batch);
  const ParamLayout& layout = p.layout();
  std::vector<double> grad(layout.size(), 0.0);
  std::vector<double> residual(layout.n_classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.n_samples(); ++i) {
    const double li =
        detail::SampleLossResidual(p, batch.row(i), batch.label(i), kind, residual);
    if (!std::isfinite(li)) throw NonFiniteLoss(i);
    loss += li;
    detail::AccumulateOuter(layout, residual, batch.row(i), 1.0, grad);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.n_samples());
  for (double& g : grad) g *= inv_n;
  LossAndGradient out;
  out.loss = loss / static_cast<double>(batch.n_samples());
  out.gradient = ParamVector(layout, std::move(grad));
  return out;
}

double ComputeLoss(const ParamVector& p, const FeatureDataset& batch,
                   LossKind kind) {
  CheckBatch(p, batch);
  std::vector<double> residual(p.layout().n_classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.n_samples(); ++i) {
    const double li =
        detail::SampleLossResidual(p, batch.row(i), batch.label(i), kind, residual);
    if (!std::isfinite(li)) throw NonFiniteLoss(i);
    loss += li;
  }
  return loss / static_cast<double>(batch.n_samples());
}

ParamVector LeastSquaresClosedForm(const FeatureDataset& batch) {
  const std::size_t n = batch.n_samples();
  const std::size_t d = batch.feature_dim();
  const std::size_t C = batch.n_classes();
  Eigen::MatrixXd design(n, d + 1);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, C);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = batch.row(i);
    for (std::size_t j = 0; j < d; ++j) design(i, j) = x[j];
    design(i, d) = 1.0;
    targets(i, batch.label(i)) = 1.0;
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::MatrixXd solution = cod.solve(targets);  // (d+1) x C

  const ParamLayout layout{d, C};
  std::vector<double> values(layout.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < d; ++j) values[layout.weight_index(c, j)] = solution(j, c);
    values[layout.bias_index(c)] = solution(d, c);
  }
  return ParamVector(layout, std::move(values));
}

}  // namespace pacstab
