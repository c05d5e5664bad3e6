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

// Ensemble deviation metrics.
//
// Given n models p_1..p_n of m parameters each, K is the n x m matrix whose
// row i is p_i - mean(p). The deviation L2 norm is the arithmetic mean of the
// row norms of K. The Gram matrix G = K K^T (n x n) carries the spectrum of
// the ensemble spread: its eigenvalues are the squared singular values of K,
// and each positive eigenpair (lambda, v) yields a unit parameter-space
// direction u = K^T v / sqrt(lambda). Noise calibration draws along those
// directions.

#ifndef PACSTAB_STABILITY_HPP_
#define PACSTAB_STABILITY_HPP_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pacstab/model.hpp"

namespace pacstab {

struct EigenSpectrum {
  // Eigenvalues of K K^T, descending, clamped at zero.
  std::vector<double> eigenvalues;
  // Sum of sqrt(lambda_i): the nuclear norm of K.
  double sqrt_sum = 0.0;
  // sqrt(sum lambda_i) = ||K||_F, reported for comparison.
  double sqrt_total = 0.0;
  // Unit vectors in parameter space, one per retained eigenvalue (in the same
  // order). Empty when the report was built without directions.
  std::vector<std::vector<double>> directions;
};

struct DeviationReport {
  std::size_t n_models = 0;
  double deviation_l2 = 0.0;
  double mean_model_l2 = 0.0;
  double percent_deviation = 0.0;
  EigenSpectrum spectrum;
};

struct ReportOptions {
  bool with_directions = true;
};

// Eigenvalues below this fraction of the largest are treated as zero and get
// no direction.
inline constexpr double kRetainRelative = 1e-12;

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
struct SymmetricEigen {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // n x n row-major; column k pairs with values[k]
  std::size_t sweeps = 0;
};

// `matrix` is n x n row-major and must be symmetric. Sweeps visit (p, q) with
// p < q in row-major order until the off-diagonal Frobenius mass drops to
// 1e-12 * ||A||_F.
SymmetricEigen JacobiEigen(std::vector<double> matrix, std::size_t n);

// Report over rows of equal length (the raw form used by ParamVector
// ensembles and by tests at arbitrary m).
DeviationReport ComputeDeviationReport(
    std::span<const std::vector<double>> models, const ReportOptions& options = {});

DeviationReport ComputeDeviationReport(std::span<const ParamVector> models,
                                       const ReportOptions& options = {});

struct SeriesPoint {
  std::size_t epoch = 0;
  DeviationReport report;
};

// snapshots[model][k] is model `model` at epochs[k]. Every model must carry the
// same number of snapshots as `epochs`.
std::vector<SeriesPoint> PercentSeries(
    std::span<const std::vector<ParamVector>> snapshots,
    std::span<const std::size_t> epochs, const ReportOptions& options = {
        .with_directions = false});

// JSON with fields n_models, deviation_l2, mean_model_l2, percent_deviation
// and spectrum {eigenvalues, sqrt_sum, sqrt_total[, directions]}.
nlohmann::ordered_json ReportToJson(const DeviationReport& report,
                                    bool include_directions = false);
// Inverse of ReportToJson (directions restored when present).
DeviationReport ReportFromJson(const nlohmann::json& j);

void WriteReportJson(const DeviationReport& report, std::ostream& out,
                     bool include_directions = false);

// CSV `epoch,deviation_l2,percent_deviation,sqrt_sum`.
void WriteSeriesCsv(std::span<const SeriesPoint> series, std::ostream& out);

}  // namespace pacstab

#endif  // PACSTAB_STABILITY_HPP_
