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

#include "pacstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "pacstab/error.hpp"
#include "pacstab/text_format.hpp"

namespace pacstab {
namespace {

constexpr double kJacobiTolerance = 1e-12;
constexpr std::size_t kMaxSweeps = 100;

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SymmetricEigen JacobiEigen(std::vector<double> a, std::size_t n) {
  if (a.size() != n * n) throw DimensionMismatch("JacobiEigen: matrix is not n x n");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (a[i * n + j] != a[j * n + i]) {
        throw InvalidArgument("JacobiEigen: matrix is not symmetric");
      }
    }
  }
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double frobenius2 = 0.0;
  for (double x : a) frobenius2 += x * x;
  const double target = kJacobiTolerance * std::sqrt(frobenius2);

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) s += a[i * n + j] * a[i * n + j];
      }
    }
    return std::sqrt(s);
  };

  SymmetricEigen out;
  while (off_diagonal() > target) {
    if (out.sweeps == kMaxSweeps) {
      throw Error("JacobiEigen: no convergence after " +
                  std::to_string(kMaxSweeps) + " sweeps");
    }
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        // Rotation angle zeroing a[p][q] (Rutishauser's form, smaller root).
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) /
              (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i * n + i] > a[j * n + j];
  });
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a[order[k] * n + order[k]];
    for (std::size_t r = 0; r < n; ++r) out.vectors[r * n + k] = v[r * n + order[k]];
  }
  return out;
}

DeviationReport ComputeDeviationReport(std::span<const std::vector<double>> models,
                                       const ReportOptions& options) {
  const std::size_t n = models.size();
  if (n < 2) throw InvalidArgument("deviation report needs at least 2 models");
  const std::size_t m = models[0].size();
  for (const auto& model : models) {
    if (model.size() != m) {
      throw DimensionMismatch("ensemble members have different parameter counts");
    }
  }

  // Offsets from model 0 are exactly zero wherever the members agree, so
  // identical ensembles report exactly zero deviation.
  std::vector<double> mean_offset(m, 0.0);
  for (const auto& model : models) {
    for (std::size_t j = 0; j < m; ++j) mean_offset[j] += model[j] - models[0][j];
  }
  for (double& x : mean_offset) x /= static_cast<double>(n);

  std::vector<std::vector<double>> centered(n, std::vector<double>(m));
  DeviationReport report;
  report.n_models = n;
  for (std::size_t i = 0; i < n; ++i) {
    double model_norm2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      centered[i][j] = (models[i][j] - models[0][j]) - mean_offset[j];
      model_norm2 += models[i][j] * models[i][j];
    }
    report.deviation_l2 += std::sqrt(Dot(centered[i], centered[i]));
    report.mean_model_l2 += std::sqrt(model_norm2);
  }
  report.deviation_l2 /= static_cast<double>(n);
  report.mean_model_l2 /= static_cast<double>(n);
  report.percent_deviation =
      report.mean_model_l2 > 0.0 ? 100.0 * report.deviation_l2 / report.mean_model_l2
                                 : 0.0;

  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double g = Dot(centered[i], centered[j]);
      gram[i * n + j] = g;
      gram[j * n + i] = g;
    }
  }
  const SymmetricEigen eig = JacobiEigen(gram, n);

  EigenSpectrum& spectrum = report.spectrum;
  spectrum.eigenvalues = eig.values;
  const double lambda_max = std::max(spectrum.eigenvalues.front(), 0.0);
  // Centering leaves rank <= n-1; rounding noise in the null space would
  // otherwise add about sqrt(eps * lambda_max) to sqrt_sum.
  for (double& lambda : spectrum.eigenvalues) {
    if (!(lambda > kRetainRelative * lambda_max)) lambda = 0.0;
  }
  double total = 0.0;
  for (double lambda : spectrum.eigenvalues) {
    spectrum.sqrt_sum += std::sqrt(lambda);
    total += lambda;
  }
  spectrum.sqrt_total = std::sqrt(total);

  if (options.with_directions && lambda_max > 0.0) {
    for (std::size_t k = 0; k < n; ++k) {
      const double lambda = spectrum.eigenvalues[k];
      if (!(lambda > kRetainRelative * lambda_max)) break;
      std::vector<double> u(m, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double coeff = eig.vectors[i * n + k];
        for (std::size_t j = 0; j < m; ++j) u[j] += coeff * centered[i][j];
      }
      // Two Gram-Schmidt passes against earlier directions keep the set
      // orthonormal when eigenvalues are close to the retention floor.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& prev : spectrum.directions) {
          const double proj = Dot(prev, u);
          for (std::size_t j = 0; j < m; ++j) u[j] -= proj * prev[j];
        }
      }
      const double norm = std::sqrt(Dot(u, u));
      if (!(norm > 0.0)) break;
      for (double& x : u) x /= norm;
      spectrum.directions.push_back(std::move(u));
    }
  }
  return report;
}

DeviationReport ComputeDeviationReport(std::span<const ParamVector> models,
                                       const ReportOptions& options) {
  std::vector<std::vector<double>> rows;
  rows.reserve(models.size());
  for (const auto& p : models) {
    if (!models.empty() && p.layout() != models[0].layout()) {
      throw DimensionMismatch("ensemble members have different layouts");
    }
    rows.emplace_back(p.values().begin(), p.values().end());
  }
  return ComputeDeviationReport(std::span<const std::vector<double>>(rows), options);
}

std::vector<SeriesPoint> PercentSeries(
    std::span<const std::vector<ParamVector>> snapshots,
    std::span<const std::size_t> epochs, const ReportOptions& options) {
  for (const auto& model : snapshots) {
    if (model.size() != epochs.size()) {
      throw DimensionMismatch("snapshot count " + std::to_string(model.size()) +
                              " does not match " + std::to_string(epochs.size()) +
                              " recorded epochs");
    }
  }
  std::vector<SeriesPoint> series;
  series.reserve(epochs.size());
  std::vector<ParamVector> at_epoch(snapshots.size());
  for (std::size_t k = 0; k < epochs.size(); ++k) {
    if (k > 0 && epochs[k] <= epochs[k - 1]) {
      throw InvalidArgument("epochs must be strictly increasing");
    }
    for (std::size_t i = 0; i < snapshots.size(); ++i) at_epoch[i] = snapshots[i][k];
    series.push_back({epochs[k], ComputeDeviationReport(at_epoch, options)});
  }
  return series;
}

nlohmann::ordered_json ReportToJson(const DeviationReport& report,
                                    bool include_directions) {
  nlohmann::ordered_json spectrum = {
      {"eigenvalues", report.spectrum.eigenvalues},
      {"sqrt_sum", report.spectrum.sqrt_sum},
      {"sqrt_total", report.spectrum.sqrt_total},
  };
  if (include_directions) spectrum["directions"] = report.spectrum.directions;
  return {
      {"n_models", report.n_models},
      {"deviation_l2", report.deviation_l2},
      {"mean_model_l2", report.mean_model_l2},
      {"percent_deviation", report.percent_deviation},
      {"spectrum", spectrum},
  };
}

DeviationReport ReportFromJson(const nlohmann::json& j) {
  try {
    DeviationReport report;
    report.n_models = j.at("n_models").get<std::size_t>();
    report.deviation_l2 = j.at("deviation_l2").get<double>();
    report.mean_model_l2 = j.at("mean_model_l2").get<double>();
    report.percent_deviation = j.at("percent_deviation").get<double>();
    const auto& spectrum = j.at("spectrum");
    report.spectrum.eigenvalues =
        spectrum.at("eigenvalues").get<std::vector<double>>();
    report.spectrum.sqrt_sum = spectrum.at("sqrt_sum").get<double>();
    report.spectrum.sqrt_total = spectrum.value("sqrt_total", 0.0);
    if (spectrum.contains("directions")) {
      report.spectrum.directions =
          spectrum.at("directions").get<std::vector<std::vector<double>>>();
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed deviation report: ") + e.what());
  }
}

void WriteReportJson(const DeviationReport& report, std::ostream& out,
                     bool include_directions) {
  out << ReportToJson(report, include_directions).dump(2) << '\n';
}

void WriteSeriesCsv(std::span<const SeriesPoint> series, std::ostream& out) {
  out << "epoch,deviation_l2,percent_deviation,sqrt_sum\n";
  for (const auto& point : series) {
    out << point.epoch << ',' << FormatReal(point.report.deviation_l2) << ','
        << FormatReal(point.report.percent_deviation) << ','
        << FormatReal(point.report.spectrum.sqrt_sum) << '\n';
  }
}

}  // namespace pacstab
