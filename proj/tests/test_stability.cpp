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

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "pacstab/error.hpp"
#include "pacstab/stability.hpp"
#include "test_util.hpp"

namespace pacstab {
namespace {

using testing::RandomVector;

std::vector<std::vector<double>> RandomModels(std::size_t n, std::size_t m,
                                              std::uint64_t seed, double scale = 1.0) {
  std::vector<std::vector<double>> models;
  for (std::size_t i = 0; i < n; ++i) models.push_back(RandomVector(m, seed * 1000 + i, scale));
  return models;
}

Eigen::MatrixXd Centered(const std::vector<std::vector<double>>& models) {
  const std::size_t n = models.size();
  const std::size_t m = models[0].size();
  Eigen::MatrixXd K(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) K(i, j) = models[i][j];
  }
  return K.rowwise() - K.colwise().mean();
}

TEST(Stability, TwoModelHandExample) {
  const std::vector<std::vector<double>> models{{1, 0}, {0, 1}};
  const auto r = ComputeDeviationReport(models);
  EXPECT_EQ(r.n_models, 2u);
  EXPECT_NEAR(r.deviation_l2, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(r.mean_model_l2, 1.0, 1e-15);
  EXPECT_NEAR(r.percent_deviation, 100 * std::sqrt(0.5), 1e-12);
  ASSERT_EQ(r.spectrum.eigenvalues.size(), 2u);
  EXPECT_NEAR(r.spectrum.eigenvalues[0], 1.0, 1e-15);
  EXPECT_EQ(r.spectrum.eigenvalues[1], 0.0);
  EXPECT_NEAR(r.spectrum.sqrt_sum, 1.0, 1e-15);
  ASSERT_EQ(r.spectrum.directions.size(), 1u);
  const auto& u = r.spectrum.directions[0];
  EXPECT_NEAR(std::abs(u[0]), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(u[0], -u[1], 1e-15);
}

TEST(Stability, IdenticalModelsHaveZeroSpectrum) {
  const auto p = RandomVector(7, 3);
  const std::vector<std::vector<double>> models{p, p, p};
  const auto r = ComputeDeviationReport(models);
  EXPECT_EQ(r.deviation_l2, 0.0);
  EXPECT_EQ(r.percent_deviation, 0.0);
  for (double l : r.spectrum.eigenvalues) EXPECT_EQ(l, 0.0);
  EXPECT_EQ(r.spectrum.sqrt_sum, 0.0);
  EXPECT_TRUE(r.spectrum.directions.empty());

  const std::vector<std::vector<double>> zeros(2, std::vector<double>(3, 0.0));
  const auto z = ComputeDeviationReport(zeros);
  EXPECT_EQ(z.mean_model_l2, 0.0);
  EXPECT_EQ(z.percent_deviation, 0.0);
}

TEST(Stability, RejectsBadInput) {
  EXPECT_THROW(ComputeDeviationReport(std::vector<std::vector<double>>{{1, 2}}),
               InvalidArgument);
  EXPECT_THROW(ComputeDeviationReport(std::vector<std::vector<double>>{{1, 2}, {1}}),
               DimensionMismatch);
}

TEST(Stability, MetricsMatchDirectComputation) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t n = 2 + seed % 9;
    const std::size_t m = 3 + seed * 13;
    const auto models = RandomModels(n, m, seed);
    const auto r = ComputeDeviationReport(models);
    const Eigen::MatrixXd K = Centered(models);
    double dev = 0, size = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dev += K.row(i).norm();
      size += Eigen::Map<const Eigen::VectorXd>(models[i].data(), m).norm();
    }
    EXPECT_NEAR(r.deviation_l2, dev / n, 1e-12 * dev);
    EXPECT_NEAR(r.mean_model_l2, size / n, 1e-12 * size);
    EXPECT_NEAR(r.percent_deviation, 100 * dev / size, 1e-10);
  }
}

TEST(Stability, TraceIdentity) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const std::size_t n = 2 + seed % 15;
    const std::size_t m = 1 + (seed * 97) % 1000;
    const auto models = RandomModels(n, m, seed, 0.1 + seed);
    const auto r = ComputeDeviationReport(models);
    const double frob2 = Centered(models).squaredNorm();
    double sum = 0;
    for (double l : r.spectrum.eigenvalues) sum += l;
    EXPECT_LE(std::abs(sum - frob2), 1e-9 * frob2) << "seed " << seed;
    EXPECT_NEAR(r.spectrum.sqrt_total, std::sqrt(frob2), 1e-9 * std::sqrt(frob2));
  }
}

TEST(Stability, SqrtSumIsNuclearNorm) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const std::size_t n = 2 + seed % 7;
    const std::size_t m = 1 + seed % 8;
    const auto models = RandomModels(n, m, seed + 77);
    const auto r = ComputeDeviationReport(models);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Centered(models));
    const double nuclear = svd.singularValues().sum();
    EXPECT_NEAR(r.spectrum.sqrt_sum, nuclear, 1e-9 * std::max(1.0, nuclear));
    const auto sv = svd.singularValues();
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
      EXPECT_NEAR(r.spectrum.eigenvalues[k], sv[k] * sv[k], 1e-9 * std::max(1.0, sv[0] * sv[0]));
    }
  }
}

TEST(Stability, DirectionsOrthonormalAndInRowSpace) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t n = 3 + seed % 6;
    const std::size_t m = 20 + seed;
    const auto models = RandomModels(n, m, seed + 300);
    const auto r = ComputeDeviationReport(models);
    const auto& dirs = r.spectrum.directions;
    // Centering leaves rank n - 1.
    ASSERT_EQ(dirs.size(), n - 1);
    const Eigen::MatrixXd K = Centered(models);
    for (std::size_t a = 0; a < dirs.size(); ++a) {
      const Eigen::Map<const Eigen::VectorXd> ua(dirs[a].data(), m);
      for (std::size_t b = 0; b < dirs.size(); ++b) {
        const Eigen::Map<const Eigen::VectorXd> ub(dirs[b].data(), m);
        EXPECT_NEAR(ua.dot(ub), a == b ? 1.0 : 0.0, 1e-8);
      }
      // K u = sqrt(lambda) v, so ||K u||^2 = lambda.
      EXPECT_NEAR((K * ua).squaredNorm(), r.spectrum.eigenvalues[a],
                  1e-8 * r.spectrum.eigenvalues[0]);
    }
  }
}

TEST(Jacobi, EigenpairResiduals) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const std::size_t n = 1 + seed % 16;
    const auto raw = RandomVector(n * n, seed + 900, 2.0);
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i * n + j] = raw[i * n + j] + raw[j * n + i];
    }
    const auto eig = JacobiEigen(a, n);
    double lmax = 0;
    for (double v : eig.values) lmax = std::max(lmax, std::abs(v));
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) EXPECT_GE(eig.values[k - 1], eig.values[k]);
      double res2 = 0, norm2 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double gv = 0;
        for (std::size_t j = 0; j < n; ++j) gv += a[i * n + j] * eig.vectors[j * n + k];
        const double r = gv - eig.values[k] * eig.vectors[i * n + k];
        res2 += r * r;
        norm2 += eig.vectors[i * n + k] * eig.vectors[i * n + k];
      }
      EXPECT_LE(std::sqrt(res2), 1e-8 * lmax);
      EXPECT_NEAR(norm2, 1.0, 1e-12);
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        a.data(), n, n);
    Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(eig.values[k], ref[n - 1 - k], 1e-10 * std::max(1.0, lmax));
    }
  }
  EXPECT_THROW(JacobiEigen({1, 2, 3, 4}, 2), InvalidArgument);
  EXPECT_THROW(JacobiEigen({1, 2, 3}, 2), DimensionMismatch);
}

TEST(Stability, TranslationInvariance) {
  const auto models = RandomModels(6, 9, 5);
  const auto shift = RandomVector(9, 6, 10.0);
  auto moved = models;
  for (auto& p : moved) {
    for (std::size_t j = 0; j < 9; ++j) p[j] += shift[j];
  }
  const auto a = ComputeDeviationReport(models);
  const auto b = ComputeDeviationReport(moved);
  EXPECT_NEAR(a.deviation_l2, b.deviation_l2, 1e-12);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(a.spectrum.eigenvalues[k], b.spectrum.eigenvalues[k], 1e-10);
  }
  EXPECT_NE(a.mean_model_l2, b.mean_model_l2);
  EXPECT_NEAR(a.percent_deviation * a.mean_model_l2, b.percent_deviation * b.mean_model_l2,
              1e-9);
}

TEST(Stability, RotationInvariance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::size_t m = 2 + seed % 7;
    const auto models = RandomModels(5, m, seed + 40);
    const auto g = RandomVector(m * m, seed + 41);
    const Eigen::MatrixXd Q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::Map<const Eigen::MatrixXd>(g.data(), m, m))
            .householderQ();
    auto rotated = models;
    for (auto& p : rotated) {
      const Eigen::VectorXd v = Q * Eigen::Map<const Eigen::VectorXd>(p.data(), m);
      p.assign(v.data(), v.data() + m);
    }
    const auto a = ComputeDeviationReport(models);
    const auto b = ComputeDeviationReport(rotated);
    EXPECT_NEAR(a.deviation_l2, b.deviation_l2, 1e-12);
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_NEAR(a.spectrum.eigenvalues[k], b.spectrum.eigenvalues[k], 1e-10);
    }
  }
}

TEST(Stability, ParamVectorOverloadAgrees) {
  const auto raw = RandomModels(4, 12, 8);
  std::vector<ParamVector> models;
  for (const auto& p : raw) models.emplace_back(ParamLayout{3, 3}, p);
  const auto a = ComputeDeviationReport(raw);
  const auto b = ComputeDeviationReport(models);
  EXPECT_EQ(a.deviation_l2, b.deviation_l2);
  EXPECT_EQ(a.spectrum.eigenvalues, b.spectrum.eigenvalues);
}

TEST(PercentSeries, SharedStartAndOrdering) {
  const ParamLayout layout{2, 2};
  const ParamVector start(layout, RandomVector(6, 1));
  std::vector<std::vector<ParamVector>> snaps(3);
  for (std::size_t i = 0; i < 3; ++i) {
    snaps[i].push_back(start);
    snaps[i].emplace_back(layout, RandomVector(6, 10 + i));
    snaps[i].push_back(snaps[i].back());
  }
  const std::vector<std::size_t> epochs{0, 5, 10};
  const auto series = PercentSeries(snaps, epochs);
  ASSERT_EQ(series.size(), 3u);
  EXPECT_EQ(series[0].report.percent_deviation, 0.0);
  EXPECT_GT(series[1].report.percent_deviation, 0.0);
  EXPECT_EQ(series[1].report.percent_deviation, series[2].report.percent_deviation);
  EXPECT_EQ(series[2].epoch, 10u);
  EXPECT_TRUE(series[1].report.spectrum.directions.empty());

  auto short_snaps = snaps;
  short_snaps[1].pop_back();
  EXPECT_THROW(PercentSeries(short_snaps, epochs), DimensionMismatch);
  const std::vector<std::size_t> unordered{0, 10, 5};
  EXPECT_THROW(PercentSeries(snaps, unordered), InvalidArgument);

  std::ostringstream csv;
  WriteSeriesCsv(series, csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "epoch,deviation_l2,percent_deviation,sqrt_sum");
  EXPECT_EQ(csv.str().substr(csv.str().find('\n') + 1, 8), "0,0,0,0\n");
}

TEST(ReportJson, RoundTripsExactly) {
  const auto r = ComputeDeviationReport(RandomModels(4, 6, 99));
  const auto j = ReportToJson(r, true);
  EXPECT_EQ(j["n_models"], 4);
  EXPECT_TRUE(j.contains("deviation_l2"));
  EXPECT_TRUE(j["spectrum"].contains("sqrt_sum"));
  const auto back = ReportFromJson(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.deviation_l2, r.deviation_l2);
  EXPECT_EQ(back.percent_deviation, r.percent_deviation);
  EXPECT_EQ(back.spectrum.eigenvalues, r.spectrum.eigenvalues);
  EXPECT_EQ(back.spectrum.directions, r.spectrum.directions);
  EXPECT_FALSE(ReportToJson(r).at("spectrum").contains("directions"));
}

}  // namespace
}  // namespace pacstab
