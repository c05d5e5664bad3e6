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

#include "pacstab/noise.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "pacstab/error.hpp"
#include "pacstab/random.hpp"

namespace pacstab {

std::string_view ToString(NoiseMode mode) {
  return mode == NoiseMode::isotropic ? "isotropic" : "anisotropic";
}

NoiseMode ParseNoiseMode(std::string_view text) {
  if (text == "isotropic") return NoiseMode::isotropic;
  if (text == "anisotropic") return NoiseMode::anisotropic;
  throw InvalidArgument("unknown noise mode '" + std::string(text) +
                        "' (expected isotropic or anisotropic)");
}

PrivatizeResult Privatize(const ParamVector& p, const DeviationReport& report,
                          const NoiseSpec& spec) {
  if (!(spec.scale >= 0.0) || !std::isfinite(spec.scale)) {
    throw InvalidArgument("noise scale must be finite and >= 0");
  }
  PrivatizeResult result{p, false};
  const std::size_t m = p.size();
  auto values = result.params.mutable_values();
  Rng rng(spec.seed);

  if (spec.mode == NoiseMode::isotropic) {
    if (spec.scale == 0.0) return result;
    const double sigma = spec.scale * report.deviation_l2 / std::sqrt(static_cast<double>(m));
    for (double& v : values) v += sigma * rng.Gaussian();
    return result;
  }

  const auto& lambdas = report.spectrum.eigenvalues;
  const auto& directions = report.spectrum.directions;
  const bool any_positive =
      !lambdas.empty() && lambdas.front() > 0.0 && !directions.empty();
  if (!any_positive) {
    if (!lambdas.empty() && lambdas.front() > 0.0) {
      throw InvalidArgument(
          "anisotropic noise needs a report computed with directions");
    }
    result.degenerate_spectrum = true;
    return result;
  }
  if (spec.scale == 0.0) return result;
  for (std::size_t k = 0; k < directions.size(); ++k) {
    const auto& u = directions[k];
    if (u.size() != m) {
      throw DimensionMismatch("noise direction length " + std::to_string(u.size()) +
                              " does not match the model (" + std::to_string(m) +
                              ")");
    }
    const double amplitude = spec.scale * std::sqrt(lambdas[k]) * rng.Gaussian();
    for (std::size_t j = 0; j < m; ++j) values[j] += amplitude * u[j];
  }
  return result;
}

FeatureDataset PerturbInputs(const FeatureDataset& ds, double sigma,
                             std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("input noise sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return ds;
  Rng rng(seed);
  std::vector<float> features(ds.features().begin(), ds.features().end());
  for (float& f : features) {
    f = static_cast<float>(static_cast<double>(f) + sigma * rng.Gaussian());
  }
  return FeatureDataset(ds.n_samples(), ds.feature_dim(), ds.n_classes(),
                        std::move(features),
                        std::vector<std::uint16_t>(ds.labels().begin(),
                                                   ds.labels().end()));
}

}  // namespace pacstab
