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

// Output perturbation calibrated from an ensemble's deviation spectrum.
//
// `scale` is a dimensionless multiplier on the measured magnitudes. Turning
// it into a formal privacy budget needs a separate PAC-privacy analysis; this
// module only shapes and draws the noise.

#ifndef PACSTAB_NOISE_HPP_
#define PACSTAB_NOISE_HPP_

#include <cstdint>
#include <string_view>

#include "pacstab/dataset.hpp"
#include "pacstab/model.hpp"
#include "pacstab/stability.hpp"

namespace pacstab {

enum class NoiseMode { isotropic, anisotropic };

std::string_view ToString(NoiseMode mode);
NoiseMode ParseNoiseMode(std::string_view text);

struct NoiseSpec {
  NoiseMode mode = NoiseMode::anisotropic;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

struct PrivatizeResult {
  ParamVector params;
  // Set when anisotropic noise was requested but the spectrum has no
  // positive eigenvalue; `params` is then the input unchanged.
  bool degenerate_spectrum = false;
};

// isotropic:   p + scale * deviation_l2 * z / sqrt(m),  z ~ N(0, I_m)
// anisotropic: p + scale * sum_i sqrt(lambda_i) * g_i * u_i,  g_i ~ N(0, 1)
//
// Draws come from Rng(spec.seed) in coordinate (isotropic) or eigenvalue
// (anisotropic) order.
PrivatizeResult Privatize(const ParamVector& p, const DeviationReport& report,
                          const NoiseSpec& spec);

// Adds i.i.d. N(0, sigma^2) to every feature in row-major order; labels are
// untouched.
FeatureDataset PerturbInputs(const FeatureDataset& ds, double sigma,
                             std::uint64_t seed);

}  // namespace pacstab

#endif  // PACSTAB_NOISE_HPP_
