// Helpers shared by the unit tests.

#ifndef PACSTAB_TESTS_TEST_UTIL_HPP_
#define PACSTAB_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "pacstab/dataset.hpp"
#include "pacstab/model.hpp"
#include "pacstab/random.hpp"

namespace pacstab::testing {

// Random dataset with Gaussian features; labels drawn uniformly.
inline FeatureDataset RandomDataset(std::size_t n, std::size_t d, std::size_t C,
                                    std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<float> x(n * d);
  for (auto& v : x) v = static_cast<float>(scale * rng.Gaussian());
  std::vector<std::uint16_t> y(n);
  for (auto& l : y) l = static_cast<std::uint16_t>(rng.Below(C));
  return FeatureDataset(n, d, C, std::move(x), std::move(y));
}

inline std::vector<double> RandomVector(std::size_t m, std::uint64_t seed,
                                        double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(m);
  for (auto& x : v) x = scale * rng.Gaussian();
  return v;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("pacstab_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pacstab::testing

#endif  // PACSTAB_TESTS_TEST_UTIL_HPP_
