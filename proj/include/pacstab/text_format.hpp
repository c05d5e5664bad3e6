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

#ifndef PACSTAB_TEXT_FORMAT_HPP_
#define PACSTAB_TEXT_FORMAT_HPP_

#include <cmath>
#include <charconv>
#include <string>

namespace pacstab {

// Shortest text that parses back to the same double, with "nan" for NaN so
// files stay byte-stable across C libraries.
inline std::string FormatReal(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

}  // namespace pacstab

#endif  // PACSTAB_TEXT_FORMAT_HPP_
