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

// Command-line front end. Every command prints its resolved configuration
// before doing any work; every error ends the process with exit code 2.

#ifndef PACSTAB_CLI_HPP_
#define PACSTAB_CLI_HPP_

#include <iosfwd>

namespace pacstab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 2;

int ParseAndDispatch(int argc, const char* const* argv, std::ostream& out,
                     std::ostream& err);

}  // namespace pacstab

#endif  // PACSTAB_CLI_HPP_
