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

#ifndef PACSTAB_ERROR_HPP_
#define PACSTAB_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pacstab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad size, out-of-range value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Two objects that must agree in shape do not.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A file could not be parsed. `offset` is a byte offset for binary files and
// a 1-based line number for text files.
class FormatError : public Error {
 public:
  enum class Location { byte, line, none };

  FormatError(const std::string& what, Location location, std::size_t offset)
      : Error(Describe(what, location, offset)),
        location_(location),
        offset_(offset) {}

  explicit FormatError(const std::string& what)
      : FormatError(what, Location::none, 0) {}

  Location location() const { return location_; }
  std::size_t offset() const { return offset_; }

 private:
  static std::string Describe(const std::string& what, Location location,
                              std::size_t offset) {
    switch (location) {
      case Location::byte:
        return what + " (at byte " + std::to_string(offset) + ")";
      case Location::line:
        return what + " (at line " + std::to_string(offset) + ")";
      case Location::none:
        break;
    }
    return what;
  }

  Location location_;
  std::size_t offset_;
};

// Specialised format errors so callers can tell the failure modes apart.
class MalformedHeader : public FormatError {
 public:
  using FormatError::FormatError;
};

class LabelOutOfRange : public FormatError {
 public:
  using FormatError::FormatError;
};

class NonFiniteValue : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedData : public FormatError {
 public:
  using FormatError::FormatError;
};

// Header dimensions disagree with the payload (wrong field count, trailing
// bytes).
class ShapeMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

// A loss evaluation overflowed. Carries the offending sample index.
class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t sample)
      : Error("non-finite loss at sample " + std::to_string(sample)),
        sample_(sample) {}
  std::size_t sample() const { return sample_; }

 private:
  std::size_t sample_;
};

// Training produced non-finite parameters.
class Divergence : public Error {
 public:
  explicit Divergence(std::size_t epoch)
      : Error("parameters became non-finite at epoch " +
              std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace pacstab

#endif  // PACSTAB_ERROR_HPP_
