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

#include "pacstab/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>

#include "pacstab/error.hpp"
#include "pacstab/random.hpp"

namespace pacstab {
namespace {

constexpr std::array<char, 4> kDatasetMagic = {'F', 'D', 'S', '1'};
constexpr std::size_t kHeaderBytes = 16;

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::size_t offset() const { return offset_; }

  template <std::size_t N>
  std::array<unsigned char, N> Take(const char* what) {
    std::array<unsigned char, N> bytes{};
    in_.read(reinterpret_cast<char*>(bytes.data()), N);
    if (in_.gcount() != static_cast<std::streamsize>(N)) {
      throw TruncatedData(std::string("unexpected end of file reading ") + what,
                          FormatError::Location::byte, offset_);
    }
    offset_ += N;
    return bytes;
  }

  std::uint32_t U32(const char* what) {
    const auto b = Take<4>(what);
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
           (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
  }

  std::uint16_t U16(const char* what) {
    const auto b = Take<2>(what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  bool AtEnd() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

void PutU32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff),
                         static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

void PutU16(std::ostream& out, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v & 0xff),
                         static_cast<char>((v >> 8) & 0xff)};
  out.write(bytes, 2);
}

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

FeatureDataset::FeatureDataset(std::size_t n_samples, std::size_t feature_dim,
                               std::size_t n_classes,
                               std::vector<float> features,
                               std::vector<std::uint16_t> labels)
    : n_samples_(n_samples),
      feature_dim_(feature_dim),
      n_classes_(n_classes),
      features_(std::move(features)),
      labels_(std::move(labels)) {
  if (n_samples_ < 1) throw InvalidArgument("dataset needs at least one sample");
  if (feature_dim_ < 1) throw InvalidArgument("feature_dim must be >= 1");
  if (n_classes_ < 2) throw InvalidArgument("n_classes must be >= 2");
  if (n_classes_ > 65536) throw InvalidArgument("n_classes must be <= 65536");
  if (features_.size() != n_samples_ * feature_dim_) {
    throw DimensionMismatch("feature buffer has " +
                            std::to_string(features_.size()) +
                            " entries, expected n_samples*feature_dim = " +
                            std::to_string(n_samples_ * feature_dim_));
  }
  if (labels_.size() != n_samples_) {
    throw DimensionMismatch("label buffer has " + std::to_string(labels_.size()) +
                            " entries, expected " + std::to_string(n_samples_));
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!std::isfinite(features_[i])) {
      throw InvalidArgument("non-finite feature at row " +
                            std::to_string(i / feature_dim_) + ", column " +
                            std::to_string(i % feature_dim_));
    }
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= n_classes_) {
      throw InvalidArgument("label " + std::to_string(labels_[i]) +
                            " at row " + std::to_string(i) +
                            " is outside [0, " + std::to_string(n_classes_) +
                            ")");
    }
  }
}

FeatureDataset FeatureDataset::SelectRows(
    std::span<const std::size_t> rows) const {
  std::vector<float> features;
  features.reserve(rows.size() * feature_dim_);
  std::vector<std::uint16_t> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= n_samples_) {
      throw InvalidArgument("row index " + std::to_string(r) +
                            " out of range");
    }
    const auto x = row(r);
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(labels_[r]);
  }
  return FeatureDataset(rows.size(), feature_dim_, n_classes_,
                        std::move(features), std::move(labels));
}

FeatureDataset FeatureDataset::Relabel(std::span<const std::uint16_t> mapping,
                                       std::size_t n_classes) const {
  if (mapping.size() != n_classes_) {
    throw DimensionMismatch("relabel mapping must cover every class");
  }
  std::vector<std::uint16_t> labels(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) labels[i] = mapping[labels_[i]];
  return FeatureDataset(n_samples_, feature_dim_, n_classes, features_,
                        std::move(labels));
}

FeatureDataset ReadBinaryDataset(std::istream& in) {
  ByteReader reader(in);
  const auto magic = reader.Take<4>("magic");
  if (!std::equal(magic.begin(), magic.end(), kDatasetMagic.begin(),
                  [](unsigned char a, char b) { return a == static_cast<unsigned char>(b); })) {
    throw MalformedHeader("bad magic, expected \"FDS1\"",
                          FormatError::Location::byte, 0);
  }
  const std::uint32_t n = reader.U32("n_samples");
  const std::uint32_t d = reader.U32("feature_dim");
  const std::uint32_t c = reader.U32("n_classes");
  if (n < 1) throw MalformedHeader("n_samples must be >= 1", FormatError::Location::byte, 4);
  if (d < 1) throw MalformedHeader("feature_dim must be >= 1", FormatError::Location::byte, 8);
  if (c < 2 || c > 65536) {
    throw MalformedHeader("n_classes must be in [2, 65536]",
                          FormatError::Location::byte, 12);
  }
  const std::size_t count = std::size_t{n} * std::size_t{d};
  std::vector<float> features(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = reader.offset();
    const float v = std::bit_cast<float>(reader.U32("features"));
    if (!std::isfinite(v)) {
      throw NonFiniteValue("non-finite feature (row " + std::to_string(i / d) +
                               ", column " + std::to_string(i % d) + ")",
                           FormatError::Location::byte, at);
    }
    features[i] = v;
  }
  std::vector<std::uint16_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = reader.offset();
    const std::uint16_t label = reader.U16("labels");
    if (label >= c) {
      throw LabelOutOfRange("label " + std::to_string(label) + " at row " +
                                std::to_string(i) + " outside [0, " +
                                std::to_string(c) + ")",
                            FormatError::Location::byte, at);
    }
    labels[i] = label;
  }
  if (!reader.AtEnd()) {
    throw ShapeMismatch("trailing bytes after label block",
                        FormatError::Location::byte, reader.offset());
  }
  return FeatureDataset(n, d, c, std::move(features), std::move(labels));
}

void WriteBinaryDataset(const FeatureDataset& ds, std::ostream& out) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (ds.n_samples() > kMax || ds.feature_dim() > kMax) {
    throw InvalidArgument("dataset too large for the FDS1 format");
  }
  out.write(kDatasetMagic.data(), kDatasetMagic.size());
  PutU32(out, static_cast<std::uint32_t>(ds.n_samples()));
  PutU32(out, static_cast<std::uint32_t>(ds.feature_dim()));
  PutU32(out, static_cast<std::uint32_t>(ds.n_classes()));
  for (float v : ds.features()) PutU32(out, std::bit_cast<std::uint32_t>(v));
  for (std::uint16_t label : ds.labels()) PutU16(out, label);
}

FeatureDataset ReadCsvDataset(std::istream& in,
                              std::optional<std::size_t> n_classes) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t d = 0;
  // Header.
  for (;;) {
    if (!std::getline(in, line)) throw MalformedHeader("empty CSV file");
    ++line_no;
    if (!Trim(line).empty()) break;
  }
  {
    const auto fields = SplitCommas(Trim(line));
    if (fields.size() < 2 || Trim(fields[0]) != "label") {
      throw MalformedHeader("CSV header must be `label,f0,f1,...`",
                            FormatError::Location::line, line_no);
    }
    for (std::size_t j = 1; j < fields.size(); ++j) {
      if (Trim(fields[j]) != "f" + std::to_string(j - 1)) {
        throw MalformedHeader("CSV header column " + std::to_string(j) +
                                  " must be f" + std::to_string(j - 1),
                              FormatError::Location::line, line_no);
      }
    }
    d = fields.size() - 1;
  }

  std::vector<float> features;
  std::vector<std::uint16_t> labels;
  std::vector<std::size_t> label_lines;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = Trim(line);
    if (row.empty()) continue;
    const auto fields = SplitCommas(row);
    if (fields.size() != d + 1) {
      throw ShapeMismatch("expected " + std::to_string(d + 1) +
                              " fields, found " + std::to_string(fields.size()),
                          FormatError::Location::line, line_no);
    }
    const std::string_view label_text = Trim(fields[0]);
    long long label = 0;
    const auto [lp, lec] = std::from_chars(
        label_text.data(), label_text.data() + label_text.size(), label);
    if (lec != std::errc{} || lp != label_text.data() + label_text.size()) {
      throw FormatError("label is not a decimal integer",
                        FormatError::Location::line, line_no);
    }
    if (label < 0 || label > 65535 ||
        (n_classes && static_cast<std::size_t>(label) >= *n_classes)) {
      throw LabelOutOfRange("label " + std::string(label_text) +
                                " out of range",
                            FormatError::Location::line, line_no);
    }
    labels.push_back(static_cast<std::uint16_t>(label));
    label_lines.push_back(line_no);
    for (std::size_t j = 1; j <= d; ++j) {
      const std::string_view text = Trim(fields[j]);
      float v = 0.0f;
      const auto [p, ec] =
          std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || p != text.data() + text.size()) {
        throw FormatError("feature f" + std::to_string(j - 1) +
                              " is not a number",
                          FormatError::Location::line, line_no);
      }
      if (!std::isfinite(v)) {
        throw NonFiniteValue("non-finite feature f" + std::to_string(j - 1),
                             FormatError::Location::line, line_no);
      }
      features.push_back(v);
    }
  }
  if (labels.empty()) throw MalformedHeader("CSV file has no data rows");
  std::size_t classes = 0;
  if (n_classes) {
    classes = *n_classes;
  } else {
    classes = std::max<std::size_t>(
        2, std::size_t{*std::max_element(labels.begin(), labels.end())} + 1);
  }
  const std::size_t n = labels.size();
  return FeatureDataset(n, d, classes, std::move(features), std::move(labels));
}

void WriteCsvDataset(const FeatureDataset& ds, std::ostream& out) {
  out << "label";
  for (std::size_t j = 0; j < ds.feature_dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    out << ds.label(i);
    for (float v : ds.row(i)) {
      // %.9g round-trips every float32 exactly.
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
      out << ',' << buf;
    }
    out << '\n';
  }
}

DatasetFormat FormatFromExtension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::binary;
}

FeatureDataset LoadDataset(const std::filesystem::path& path,
                           DatasetFormat format,
                           std::optional<std::size_t> n_classes) {
  std::ifstream in(path, format == DatasetFormat::binary
                             ? std::ios::in | std::ios::binary
                             : std::ios::in);
  if (!in) throw Error("cannot open dataset file " + path.string());
  if (format == DatasetFormat::binary) return ReadBinaryDataset(in);
  return ReadCsvDataset(in, n_classes);
}

void SaveDataset(const FeatureDataset& ds, const std::filesystem::path& path,
                 DatasetFormat format) {
  std::ofstream out(path, format == DatasetFormat::binary
                              ? std::ios::out | std::ios::binary
                              : std::ios::out);
  if (!out) throw Error("cannot write dataset file " + path.string());
  if (format == DatasetFormat::binary) {
    WriteBinaryDataset(ds, out);
  } else {
    WriteCsvDataset(ds, out);
  }
  if (!out) throw Error("write failed for " + path.string());
}

FeatureDataset SynthesizeDataset(std::size_t n, std::size_t d, std::size_t C,
                                 double class_separation, std::uint64_t seed) {
  if (C < 2) throw InvalidArgument("synthesize: need at least 2 classes");
  if (n < C) throw InvalidArgument("synthesize: n must be >= number of classes");
  if (d < 1) throw InvalidArgument("synthesize: d must be >= 1");
  if (!(class_separation >= 0.0) || !std::isfinite(class_separation)) {
    throw InvalidArgument("synthesize: class_separation must be finite and >= 0");
  }
  Rng rng(seed);
  // Means at distance sep/sqrt(2) from the origin along mutually orthogonal
  // unit directions are pairwise `sep` apart.
  const double radius = class_separation / std::sqrt(2.0);
  std::vector<double> means(C * d, 0.0);
  if (C <= d) {
    for (std::size_t c = 0; c < C; ++c) means[c * d + c] = radius;
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double g = rng.Gaussian();
        means[c * d + j] = g;
        norm2 += g * g;
      }
      const double s = norm2 > 0.0 ? radius / std::sqrt(norm2) : 0.0;
      for (std::size_t j = 0; j < d; ++j) means[c * d + j] *= s;
    }
  }
  std::vector<float> features(n * d);
  std::vector<std::uint16_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % C;
    labels[i] = static_cast<std::uint16_t>(c);
    for (std::size_t j = 0; j < d; ++j) {
      features[i * d + j] = static_cast<float>(means[c * d + j] + rng.Gaussian());
    }
  }
  return FeatureDataset(n, d, C, std::move(features), std::move(labels));
}

std::vector<std::size_t> ResolveSubsetIndices(std::size_t n_samples,
                                              const SubsetSpec& spec) {
  std::size_t draws = 0;
  switch (spec.mode) {
    case SubsetMode::random_subset:
      if (spec.count > n_samples) {
        throw InvalidArgument("random_subset of " + std::to_string(spec.count) +
                              " rows from a " + std::to_string(n_samples) +
                              "-row dataset");
      }
      draws = spec.count;
      break;
    case SubsetMode::point_removal:
      if (spec.count >= n_samples) {
        throw InvalidArgument("point_removal of " + std::to_string(spec.count) +
                              " rows must leave at least one of " +
                              std::to_string(n_samples));
      }
      draws = spec.count;
      break;
  }
  std::vector<std::size_t> perm(n_samples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < draws; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.Below(n_samples - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> drawn(perm.begin(), perm.begin() + draws);
  std::sort(drawn.begin(), drawn.end());
  if (spec.mode == SubsetMode::random_subset) return drawn;

  std::vector<std::size_t> kept;
  kept.reserve(n_samples - draws);
  auto removed = drawn.begin();
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (removed != drawn.end() && *removed == i) {
      ++removed;
    } else {
      kept.push_back(i);
    }
  }
  return kept;
}

FeatureDataset ResolveSubset(const FeatureDataset& ds, const SubsetSpec& spec) {
  const auto rows = ResolveSubsetIndices(ds.n_samples(), spec);
  if (rows.empty()) throw InvalidArgument("subset selects no rows");
  return ds.SelectRows(rows);
}

}  // namespace pacstab
