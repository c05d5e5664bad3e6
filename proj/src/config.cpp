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

#include "pacstab/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "pacstab/error.hpp"
#include "pacstab/text_format.hpp"

namespace pacstab {
namespace {

constexpr std::array<std::string_view, 12> kTrainingKeys = {
    "lr",           "epochs",         "momentum",   "nesterov",
    "weight_decay", "clip",           "clip_threshold", "group_size",
    "prune_fraction", "prune_when",   "record_every", "freeze"};

constexpr std::array<std::string_view, 19> kExperimentKeys = {
    "lr",           "epochs",         "momentum",   "nesterov",
    "weight_decay", "clip",           "clip_threshold", "group_size",
    "prune_fraction", "prune_when",   "record_every", "freeze",
    "experiment",   "ensemble_size",  "sweep",      "loss",
    "seed",         "subset_size",    "init_stddev"};

std::string_view Trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> SplitList(std::string_view text) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto comma = text.find(',');
    parts.push_back(Trim(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return parts;
}

const std::string* Find(const ConfigMap& config, const char* key) {
  auto it = config.find(key);
  return it == config.end() ? nullptr : &it->second;
}

std::string_view PruneWhenName(PruneTiming t) {
  return t == PruneTiming::before_training ? "before_training" : "after_training";
}

}  // namespace

ConfigMap ParseConfig(std::istream& in) {
  ConfigMap config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = Trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("expected key = value", FormatError::Location::line, line_no);
    }
    const std::string key(Trim(view.substr(0, eq)));
    const std::string value(Trim(view.substr(eq + 1)));
    if (key.empty()) {
      throw FormatError("empty key", FormatError::Location::line, line_no);
    }
    if (!config.emplace(key, value).second) {
      throw FormatError("duplicate key '" + key + "'", FormatError::Location::line,
                        line_no);
    }
  }
  return config;
}

ConfigMap LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  try {
    return ParseConfig(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ConfigMap MergeConfig(ConfigMap base, const ConfigMap& overrides) {
  for (const auto& [key, value] : overrides) base[key] = value;
  return base;
}

void CheckKeys(const ConfigMap& config, std::span<const std::string_view> allowed) {
  for (const auto& [key, value] : config) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }
}

std::span<const std::string_view> TrainingKeys() { return kTrainingKeys; }
std::span<const std::string_view> ExperimentKeys() { return kExperimentKeys; }

double ParseReal(std::string_view key, std::string_view text) {
  text = Trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() ||
      !std::isfinite(value)) {
    throw InvalidArgument(std::string(key) + ": expected a finite number, got '" +
                          std::string(text) + "'");
  }
  return value;
}

std::size_t ParseCount(std::string_view key, std::string_view text) {
  text = Trim(text);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw InvalidArgument(std::string(key) + ": expected a nonnegative integer, got '" +
                          std::string(text) + "'");
  }
  return value;
}

bool ParseFlag(std::string_view key, std::string_view text) {
  text = Trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw InvalidArgument(std::string(key) + ": expected true or false, got '" +
                        std::string(text) + "'");
}

std::vector<double> ParseRealList(std::string_view key, std::string_view text) {
  std::vector<double> values;
  for (auto part : SplitList(text)) values.push_back(ParseReal(key, part));
  return values;
}

FreezeMask ParseFreezeRanges(std::string_view text, std::size_t n_params) {
  FreezeMask mask(n_params, 0);
  if (Trim(text).empty() || Trim(text) == "none") return mask;
  for (auto part : SplitList(text)) {
    std::size_t lo = 0;
    std::size_t hi = 0;
    if (auto dash = part.find('-'); dash != std::string_view::npos) {
      lo = ParseCount("freeze", part.substr(0, dash));
      hi = ParseCount("freeze", part.substr(dash + 1));
    } else {
      lo = hi = ParseCount("freeze", part);
    }
    if (lo > hi || hi >= n_params) {
      throw InvalidArgument("freeze: range '" + std::string(part) +
                            "' is outside [0, " + std::to_string(n_params) + ")");
    }
    std::fill(mask.begin() + lo, mask.begin() + hi + 1, 1);
  }
  return mask;
}

std::string FormatFreezeRanges(const FreezeMask& mask) {
  std::string out;
  std::size_t i = 0;
  while (i < mask.size()) {
    if (mask[i] == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < mask.size() && mask[j + 1] != 0) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(i);
    if (j > i) out += '-' + std::to_string(j);
    i = j + 1;
  }
  return out.empty() ? "none" : out;
}

TrainingConfig TrainingConfigFromMap(const ConfigMap& config, std::size_t n_params,
                                     TrainingConfig cfg) {
  if (auto v = Find(config, "lr")) cfg.learning_rate = ParseReal("lr", *v);
  if (auto v = Find(config, "epochs")) cfg.epochs = ParseCount("epochs", *v);
  if (auto v = Find(config, "momentum")) cfg.momentum = ParseReal("momentum", *v);
  if (auto v = Find(config, "nesterov")) cfg.nesterov = ParseFlag("nesterov", *v);
  if (auto v = Find(config, "weight_decay")) {
    cfg.weight_decay = ParseReal("weight_decay", *v);
  }
  if (auto v = Find(config, "clip")) cfg.clipping.kind = ParseClippingKind(*v);
  if (auto v = Find(config, "clip_threshold")) {
    cfg.clipping.threshold = ParseReal("clip_threshold", *v);
  }
  if (auto v = Find(config, "group_size")) {
    cfg.clipping.group_size = ParseCount("group_size", *v);
  }
  if (cfg.clipping.kind != ClippingPolicy::Kind::group_sample) {
    cfg.clipping.group_size = 0;
  }
  if (cfg.clipping.kind == ClippingPolicy::Kind::none) cfg.clipping.threshold = 0.0;
  if (auto v = Find(config, "prune_fraction")) {
    const double fraction = ParseReal("prune_fraction", *v);
    if (fraction == 0.0) {
      cfg.prune.reset();
    } else {
      cfg.prune = PruneConfig{fraction, cfg.prune ? cfg.prune->when
                                                  : PruneTiming::before_training};
    }
  }
  if (auto v = Find(config, "prune_when")) {
    PruneTiming when;
    if (*v == "before_training" || *v == "before") {
      when = PruneTiming::before_training;
    } else if (*v == "after_training" || *v == "after") {
      when = PruneTiming::after_training;
    } else if (*v == "none") {
      when = PruneTiming::before_training;
    } else {
      throw InvalidArgument("prune_when: expected before_training or after_training");
    }
    if (cfg.prune) cfg.prune->when = when;
  }
  if (auto v = Find(config, "record_every")) {
    cfg.record_every = ParseCount("record_every", *v);
  }
  if (auto v = Find(config, "freeze")) {
    FreezeMask mask = ParseFreezeRanges(*v, n_params);
    if (std::any_of(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; })) {
      cfg.freeze_mask = std::move(mask);
    } else {
      cfg.freeze_mask.reset();
    }
  }
  cfg.Validate(n_params);
  return cfg;
}

ExperimentSpec ExperimentSpecFromMap(const ConfigMap& config, std::size_t n_params) {
  const std::string* name = Find(config, "experiment");
  if (name == nullptr) throw InvalidArgument("config needs an 'experiment' key");
  ExperimentSpec spec = DefaultExperimentSpec(ParseExperimentKind(*name));
  ConfigMap training = config;
  if (spec.kind == ExperimentKind::group_clip_sweep) {
    if (auto v = Find(config, "clip_threshold")) {
      spec.clip_threshold = ParseReal("clip_threshold", *v);
    }
    training.erase("clip_threshold");
  }
  spec.base = TrainingConfigFromMap(training, n_params, spec.base);
  if (auto v = Find(config, "ensemble_size")) {
    spec.ensemble_size = ParseCount("ensemble_size", *v);
  }
  if (auto v = Find(config, "sweep")) spec.sweep = ParseRealList("sweep", *v);
  if (auto v = Find(config, "loss")) spec.loss = ParseLossKind(*v);
  if (auto v = Find(config, "seed")) spec.master_seed = ParseCount("seed", *v);
  if (auto v = Find(config, "subset_size")) {
    spec.subset_size = ParseCount("subset_size", *v);
  }
  if (auto v = Find(config, "init_stddev")) {
    spec.init_stddev = ParseReal("init_stddev", *v);
  }
  spec.Validate();
  return spec;
}

std::string FormatTrainingConfig(const TrainingConfig& cfg) {
  std::ostringstream out;
  out << "lr = " << FormatReal(cfg.learning_rate) << '\n'
      << "epochs = " << cfg.epochs << '\n'
      << "momentum = " << FormatReal(cfg.momentum) << '\n'
      << "nesterov = " << (cfg.nesterov ? "true" : "false") << '\n'
      << "weight_decay = " << FormatReal(cfg.weight_decay) << '\n'
      << "clip = " << ToString(cfg.clipping.kind) << '\n'
      << "clip_threshold = " << FormatReal(cfg.clipping.threshold) << '\n'
      << "group_size = " << cfg.clipping.group_size << '\n'
      << "prune_fraction = " << FormatReal(cfg.prune ? cfg.prune->fraction : 0.0)
      << '\n'
      << "prune_when = "
      << (cfg.prune ? PruneWhenName(cfg.prune->when) : std::string_view("none"))
      << '\n'
      << "record_every = " << cfg.record_every << '\n'
      << "freeze = "
      << (cfg.freeze_mask ? FormatFreezeRanges(*cfg.freeze_mask) : "none") << '\n';
  return out.str();
}

std::string FormatExperimentSpec(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "experiment = " << ToString(spec.kind) << '\n'
      << "ensemble_size = " << spec.ensemble_size << '\n'
      << "sweep = ";
  for (std::size_t i = 0; i < spec.sweep.size(); ++i) {
    out << (i ? ", " : "") << FormatReal(spec.sweep[i]);
  }
  out << '\n'
      << "loss = " << ToString(spec.loss) << '\n'
      << "seed = " << spec.master_seed << '\n'
      << "subset_size = " << spec.subset_size << '\n'
      << "init_stddev = " << FormatReal(spec.init_stddev) << '\n';
  TrainingConfig base = spec.base;
  if (spec.kind == ExperimentKind::group_clip_sweep) {
    // The sweep owns the clipping policy; clip_threshold is the group threshold.
    std::string text = FormatTrainingConfig(base);
    const std::string key = "clip_threshold = ";
    const auto at = text.find(key);
    const auto end = text.find('\n', at);
    text.replace(at, end - at, key + FormatReal(spec.clip_threshold));
    out << text;
  } else {
    out << FormatTrainingConfig(base);
  }
  return out.str();
}

}  // namespace pacstab
