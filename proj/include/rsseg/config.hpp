// Copyright 2026 The rsseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run configuration files.
//
//   # comment
//   [tiling]
//   tile_size = 1000
//   padding = 50
//   [segmentation]
//   target_coverage = 99%
//
// Section headers group keys for readability; key names are global. Values
// given as percentages ("99%") are divided by 100, except `stagnation`, which
// is already expressed in percentage points.

#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rsseg/core.hpp"
#include "rsseg/merge.hpp"
#include "rsseg/pipeline.hpp"

namespace rsseg {

/// Keys accepted in config files and as CLI overrides.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "tile_size", "padding",           "points_per_side", "target_coverage",    "tau_start",
      "tau_end",   "step",              "stagnation",      "overlap_rejection",  "strategy",
      "min_mask_area", "merge_enclosed_max", "max_passes", "workers"};
  return keys;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline double parse_number(const std::string& key, std::string v, bool percent_allowed) {
  v = trim(std::move(v));
  bool percent = false;
  if (!v.empty() && v.back() == '%') {
    if (!percent_allowed) throw FormatError(key + ": percentage not allowed");
    percent = true;
    v = trim(v.substr(0, v.size() - 1));
  } else if (v.size() > 2 && v.ends_with("pp")) {
    v = trim(v.substr(0, v.size() - 2));
  }
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw FormatError(key + ": '" + v + "' is not a number");
  }
  return percent ? out / 100.0 : out;
}

inline std::uint64_t parse_count(const std::string& key, std::string v) {
  v = trim(std::move(v));
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw FormatError(key + ": '" + v + "' is not a non-negative integer");
  }
  return out;
}

inline std::uint32_t parse_u32(const std::string& key, const std::string& v) {
  const std::uint64_t n = parse_count(key, v);
  if (n > 0xffffffffULL) throw FormatError(key + ": value out of range");
  return static_cast<std::uint32_t>(n);
}

}  // namespace detail

/// Sets one key. Throws FormatError for unknown keys or malformed values.
inline void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "tile_size") {
    cfg.tile_size = parse_u32(key, value);
  } else if (key == "padding") {
    cfg.padding = parse_u32(key, value);
  } else if (key == "points_per_side") {
    cfg.pass.points_per_side = parse_u32(key, value);
  } else if (key == "target_coverage") {
    cfg.pass.target_coverage = parse_number(key, value, true);
  } else if (key == "tau_start") {
    cfg.pass.tau_start = parse_number(key, value, false);
  } else if (key == "tau_end") {
    cfg.pass.tau_end = parse_number(key, value, false);
  } else if (key == "step") {
    cfg.pass.step = parse_number(key, value, false);
  } else if (key == "stagnation") {
    cfg.pass.stagnation_pp = parse_number(key, value, false);
  } else if (key == "overlap_rejection") {
    cfg.pass.overlap_reject = parse_number(key, value, true);
  } else if (key == "strategy") {
    try {
      cfg.merge.strategy = parse_merge_strategy(trim(value));
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
  } else if (key == "min_mask_area") {
    cfg.pass.min_area = parse_count(key, value);
    cfg.merge.min_area = cfg.pass.min_area;
  } else if (key == "merge_enclosed_max") {
    cfg.merge.enclosed_max = parse_count(key, value);
  } else if (key == "max_passes") {
    cfg.pass.max_passes = parse_u32(key, value);
  } else if (key == "workers") {
    cfg.workers = parse_u32(key, value);
  } else {
    throw FormatError("unknown configuration key '" + key + "'");
  }
}

/// Parses key = value lines; `origin` names the source in diagnostics.
inline std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in,
                                                                    const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError(origin + ":" + std::to_string(lineno) + ": bad section header");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline void apply_config(PipelineConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv,
                         const std::string& origin) {
  for (const auto& [k, v] : kv) {
    try {
      apply_setting(cfg, k, v);
    } catch (const FormatError& e) {
      throw FormatError(origin + ": " + e.what());
    }
  }
}

inline void load_config_file(PipelineConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  apply_config(cfg, parse_config(in, path), path);
}

inline nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["tile_size"] = cfg.tile_size;
  j["padding"] = cfg.padding;
  j["points_per_side"] = cfg.pass.points_per_side;
  j["target_coverage"] = cfg.pass.target_coverage;
  j["tau_start"] = cfg.pass.tau_start;
  j["tau_end"] = cfg.pass.tau_end;
  j["step"] = cfg.pass.step;
  j["stagnation"] = cfg.pass.stagnation_pp;
  j["overlap_rejection"] = cfg.pass.overlap_reject;
  j["strategy"] = to_string(cfg.merge.strategy);
  j["min_mask_area"] = cfg.pass.min_area;
  j["merge_enclosed_max"] = cfg.merge.enclosed_max;
  j["max_passes"] = cfg.pass.max_passes;
  j["workers"] = cfg.workers;
  return j;
}

}  // namespace rsseg
