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

#pragma once

#include <array>
#include <cstdint>

#include "rsseg/core.hpp"
#include "rsseg/labelmap.hpp"

namespace rsseg {

inline constexpr std::uint64_t kDefaultPaletteSeed = 0x5eed;

/// Pseudo-random color for a label. The map from the low 24 bits of the label
/// to the 24-bit color is a bijection fixing 0, so label 0 is black and any
/// 2^24 consecutive labels get distinct colors.
inline std::array<std::uint8_t, 3> label_color(Label label, std::uint64_t seed = kDefaultPaletteSeed) {
  constexpr std::uint32_t kMask = 0xffffff;
  std::uint64_t s = seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL;
  s ^= s >> 29;
  const auto m1 = static_cast<std::uint32_t>(s | 1) & kMask;
  const auto m2 = static_cast<std::uint32_t>((s >> 24) | 1) & kMask;
  std::uint32_t x = (label ^ (label >> 24)) & kMask;
  // Odd multiplies and xor-shifts are both invertible modulo 2^24.
  x = (x * m1) & kMask;
  x ^= x >> 13;
  x = (x * m2) & kMask;
  x ^= x >> 11;
  x = (x * 0x2c1b3d) & kMask;  // 0x2c1b3d is odd
  x ^= x >> 7;
  return {static_cast<std::uint8_t>(x >> 16), static_cast<std::uint8_t>(x >> 8),
          static_cast<std::uint8_t>(x)};
}

inline RgbImage render_labels(const LabelMap& map, std::uint64_t seed = kDefaultPaletteSeed) {
  RgbImage out(map.width(), map.height());
  auto bytes = out.bytes();
  const auto labels = map.labels();
  Label last = kUnlabeled;
  std::array<std::uint8_t, 3> color{0, 0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != last) {
      last = labels[i];
      color = label_color(last, seed);
    }
    bytes[i * 3] = color[0];
    bytes[i * 3 + 1] = color[1];
    bytes[i * 3 + 2] = color[2];
  }
  return out;
}

}  // namespace rsseg
