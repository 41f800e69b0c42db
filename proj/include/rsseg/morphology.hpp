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

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rsseg {

/// Dilation or erosion of a dense 0/1 mask by a (2r+1)-square structuring
/// element, computed as two 1-D passes. Pixels outside the image count as
/// background.
inline std::vector<std::uint8_t> morph_square(const std::vector<std::uint8_t>& in, std::uint32_t w,
                                              std::uint32_t h, std::uint32_t radius, bool dilate) {
  if (radius == 0) return in;
  const long r = radius;
  const auto pass = [&](const std::vector<std::uint8_t>& src, bool horizontal) {
    std::vector<std::uint8_t> dst(src.size());
    const long len = horizontal ? w : h;
    for (std::uint32_t y = 0; y < h; ++y) {
      for (std::uint32_t x = 0; x < w; ++x) {
        const long pos = horizontal ? x : y;
        std::uint8_t v = dilate ? 0 : 1;
        for (long d = -r; d <= r; ++d) {
          const long q = pos + d;
          std::uint8_t s = 0;
          if (q >= 0 && q < len) {
            s = horizontal ? src[std::size_t{y} * w + static_cast<std::size_t>(q)]
                           : src[static_cast<std::size_t>(q) * w + x];
          }
          if (dilate ? s != 0 : s == 0) {
            v = dilate ? 1 : 0;
            break;
          }
        }
        dst[std::size_t{y} * w + x] = v;
      }
    }
    return dst;
  };
  return pass(pass(in, true), false);
}

}  // namespace rsseg
