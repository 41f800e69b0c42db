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

// 8-bit RGB PNG read/write on top of libpng's simplified API.

#pragma once

#include <png.h>

#include <cstdint>
#include <string>

#include "rsseg/core.hpp"

namespace rsseg::tools {

/// PNG decoding needs the whole image in memory; larger rasters must be
/// converted to RRGB, which is read window by window.
inline constexpr std::uint64_t kMaxPngPixels = std::uint64_t{1} << 28;

inline RgbImage read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw FormatError("PNG " + path + ": " + img.message);
  }
  if (std::uint64_t{img.width} * img.height > kMaxPngPixels) {
    png_image_free(&img);
    throw FormatError("PNG " + path + " exceeds the " + std::to_string(kMaxPngPixels) +
                      "-pixel limit; convert it to RRGB");
  }
  img.format = PNG_FORMAT_RGB;
  RgbImage out(img.width, img.height);
  if (!png_image_finish_read(&img, nullptr, out.bytes().data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("PNG " + path + ": " + msg);
  }
  return out;
}

inline void write_png(const std::string& path, const RgbImage& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = image.width();
  img.height = image.height();
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.bytes().data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path + ": " + img.message);
  }
}

}  // namespace rsseg::tools
