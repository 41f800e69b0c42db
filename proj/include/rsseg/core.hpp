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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsseg {

/// Segment identifier. 0 is reserved for "unlabeled".
using Label = std::uint32_t;
inline constexpr Label kUnlabeled = 0;

/// Thrown when a serialized artifact (RSLM, RRGB, RLE, config) is malformed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a proposal backend fails to produce a result.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A wire worker sent something that violates the proposal protocol.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The byte stream to a wire worker broke.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

struct Point {
  std::uint32_t x = 0;
  std::uint32_t y = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Half-open rectangle [x, x + w) x [y, y + h).
struct Rect {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t w = 0;
  std::uint32_t h = 0;

  std::uint64_t area() const { return std::uint64_t{w} * h; }
  std::uint32_t right() const { return x + w; }
  std::uint32_t bottom() const { return y + h; }
  bool empty() const { return w == 0 || h == 0; }

  bool contains(const Rect& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }
  bool contains(std::uint32_t px, std::uint32_t py) const {
    return px >= x && py >= y && px < right() && py < bottom();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Inclusive pixel bounding box.
struct BBox {
  std::uint32_t x0 = 0;
  std::uint32_t y0 = 0;
  std::uint32_t x1 = 0;
  std::uint32_t y1 = 0;

  std::uint32_t width() const { return x1 - x0 + 1; }
  std::uint32_t height() const { return y1 - y0 + 1; }

  void extend(const BBox& o) {
    x0 = std::min(x0, o.x0);
    y0 = std::min(y0, o.y0);
    x1 = std::max(x1, o.x1);
    y1 = std::max(y1, o.y1);
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// 8-bit, 3-band raster stored row-major and interleaved.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::uint32_t width, std::uint32_t height)
      : width_(width), height_(height), data_(std::size_t{width} * height * 3, 0) {}
  RgbImage(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != std::size_t{width} * height * 3) {
      throw std::invalid_argument("RgbImage: buffer size does not match dimensions");
    }
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::size_t pixel_count() const { return std::size_t{width_} * height_; }

  std::uint8_t* pixel(std::uint32_t x, std::uint32_t y) {
    return data_.data() + (std::size_t{y} * width_ + x) * 3;
  }
  const std::uint8_t* pixel(std::uint32_t x, std::uint32_t y) const {
    return data_.data() + (std::size_t{y} * width_ + x) * 3;
  }
  const std::uint8_t* pixel(std::size_t index) const { return data_.data() + index * 3; }

  bool is_black(std::size_t index) const {
    const std::uint8_t* p = data_.data() + index * 3;
    return p[0] == 0 && p[1] == 0 && p[2] == 0;
  }

  std::span<std::uint8_t> bytes() { return data_; }
  std::span<const std::uint8_t> bytes() const { return data_; }

  /// Pixel-exact copy of `r`, which must lie inside the image.
  RgbImage crop(const Rect& r) const {
    if (!Rect{0, 0, width_, height_}.contains(r)) {
      throw std::out_of_range("RgbImage::crop: rectangle outside image");
    }
    RgbImage out(r.w, r.h);
    for (std::uint32_t row = 0; row < r.h; ++row) {
      const std::uint8_t* src = pixel(r.x, r.y + row);
      std::copy(src, src + std::size_t{r.w} * 3, out.pixel(0, row));
    }
    return out;
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace rsseg
