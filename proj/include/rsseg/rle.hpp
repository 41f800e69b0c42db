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

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rsseg/core.hpp"

namespace rsseg {

// Run-length encoded binary mask.
//
// Runs alternate background / foreground in row-major order and always start
// with a background run, which may be empty. Every later run is non-empty and
// the runs sum to width * height. This is the interchange encoding used by the
// wire protocol, so the convention is fixed.
class BinaryMask {
 public:
  BinaryMask() = default;

  /// All-background mask.
  BinaryMask(std::uint32_t width, std::uint32_t height) : width_(width), height_(height) {
    const std::uint64_t n = std::uint64_t{width} * height;
    if (n > 0) runs_.push_back(static_cast<std::uint32_t>(n));
  }

  /// Validating constructor; throws FormatError on a malformed run list.
  static BinaryMask from_runs(std::uint32_t width, std::uint32_t height,
                              std::vector<std::uint32_t> runs) {
    const std::uint64_t n = std::uint64_t{width} * height;
    if (n == 0) throw FormatError("RLE: mask has zero area");
    if (runs.empty()) throw FormatError("RLE: empty run list");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i > 0 && runs[i] == 0) {
        throw FormatError("RLE: zero-length run at position " + std::to_string(i));
      }
      sum += runs[i];
    }
    if (sum != n) {
      throw FormatError("RLE: runs sum to " + std::to_string(sum) + ", expected " +
                        std::to_string(n));
    }
    BinaryMask m;
    m.width_ = width;
    m.height_ = height;
    m.runs_ = std::move(runs);
    return m;
  }

  static BinaryMask from_dense(std::uint32_t width, std::uint32_t height,
                               std::span<const std::uint8_t> dense) {
    if (dense.size() != std::size_t{width} * height) {
      throw std::invalid_argument("BinaryMask::from_dense: size mismatch");
    }
    BinaryMask m;
    m.width_ = width;
    m.height_ = height;
    std::uint8_t current = 0;
    std::uint32_t count = 0;
    for (std::uint8_t v : dense) {
      const std::uint8_t b = v ? 1 : 0;
      if (b != current) {
        m.runs_.push_back(count);
        count = 0;
        current = b;
      }
      ++count;
    }
    m.runs_.push_back(count);
    return m;
  }

  std::vector<std::uint8_t> to_dense() const {
    std::vector<std::uint8_t> out(pixel_count(), 0);
    for_each_run([&](std::uint64_t start, std::uint64_t len) {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(start), len, std::uint8_t{1});
    });
    return out;
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint64_t pixel_count() const { return std::uint64_t{width_} * height_; }
  const std::vector<std::uint32_t>& runs() const { return runs_; }

  /// Calls f(start, length) for every foreground run, in row-major order.
  /// Runs may span several image rows.
  template <typename F>
  void for_each_run(F&& f) const {
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      if (i % 2 == 1) f(pos, std::uint64_t{runs_[i]});
      pos += runs_[i];
    }
  }

  std::uint64_t area() const {
    std::uint64_t a = 0;
    for (std::size_t i = 1; i < runs_.size(); i += 2) a += runs_[i];
    return a;
  }

  bool empty() const { return runs_.size() < 2; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint32_t> runs_;
};

/// Builds an RLE mask from foreground intervals appended in increasing order.
/// Adjacent intervals are coalesced.
class RleBuilder {
 public:
  RleBuilder(std::uint32_t width, std::uint32_t height) : width_(width), height_(height) {}

  void add(std::uint64_t start, std::uint64_t length) {
    if (length == 0) return;
    if (start < pos_) throw std::logic_error("RleBuilder: intervals out of order");
    if (!runs_.empty() && start == pos_ && runs_.size() % 2 == 0) {
      runs_.back() += static_cast<std::uint32_t>(length);
    } else {
      runs_.push_back(static_cast<std::uint32_t>(start - pos_));
      runs_.push_back(static_cast<std::uint32_t>(length));
    }
    pos_ = start + length;
  }

  BinaryMask finish() && {
    const std::uint64_t total = std::uint64_t{width_} * height_;
    if (pos_ > total) throw std::logic_error("RleBuilder: interval past end of mask");
    if (pos_ < total || runs_.empty()) runs_.push_back(static_cast<std::uint32_t>(total - pos_));
    return BinaryMask::from_runs(width_, height_, std::move(runs_));
  }

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::uint64_t pos_ = 0;
  std::vector<std::uint32_t> runs_;
};

}  // namespace rsseg
