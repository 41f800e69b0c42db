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

// On-disk formats.
//
//   RSLM label map:  "RSLM" | u16 version = 1 | u32 width | u32 height |
//                    width*height u32 labels, row-major
//   RRGB raster:     "RRGB" | u16 version = 1 | u32 width | u32 height |
//                    width*height*3 bytes RGB8, row-major
//
// All integers are little-endian.

#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rsseg/core.hpp"
#include "rsseg/labelmap.hpp"

namespace rsseg {

inline constexpr std::uint16_t kRslmVersion = 1;
inline constexpr std::uint16_t kRrgbVersion = 1;
inline constexpr std::size_t kFormatHeaderSize = 14;

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline std::vector<std::uint8_t> make_header(const char* magic, std::uint16_t version,
                                             std::uint32_t w, std::uint32_t h) {
  std::vector<std::uint8_t> out(magic, magic + 4);
  put_u16(out, version);
  put_u32(out, w);
  put_u32(out, h);
  return out;
}

struct Header {
  std::uint32_t width;
  std::uint32_t height;
};

inline Header parse_header(std::span<const std::uint8_t> bytes, const char* magic,
                           std::uint16_t version) {
  const std::string kind(magic, 4);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0) {
    throw FormatError(kind + ": bad magic");
  }
  if (bytes.size() < kFormatHeaderSize) throw FormatError(kind + ": truncated header");
  const std::uint16_t v = get_u16(bytes.data() + 4);
  if (v != version) {
    throw FormatError(kind + ": unsupported version " + std::to_string(v));
  }
  return {get_u32(bytes.data() + 6), get_u32(bytes.data() + 10)};
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

inline std::vector<std::uint8_t> write_rslm(const LabelMap& map) {
  if (map.width() == 0 || map.height() == 0) {
    throw FormatError("RSLM: cannot write a map with an empty dimension");
  }
  auto out = detail::make_header("RSLM", kRslmVersion, map.width(), map.height());
  out.reserve(kFormatHeaderSize + map.size() * 4);
  for (Label l : map.labels()) detail::put_u32(out, l);
  return out;
}

inline LabelMap read_rslm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_header(bytes, "RSLM", kRslmVersion);
  if (h.width == 0 || h.height == 0) throw FormatError("RSLM: empty dimension");
  const std::uint64_t expected = kFormatHeaderSize + std::uint64_t{h.width} * h.height * 4;
  if (bytes.size() < expected) {
    throw FormatError("RSLM: truncated payload (" + std::to_string(bytes.size()) + " of " +
                      std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) throw FormatError("RSLM: trailing bytes after payload");
  std::vector<Label> labels(std::size_t{h.width} * h.height);
  const std::uint8_t* p = bytes.data() + kFormatHeaderSize;
  for (std::size_t i = 0; i < labels.size(); ++i, p += 4) labels[i] = detail::get_u32(p);
  return LabelMap(h.width, h.height, std::move(labels));
}

inline void save_rslm(const std::string& path, const LabelMap& map) {
  detail::write_file(path, write_rslm(map));
}

inline LabelMap load_rslm(const std::string& path) {
  return read_rslm(detail::read_file(path));
}

inline std::vector<std::uint8_t> write_rrgb(const RgbImage& image) {
  if (image.width() == 0 || image.height() == 0) {
    throw FormatError("RRGB: cannot write an image with an empty dimension");
  }
  auto out = detail::make_header("RRGB", kRrgbVersion, image.width(), image.height());
  out.insert(out.end(), image.bytes().begin(), image.bytes().end());
  return out;
}

inline RgbImage read_rrgb(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_header(bytes, "RRGB", kRrgbVersion);
  if (h.width == 0 || h.height == 0) throw FormatError("RRGB: empty dimension");
  const std::uint64_t expected = kFormatHeaderSize + std::uint64_t{h.width} * h.height * 3;
  if (bytes.size() < expected) throw FormatError("RRGB: truncated payload");
  if (bytes.size() > expected) throw FormatError("RRGB: trailing bytes after payload");
  return RgbImage(h.width, h.height,
                  std::vector<std::uint8_t>(bytes.begin() + kFormatHeaderSize, bytes.end()));
}

inline void save_rrgb(const std::string& path, const RgbImage& image) {
  detail::write_file(path, write_rrgb(image));
}

inline RgbImage load_rrgb(const std::string& path) {
  return read_rrgb(detail::read_file(path));
}

/// Sequential RRGB writer for rasters too large to hold in memory; rows are
/// appended top to bottom.
class RrgbWriter {
 public:
  RrgbWriter(const std::string& path, std::uint32_t width, std::uint32_t height)
      : out_(path, std::ios::binary | std::ios::trunc), width_(width), height_(height) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    if (width == 0 || height == 0) throw FormatError("RRGB: empty dimension");
    const auto header = detail::make_header("RRGB", kRrgbVersion, width, height);
    out_.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  }

  /// Appends a block of whole rows (width * rows * 3 bytes).
  void append_rows(const RgbImage& rows) {
    if (rows.width() != width_) throw std::invalid_argument("RrgbWriter: row width mismatch");
    if (rows_written_ + rows.height() > height_) throw std::logic_error("RrgbWriter: too many rows");
    out_.write(reinterpret_cast<const char*>(rows.bytes().data()),
               static_cast<std::streamsize>(rows.bytes().size()));
    rows_written_ += rows.height();
  }

  void close() {
    if (rows_written_ != height_) throw std::logic_error("RrgbWriter: incomplete raster");
    out_.close();
    if (!out_) throw std::runtime_error("RRGB write failed");
  }

 private:
  std::ofstream out_;
  std::uint32_t width_;
  std::uint32_t height_;
  std::uint32_t rows_written_ = 0;
};

/// Random-access reader over an RRGB file; windows are read with positional
/// reads, so concurrent read_window calls are safe and the raster is never
/// loaded whole.
class RrgbFile {
 public:
  explicit RrgbFile(const std::string& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0) throw std::runtime_error("cannot open " + path + ": " + std::strerror(errno));
    try {
      std::array<std::uint8_t, kFormatHeaderSize> header{};
      read_at(header.data(), header.size(), 0);
      const auto h = detail::parse_header(header, "RRGB", kRrgbVersion);
      if (h.width == 0 || h.height == 0) throw FormatError("RRGB: empty dimension");
      width_ = h.width;
      height_ = h.height;
      const off_t size = ::lseek(fd_, 0, SEEK_END);
      const std::uint64_t expected = kFormatHeaderSize + std::uint64_t{width_} * height_ * 3;
      if (size < 0 || static_cast<std::uint64_t>(size) < expected) {
        throw FormatError("RRGB: truncated payload in " + path);
      }
    } catch (...) {
      ::close(fd_);
      throw;
    }
  }
  RrgbFile(const RrgbFile&) = delete;
  RrgbFile& operator=(const RrgbFile&) = delete;
  ~RrgbFile() {
    if (fd_ >= 0) ::close(fd_);
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }

  RgbImage read_window(const Rect& r) const {
    if (!Rect{0, 0, width_, height_}.contains(r)) {
      throw std::out_of_range("RrgbFile::read_window: rectangle outside raster");
    }
    RgbImage out(r.w, r.h);
    for (std::uint32_t row = 0; row < r.h; ++row) {
      const std::uint64_t offset =
          kFormatHeaderSize + (std::uint64_t{r.y + row} * width_ + r.x) * 3;
      read_at(out.pixel(0, row), std::size_t{r.w} * 3, offset);
    }
    return out;
  }

 private:
  void read_at(std::uint8_t* dst, std::size_t n, std::uint64_t offset) const {
    while (n > 0) {
      const ssize_t got = ::pread(fd_, dst, n, static_cast<off_t>(offset));
      if (got < 0 && errno == EINTR) continue;
      if (got <= 0) throw FormatError("RRGB: truncated payload in " + path_);
      dst += got;
      n -= static_cast<std::size_t>(got);
      offset += static_cast<std::uint64_t>(got);
    }
  }

  std::string path_;
  int fd_ = -1;
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
};

}  // namespace rsseg
