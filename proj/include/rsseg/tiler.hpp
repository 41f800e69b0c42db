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

// Tile planning and commit.
//
// The image is cut into non-overlapping T x T cores (smaller at the right and
// bottom edges). Each core is segmented inside a window that extends up to p
// pixels of real image on every side; only the core is written back.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rsseg/core.hpp"
#include "rsseg/labelmap.hpp"

namespace rsseg {

struct TileSpec {
  std::uint32_t index = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  Rect core;
  Rect window;
};

struct TilePlan {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t tile_size = 0;
  std::uint32_t padding = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<TileSpec> tiles;  // row-major
  /// Each tile owns the global label range (index * stride, (index + 1) * stride].
  std::uint64_t label_stride = 0;

  Label label_offset(std::uint32_t index) const {
    return static_cast<Label>(std::uint64_t{index} * label_stride);
  }
  /// One past the largest label any tile can commit.
  Label label_limit() const {
    return static_cast<Label>(std::uint64_t{tiles.size()} * label_stride + 1);
  }
  const TileSpec& at(std::uint32_t row, std::uint32_t col) const {
    return tiles.at(std::size_t{row} * cols + col);
  }
};

inline TilePlan plan_tiles(std::uint32_t width, std::uint32_t height, std::uint32_t tile_size,
                           std::uint32_t padding) {
  if (width == 0 || height == 0) throw std::invalid_argument("plan_tiles: empty image");
  if (tile_size == 0) throw std::invalid_argument("plan_tiles: tile_size must be >= 1");
  TilePlan plan;
  plan.width = width;
  plan.height = height;
  plan.tile_size = tile_size;
  plan.padding = padding;
  plan.cols = (width - 1) / tile_size + 1;
  plan.rows = (height - 1) / tile_size + 1;
  const std::uint64_t side = std::uint64_t{tile_size} + 2 * std::uint64_t{padding};
  plan.label_stride = side * side;
  const std::uint64_t n = std::uint64_t{plan.rows} * plan.cols;
  if (n * plan.label_stride >= std::numeric_limits<Label>::max()) {
    throw std::invalid_argument("plan_tiles: label ranges exceed 32 bits; use larger tiles");
  }
  plan.tiles.reserve(static_cast<std::size_t>(n));
  for (std::uint32_t r = 0; r < plan.rows; ++r) {
    for (std::uint32_t c = 0; c < plan.cols; ++c) {
      TileSpec t;
      t.index = r * plan.cols + c;
      t.row = r;
      t.col = c;
      t.core.x = c * tile_size;
      t.core.y = r * tile_size;
      t.core.w = std::min(tile_size, width - t.core.x);
      t.core.h = std::min(tile_size, height - t.core.y);
      const std::uint32_t x0 = t.core.x - std::min(padding, t.core.x);
      const std::uint32_t y0 = t.core.y - std::min(padding, t.core.y);
      const std::uint32_t x1 = t.core.right() + std::min(padding, width - t.core.right());
      const std::uint32_t y1 = t.core.bottom() + std::min(padding, height - t.core.bottom());
      t.window = {x0, y0, x1 - x0, y1 - y0};
      plan.tiles.push_back(t);
    }
  }
  return plan;
}

inline nlohmann::ordered_json to_json(const TilePlan& plan) {
  auto rect = [](const Rect& r) { return nlohmann::ordered_json::array({r.x, r.y, r.w, r.h}); };
  nlohmann::ordered_json j;
  j["width"] = plan.width;
  j["height"] = plan.height;
  j["tile_size"] = plan.tile_size;
  j["padding"] = plan.padding;
  j["rows"] = plan.rows;
  j["cols"] = plan.cols;
  j["label_stride"] = plan.label_stride;
  auto tiles = nlohmann::ordered_json::array();
  for (const TileSpec& t : plan.tiles) {
    tiles.push_back({{"index", t.index}, {"row", t.row}, {"col", t.col},
                     {"core", rect(t.core)}, {"window", rect(t.window)}});
  }
  j["tiles"] = std::move(tiles);
  return j;
}

inline RgbImage extract_window(const RgbImage& image, const TileSpec& spec) {
  return image.crop(spec.window);
}

/// Writes the core part of a tile's local map into the global map, shifting
/// nonzero labels by `label_offset`. Returns the number of distinct local
/// labels present in the core.
inline std::size_t commit_core(LabelMap& global, const LabelMap& local, const TileSpec& spec,
                               Label label_offset) {
  if (local.width() != spec.window.w || local.height() != spec.window.h) {
    throw std::invalid_argument("commit_core: local map does not match the tile window");
  }
  if (!Rect{0, 0, global.width(), global.height()}.contains(spec.window)) {
    throw std::out_of_range("commit_core: tile window outside the global map");
  }
  if (local.next_label() > 0 &&
      std::uint64_t{label_offset} + local.next_label() - 1 > std::numeric_limits<Label>::max()) {
    throw std::overflow_error("commit_core: label offset overflows");
  }
  std::unordered_set<Label> seen;
  const std::uint32_t dx = spec.core.x - spec.window.x;
  const std::uint32_t dy = spec.core.y - spec.window.y;
  auto out = global.labels();
  const auto in = local.labels();
  Label last = kUnlabeled;
  for (std::uint32_t r = 0; r < spec.core.h; ++r) {
    const Label* src = in.data() + std::size_t{dy + r} * local.width() + dx;
    Label* dst = out.data() + std::size_t{spec.core.y + r} * global.width() + spec.core.x;
    for (std::uint32_t c = 0; c < spec.core.w; ++c) {
      const Label l = src[c];
      if (l == kUnlabeled) {
        dst[c] = kUnlabeled;
        continue;
      }
      if (l != last) {
        seen.insert(l);
        last = l;
      }
      dst[c] = l + label_offset;
    }
  }
  return seen.size();
}

/// Commits tiles of one plan into a global map from any number of threads.
/// Cores are disjoint, so concurrent commits never touch the same pixel; a
/// second commit of the same tile is a programming error.
class TileCommitter {
 public:
  TileCommitter(LabelMap& global, const TilePlan& plan)
      : global_(global), plan_(plan), done_(std::make_unique<std::atomic<bool>[]>(plan.tiles.size())) {
    if (global.width() != plan.width || global.height() != plan.height) {
      throw std::invalid_argument("TileCommitter: map does not match the plan");
    }
    for (std::size_t i = 0; i < plan.tiles.size(); ++i) done_[i].store(false);
  }

  std::size_t commit(const TileSpec& spec, const LabelMap& local) {
    if (spec.index >= plan_.tiles.size()) throw std::out_of_range("TileCommitter: bad tile index");
    if (done_[spec.index].exchange(true)) {
      throw std::logic_error("TileCommitter: tile " + std::to_string(spec.index) + " committed twice");
    }
    if (std::uint64_t{local.next_label()} > plan_.label_stride + 1) {
      throw std::logic_error("TileCommitter: tile used more labels than its reserved range");
    }
    return commit_core(global_, local, spec, plan_.label_offset(spec.index));
  }

  /// Marks the global map's label counter past every reserved range.
  void finish() { global_.set_next_label(plan_.label_limit()); }

 private:
  LabelMap& global_;
  const TilePlan& plan_;
  std::unique_ptr<std::atomic<bool>[]> done_;
};

}  // namespace rsseg
