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
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rsseg/core.hpp"
#include "rsseg/rle.hpp"
#include "rsseg/union_find.hpp"

namespace rsseg {

// Dense raster of segment ids. Ids are never reused: next_label() is the
// smallest id that has not been handed out yet, and every stored id is below
// it. Writers going through labels() directly are responsible for keeping
// that true (or calling refresh_next_label()).
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::uint32_t width, std::uint32_t height)
      : width_(width), height_(height), labels_(std::size_t{width} * height, kUnlabeled) {}
  LabelMap(std::uint32_t width, std::uint32_t height, std::vector<Label> labels)
      : width_(width), height_(height), labels_(std::move(labels)) {
    if (labels_.size() != std::size_t{width} * height) {
      throw std::invalid_argument("LabelMap: buffer size does not match dimensions");
    }
    refresh_next_label();
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  Label at(std::uint32_t x, std::uint32_t y) const {
    return labels_[std::size_t{y} * width_ + x];
  }
  Label operator[](std::size_t index) const { return labels_[index]; }

  /// Writes one pixel, bumping next_label() if needed.
  void set(std::uint32_t x, std::uint32_t y, Label value) {
    labels_[std::size_t{y} * width_ + x] = value;
    if (value >= next_label_) next_label_ = value + 1;
  }

  std::span<Label> labels() { return labels_; }
  std::span<const Label> labels() const { return labels_; }

  Label next_label() const { return next_label_; }
  void set_next_label(Label next) {
    if (next == 0) throw std::invalid_argument("LabelMap: next_label must be >= 1");
    next_label_ = next;
  }
  Label allocate_label() { return next_label_++; }

  void refresh_next_label() {
    Label max = 0;
    for (Label l : labels_) max = std::max(max, l);
    next_label_ = max + 1;
  }

  LabelMap crop(const Rect& r) const {
    if (!Rect{0, 0, width_, height_}.contains(r)) {
      throw std::out_of_range("LabelMap::crop: rectangle outside map");
    }
    LabelMap out(r.w, r.h);
    for (std::uint32_t row = 0; row < r.h; ++row) {
      const Label* src = labels_.data() + std::size_t{r.y + row} * width_ + r.x;
      std::copy(src, src + r.w, out.labels_.data() + std::size_t{row} * r.w);
    }
    out.next_label_ = next_label_;
    return out;
  }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.labels_ == b.labels_;
  }

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<Label> labels_;
  Label next_label_ = 1;
};

/// A single connected foreground region of a tile-sized mask.
struct Component {
  BinaryMask mask;
  std::uint64_t area = 0;
  BBox bbox;
};

enum class Connectivity { four, eight };

// ---------------------------------------------------------------------------
// Row-run connected-component machinery. Everything that needs components
// (mask splitting, min-area cleanup, enclosed absorption) works on horizontal
// runs instead of pixels, so memory is proportional to the number of runs.

/// Maximal horizontal run of one value within a single row; x1 is inclusive.
struct RowRun {
  std::uint32_t y = 0;
  std::uint32_t x0 = 0;
  std::uint32_t x1 = 0;
  Label value = 0;
};

struct RunTable {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<RowRun> runs;
  std::vector<std::size_t> row_begin;  // height + 1 entries
  std::vector<std::uint32_t> group;    // per run, after group_runs()
  std::uint32_t group_count = 0;
};

namespace detail {

inline void close_rows(RunTable& t, std::uint32_t up_to_row) {
  while (t.row_begin.size() <= up_to_row) t.row_begin.push_back(t.runs.size());
}

}  // namespace detail

/// Runs of equal nonzero labels.
inline RunTable label_runs(const LabelMap& map) {
  RunTable t;
  t.width = map.width();
  t.height = map.height();
  t.row_begin.reserve(std::size_t{map.height()} + 1);
  const auto labels = map.labels();
  for (std::uint32_t y = 0; y < map.height(); ++y) {
    t.row_begin.push_back(t.runs.size());
    const Label* row = labels.data() + std::size_t{y} * map.width();
    std::uint32_t x = 0;
    while (x < map.width()) {
      const Label v = row[x];
      std::uint32_t end = x + 1;
      while (end < map.width() && row[end] == v) ++end;
      if (v != kUnlabeled) t.runs.push_back({y, x, end - 1, v});
      x = end;
    }
  }
  t.row_begin.push_back(t.runs.size());
  return t;
}

/// Foreground runs of a mask (value 1), split at row boundaries.
inline RunTable mask_runs(const BinaryMask& mask) {
  RunTable t;
  t.width = mask.width();
  t.height = mask.height();
  const std::uint64_t w = mask.width();
  mask.for_each_run([&](std::uint64_t start, std::uint64_t len) {
    std::uint64_t pos = start;
    const std::uint64_t end = start + len;
    while (pos < end) {
      const auto y = static_cast<std::uint32_t>(pos / w);
      const auto x = static_cast<std::uint32_t>(pos % w);
      const std::uint64_t row_end = std::min<std::uint64_t>(end, (std::uint64_t{y} + 1) * w);
      detail::close_rows(t, y);
      t.runs.push_back({y, x, static_cast<std::uint32_t>(row_end - 1 - std::uint64_t{y} * w), 1});
      pos = row_end;
    }
  });
  detail::close_rows(t, mask.height());
  return t;
}

/// Assigns a group id to every run so that runs of the same value that touch
/// under `conn` share a group. Group ids follow the row-major order of each
/// group's first pixel.
inline void group_runs(RunTable& t, Connectivity conn) {
  const std::size_t n = t.runs.size();
  UnionFind<std::uint32_t> uf(n);
  const std::uint32_t slack = conn == Connectivity::eight ? 1 : 0;
  for (std::uint32_t y = 1; y < t.height; ++y) {
    std::size_t j = t.row_begin[y - 1];
    const std::size_t prev_end = t.row_begin[y];
    for (std::size_t i = t.row_begin[y]; i < t.row_begin[y + 1]; ++i) {
      const RowRun& a = t.runs[i];
      while (j < prev_end && std::uint64_t{t.runs[j].x1} + slack < a.x0) ++j;
      for (std::size_t k = j; k < prev_end && t.runs[k].x0 <= std::uint64_t{a.x1} + slack; ++k) {
        if (t.runs[k].value == a.value) {
          uf.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k));
        }
      }
    }
  }
  t.group.assign(n, 0);
  std::vector<std::uint32_t> root_group(n, std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = uf.find(static_cast<std::uint32_t>(i));
    if (root_group[r] == std::numeric_limits<std::uint32_t>::max()) root_group[r] = next++;
    t.group[i] = root_group[r];
  }
  t.group_count = next;
}

// ---------------------------------------------------------------------------

/// Fraction of pixels carrying a nonzero label.
inline double coverage(const LabelMap& map) {
  if (map.size() == 0) return 0.0;
  const auto labels = map.labels();
  const auto labeled = static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](Label l) { return l != kUnlabeled; }));
  return static_cast<double>(labeled) / static_cast<double>(map.size());
}

/// Maximal 8-connected foreground regions, ordered by first foreground pixel
/// in row-major scan.
inline std::vector<Component> connected_components(const BinaryMask& mask) {
  if (mask.width() == 0 || mask.height() == 0) {
    throw std::invalid_argument("connected_components: mask has zero dimension");
  }
  RunTable t = mask_runs(mask);
  group_runs(t, Connectivity::eight);

  std::vector<RleBuilder> builders;
  std::vector<Component> out(t.group_count);
  builders.reserve(t.group_count);
  for (std::uint32_t g = 0; g < t.group_count; ++g) builders.emplace_back(mask.width(), mask.height());
  std::vector<bool> seen(t.group_count, false);
  for (std::size_t i = 0; i < t.runs.size(); ++i) {
    const RowRun& r = t.runs[i];
    const std::uint32_t g = t.group[i];
    const std::uint32_t len = r.x1 - r.x0 + 1;
    builders[g].add(std::uint64_t{r.y} * mask.width() + r.x0, len);
    Component& c = out[g];
    c.area += len;
    const BBox b{r.x0, r.y, r.x1, r.y};
    if (!seen[g]) {
      c.bbox = b;
      seen[g] = true;
    } else {
      c.bbox.extend(b);
    }
  }
  for (std::uint32_t g = 0; g < t.group_count; ++g) out[g].mask = std::move(builders[g]).finish();
  return out;
}

inline void paint_black_inplace(RgbImage& image, const LabelMap& map) {
  if (image.width() != map.width() || image.height() != map.height()) {
    throw std::invalid_argument("paint_black: image and label map dimensions differ");
  }
  auto bytes = image.bytes();
  const auto labels = map.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kUnlabeled) {
      bytes[i * 3] = 0;
      bytes[i * 3 + 1] = 0;
      bytes[i * 3 + 2] = 0;
    }
  }
}

/// Copy of `image` with every labeled pixel set to (0, 0, 0).
inline RgbImage paint_black(const RgbImage& image, const LabelMap& map) {
  RgbImage out = image;
  paint_black_inplace(out, map);
  return out;
}

/// Gives the currently unlabeled pixels of `comp` a fresh label. Labeled
/// pixels are never overwritten. The label is consumed only if at least one
/// pixel was assigned. Returns the number of newly labeled pixels.
inline std::uint64_t assign_component(LabelMap& map, const Component& comp) {
  if (comp.mask.width() != map.width() || comp.mask.height() != map.height()) {
    throw std::out_of_range("assign_component: component does not match map bounds");
  }
  const Label label = map.next_label();
  auto labels = map.labels();
  std::uint64_t assigned = 0;
  comp.mask.for_each_run([&](std::uint64_t start, std::uint64_t len) {
    for (std::uint64_t i = start; i < start + len; ++i) {
      if (labels[i] == kUnlabeled) {
        labels[i] = label;
        ++assigned;
      }
    }
  });
  if (assigned > 0) map.allocate_label();
  return assigned;
}

/// Zeroes every 8-connected single-label component smaller than `min_area`.
/// Returns the number of components removed.
inline std::size_t remove_small(LabelMap& map, std::uint64_t min_area) {
  if (min_area == 0) return 0;
  RunTable t = label_runs(map);
  group_runs(t, Connectivity::eight);
  std::vector<std::uint64_t> area(t.group_count, 0);
  for (std::size_t i = 0; i < t.runs.size(); ++i) {
    area[t.group[i]] += t.runs[i].x1 - t.runs[i].x0 + 1;
  }
  auto labels = map.labels();
  for (std::size_t i = 0; i < t.runs.size(); ++i) {
    if (area[t.group[i]] >= min_area) continue;
    const RowRun& r = t.runs[i];
    Label* row = labels.data() + std::size_t{r.y} * map.width();
    std::fill(row + r.x0, row + r.x1 + 1, kUnlabeled);
  }
  return static_cast<std::size_t>(
      std::count_if(area.begin(), area.end(), [&](std::uint64_t a) { return a < min_area; }));
}

/// Relabels segments to 1..n in order of first appearance (row-major) and
/// returns n.
inline Label relabel_sequential(LabelMap& map) {
  std::unordered_map<Label, Label> mapping;
  Label next = 1;
  Label last_from = kUnlabeled;
  Label last_to = kUnlabeled;
  for (Label& l : map.labels()) {
    if (l == kUnlabeled) continue;
    if (l != last_from) {
      auto [it, inserted] = mapping.try_emplace(l, next);
      if (inserted) ++next;
      last_from = l;
      last_to = it->second;
    }
    l = last_to;
  }
  map.set_next_label(next);
  return next - 1;
}

/// Sorted distinct nonzero labels.
inline std::vector<Label> distinct_labels(const LabelMap& map) {
  std::unordered_set<Label> seen;
  Label last = kUnlabeled;
  for (Label l : map.labels()) {
    if (l != kUnlabeled && l != last) {
      seen.insert(l);
      last = l;
    }
  }
  std::vector<Label> out(seen.begin(), seen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rsseg
