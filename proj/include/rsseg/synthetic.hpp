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

// Deterministic synthetic scenes and the proposal generator that models a
// threshold-filtered automatic mask generator on them.
//
// A scene is described procedurally: a jittered grid of seeds partitions the
// plane into Voronoi "stuff" regions, and discrete objects (rectangles, discs
// and Voronoi-cell polygons) are placed strictly inside stuff regions. Any
// window can be rendered on demand without materializing the whole raster,
// which is what lets very large scenes stream through the tiled pipeline.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsseg/backend.hpp"
#include "rsseg/core.hpp"
#include "rsseg/labelmap.hpp"
#include "rsseg/morphology.hpp"
#include "rsseg/rle.hpp"

namespace rsseg {

using ClassId = std::uint32_t;

struct Quality {
  double iou = 1.0;
  double stab = 1.0;
};

struct QualityRange {
  double lo = 0.0;
  double hi = 1.0;
};

enum class ShapeKind : std::uint8_t { rectangle, disc, polygon };

/// Class ids used by synthetic scenes.
inline constexpr ClassId kClassRectangle = 1;
inline constexpr ClassId kClassDisc = 2;
inline constexpr ClassId kClassPolygon = 3;
inline constexpr ClassId kClassStuff = 4;

inline const char* class_name(ClassId c) {
  switch (c) {
    case kClassRectangle: return "rectangle";
    case kClassDisc: return "disc";
    case kClassPolygon: return "polygon";
    case kClassStuff: return "stuff";
    default: return "unknown";
  }
}

/// Geometry knobs. Lengths are in pixels.
struct SceneStyle {
  double stuff_spacing = 384.0;
  double stuff_jitter = 0.5;  // seed offset range as a fraction of the spacing
  double disc_radius_min = 48.0;
  double disc_radius_max = 80.0;
  double rect_side_min = 84.0;
  double rect_side_max = 160.0;
  double polygon_radius_min = 56.0;
  double polygon_radius_max = 92.0;
  double min_object_area = 6700.0;
  double margin = 3.0;  // clearance to other objects and to region borders
  int stuff_noise = 12;
  int object_noise = 4;

  /// Same layout statistics at a different linear scale.
  SceneStyle scaled(double f) const {
    SceneStyle s = *this;
    s.stuff_spacing *= f;
    s.disc_radius_min *= f;
    s.disc_radius_max *= f;
    s.rect_side_min *= f;
    s.rect_side_max *= f;
    s.polygon_radius_min *= f;
    s.polygon_radius_max *= f;
    s.min_object_area *= f * f;
    return s;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * unit(rng);
}

}  // namespace detail

struct SceneObject {
  Label id = 0;
  ShapeKind kind = ShapeKind::disc;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;        // disc radius; bounding radius for the others
  std::uint32_t rect_x0 = 0;  // rectangle: [x0, x1) x [y0, y1)
  std::uint32_t rect_y0 = 0;
  std::uint32_t rect_x1 = 0;
  std::uint32_t rect_y1 = 0;
  std::vector<std::array<double, 2>> ring;  // polygon: neighbor seeds relative to the center
  BBox bbox;

  bool contains(std::uint32_t x, std::uint32_t y) const {
    if (x < bbox.x0 || x > bbox.x1 || y < bbox.y0 || y > bbox.y1) return false;
    switch (kind) {
      case ShapeKind::rectangle:
        return x >= rect_x0 && x < rect_x1 && y >= rect_y0 && y < rect_y1;
      case ShapeKind::disc: {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        return dx * dx + dy * dy <= radius * radius;
      }
      case ShapeKind::polygon: {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        const double d0 = dx * dx + dy * dy;
        for (const auto& s : ring) {
          const double ex = dx - s[0];
          const double ey = dy - s[1];
          if (ex * ex + ey * ey <= d0) return false;
        }
        return true;
      }
    }
    return false;
  }
};

/// Procedural scene: labels, colors, qualities and classes for any pixel.
class SceneModel {
 public:
  SceneModel(std::uint64_t seed, std::uint32_t width, std::uint32_t height,
             std::uint32_t n_objects, QualityRange quality, const SceneStyle& style = {})
      : seed_(seed), width_(width), height_(height), style_(style) {
    if (width == 0 || height == 0) throw std::invalid_argument("synth_scene: empty dimensions");
    if (n_objects < 1) throw std::invalid_argument("synth_scene: n_objects must be >= 1");
    if (!(quality.lo >= 0.0 && quality.lo <= quality.hi && quality.hi <= 1.0)) {
      throw std::invalid_argument("synth_scene: quality range must satisfy 0 <= lo <= hi <= 1");
    }
    std::mt19937_64 rng(seed);
    place_stuff(rng);
    place_objects(rng, n_objects);
    assign_attributes(rng, quality);
    build_buckets();
  }

  std::uint64_t seed() const { return seed_; }
  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  const SceneStyle& style() const { return style_; }
  std::uint32_t stuff_count() const { return static_cast<std::uint32_t>(seeds_.size()); }
  const std::vector<SceneObject>& objects() const { return objects_; }

  /// Number of gt labels; labels are 1..label_count().
  Label label_count() const { return static_cast<Label>(quality_.size() - 1); }
  const Quality& quality(Label l) const { return quality_.at(l); }
  ClassId class_of(Label l) const { return class_.at(l); }

  Label label_at(std::uint32_t x, std::uint32_t y) const {
    const std::size_t b = bucket_index(x, y);
    for (std::uint32_t k = bucket_begin_[b]; k < bucket_begin_[b + 1]; ++k) {
      const SceneObject& o = objects_[bucket_items_[k]];
      if (o.contains(x, y)) return o.id;
    }
    return nearest_seed(x + 0.5, y + 0.5) + 1;
  }

  /// Renders the window into a raster and/or a gt label map of the window's
  /// size (either pointer may be null).
  void render(const Rect& window, RgbImage* image, LabelMap* gt) const {
    if (!Rect{0, 0, width_, height_}.contains(window)) {
      throw std::out_of_range("SceneModel::render: window outside scene");
    }
    if (image) *image = RgbImage(window.w, window.h);
    if (gt) *gt = LabelMap(window.w, window.h);
    for (std::uint32_t row = 0; row < window.h; ++row) {
      const std::uint32_t y = window.y + row;
      for (std::uint32_t col = 0; col < window.w; ++col) {
        const std::uint32_t x = window.x + col;
        const Label l = label_at(x, y);
        if (gt) gt->labels()[std::size_t{row} * window.w + col] = l;
        if (image) {
          std::uint8_t* px = image->pixel(col, row);
          const std::uint64_t noise_hash =
              detail::splitmix64(seed_ ^ (std::uint64_t{y} << 32 | x) * 0x2545f4914f6cdd1dULL);
          const int amp = l <= stuff_count() ? style_.stuff_noise : style_.object_noise;
          for (int c = 0; c < 3; ++c) {
            const int n = amp == 0 ? 0
                                   : static_cast<int>((noise_hash >> (c * 16)) % (2 * amp + 1)) - amp;
            px[c] = static_cast<std::uint8_t>(std::clamp(base_color_[l][c] + n, 1, 255));
          }
        }
      }
    }
    if (gt) gt->set_next_label(label_count() + 1);
  }

 private:
  void place_stuff(std::mt19937_64& rng) {
    nx_ = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(width_ / style_.stuff_spacing)));
    ny_ = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(height_ / style_.stuff_spacing)));
    sx_ = static_cast<double>(width_) / nx_;
    sy_ = static_cast<double>(height_) / ny_;
    seeds_.reserve(std::size_t{nx_} * ny_);
    for (std::uint32_t j = 0; j < ny_; ++j) {
      for (std::uint32_t i = 0; i < nx_; ++i) {
        const double ox = (detail::unit(rng) - 0.5) * style_.stuff_jitter * sx_;
        const double oy = (detail::unit(rng) - 0.5) * style_.stuff_jitter * sy_;
        seeds_.push_back({(i + 0.5) * sx_ + ox, (j + 0.5) * sy_ + oy});
      }
    }
  }

  std::uint32_t nearest_seed(double px, double py) const {
    const int ci = std::clamp(static_cast<int>(px / sx_), 0, static_cast<int>(nx_) - 1);
    const int cj = std::clamp(static_cast<int>(py / sy_), 0, static_cast<int>(ny_) - 1);
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = std::max(0, cj - 2); j <= std::min(static_cast<int>(ny_) - 1, cj + 2); ++j) {
      for (int i = std::max(0, ci - 2); i <= std::min(static_cast<int>(nx_) - 1, ci + 2); ++i) {
        const auto idx = static_cast<std::uint32_t>(j) * nx_ + static_cast<std::uint32_t>(i);
        const double dx = px - seeds_[idx][0];
        const double dy = py - seeds_[idx][1];
        const double d = dx * dx + dy * dy;
        if (d < best_d || (d == best_d && idx < best)) {
          best_d = d;
          best = idx;
        }
      }
    }
    return best;
  }

  // Clearance from (px, py) to the border of the Voronoi region containing it.
  double region_clearance(double px, double py) const {
    const std::uint32_t host = nearest_seed(px, py);
    const double hx = seeds_[host][0];
    const double hy = seeds_[host][1];
    const int ci = static_cast<int>(host % nx_);
    const int cj = static_cast<int>(host / nx_);
    double clearance = std::numeric_limits<double>::infinity();
    for (int j = std::max(0, cj - 3); j <= std::min(static_cast<int>(ny_) - 1, cj + 3); ++j) {
      for (int i = std::max(0, ci - 3); i <= std::min(static_cast<int>(nx_) - 1, ci + 3); ++i) {
        const auto idx = static_cast<std::uint32_t>(j) * nx_ + static_cast<std::uint32_t>(i);
        if (idx == host) continue;
        const double sx = seeds_[idx][0];
        const double sy = seeds_[idx][1];
        const double dist_hs = std::hypot(sx - hx, sy - hy);
        const double ds = (px - sx) * (px - sx) + (py - sy) * (py - sy);
        const double dh = (px - hx) * (px - hx) + (py - hy) * (py - hy);
        clearance = std::min(clearance, (ds - dh) / (2.0 * dist_hs));
      }
    }
    return clearance;
  }

  struct Shape {
    ShapeKind kind;
    double radius;  // bounding radius
    double size_a;  // disc radius / rect width / polygon nominal radius
    double size_b;  // rect height
    std::vector<std::array<double, 2>> ring;
    double area;
  };

  Shape sample_shape(std::mt19937_64& rng) const {
    Shape s{};
    const auto kind_draw = static_cast<int>(detail::unit(rng) * 3.0);
    s.kind = static_cast<ShapeKind>(std::min(kind_draw, 2));
    switch (s.kind) {
      case ShapeKind::disc:
        s.size_a = detail::uniform(rng, style_.disc_radius_min, style_.disc_radius_max);
        s.radius = s.size_a;
        s.area = std::numbers::pi * s.size_a * s.size_a;
        break;
      case ShapeKind::rectangle:
        s.size_a = std::round(detail::uniform(rng, style_.rect_side_min, style_.rect_side_max));
        s.size_b = std::round(detail::uniform(rng, style_.rect_side_min, style_.rect_side_max));
        s.radius = 0.5 * std::hypot(s.size_a, s.size_b) + 1.0;
        s.area = s.size_a * s.size_b;
        break;
      case ShapeKind::polygon: {
        // The polygon is the Voronoi cell of the center among a ring of six
        // jittered neighbor seeds at roughly twice the nominal radius.
        s.size_a = detail::uniform(rng, style_.polygon_radius_min, style_.polygon_radius_max);
        const double phase = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
        for (int k = 0; k < 6; ++k) {
          const double angle = phase + k * std::numbers::pi / 3.0 +
                               detail::uniform(rng, -0.2, 0.2);
          const double dist = 2.0 * s.size_a * detail::uniform(rng, 0.85, 1.15);
          s.ring.push_back({dist * std::cos(angle), dist * std::sin(angle)});
        }
        // Extent and area from the radial boundary function.
        double max_r = 0.0;
        double area = 0.0;
        constexpr int kSteps = 1440;
        const double dtheta = 2.0 * std::numbers::pi / kSteps;
        for (int t = 0; t < kSteps; ++t) {
          const double ux = std::cos(t * dtheta);
          const double uy = std::sin(t * dtheta);
          double r = std::numeric_limits<double>::infinity();
          for (const auto& n : s.ring) {
            const double dot = n[0] * ux + n[1] * uy;
            if (dot > 0.0) r = std::min(r, 0.5 * (n[0] * n[0] + n[1] * n[1]) / dot);
          }
          max_r = std::max(max_r, r);
          area += 0.5 * r * r * dtheta;
        }
        s.radius = max_r + 1.0;
        s.area = area;
        break;
      }
    }
    return s;
  }

  void place_objects(std::mt19937_64& rng, std::uint32_t n_objects) {
    const Label first_id = stuff_count() + 1;
    const std::uint64_t max_attempts = std::uint64_t{n_objects} * 2000;
    std::uint64_t attempts = 0;
    while (objects_.size() < n_objects) {
      if (++attempts > max_attempts) {
        throw std::runtime_error("synth_scene: could not place " + std::to_string(n_objects) +
                                 " objects (placed " + std::to_string(objects_.size()) + ")");
      }
      Shape shape = sample_shape(rng);
      if (shape.area < style_.min_object_area) continue;
      const double r = shape.radius;
      const double lo_x = r + style_.margin;
      const double lo_y = r + style_.margin;
      const double hi_x = width_ - r - style_.margin;
      const double hi_y = height_ - r - style_.margin;
      if (hi_x <= lo_x || hi_y <= lo_y) continue;
      double cx = detail::uniform(rng, lo_x, hi_x);
      double cy = detail::uniform(rng, lo_y, hi_y);
      if (shape.kind == ShapeKind::rectangle) {
        cx = std::floor(cx - 0.5 * shape.size_a) + 0.5 * shape.size_a;
        cy = std::floor(cy - 0.5 * shape.size_b) + 0.5 * shape.size_b;
      }
      if (region_clearance(cx, cy) < r + style_.margin) continue;
      bool clear = true;
      for (const SceneObject& o : objects_) {
        if (std::hypot(o.cx - cx, o.cy - cy) < o.radius + r + style_.margin) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;

      SceneObject o;
      o.id = first_id + static_cast<Label>(objects_.size());
      o.kind = shape.kind;
      o.cx = cx;
      o.cy = cy;
      o.radius = shape.kind == ShapeKind::disc ? shape.size_a : shape.radius;
      o.ring = std::move(shape.ring);
      if (shape.kind == ShapeKind::rectangle) {
        o.rect_x0 = static_cast<std::uint32_t>(std::lround(cx - 0.5 * shape.size_a));
        o.rect_y0 = static_cast<std::uint32_t>(std::lround(cy - 0.5 * shape.size_b));
        o.rect_x1 = o.rect_x0 + static_cast<std::uint32_t>(shape.size_a);
        o.rect_y1 = o.rect_y0 + static_cast<std::uint32_t>(shape.size_b);
      }
      const double br = shape.radius + 1.0;
      o.bbox = {static_cast<std::uint32_t>(std::max(0.0, std::floor(cx - br))),
                static_cast<std::uint32_t>(std::max(0.0, std::floor(cy - br))),
                static_cast<std::uint32_t>(std::min<double>(width_ - 1, std::ceil(cx + br))),
                static_cast<std::uint32_t>(std::min<double>(height_ - 1, std::ceil(cy + br)))};
      objects_.push_back(std::move(o));
    }
  }

  void assign_attributes(std::mt19937_64& rng, QualityRange q) {
    const Label n = stuff_count() + static_cast<Label>(objects_.size());
    quality_.assign(std::size_t{n} + 1, Quality{});
    class_.assign(std::size_t{n} + 1, 0);
    base_color_.assign(std::size_t{n} + 1, {0, 0, 0});
    for (Label l = 1; l <= n; ++l) {
      quality_[l].iou = detail::uniform(rng, q.lo, q.hi);
      quality_[l].stab = detail::uniform(rng, q.lo, q.hi);
      for (int c = 0; c < 3; ++c) base_color_[l][c] = 48 + static_cast<int>(rng() % 160);
      class_[l] = kClassStuff;
    }
    for (const SceneObject& o : objects_) {
      switch (o.kind) {
        case ShapeKind::rectangle: class_[o.id] = kClassRectangle; break;
        case ShapeKind::disc: class_[o.id] = kClassDisc; break;
        case ShapeKind::polygon: class_[o.id] = kClassPolygon; break;
      }
    }
  }

  static constexpr std::uint32_t kBucket = 64;

  std::size_t bucket_index(std::uint32_t x, std::uint32_t y) const {
    return std::size_t{y / kBucket} * bucket_cols_ + x / kBucket;
  }

  void build_buckets() {
    bucket_cols_ = (width_ + kBucket - 1) / kBucket;
    const std::uint32_t rows = (height_ + kBucket - 1) / kBucket;
    std::vector<std::vector<std::uint32_t>> lists(std::size_t{bucket_cols_} * rows);
    for (std::uint32_t k = 0; k < objects_.size(); ++k) {
      const BBox& b = objects_[k].bbox;
      for (std::uint32_t by = b.y0 / kBucket; by <= b.y1 / kBucket; ++by) {
        for (std::uint32_t bx = b.x0 / kBucket; bx <= b.x1 / kBucket; ++bx) {
          lists[std::size_t{by} * bucket_cols_ + bx].push_back(k);
        }
      }
    }
    bucket_begin_.assign(lists.size() + 1, 0);
    for (std::size_t i = 0; i < lists.size(); ++i) {
      bucket_begin_[i + 1] = bucket_begin_[i] + static_cast<std::uint32_t>(lists[i].size());
      bucket_items_.insert(bucket_items_.end(), lists[i].begin(), lists[i].end());
    }
  }

  std::uint64_t seed_;
  std::uint32_t width_;
  std::uint32_t height_;
  SceneStyle style_;
  std::uint32_t nx_ = 1;
  std::uint32_t ny_ = 1;
  double sx_ = 1.0;
  double sy_ = 1.0;
  std::vector<std::array<double, 2>> seeds_;
  std::vector<SceneObject> objects_;
  std::vector<Quality> quality_;
  std::vector<ClassId> class_;
  std::vector<std::array<int, 3>> base_color_;
  std::uint32_t bucket_cols_ = 1;
  std::vector<std::uint32_t> bucket_begin_;
  std::vector<std::uint32_t> bucket_items_;
};

/// A fully materialized synthetic scene.
struct SyntheticScene {
  std::shared_ptr<const SceneModel> model;
  RgbImage image;
  LabelMap gt;

  std::uint64_t seed() const { return model->seed(); }
  const Quality& quality(Label l) const { return model->quality(l); }
  ClassId class_of(Label l) const { return model->class_of(l); }
};

inline SyntheticScene synth_scene(std::uint64_t seed, std::uint32_t width, std::uint32_t height,
                                  std::uint32_t n_objects, QualityRange quality,
                                  const SceneStyle& style = {}) {
  SyntheticScene scene;
  scene.model = std::make_shared<const SceneModel>(seed, width, height, n_objects, quality, style);
  scene.model->render({0, 0, width, height}, &scene.image, &scene.gt);
  return scene;
}

// ---------------------------------------------------------------------------

struct SyntheticOptions {
  /// A prompt selects every region with a visible pixel within this
  /// Chebyshev radius of it. 0 selects only the region under the point.
  std::uint32_t prompt_radius = 0;
  /// When false, black-painted pixels are treated as visible: the generator
  /// keeps proposing regions that were already erased.
  bool black_aware = true;
  /// Minimum visible share of a region's in-window pixels.
  double visibility_floor = 0.25;
  /// Seeded boundary perturbation: each region's mask is eroded or dilated by
  /// up to two pixels.
  bool jitter = false;
};

/// Session over one window of a scene. The window's gt is rendered once.
class SyntheticSession : public ProposalSession {
 public:
  SyntheticSession(std::shared_ptr<const SceneModel> model, const Rect& window,
                   SyntheticOptions options)
      : model_(std::move(model)), window_(window), options_(options) {
    LabelMap gt;
    model_->render(window, nullptr, &gt);
    const auto labels = gt.labels();
    std::vector<Label> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    global_ = std::move(distinct);
    local_.resize(labels.size());
    total_.assign(global_.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto id = static_cast<std::uint32_t>(
          std::lower_bound(global_.begin(), global_.end(), labels[i]) - global_.begin());
      local_[i] = id;
      ++total_[id];
    }
  }

  std::vector<MaskProposal> generate(const ProposalRequest& request) override {
    request.validate();
    const std::uint32_t w = window_.w;
    const std::uint32_t h = window_.h;
    if (request.tile.width() != w || request.tile.height() != h) {
      throw BackendError("synthetic backend: tile does not match the session window");
    }
    std::vector<MaskProposal> out;
    if (request.points.empty()) return out;

    const auto visible = [&](std::size_t i) {
      return !options_.black_aware || !request.tile.is_black(i);
    };

    std::vector<std::uint8_t> prompted(global_.size(), 0);
    const int r = static_cast<int>(options_.prompt_radius);
    for (const Point& p : request.points) {
      for (int dy = -r; dy <= r; ++dy) {
        const long y = static_cast<long>(p.y) + dy;
        if (y < 0 || y >= static_cast<long>(h)) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const long x = static_cast<long>(p.x) + dx;
          if (x < 0 || x >= static_cast<long>(w)) continue;
          const std::size_t i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
          if (visible(i)) prompted[local_[i]] = 1;
        }
      }
    }

    bool any = false;
    for (std::size_t id = 0; id < global_.size(); ++id) {
      if (!prompted[id]) continue;
      const Quality& q = model_->quality(global_[id]);
      prompted[id] = (q.iou >= request.tau_iou && q.stab >= request.tau_stab) ? 1 : 0;
      any = any || prompted[id];
    }
    if (!any) return out;

    std::vector<std::uint64_t> seen(global_.size(), 0);
    for (std::size_t i = 0; i < local_.size(); ++i) {
      if (prompted[local_[i]] && visible(i)) ++seen[local_[i]];
    }

    std::vector<int> slot(global_.size(), -1);
    std::vector<RleBuilder> builders;
    std::vector<std::uint32_t> emitted;
    for (std::size_t id = 0; id < global_.size(); ++id) {
      if (!prompted[id] || seen[id] == 0) continue;
      if (static_cast<double>(seen[id]) < options_.visibility_floor * static_cast<double>(total_[id])) {
        continue;
      }
      slot[id] = static_cast<int>(builders.size());
      builders.emplace_back(w, h);
      emitted.push_back(static_cast<std::uint32_t>(id));
    }
    if (builders.empty()) return out;

    // Coalesce consecutive pixels of one region into a single interval.
    int run_slot = -1;
    std::size_t run_start = 0;
    for (std::size_t i = 0; i <= local_.size(); ++i) {
      int s = -1;
      if (i < local_.size() && visible(i)) s = slot[local_[i]];
      if (s != run_slot) {
        if (run_slot >= 0) builders[static_cast<std::size_t>(run_slot)].add(run_start, i - run_start);
        run_slot = s;
        run_start = i;
      }
    }

    for (std::size_t k = 0; k < builders.size(); ++k) {
      const Label gl = global_[emitted[k]];
      const Quality& q = model_->quality(gl);
      BinaryMask mask = std::move(builders[k]).finish();
      if (options_.jitter) mask = jitter_mask(mask, gl, request);
      if (mask.empty()) continue;
      out.push_back({std::move(mask), q.iou, q.stab});
    }
    return out;
  }

  const Rect& window() const { return window_; }

 private:
  BinaryMask jitter_mask(const BinaryMask& mask, Label gl, const ProposalRequest& request) const {
    const auto offset = static_cast<int>(detail::splitmix64(model_->seed() * 31 + gl) % 5) - 2;
    if (offset == 0) return mask;
    auto dense = morph_square(mask.to_dense(), mask.width(), mask.height(),
                                      static_cast<std::uint32_t>(std::abs(offset)), offset > 0);
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (options_.black_aware && request.tile.is_black(i)) dense[i] = 0;
    }
    return BinaryMask::from_dense(mask.width(), mask.height(), dense);
  }

  std::shared_ptr<const SceneModel> model_;
  Rect window_;
  SyntheticOptions options_;
  std::vector<Label> global_;          // local id -> gt label, ascending
  std::vector<std::uint32_t> local_;   // pixel -> local id
  std::vector<std::uint64_t> total_;   // local id -> pixels in window
};

/// Backend over an immutable scene; sessions are independent, so it is safe
/// to use from many tile workers at once.
class SyntheticBackend : public ProposalBackend {
 public:
  explicit SyntheticBackend(std::shared_ptr<const SceneModel> model, SyntheticOptions options = {})
      : model_(std::move(model)), options_(options) {}

  std::unique_ptr<ProposalSession> open_session(const Rect& window) override {
    if (!Rect{0, 0, model_->width(), model_->height()}.contains(window)) {
      throw BackendError("synthetic backend: tile window outside scene bounds");
    }
    return std::make_unique<SyntheticSession>(model_, window, options_);
  }

  const SceneModel& model() const { return *model_; }

 private:
  std::shared_ptr<const SceneModel> model_;
  SyntheticOptions options_;
};

/// One-shot generation for `window` of the scene.
inline std::vector<MaskProposal> synth_generate(const SyntheticScene& scene, const Rect& window,
                                                const ProposalRequest& request,
                                                SyntheticOptions options = {}) {
  SyntheticBackend backend(scene.model, options);
  return backend.open_session(window)->generate(request);
}

/// Everything needed to regenerate a scene; this is the scene file format.
struct SceneParams {
  std::uint64_t seed = 42;
  std::uint32_t width = 2048;
  std::uint32_t height = 2048;
  std::uint32_t n_objects = 60;
  QualityRange quality{0.62, 0.98};
  double scale = 1.0;  // SceneStyle::scaled factor

  std::shared_ptr<const SceneModel> build() const {
    return std::make_shared<const SceneModel>(seed, width, height, n_objects, quality,
                                              SceneStyle{}.scaled(scale));
  }
};

inline nlohmann::ordered_json to_json(const SceneParams& p) {
  nlohmann::ordered_json j;
  j["seed"] = p.seed;
  j["width"] = p.width;
  j["height"] = p.height;
  j["n_objects"] = p.n_objects;
  j["quality"] = {p.quality.lo, p.quality.hi};
  j["scale"] = p.scale;
  return j;
}

inline SceneParams scene_params_from_json(const nlohmann::json& j) {
  try {
    SceneParams p;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.width = j.at("width").get<std::uint32_t>();
    p.height = j.at("height").get<std::uint32_t>();
    p.n_objects = j.at("n_objects").get<std::uint32_t>();
    p.quality = {j.at("quality").at(0).get<double>(), j.at("quality").at(1).get<double>()};
    if (j.contains("scale")) p.scale = j.at("scale").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scene file: ") + e.what());
  }
}

}  // namespace rsseg
