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

// Whole-raster segmentation: plan, segment tiles in parallel, commit, merge.
//
// Only the global label map is image-sized. Each worker reads its tile
// window from a RasterSource, so the RGB raster is never held in full.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rsseg/backend.hpp"
#include "rsseg/core.hpp"
#include "rsseg/formats.hpp"
#include "rsseg/labelmap.hpp"
#include "rsseg/merge.hpp"
#include "rsseg/multipass.hpp"
#include "rsseg/synthetic.hpp"
#include "rsseg/tiler.hpp"

namespace rsseg {

/// Random-access RGB raster. read_window must be safe to call concurrently.
class RasterSource {
 public:
  virtual ~RasterSource() = default;
  virtual std::uint32_t width() const = 0;
  virtual std::uint32_t height() const = 0;
  virtual RgbImage read_window(const Rect& r) const = 0;
};

class MemorySource : public RasterSource {
 public:
  explicit MemorySource(const RgbImage& image) : image_(image) {}
  std::uint32_t width() const override { return image_.width(); }
  std::uint32_t height() const override { return image_.height(); }
  RgbImage read_window(const Rect& r) const override { return image_.crop(r); }

 private:
  const RgbImage& image_;
};

class RrgbSource : public RasterSource {
 public:
  explicit RrgbSource(const std::string& path) : file_(path) {}
  std::uint32_t width() const override { return file_.width(); }
  std::uint32_t height() const override { return file_.height(); }
  RgbImage read_window(const Rect& r) const override { return file_.read_window(r); }

 private:
  RrgbFile file_;
};

/// Renders windows of a procedural scene on demand.
class SceneSource : public RasterSource {
 public:
  explicit SceneSource(std::shared_ptr<const SceneModel> model) : model_(std::move(model)) {}
  std::uint32_t width() const override { return model_->width(); }
  std::uint32_t height() const override { return model_->height(); }
  RgbImage read_window(const Rect& r) const override {
    RgbImage out;
    model_->render(r, &out, nullptr);
    return out;
  }

 private:
  std::shared_ptr<const SceneModel> model_;
};

struct PipelineConfig {
  PassConfig pass;
  std::uint32_t tile_size = 1000;
  std::uint32_t padding = 50;
  std::uint32_t workers = 1;
  MergeConfig merge;
};

struct TileOutcome {
  TileSpec spec;
  PassTrace trace;
  std::size_t committed = 0;  // local segments reaching the core
  double wall_ms = 0.0;
};

struct SegmentResult {
  LabelMap map;
  TilePlan plan;
  std::vector<TileOutcome> tiles;  // by tile index
  MergeReport merge;
  double tiles_wall_s = 0.0;
  double merge_wall_s = 0.0;
};

/// Called after each tile completes, from the worker thread that ran it.
using TileCallback = std::function<void(const TileOutcome&, std::size_t done, std::size_t total)>;

/// Segments every tile and commits the cores, without merging.
inline SegmentResult segment_tiles(const RasterSource& source, ProposalBackend& backend,
                                   const PipelineConfig& cfg, const TileCallback& on_tile = {}) {
  cfg.pass.validate();
  SegmentResult res;
  res.plan = plan_tiles(source.width(), source.height(), cfg.tile_size, cfg.padding);
  res.map = LabelMap(source.width(), source.height());
  res.tiles.resize(res.plan.tiles.size());
  TileCommitter committer(res.map, res.plan);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  std::mutex callback_mu;

  const auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= res.plan.tiles.size()) return;
      const TileSpec& spec = res.plan.tiles[i];
      try {
        const auto t0 = std::chrono::steady_clock::now();
        TileOutcome& out = res.tiles[i];
        out.spec = spec;
        TileSegmentation seg;
        {
          const RgbImage window = source.read_window(spec.window);
          auto session = backend.open_session(spec.window);
          seg = segment_tile(window, cfg.pass, *session);
        }
        out.trace = std::move(seg.trace);
        out.committed = committer.commit(spec, seg.map);
        out.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const std::size_t n = done.fetch_add(1) + 1;
        if (on_tile) {
          std::lock_guard lock(callback_mu);
          on_tile(out, n, res.plan.tiles.size());
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  const std::uint32_t n_workers =
      std::max<std::uint32_t>(1, std::min<std::uint32_t>(cfg.workers, static_cast<std::uint32_t>(res.plan.tiles.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::uint32_t k = 0; k < n_workers; ++k) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  committer.finish();
  res.tiles_wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Full pipeline: tiles, then merge and post-processing.
inline SegmentResult segment_raster(const RasterSource& source, ProposalBackend& backend,
                                    const PipelineConfig& cfg, const TileCallback& on_tile = {}) {
  SegmentResult res = segment_tiles(source, backend, cfg, on_tile);
  const auto t0 = std::chrono::steady_clock::now();
  res.merge = merge_tiles(res.map, res.plan, cfg.merge);
  res.merge_wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace rsseg
