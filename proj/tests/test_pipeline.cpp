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


#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <unistd.h>

#include "test_support.hpp"

namespace rsseg {
namespace {

const SyntheticScene& scene() {
  static const SyntheticScene s = synth_scene(13, 700, 560, 10, {0.65, 0.98});
  return s;
}

PipelineConfig small_config(std::uint32_t workers) {
  PipelineConfig cfg;
  cfg.tile_size = 256;
  cfg.padding = 16;
  cfg.pass.points_per_side = 32;
  cfg.workers = workers;
  return cfg;
}

GroundTruth scene_gt(const SyntheticScene& s) {
  GroundTruth gt;
  gt.instances = s.gt;
  for (Label l = 1; l <= s.model->label_count(); ++l) {
    gt.class_of[l] = s.class_of(l);
    gt.class_names[s.class_of(l)] = class_name(s.class_of(l));
  }
  return gt;
}

class ThrowingBackend : public ProposalBackend {
 public:
  explicit ThrowingBackend(std::uint32_t bad_tile_x) : bad_x_(bad_tile_x) {}
  std::unique_ptr<ProposalSession> open_session(const Rect& window) override {
    if (window.x >= bad_x_) throw BackendError("worker went away");
    return std::make_unique<testing::ScriptedSession>(std::vector<std::vector<MaskProposal>>{});
  }

 private:
  std::uint32_t bad_x_;
};

TEST(SegmentTiles, LabelsStayInTheirTileRange) {
  SyntheticBackend backend(scene().model);
  const SegmentResult r = segment_tiles(MemorySource(scene().image), backend, small_config(1));
  ASSERT_EQ(r.tiles.size(), r.plan.tiles.size());
  EXPECT_EQ(r.map.next_label(), r.plan.label_limit());
  for (const TileSpec& t : r.plan.tiles) {
    const Label lo = r.plan.label_offset(t.index);
    for (std::uint32_t y = t.core.y; y < t.core.bottom(); ++y) {
      for (std::uint32_t x = t.core.x; x < t.core.right(); ++x) {
        const Label l = r.map.at(x, y);
        if (l == kUnlabeled) continue;
        ASSERT_GT(l, lo);
        ASSERT_LE(l, lo + r.plan.label_stride);
      }
    }
    EXPECT_EQ(r.tiles[t.index].spec.index, t.index);
    EXPECT_FALSE(r.tiles[t.index].trace.passes.empty());
  }
}

TEST(SegmentTiles, WorkerCountDoesNotChangeTheResult) {
  SyntheticBackend backend(scene().model);
  const SegmentResult one = segment_raster(MemorySource(scene().image), backend, small_config(1));
  for (std::uint32_t workers : {2u, 4u, 16u}) {
    const SegmentResult many = segment_raster(MemorySource(scene().image), backend, small_config(workers));
    EXPECT_EQ(many.map, one.map) << workers << " workers";
    EXPECT_EQ(many.merge.merges, one.merge.merges);
  }
}

TEST(SegmentTiles, SourcesAgree) {
  SyntheticBackend backend(scene().model);
  const PipelineConfig cfg = small_config(2);
  const SegmentResult mem = segment_tiles(MemorySource(scene().image), backend, cfg);
  const SegmentResult gen = segment_tiles(SceneSource(scene().model), backend, cfg);
  const auto path = std::filesystem::temp_directory_path() / ("rsseg_pipeline_" + std::to_string(::getpid()) + ".rrgb");
  save_rrgb(path.string(), scene().image);
  const SegmentResult file = segment_tiles(RrgbSource(path.string()), backend, cfg);
  std::filesystem::remove(path);
  EXPECT_EQ(gen.map, mem.map);
  EXPECT_EQ(file.map, mem.map);
}

TEST(SegmentTiles, CallbackSeesEveryTileOnce) {
  SyntheticBackend backend(scene().model);
  std::set<std::uint32_t> seen;
  std::size_t last_done = 0;
  std::size_t total = 0;
  segment_tiles(MemorySource(scene().image), backend, small_config(3),
                [&](const TileOutcome& t, std::size_t done, std::size_t n) {
                  EXPECT_TRUE(seen.insert(t.spec.index).second);
                  EXPECT_EQ(done, last_done + 1);
                  last_done = done;
                  total = n;
                });
  EXPECT_EQ(seen.size(), total);
  EXPECT_EQ(total, 9u);
}

TEST(SegmentTiles, BackendFailurePropagates) {
  ThrowingBackend backend(400);
  for (std::uint32_t workers : {1u, 4u}) {
    EXPECT_THROW(segment_tiles(MemorySource(scene().image), backend, small_config(workers)), BackendError);
  }
}

TEST(SegmentTiles, InvalidConfigRejectedBeforeWork) {
  SyntheticBackend backend(scene().model);
  PipelineConfig cfg = small_config(1);
  cfg.pass.tau_end = 0.99;
  EXPECT_THROW(segment_tiles(MemorySource(scene().image), backend, cfg), std::invalid_argument);
  cfg = small_config(1);
  cfg.tile_size = 0;
  EXPECT_THROW(segment_tiles(MemorySource(scene().image), backend, cfg), std::invalid_argument);
}

TEST(SegmentRaster, ExactMasksDetectEveryObject) {
  SyntheticBackend backend(scene().model);
  const SegmentResult r = segment_raster(MemorySource(scene().image), backend, small_config(2));
  const EvalReport rep = evaluate(r.map, scene_gt(scene()));
  for (const auto& [cls, row] : rep.per_class) {
    EXPECT_EQ(row.det05, 1.0) << class_name(cls);
  }
  EXPECT_GE(rep.coverage, 0.99);
  EXPECT_EQ(r.merge.segments_final, distinct_labels(r.map).size());
}

}  // namespace
}  // namespace rsseg
