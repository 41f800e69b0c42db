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

#include <sstream>

#include "test_support.hpp"

namespace rsseg {
namespace {

PipelineConfig from_text(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  apply_config(cfg, parse_config(in, "test.conf"), "test.conf");
  return cfg;
}

TEST(Config, DefaultsMatchReferenceTable) {
  const PipelineConfig cfg;
  EXPECT_EQ(cfg.tile_size, 1000u);
  EXPECT_EQ(cfg.padding, 50u);
  EXPECT_EQ(cfg.pass.points_per_side, 64u);
  EXPECT_EQ(cfg.pass.target_coverage, 0.99);
  EXPECT_EQ(cfg.pass.tau_start, 0.93);
  EXPECT_EQ(cfg.pass.tau_end, 0.60);
  EXPECT_EQ(cfg.pass.step, 0.01);
  EXPECT_EQ(cfg.pass.stagnation_pp, 0.1);
  EXPECT_EQ(cfg.pass.overlap_reject, 0.5);
  EXPECT_EQ(cfg.pass.min_area, 100u);
  EXPECT_EQ(cfg.merge.min_area, 100u);
  EXPECT_EQ(cfg.merge.enclosed_max, 500u);
  EXPECT_EQ(cfg.merge.strategy, MergeStrategy::best_match);
}

TEST(Config, SectionsCommentsAndPercentages) {
  const PipelineConfig cfg = from_text(R"(
# tiling
[tiling]
tile_size = 512   # scaled
padding=32

[segmentation]
target_coverage = 95%
overlap_rejection = 40 %
stagnation = 0.2pp
tau_start = 0.9
tau_end = 0.7
step = 0.02
points_per_side = 48
min_mask_area = 64
max_passes = 12

[merge]
strategy = "mutual_best"
merge_enclosed_max = 250
workers = 3
)");
  EXPECT_EQ(cfg.tile_size, 512u);
  EXPECT_EQ(cfg.padding, 32u);
  EXPECT_DOUBLE_EQ(cfg.pass.target_coverage, 0.95);
  EXPECT_DOUBLE_EQ(cfg.pass.overlap_reject, 0.40);
  EXPECT_DOUBLE_EQ(cfg.pass.stagnation_pp, 0.2);
  EXPECT_DOUBLE_EQ(cfg.pass.epsilon(), 0.002);
  EXPECT_EQ(cfg.pass.tau_start, 0.9);
  EXPECT_EQ(cfg.pass.tau_end, 0.7);
  EXPECT_EQ(cfg.pass.step, 0.02);
  EXPECT_EQ(cfg.pass.points_per_side, 48u);
  EXPECT_EQ(cfg.pass.min_area, 64u);
  EXPECT_EQ(cfg.merge.min_area, 64u);
  EXPECT_EQ(cfg.pass.max_passes, 12u);
  EXPECT_EQ(cfg.merge.strategy, MergeStrategy::mutual_best);
  EXPECT_EQ(cfg.merge.enclosed_max, 250u);
  EXPECT_EQ(cfg.workers, 3u);
}

TEST(Config, LaterSettingsOverrideEarlierOnes) {
  PipelineConfig cfg = from_text("tile_size = 512\ntile_size = 256\n");
  EXPECT_EQ(cfg.tile_size, 256u);
  apply_setting(cfg, "tile_size", "128");
  EXPECT_EQ(cfg.tile_size, 128u);
}

TEST(Config, ErrorsNameTheOrigin) {
  const auto message = [](const std::string& text) -> std::string {
    try {
      from_text(text);
    } catch (const FormatError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message("colour = red\n").find("test.conf"), std::string::npos);
  EXPECT_NE(message("colour = red\n").find("colour"), std::string::npos);
  EXPECT_NE(message("\n\njust words\n").find("test.conf:3"), std::string::npos);
  EXPECT_NE(message("[tiling\n").find("test.conf:1"), std::string::npos);
  EXPECT_FALSE(message("tile_size = -5\n").empty());
  EXPECT_FALSE(message("tile_size = 12px\n").empty());
  EXPECT_FALSE(message("tile_size = 99999999999\n").empty());
  EXPECT_FALSE(message("tau_start = 90%\n").empty());
  EXPECT_FALSE(message("strategy = greedy\n").empty());
  EXPECT_FALSE(message("step =\n").empty());
}

TEST(Config, EveryKnownKeyIsAccepted) {
  PipelineConfig cfg;
  for (const std::string& k : config_keys()) {
    const std::string v = k == "strategy" ? "naive" : "1";
    EXPECT_NO_THROW(apply_setting(cfg, k, v)) << k;
  }
}

TEST(Config, JsonExportListsEveryKey) {
  const auto j = to_json(PipelineConfig{});
  for (const std::string& k : config_keys()) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["strategy"], "best_match");
}

TEST(Config, LoadMissingFileFails) {
  PipelineConfig cfg;
  EXPECT_THROW(load_config_file(cfg, "/nonexistent/rsseg.conf"), FormatError);
}

}  // namespace
}  // namespace rsseg
