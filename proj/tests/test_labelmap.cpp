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

#include <map>
#include <random>

#include "test_support.hpp"

namespace rsseg {
namespace {

using testing::Dense;

TEST(Coverage, EmptyFullAndHalf) {
  LabelMap m(10, 10);
  EXPECT_EQ(coverage(m), 0.0);
  for (std::uint32_t y = 0; y < 10; ++y) {
    for (std::uint32_t x = 0; x < 5; ++x) m.set(x, y, 1);
  }
  EXPECT_EQ(coverage(m), 0.5);
  for (std::uint32_t y = 0; y < 10; ++y) {
    for (std::uint32_t x = 5; x < 10; ++x) m.set(x, y, 2);
  }
  EXPECT_EQ(coverage(m), 1.0);
}

TEST(BinaryMask, RunConventionStartsWithBackground) {
  const BinaryMask m = BinaryMask::from_dense(4, 1, Dense{1, 1, 0, 1});
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{0, 2, 1, 1}));
  EXPECT_EQ(m.area(), 3u);
  const BinaryMask empty(3, 2);
  EXPECT_EQ(empty.runs(), (std::vector<std::uint32_t>{6}));
  EXPECT_TRUE(empty.empty());
}

TEST(BinaryMask, FromRunsRejectsMalformedLists) {
  EXPECT_THROW(BinaryMask::from_runs(2, 2, {1, 2}), FormatError);     // sum 3
  EXPECT_THROW(BinaryMask::from_runs(2, 2, {1, 0, 3}), FormatError);  // zero interior run
  EXPECT_THROW(BinaryMask::from_runs(2, 2, {}), FormatError);
  EXPECT_NO_THROW(BinaryMask::from_runs(2, 2, {0, 4}));
}

TEST(BinaryMask, DenseRoundTripIsBijective) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const std::uint32_t w = 1 + rng() % 40;
    const std::uint32_t h = 1 + rng() % 40;
    const Dense d = testing::random_dense(rng, w, h, (rng() % 100) / 100.0);
    const BinaryMask m = BinaryMask::from_dense(w, h, d);
    EXPECT_EQ(m.to_dense(), d);
    EXPECT_EQ(BinaryMask::from_runs(w, h, m.runs()), m);
  }
}

TEST(RleBuilder, CoalescesAdjacentIntervals) {
  RleBuilder b(5, 2);
  b.add(1, 2);
  b.add(3, 1);
  b.add(7, 2);
  const BinaryMask m = std::move(b).finish();
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{1, 3, 3, 2, 1}));
}

TEST(ConnectedComponents, EmptyMaskHasNone) {
  EXPECT_TRUE(connected_components(BinaryMask(8, 8)).empty());
}

TEST(ConnectedComponents, DiagonalNeighborsJoin) {
  const auto comps = connected_components(BinaryMask::from_dense(2, 2, Dense{1, 0, 0, 1}));
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_EQ(comps[0].area, 2u);
  EXPECT_EQ(comps[0].bbox, (BBox{0, 0, 1, 1}));
}

TEST(ConnectedComponents, MatchesFloodFillOnRandomMasks) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Dense d = trial % 2 ? testing::random_dense(rng, 64, 64, 0.45) : testing::random_blobs(rng, 64, 64, 12);
    const auto expect = testing::flood_components(testing::to_u32(d), 64, 64, true, true);
    const auto comps = connected_components(BinaryMask::from_dense(64, 64, d));
    std::vector<std::uint32_t> got(d.size(), 0);
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const Dense cd = comps[c].mask.to_dense();
      std::uint64_t area = 0;
      for (std::size_t i = 0; i < cd.size(); ++i) {
        if (!cd[i]) continue;
        EXPECT_EQ(got[i], 0u) << "components overlap";
        got[i] = static_cast<std::uint32_t>(c + 1);
        ++area;
        EXPECT_GE(i % 64, comps[c].bbox.x0);
        EXPECT_LE(i % 64, comps[c].bbox.x1);
        EXPECT_GE(i / 64, comps[c].bbox.y0);
        EXPECT_LE(i / 64, comps[c].bbox.y1);
      }
      EXPECT_EQ(area, comps[c].area);
    }
    // The flood fill numbers components by first pixel in scan order, which is
    // the required output order, so the ids must agree exactly.
    ASSERT_EQ(got, expect) << "trial " << trial;
  }
}

TEST(PaintBlack, IdentityFullAndCheckerboard) {
  RgbImage img(4, 3);
  for (std::size_t i = 0; i < img.bytes().size(); ++i) img.bytes()[i] = static_cast<std::uint8_t>(10 + i);
  LabelMap m(4, 3);
  EXPECT_EQ(paint_black(img, m), img);

  LabelMap checker(4, 3);
  for (std::uint32_t y = 0; y < 3; ++y) {
    for (std::uint32_t x = 0; x < 4; ++x) {
      if ((x + y) % 2 == 0) checker.set(x, y, 1 + x);
    }
  }
  const RgbImage out = paint_black(img, checker);
  for (std::uint32_t y = 0; y < 3; ++y) {
    for (std::uint32_t x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::uint8_t want = (x + y) % 2 == 0 ? 0 : img.pixel(x, y)[c];
        EXPECT_EQ(out.pixel(x, y)[c], want);
      }
    }
  }
  EXPECT_EQ(paint_black(out, checker), out);

  LabelMap full(4, 3);
  std::fill(full.labels().begin(), full.labels().end(), Label{3});
  const RgbImage blacked = paint_black(img, full);
  for (std::uint8_t b : blacked.bytes()) EXPECT_EQ(b, 0);
  EXPECT_THROW(paint_black(img, LabelMap(3, 3)), std::invalid_argument);
}

Component component_of(const Dense& d, std::uint32_t w, std::uint32_t h) {
  auto comps = connected_components(BinaryMask::from_dense(w, h, d));
  EXPECT_EQ(comps.size(), 1u);
  return comps.front();
}

TEST(AssignComponent, FreshAreaPartialAndNoop) {
  const std::uint32_t w = 10;
  const std::uint32_t h = 10;
  Dense d(100, 0);
  for (std::uint32_t y = 0; y < 4; ++y) {
    for (std::uint32_t x = 0; x < 10; ++x) d[y * w + x] = 1;
  }
  const Component c = component_of(d, w, h);

  LabelMap m(w, h);
  EXPECT_EQ(assign_component(m, c), 40u);
  EXPECT_EQ(m.next_label(), 2u);

  LabelMap partial(w, h);
  for (std::uint32_t x = 0; x < 10; ++x) partial.set(x, 0, 9);
  const Label before = partial.next_label();
  EXPECT_EQ(assign_component(partial, c), 30u);
  EXPECT_EQ(partial.next_label(), before + 1);
  for (std::uint32_t x = 0; x < 10; ++x) EXPECT_EQ(partial.at(x, 0), 9u);
  EXPECT_EQ(partial.at(0, 1), before);

  LabelMap covered(w, h);
  for (std::uint32_t y = 0; y < 4; ++y) {
    for (std::uint32_t x = 0; x < 10; ++x) covered.set(x, y, 5);
  }
  const Label next = covered.next_label();
  EXPECT_EQ(assign_component(covered, c), 0u);
  EXPECT_EQ(covered.next_label(), next);

  LabelMap narrow(9, 10);
  EXPECT_THROW(assign_component(narrow, c), std::out_of_range);
}

TEST(AssignComponent, CoverageGrowsByReturnedCount) {
  std::mt19937_64 rng(5);
  LabelMap m(32, 32);
  for (int i = 0; i < 50; ++i) {
    const Dense d = testing::random_blobs(rng, 32, 32, 1);
    for (const Component& c : connected_components(BinaryMask::from_dense(32, 32, d))) {
      const double before = coverage(m);
      const LabelMap snapshot = m;
      const std::uint64_t n = assign_component(m, c);
      EXPECT_DOUBLE_EQ(coverage(m), before + static_cast<double>(n) / 1024.0);
      for (std::size_t k = 0; k < m.size(); ++k) {
        if (snapshot[k] != kUnlabeled) {
          EXPECT_EQ(m[k], snapshot[k]);
        }
      }
    }
  }
}

TEST(RemoveSmall, ZeroThresholdKeepsEverything) {
  std::mt19937_64 rng(3);
  LabelMap m = testing::random_label_map(rng, 20, 20, 10, 5);
  const LabelMap before = m;
  EXPECT_EQ(remove_small(m, 0), 0u);
  EXPECT_EQ(m, before);
}

TEST(RemoveSmall, DefaultMinimumAreaDropsFiftyPixelSegment) {
  LabelMap m(20, 20);
  for (std::uint32_t y = 0; y < 5; ++y) {
    for (std::uint32_t x = 0; x < 10; ++x) m.set(x, y, 1);
  }
  EXPECT_EQ(remove_small(m, 100), 1u);
  EXPECT_EQ(coverage(m), 0.0);
}

TEST(RemoveSmall, MatchesFloodFillAreas) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    LabelMap m = testing::random_label_map(rng, 48, 40, 25, 6);
    const LabelMap before = m;
    const std::uint64_t a_min = 1 + rng() % 120;
    const auto comp = testing::flood_components(testing::to_u32(before), 48, 40, true, true);
    std::map<std::uint32_t, std::uint64_t> area;
    for (std::uint32_t c : comp) {
      if (c) ++area[c];
    }
    std::size_t expect_removed = 0;
    for (const auto& [c, a] : area) expect_removed += a < a_min;
    EXPECT_EQ(remove_small(m, a_min), expect_removed);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Label want = before[i] != kUnlabeled && area[comp[i]] < a_min ? kUnlabeled : before[i];
      ASSERT_EQ(m[i], want);
    }
  }
}

TEST(RelabelSequential, NumbersInScanOrder) {
  LabelMap m = testing::map_from_rows({"77.", "3.9", "..3"});
  EXPECT_EQ(relabel_sequential(m), 3u);
  EXPECT_EQ(m, testing::map_from_rows({"11.", "2.3", "..2"}));
  EXPECT_EQ(m.next_label(), 4u);
}

TEST(LabelMap, NextLabelInvariantHolds) {
  std::mt19937_64 rng(23);
  const LabelMap m = testing::random_label_map(rng, 30, 30, 20, 40);
  for (Label l : m.labels()) EXPECT_LT(l, m.next_label());
}

}  // namespace
}  // namespace rsseg
