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
#include <set>

#include "test_support.hpp"

namespace rsseg {
namespace {

using Counts = std::map<LabelPair, std::uint64_t>;

ContactTable one_boundary(Counts counts) { return {BoundaryContacts{Boundary{}, std::move(counts)}}; }

// Brute-force contacts: every horizontally or vertically adjacent pixel pair
// whose two pixels lie in different tile cores.
std::map<std::pair<std::uint32_t, std::uint32_t>, Counts> brute_contacts(const LabelMap& m, const TilePlan& plan) {
  auto tile_of = [&](std::uint32_t x, std::uint32_t y) {
    return (y / plan.tile_size) * plan.cols + x / plan.tile_size;
  };
  std::map<std::pair<std::uint32_t, std::uint32_t>, Counts> out;
  for (std::uint32_t y = 0; y < m.height(); ++y) {
    for (std::uint32_t x = 0; x < m.width(); ++x) {
      for (auto [dx, dy] : {std::pair{1u, 0u}, {0u, 1u}}) {
        if (x + dx >= m.width() || y + dy >= m.height()) continue;
        const auto ta = tile_of(x, y);
        const auto tb = tile_of(x + dx, y + dy);
        if (ta == tb) continue;
        const Label a = m.at(x, y);
        const Label b = m.at(x + dx, y + dy);
        if (a == 0 || b == 0 || a == b) continue;
        ++out[{ta, tb}][make_pair_sorted(a, b)];
      }
    }
  }
  return out;
}

TEST(BuildContacts, SameLabelBothSidesHasNoPairs) {
  LabelMap m(200, 100);
  std::fill(m.labels().begin(), m.labels().end(), Label{4});
  const auto table = build_contacts(m, plan_tiles(200, 100, 100, 0));
  ASSERT_EQ(table.size(), 1u);
  EXPECT_TRUE(table[0].counts.empty());
}

TEST(BuildContacts, TwoLabelsAcrossOneBoundary) {
  LabelMap m(200, 100);
  for (std::uint32_t y = 0; y < 100; ++y) {
    for (std::uint32_t x = 0; x < 200; ++x) m.set(x, y, x < 100 ? 1 : 2);
  }
  const auto table = build_contacts(m, plan_tiles(200, 100, 100, 0));
  EXPECT_EQ(table[0].counts, (Counts{{{1, 2}, 100}}));
  EXPECT_TRUE(table[0].boundary.vertical);
  EXPECT_EQ(table[0].boundary.position, 100u);
}

TEST(BuildContacts, MatchesBruteForceScan) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const std::uint32_t w = 10 + rng() % 90;
    const std::uint32_t h = 10 + rng() % 90;
    const std::uint32_t t = 3 + rng() % 30;
    const TilePlan plan = plan_tiles(w, h, t, 0);
    const LabelMap m = testing::random_label_map(rng, w, h, 30, 12);
    const auto expect = brute_contacts(m, plan);
    std::map<std::pair<std::uint32_t, std::uint32_t>, Counts> got;
    for (const BoundaryContacts& bc : build_contacts(m, plan)) {
      if (!bc.counts.empty()) got[{bc.boundary.tile_a, bc.boundary.tile_b}] = bc.counts;
    }
    ASSERT_EQ(got, expect) << "trial " << trial;
  }
}

TEST(PairSelection, BestMatchExamples) {
  EXPECT_EQ(best_match_pairs(one_boundary({{{1, 2}, 100}})), (std::set<LabelPair>{{1, 2}}));
  EXPECT_EQ(best_match_pairs(one_boundary({{{1, 2}, 100}, {{1, 3}, 5}})), (std::set<LabelPair>{{1, 2}, {1, 3}}));
  EXPECT_EQ(best_match_pairs(one_boundary({{{1, 2}, 100}, {{1, 9}, 3}, {{8, 9}, 80}})),
            (std::set<LabelPair>{{1, 2}, {8, 9}}));
  EXPECT_TRUE(best_match_pairs({}).empty());
}

TEST(PairSelection, TiesGoToLowestId) {
  // 5 touches 7 and 6 equally; 7 and 6 each have a stronger partner.
  const auto pairs = best_match_pairs(one_boundary({{{5, 7}, 4}, {{5, 6}, 4}, {{6, 1}, 9}, {{7, 2}, 9}}));
  EXPECT_TRUE(pairs.contains({5, 6}));
  EXPECT_FALSE(pairs.contains({5, 7}));
}

TEST(PairSelection, BestMatchIsPerBoundary) {
  ContactTable t = one_boundary({{{1, 2}, 50}, {{1, 3}, 4}});
  t.push_back(BoundaryContacts{Boundary{}, {{{1, 3}, 2}}});
  // On the second boundary 3 is 1's only partner.
  EXPECT_EQ(best_match_pairs(t), (std::set<LabelPair>{{1, 2}, {1, 3}}));
}

TEST(PairSelection, MutualNaiveAndThreshold) {
  const ContactTable t = one_boundary({{{1, 2}, 100}, {{1, 3}, 5}, {{3, 4}, 12}});
  EXPECT_EQ(mutual_best_pairs(t), (std::set<LabelPair>{{1, 2}, {3, 4}}));
  EXPECT_EQ(naive_merge_pairs(t), (std::set<LabelPair>{{1, 2}, {1, 3}, {3, 4}}));
  EXPECT_EQ(contact_threshold_pairs(t, 10), (std::set<LabelPair>{{1, 2}, {3, 4}}));
  EXPECT_TRUE(naive_merge_pairs({}).empty());
}

TEST(PairSelection, BestMatchSubsetOfNaiveOnRandomMaps) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const TilePlan plan = plan_tiles(80, 60, 20, 0);
    const LabelMap m = testing::random_label_map(rng, 80, 60, 40, 25);
    const ContactTable t = build_contacts(m, plan);
    const auto best = best_match_pairs(t);
    const auto naive = naive_merge_pairs(t);
    const auto mutual = mutual_best_pairs(t);
    for (const auto& p : best) ASSERT_TRUE(naive.contains(p));
    for (const auto& p : mutual) ASSERT_TRUE(best.contains(p));
    LabelMap a = m;
    LabelMap b = m;
    EXPECT_LE(apply_merges(a, best), apply_merges(b, naive));
  }
}

TEST(ApplyMerges, TransitivityAndIdentity) {
  LabelMap m = testing::map_from_rows({"1122", "3344", "..55"});
  LabelMap same = m;
  EXPECT_EQ(apply_merges(same, {}), 0u);
  EXPECT_EQ(same, m);
  EXPECT_EQ(apply_merges(m, {{1, 2}, {2, 3}}), 2u);
  EXPECT_EQ(m, testing::map_from_rows({"1111", "1144", "..55"}));
  LabelMap bad = m;
  EXPECT_THROW(apply_merges(bad, {{0, 1}}), std::invalid_argument);
}

TEST(ApplyMerges, PartitionMatchesGraphSearch) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const Label n_labels = 2 + rng() % 500;
    LabelMap m(64, 64);
    for (Label& l : m.labels()) l = static_cast<Label>(rng() % (n_labels + 1));
    m.refresh_next_label();
    const std::set<Label> present = [&] {
      std::set<Label> s;
      for (Label l : m.labels()) if (l) s.insert(l);
      return s;
    }();
    std::set<LabelPair> pairs;
    const std::size_t n_pairs = rng() % 1000;
    const std::vector<Label> pool(present.begin(), present.end());
    for (std::size_t i = 0; i < n_pairs; ++i) {
      const Label a = pool[rng() % pool.size()];
      const Label b = pool[rng() % pool.size()];
      if (a != b) pairs.insert(make_pair_sorted(a, b));
    }
    const auto rep = testing::graph_components(present, pairs);
    std::set<Label> roots;
    for (const auto& [l, r] : rep) roots.insert(r);
    LabelMap merged = m;
    const std::size_t merges = apply_merges(merged, pairs);
    EXPECT_EQ(merges, present.size() - roots.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      ASSERT_EQ(merged[i], m[i] == 0 ? 0 : rep.at(m[i]));
    }
  }
}

// Brute-force absorption: pixel flood fill per pass, exterior scanned pixel
// by pixel, repeated until nothing changes.
LabelMap brute_absorb(LabelMap m, std::uint64_t max_area) {
  const std::uint32_t w = m.width();
  const std::uint32_t h = m.height();
  for (;;) {
    const auto comp = testing::flood_components(testing::to_u32(m), w, h, true, true);
    std::map<std::uint32_t, std::vector<std::size_t>> pixels;
    for (std::size_t i = 0; i < comp.size(); ++i) if (comp[i]) pixels[comp[i]].push_back(i);
    std::vector<std::pair<std::uint32_t, Label>> moves;
    for (const auto& [c, px] : pixels) {
      if (px.size() > max_area) continue;
      const Label self = m[px.front()];
      std::set<Label> outside;
      bool border = false;
      for (std::size_t i : px) {
        const long x = static_cast<long>(i % w);
        const long y = static_cast<long>(i / w);
        for (auto [dx, dy] : {std::pair{1L, 0L}, {-1L, 0L}, {0L, 1L}, {0L, -1L}}) {
          const long nx = x + dx;
          const long ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) {
            border = true;
            continue;
          }
          const Label n = m.at(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny));
          if (n != self) outside.insert(n);
        }
      }
      if (!border && outside.size() == 1 && *outside.begin() != 0) moves.push_back({c, *outside.begin()});
    }
    if (moves.empty()) return m;
    for (const auto& [c, l] : moves) {
      for (std::size_t i : pixels[c]) m.labels()[i] = l;
    }
  }
}

TEST(AbsorbEnclosed, Examples) {
  LabelMap inner(20, 20);
  std::fill(inner.labels().begin(), inner.labels().end(), Label{1});
  for (std::uint32_t y = 5; y < 10; ++y) {
    for (std::uint32_t x = 5; x < 10; ++x) inner.set(x, y, 2);
  }
  EXPECT_EQ(absorb_enclosed(inner, 500), 1u);
  for (Label l : inner.labels()) EXPECT_EQ(l, 1u);

  LabelMap two = testing::map_from_rows({"11122", "11322", "11122"});
  EXPECT_EQ(absorb_enclosed(two, 500), 0u);

  LabelMap border = testing::map_from_rows({"11111", "11111", "11112"});
  EXPECT_EQ(absorb_enclosed(border, 500), 0u);

  LabelMap hole = testing::map_from_rows({"11111", "11.11", "11111"});
  EXPECT_EQ(absorb_enclosed(hole, 500), 0u);
  EXPECT_EQ(hole.at(2, 1), 0u);
}

TEST(AbsorbEnclosed, NestedComponentsReachFixpoint) {
  // 3 sits inside 2 which sits inside 1: 3 is absorbed into 2 first, then the
  // grown 2 into 1.
  LabelMap m = testing::map_from_rows({"1111111", "1222221", "1223221", "1222221", "1111111"});
  EXPECT_EQ(absorb_enclosed(m, 500), 2u);
  for (Label l : m.labels()) EXPECT_EQ(l, 1u);
}

TEST(AbsorbEnclosed, MatchesBruteForce) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 60; ++trial) {
    LabelMap m = testing::random_label_map(rng, 40, 30, 25, 6, trial % 3 != 0);
    const std::uint64_t max_area = rng() % 200;
    const LabelMap expect = brute_absorb(m, max_area);
    absorb_enclosed(m, max_area);
    ASSERT_EQ(m, expect) << "trial " << trial;
  }
}

// Four objects cut by the diagonals x - y = -8 and x + y = 36 on a 2x2 tile
// grid. Each object straddles every boundary it reaches, and neighbors touch
// across boundaries only along the staircase of the diagonal.
LabelMap chain_gt() {
  LabelMap gt(40, 40);
  for (std::uint32_t y = 0; y < 40; ++y) {
    for (std::uint32_t x = 0; x < 40; ++x) {
      const int a = static_cast<int>(x) - static_cast<int>(y) >= -8;
      const int b = static_cast<int>(x + y) >= 36;
      gt.set(x, y, static_cast<Label>(1 + a + 2 * b));
    }
  }
  return gt;
}

LabelMap split_by_tiles(const LabelMap& gt, const TilePlan& plan) {
  LabelMap out(gt.width(), gt.height());
  for (std::uint32_t y = 0; y < gt.height(); ++y) {
    for (std::uint32_t x = 0; x < gt.width(); ++x) {
      if (gt.at(x, y) == 0) continue;
      const std::uint32_t tile = (y / plan.tile_size) * plan.cols + x / plan.tile_size;
      out.set(x, y, plan.label_offset(tile) + gt.at(x, y));
    }
  }
  return out;
}

// Each output segment equals one gt region exactly.
bool same_partition(const LabelMap& a, const LabelMap& b) {
  std::map<Label, Label> ab;
  std::map<Label, Label> ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ab.try_emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.try_emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

TEST(MergeTiles, ChainFusionNaiveVersusBestMatch) {
  const TilePlan plan = plan_tiles(40, 40, 20, 0);
  const LabelMap gt = chain_gt();
  const LabelMap cut = split_by_tiles(gt, plan);
  EXPECT_EQ(distinct_labels(cut).size(), 11u);

  MergeConfig cfg;
  cfg.strategy = MergeStrategy::naive;
  LabelMap naive = cut;
  EXPECT_EQ(merge_tiles(naive, plan, cfg).segments_final, 1u);

  cfg.strategy = MergeStrategy::best_match;
  LabelMap best = cut;
  const MergeReport rep = merge_tiles(best, plan, cfg);
  EXPECT_EQ(rep.segments_final, 4u);
  EXPECT_TRUE(same_partition(best, gt));
}

TEST(MergeTiles, SplitDiscBecomesOneLabel) {
  // Disc centered on the vertical boundary, background around it.
  const TilePlan plan = plan_tiles(120, 60, 60, 0);
  LabelMap gt(120, 60);
  for (std::uint32_t y = 0; y < 60; ++y) {
    for (std::uint32_t x = 0; x < 120; ++x) {
      const double dx = x + 0.5 - 60.0;
      const double dy = y + 0.5 - 30.0;
      gt.set(x, y, dx * dx + dy * dy <= 20.0 * 20.0 ? 2 : 1);
    }
  }
  LabelMap cut = split_by_tiles(gt, plan);
  merge_tiles(cut, plan, MergeConfig{});
  EXPECT_TRUE(same_partition(cut, gt));
}

TEST(MergeTiles, OneToManyFragmentsJoin) {
  // Disc whole on the left tile; on the right tile its part is split into two
  // fragments by a thin background stripe. Both fragments pick the left disc.
  const TilePlan plan = plan_tiles(120, 60, 60, 0);
  LabelMap gt(120, 60);
  LabelMap cut(120, 60);
  for (std::uint32_t y = 0; y < 60; ++y) {
    for (std::uint32_t x = 0; x < 120; ++x) {
      const double dx = x + 0.5 - 45.0;
      const double dy = y + 0.5 - 30.0;
      const bool disc = dx * dx + dy * dy <= 22.0 * 22.0;
      gt.set(x, y, disc ? 2 : 1);
      Label l = 0;
      if (x < 60) {
        l = disc ? 2 : 1;
      } else if (disc) {
        l = y < 30 ? 11 : 12;
      } else {
        l = 10;
      }
      cut.set(x, y, l);
    }
  }
  const ContactTable t = build_contacts(cut, plan);
  const auto pairs = best_match_pairs(t);
  EXPECT_TRUE(pairs.contains({2, 11}));
  EXPECT_TRUE(pairs.contains({2, 12}));
  EXPECT_TRUE(mutual_best_pairs(t).size() < pairs.size());
  merge_tiles(cut, plan, MergeConfig{});
  EXPECT_TRUE(same_partition(cut, gt));
}

TEST(MergeTiles, NoneStrategyStillPostProcesses) {
  const TilePlan plan = plan_tiles(40, 40, 20, 0);
  LabelMap m = split_by_tiles(chain_gt(), plan);
  m.set(0, 0, 99);  // one-pixel speck: removed by the area floor
  const auto comp = testing::flood_components(testing::to_u32(m), 40, 40, true, true);
  std::map<std::uint32_t, std::uint64_t> area;
  for (std::uint32_t c : comp) if (c) ++area[c];
  std::size_t small = 0;
  for (const auto& [c, a] : area) small += a < 100;
  MergeConfig cfg;
  cfg.strategy = MergeStrategy::none;
  const MergeReport rep = merge_tiles(m, plan, cfg);
  EXPECT_EQ(rep.merges, 0u);
  EXPECT_EQ(rep.removed, small);
  EXPECT_GE(small, 2u);
  EXPECT_EQ(m.at(0, 0), 0u);
  const auto labels = distinct_labels(m);
  EXPECT_EQ(labels.size(), rep.segments_final);
  EXPECT_EQ(*labels.rbegin(), static_cast<Label>(labels.size()));
}

TEST(MergeTiles, ReportJson) {
  const TilePlan plan = plan_tiles(40, 40, 20, 0);
  LabelMap m = split_by_tiles(chain_gt(), plan);
  const auto j = to_json(merge_tiles(m, plan, MergeConfig{}));
  EXPECT_EQ(j.at("strategy"), "best_match");
  EXPECT_EQ(j.at("segments_before"), 11);
  EXPECT_EQ(j.at("segments_final"), 4);
  EXPECT_EQ(j.at("boundaries").size(), 4u);
  EXPECT_EQ(parse_merge_strategy("mutual_best"), MergeStrategy::mutual_best);
  EXPECT_THROW(parse_merge_strategy("bogus"), std::invalid_argument);
}

}  // namespace
}  // namespace rsseg
