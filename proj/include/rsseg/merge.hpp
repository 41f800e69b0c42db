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

// Cross-tile label reconciliation and post-processing.
//
// Segments cut at a tile boundary are rejoined by counting, per boundary,
// how many 4-adjacent pixel pairs each pair of labels shares across it. Under
// the best-match rule every label on a boundary picks the neighbor it touches
// most; the chosen pairs are unioned transitively.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rsseg/core.hpp"
#include "rsseg/labelmap.hpp"
#include "rsseg/tiler.hpp"
#include "rsseg/union_find.hpp"

namespace rsseg {

using LabelPair = std::pair<Label, Label>;  // always (smaller, larger)

inline LabelPair make_pair_sorted(Label a, Label b) { return a < b ? LabelPair{a, b} : LabelPair{b, a}; }

/// A line between two adjacent tile cores. For a vertical boundary the pixel
/// pairs are (x - 1, y) | (x, y) for y in [start, start + length); for a
/// horizontal one they are (x, y - 1) | (x, y) for x in the range.
struct Boundary {
  bool vertical = true;
  std::uint32_t position = 0;  // x for vertical, y for horizontal
  std::uint32_t start = 0;
  std::uint32_t length = 0;
  std::uint32_t tile_a = 0;  // left or top
  std::uint32_t tile_b = 0;  // right or bottom
};

struct BoundaryContacts {
  Boundary boundary;
  std::map<LabelPair, std::uint64_t> counts;
};

using ContactTable = std::vector<BoundaryContacts>;

inline std::vector<Boundary> internal_boundaries(const TilePlan& plan) {
  std::vector<Boundary> out;
  for (const TileSpec& t : plan.tiles) {
    if (t.col + 1 < plan.cols) {
      const TileSpec& right = plan.at(t.row, t.col + 1);
      out.push_back({true, t.core.right(), t.core.y, t.core.h, t.index, right.index});
    }
    if (t.row + 1 < plan.rows) {
      const TileSpec& below = plan.at(t.row + 1, t.col);
      out.push_back({false, t.core.bottom(), t.core.x, t.core.w, t.index, below.index});
    }
  }
  return out;
}

/// Counts label contacts across every internal boundary. Only the two pixel
/// lines adjacent to each boundary are read.
inline ContactTable build_contacts(const LabelMap& map, const TilePlan& plan) {
  if (map.width() != plan.width || map.height() != plan.height) {
    throw std::invalid_argument("build_contacts: map does not match the plan");
  }
  ContactTable table;
  for (const Boundary& b : internal_boundaries(plan)) {
    BoundaryContacts bc{b, {}};
    for (std::uint32_t i = 0; i < b.length; ++i) {
      const std::uint32_t s = b.start + i;
      const Label a = b.vertical ? map.at(b.position - 1, s) : map.at(s, b.position - 1);
      const Label c = b.vertical ? map.at(b.position, s) : map.at(s, b.position);
      if (a == kUnlabeled || c == kUnlabeled || a == c) continue;
      ++bc.counts[make_pair_sorted(a, c)];
    }
    table.push_back(std::move(bc));
  }
  return table;
}

namespace detail {

// For every label on one boundary, its highest-contact partner (ties to the
// lowest id).
inline std::map<Label, Label> best_partners(const std::map<LabelPair, std::uint64_t>& counts) {
  std::map<Label, std::pair<Label, std::uint64_t>> best;
  auto offer = [&](Label self, Label other, std::uint64_t n) {
    auto [it, inserted] = best.try_emplace(self, other, n);
    if (inserted) return;
    auto& [partner, count] = it->second;
    if (n > count || (n == count && other < partner)) {
      partner = other;
      count = n;
    }
  };
  for (const auto& [pair, n] : counts) {
    offer(pair.first, pair.second, n);
    offer(pair.second, pair.first, n);
  }
  std::map<Label, Label> out;
  for (const auto& [self, choice] : best) out[self] = choice.first;
  return out;
}

}  // namespace detail

/// Union over boundaries of each label's best partner on that boundary.
inline std::set<LabelPair> best_match_pairs(const ContactTable& table) {
  std::set<LabelPair> out;
  for (const BoundaryContacts& bc : table) {
    for (const auto& [self, partner] : detail::best_partners(bc.counts)) {
      out.insert(make_pair_sorted(self, partner));
    }
  }
  return out;
}

/// Pairs where both labels pick each other.
inline std::set<LabelPair> mutual_best_pairs(const ContactTable& table) {
  std::set<LabelPair> out;
  for (const BoundaryContacts& bc : table) {
    const auto best = detail::best_partners(bc.counts);
    for (const auto& [self, partner] : best) {
      if (self < partner && best.at(partner) == self) out.insert({self, partner});
    }
  }
  return out;
}

/// Every touching pair.
inline std::set<LabelPair> naive_merge_pairs(const ContactTable& table) {
  std::set<LabelPair> out;
  for (const BoundaryContacts& bc : table) {
    for (const auto& [pair, n] : bc.counts) out.insert(pair);
  }
  return out;
}

/// Touching pairs with at least `min_contacts` contacts on some boundary.
inline std::set<LabelPair> contact_threshold_pairs(const ContactTable& table,
                                                   std::uint64_t min_contacts) {
  std::set<LabelPair> out;
  for (const BoundaryContacts& bc : table) {
    for (const auto& [pair, n] : bc.counts) {
      if (n >= min_contacts) out.insert(pair);
    }
  }
  return out;
}

/// Unions all pairs and relabels every pixel to the smallest label of its
/// set. Returns (distinct labels before) - (distinct labels after).
inline std::size_t apply_merges(LabelMap& map, const std::set<LabelPair>& pairs) {
  const std::size_t before = distinct_labels(map).size();
  if (pairs.empty()) return 0;
  std::unordered_map<Label, std::uint32_t> index;
  std::vector<Label> label_of;
  auto id = [&](Label l) {
    auto [it, inserted] = index.try_emplace(l, static_cast<std::uint32_t>(label_of.size()));
    if (inserted) label_of.push_back(l);
    return it->second;
  };
  UnionFind<std::uint32_t> uf;
  for (const auto& [a, b] : pairs) {
    if (a == kUnlabeled || b == kUnlabeled) throw std::invalid_argument("apply_merges: pair with label 0");
    const std::uint32_t ia = id(a);
    while (uf.size() < label_of.size()) uf.add();
    const std::uint32_t ib = id(b);
    while (uf.size() < label_of.size()) uf.add();
    uf.unite(ia, ib);
  }
  std::vector<Label> root_label(label_of.size(), 0);
  for (std::uint32_t i = 0; i < label_of.size(); ++i) {
    Label& r = root_label[uf.find(i)];
    if (r == 0 || label_of[i] < r) r = label_of[i];
  }
  std::unordered_map<Label, Label> target;
  target.reserve(label_of.size());
  for (std::uint32_t i = 0; i < label_of.size(); ++i) target[label_of[i]] = root_label[uf.find(i)];

  Label last_from = kUnlabeled;
  Label last_to = kUnlabeled;
  for (Label& l : map.labels()) {
    if (l == kUnlabeled) continue;
    if (l != last_from) {
      last_from = l;
      const auto it = target.find(l);
      last_to = it == target.end() ? l : it->second;
    }
    l = last_to;
  }
  return before - distinct_labels(map).size();
}

/// Relabels small 8-connected components whose whole 4-adjacent exterior is a
/// single other label, until nothing changes. Components touching the image
/// border or an unlabeled pixel are left alone. Returns the number of
/// components absorbed.
inline std::size_t absorb_enclosed(LabelMap& map, std::uint64_t max_area) {
  if (max_area == 0 || map.size() == 0) return 0;
  const std::uint32_t w = map.width();
  const std::uint32_t h = map.height();
  std::size_t absorbed = 0;
  for (;;) {
    RunTable t = label_runs(map);
    group_runs(t, Connectivity::eight);
    std::vector<std::uint64_t> area(t.group_count, 0);
    std::vector<std::vector<std::uint32_t>> members(t.group_count);
    for (std::uint32_t i = 0; i < t.runs.size(); ++i) {
      const std::uint32_t g = t.group[i];
      area[g] += t.runs[i].x1 - t.runs[i].x0 + 1;
      if (area[g] <= max_area) members[g].push_back(i);
    }
    const auto labels = map.labels();
    std::vector<std::pair<std::uint32_t, Label>> moves;
    for (std::uint32_t g = 0; g < t.group_count; ++g) {
      if (area[g] > max_area) continue;
      const Label self = t.runs[members[g].front()].value;
      Label outer = kUnlabeled;
      bool ok = true;
      auto see = [&](Label n) {
        if (n == self) return;
        if (n == kUnlabeled || (outer != kUnlabeled && n != outer)) {
          ok = false;
          return;
        }
        outer = n;
      };
      for (std::uint32_t i : members[g]) {
        const RowRun& r = t.runs[i];
        if (r.x0 == 0 || r.x1 + 1 == w || r.y == 0 || r.y + 1 == h) {
          ok = false;
          break;
        }
        const Label* row = labels.data() + std::size_t{r.y} * w;
        const Label* above = row - w;
        const Label* below = row + w;
        see(row[r.x0 - 1]);
        see(row[r.x1 + 1]);
        for (std::uint32_t x = r.x0; x <= r.x1 && ok; ++x) {
          see(above[x]);
          see(below[x]);
        }
        if (!ok) break;
      }
      if (ok && outer != kUnlabeled) moves.push_back({g, outer});
    }
    if (moves.empty()) break;
    for (const auto& [g, outer] : moves) {
      for (std::uint32_t i : members[g]) {
        const RowRun& r = t.runs[i];
        Label* row = map.labels().data() + std::size_t{r.y} * w;
        std::fill(row + r.x0, row + r.x1 + 1, outer);
      }
    }
    absorbed += moves.size();
  }
  return absorbed;
}

enum class MergeStrategy { best_match, naive, mutual_best, contact_threshold, none };

inline const char* to_string(MergeStrategy s) {
  switch (s) {
    case MergeStrategy::best_match: return "best_match";
    case MergeStrategy::naive: return "naive";
    case MergeStrategy::mutual_best: return "mutual_best";
    case MergeStrategy::contact_threshold: return "contact_threshold";
    case MergeStrategy::none: return "none";
  }
  return "unknown";
}

inline MergeStrategy parse_merge_strategy(const std::string& s) {
  if (s == "best_match") return MergeStrategy::best_match;
  if (s == "naive") return MergeStrategy::naive;
  if (s == "mutual_best") return MergeStrategy::mutual_best;
  if (s == "contact_threshold") return MergeStrategy::contact_threshold;
  if (s == "none") return MergeStrategy::none;
  throw std::invalid_argument("unknown merge strategy '" + s + "'");
}

struct MergeConfig {
  MergeStrategy strategy = MergeStrategy::best_match;
  std::uint64_t enclosed_max = 500;
  std::uint64_t min_area = 100;
  std::uint64_t contact_min = 10;  // contact_threshold strategy only
};

inline std::set<LabelPair> select_pairs(const ContactTable& table, const MergeConfig& cfg) {
  switch (cfg.strategy) {
    case MergeStrategy::best_match: return best_match_pairs(table);
    case MergeStrategy::naive: return naive_merge_pairs(table);
    case MergeStrategy::mutual_best: return mutual_best_pairs(table);
    case MergeStrategy::contact_threshold: return contact_threshold_pairs(table, cfg.contact_min);
    case MergeStrategy::none: return {};
  }
  return {};
}

struct MergeReport {
  MergeStrategy strategy = MergeStrategy::best_match;
  std::vector<std::pair<Boundary, std::size_t>> boundary_pairs;  // touching pairs per boundary
  std::size_t contact_pairs = 0;
  std::size_t chosen_pairs = 0;
  std::size_t merges = 0;
  std::size_t segments_before = 0;
  std::size_t segments_after_merge = 0;
  std::size_t absorbed = 0;
  std::size_t removed = 0;
  std::size_t segments_final = 0;
  double coverage_after_merge = 0.0;
  double coverage_final = 0.0;
};

/// Contacts, pair selection, union, enclosed absorption, small-segment
/// removal, then a sequential relabel to 1..n. With strategy `none` the
/// cross-tile step is skipped but post-processing still runs.
inline MergeReport merge_tiles(LabelMap& map, const TilePlan& plan, const MergeConfig& cfg) {
  MergeReport rep;
  rep.strategy = cfg.strategy;
  rep.segments_before = distinct_labels(map).size();
  const ContactTable table = build_contacts(map, plan);
  for (const BoundaryContacts& bc : table) {
    rep.boundary_pairs.push_back({bc.boundary, bc.counts.size()});
    rep.contact_pairs += bc.counts.size();
  }
  const std::set<LabelPair> pairs = select_pairs(table, cfg);
  rep.chosen_pairs = pairs.size();
  rep.merges = apply_merges(map, pairs);
  rep.segments_after_merge = rep.segments_before - rep.merges;
  rep.coverage_after_merge = coverage(map);
  rep.absorbed = absorb_enclosed(map, cfg.enclosed_max);
  rep.removed = remove_small(map, cfg.min_area);
  rep.segments_final = relabel_sequential(map);
  rep.coverage_final = coverage(map);
  return rep;
}

inline nlohmann::ordered_json to_json(const MergeReport& r) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(r.strategy);
  j["segments_before"] = r.segments_before;
  j["contact_pairs"] = r.contact_pairs;
  j["chosen_pairs"] = r.chosen_pairs;
  j["merges"] = r.merges;
  j["segments_after_merge"] = r.segments_after_merge;
  j["absorbed"] = r.absorbed;
  j["removed"] = r.removed;
  j["segments_final"] = r.segments_final;
  j["coverage_after_merge"] = r.coverage_after_merge;
  j["coverage_final"] = r.coverage_final;
  auto bs = nlohmann::ordered_json::array();
  for (const auto& [b, n] : r.boundary_pairs) {
    bs.push_back({{"orientation", b.vertical ? "vertical" : "horizontal"},
                  {"position", b.position},
                  {"start", b.start},
                  {"length", b.length},
                  {"tiles", {b.tile_a, b.tile_b}},
                  {"pairs", n}});
  }
  j["boundaries"] = std::move(bs);
  return j;
}

}  // namespace rsseg
