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

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace rsseg {

/// Disjoint-set forest over [0, n) with union by size and path compression.
template <std::unsigned_integral Index = std::uint32_t>
class UnionFind {
 public:
  UnionFind() = default;
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), Index{0});
  }

  /// Appends a new singleton and returns its index.
  Index add() {
    const auto id = static_cast<Index>(parent_.size());
    parent_.push_back(id);
    size_.push_back(1);
    return id;
  }

  Index find(Index x) {
    Index root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const Index next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  /// Returns the surviving root.
  Index unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }

  bool same(Index a, Index b) { return find(a) == find(b); }
  std::size_t set_size(Index x) { return size_[find(x)]; }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<Index> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace rsseg
