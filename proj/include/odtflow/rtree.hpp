// Copyright 2026 The ODT Flow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace odtflow {

/// Axis-aligned rectangle in (x, y) = (lon, lat).
struct Rect {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  bool empty() const { return min_x > max_x || min_y > max_y; }
  bool contains(double x, double y) const {
    return x >= min_x && x <= max_x && y >= min_y && y <= max_y;
  }
  void expand(double x, double y) {
    min_x = std::min(min_x, x);
    min_y = std::min(min_y, y);
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
  }
  void expand(const Rect& r) {
    min_x = std::min(min_x, r.min_x);
    min_y = std::min(min_y, r.min_y);
    max_x = std::max(max_x, r.max_x);
    max_y = std::max(max_y, r.max_y);
  }
  double center_x() const { return 0.5 * (min_x + max_x); }
  double center_y() const { return 0.5 * (min_y + max_y); }
};

/// Static bounding-rectangle tree, bulk-loaded with Sort-Tile-Recursive
/// packing. Immutable after construction; queries are reentrant.
template <typename Value, std::size_t FanOut = 16>
class StrTree {
  static_assert(FanOut >= 2);

 public:
  struct Entry {
    Rect box;
    Value value;
  };

  StrTree() = default;

  explicit StrTree(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) return;
    std::vector<std::uint32_t> order(entries_.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Rect> boxes(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) boxes[i] = entries_[i].box;

    pack(order, boxes);
    // Leaves reference entries, reordered so each leaf covers a contiguous run.
    std::vector<Entry> sorted;
    sorted.reserve(entries_.size());
    for (auto idx : order) sorted.push_back(std::move(entries_[idx]));
    entries_ = std::move(sorted);

    std::vector<std::uint32_t> level = make_nodes(entries_.size(), /*leaf=*/true,
                                                  [&](std::size_t i) { return entries_[i].box; });
    while (level.size() > 1) {
      std::vector<Rect> level_boxes(level.size());
      for (std::size_t i = 0; i < level.size(); ++i) level_boxes[i] = nodes_[level[i]].box;
      std::vector<std::uint32_t> idx(level.size());
      for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
      pack(idx, level_boxes);
      std::vector<std::uint32_t> ordered(level.size());
      for (std::size_t i = 0; i < idx.size(); ++i) ordered[i] = level[idx[i]];
      // Children of an inner node must be contiguous in `child_ids_`.
      const auto base = static_cast<std::uint32_t>(child_ids_.size());
      child_ids_.insert(child_ids_.end(), ordered.begin(), ordered.end());
      level = make_nodes(ordered.size(), /*leaf=*/false,
                         [&](std::size_t i) { return nodes_[ordered[i]].box; }, base);
    }
    root_ = level.front();
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Calls `visit(value)` for every entry whose box contains (x, y).
  template <typename Visitor>
  void query_point(double x, double y, Visitor&& visit) const {
    if (entries_.empty()) return;
    std::uint32_t stack[64];
    std::size_t top = 0;
    stack[top++] = root_;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!node.box.contains(x, y)) continue;
      if (node.leaf) {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
          if (entries_[i].box.contains(x, y)) visit(entries_[i].value);
        }
      } else {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
          stack[top++] = child_ids_[i];
        }
      }
    }
  }

  /// Number of tree levels; 0 for an empty tree.
  std::size_t height() const {
    if (entries_.empty()) return 0;
    std::size_t h = 1;
    for (std::uint32_t n = root_; !nodes_[n].leaf; n = child_ids_[nodes_[n].first]) ++h;
    return h;
  }

 private:
  struct Node {
    Rect box;
    std::uint32_t first = 0;
    std::uint32_t count = 0;
    bool leaf = false;
  };

  // Sorts `order` into STR tile order: slabs by x-center, then y-center within
  // each slab, so that consecutive runs of FanOut items are spatially compact.
  static void pack(std::vector<std::uint32_t>& order, const std::vector<Rect>& boxes) {
    const std::size_t n = order.size();
    const std::size_t leaves = (n + FanOut - 1) / FanOut;
    const auto slabs = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(leaves))));
    const std::size_t per_slab = slabs * FanOut;
    auto by_x = [&](std::uint32_t a, std::uint32_t b) {
      const double ax = boxes[a].center_x(), bx = boxes[b].center_x();
      return ax != bx ? ax < bx : a < b;
    };
    auto by_y = [&](std::uint32_t a, std::uint32_t b) {
      const double ay = boxes[a].center_y(), by = boxes[b].center_y();
      return ay != by ? ay < by : a < b;
    };
    std::sort(order.begin(), order.end(), by_x);
    for (std::size_t s = 0; s < n; s += per_slab) {
      const auto end = std::min(n, s + per_slab);
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(s),
                order.begin() + static_cast<std::ptrdiff_t>(end), by_y);
    }
  }

  template <typename BoxOf>
  std::vector<std::uint32_t> make_nodes(std::size_t n, bool leaf, BoxOf box_of,
                                        std::uint32_t base = 0) {
    std::vector<std::uint32_t> ids;
    for (std::size_t s = 0; s < n; s += FanOut) {
      Node node;
      node.leaf = leaf;
      node.first = base + static_cast<std::uint32_t>(s);
      node.count = static_cast<std::uint32_t>(std::min(FanOut, n - s));
      for (std::size_t i = s; i < s + node.count; ++i) node.box.expand(box_of(i));
      ids.push_back(static_cast<std::uint32_t>(nodes_.size()));
      nodes_.push_back(node);
    }
    return ids;
  }

  std::vector<Entry> entries_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> child_ids_;
  std::uint32_t root_ = 0;
};

}  // namespace odtflow
