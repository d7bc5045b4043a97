#pragma once

#include <compare>
#include <cstddef>
#include <set>
#include <utility>

namespace rglasso {

/// Unordered pair of distinct nodes, stored with i < j.
struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;

  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(std::size_t a, std::size_t b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

using EdgeSet = std::set<Edge>;

}  // namespace rglasso
