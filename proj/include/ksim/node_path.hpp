#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace ksim {

// A tree node named by the child index taken at each depth; empty = root.
// Ordering is lexicographic on the index sequence, which doubles as the
// deterministic tie-break order used throughout the adversary and the
// builtin algorithms.
struct NodePath {
  std::vector<std::uint32_t> indices;

  NodePath() = default;
  explicit NodePath(std::vector<std::uint32_t> idx) : indices(std::move(idx)) {}

  static NodePath root() { return NodePath{}; }

  NodePath child(std::uint32_t index) const {
    NodePath c = *this;
    c.indices.push_back(index);
    return c;
  }

  NodePath parent() const;  // precondition: not root

  std::size_t depth() const { return indices.size(); }
  bool is_root() const { return indices.empty(); }

  // Ancestor-or-equal.
  bool contains(NodePath const& other) const;

  // Slash-separated index string: "" for the root, "3/0/7" for depth 3.
  std::string str() const;
  static NodePath parse(std::string const& text);

  auto operator<=>(NodePath const&) const = default;
};

}  // namespace ksim
