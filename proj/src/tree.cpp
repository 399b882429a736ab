#include "ksim/tree.hpp"

#include <stdexcept>

namespace ksim {

TreeGeometry::TreeGeometry(int depth, Rat scale, TreeShape shape)
    : depth_(depth), scale_(std::move(scale)), shape_(shape) {
  if (depth_ < 0) throw std::invalid_argument("tree depth must be >= 0");
  if (scale_ <= 0 || scale_ > 1) throw std::invalid_argument("scale must be in (0, 1]");
  if (shape_ == TreeShape::Star && depth_ < 1)
    throw std::invalid_argument("star shape needs depth >= 1");
  length_by_level_.resize(static_cast<std::size_t>(depth_) + 1, Rat(0));
  for (int level = 1; level <= depth_; ++level) {
    int shrink;
    if (shape_ == TreeShape::Recursive) {
      shrink = depth_ - level;
    } else {
      // Root edges have length 1; below them sit unscaled recursive
      // subtrees of depth depth_-1.
      shrink = level == depth_ ? 0 : depth_ - 1 - level;
    }
    Rat len(1);
    for (int s = 0; s < shrink; ++s) len *= scale_;
    length_by_level_[static_cast<std::size_t>(level)] = len;
  }
}

void TreeGeometry::check(NodePath const& p) const {
  if (!valid(p)) throw std::invalid_argument("node path deeper than tree: " + p.str());
}

int TreeGeometry::edge_level(NodePath const& child) const {
  check(child);
  if (child.is_root()) throw std::invalid_argument("root has no incoming edge");
  return depth_ - static_cast<int>(child.depth()) + 1;
}

Rat const& TreeGeometry::edge_length(int level) const {
  if (level < 1 || level > depth_) throw std::invalid_argument("edge level out of range");
  return length_by_level_[static_cast<std::size_t>(level)];
}

NodePath TreeGeometry::lca(NodePath const& a, NodePath const& b) const {
  check(a);
  check(b);
  NodePath out;
  std::size_t n = std::min(a.indices.size(), b.indices.size());
  for (std::size_t i = 0; i < n && a.indices[i] == b.indices[i]; ++i)
    out.indices.push_back(a.indices[i]);
  return out;
}

PathSplit TreeGeometry::decompose(NodePath const& a, NodePath const& b) const {
  NodePath meet = lca(a, b);
  PathSplit split;
  NodePath cur = a;
  while (cur.depth() > meet.depth()) {
    split.up.push_back({cur, edge_level(cur), edge_length(edge_level(cur))});
    cur = cur.parent();
  }
  // Record the lca->b edges top-down.
  std::vector<EdgeDescriptor> down;
  cur = b;
  while (cur.depth() > meet.depth()) {
    down.push_back({cur, edge_level(cur), edge_length(edge_level(cur))});
    cur = cur.parent();
  }
  split.down.assign(down.rbegin(), down.rend());
  return split;
}

Rat TreeGeometry::distance(NodePath const& a, NodePath const& b) const {
  PathSplit split = decompose(a, b);
  Rat total(0);
  for (auto const& e : split.up) total += e.length;
  for (auto const& e : split.down) total += e.length;
  return total;
}

Rat TreeGeometry::down_distance(NodePath const& a, NodePath const& b) const {
  PathSplit split = decompose(a, b);
  Rat total(0);
  for (auto const& e : split.down) total += e.length;
  return total;
}

Rat TreeGeometry::root_to_leaf_depth() const {
  Rat total(0);
  for (int level = 1; level <= depth_; ++level) total += edge_length(level);
  return total;
}

NodePath child_of(TreeGeometry const& geom, NodePath const& node, std::uint32_t index) {
  if (geom.is_leaf(node))
    throw std::invalid_argument("leaf node has no children: '" + node.str() + "'");
  return node.child(index);
}

}  // namespace ksim
