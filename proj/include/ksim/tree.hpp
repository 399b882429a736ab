#pragma once

#include "ksim/node_path.hpp"
#include "ksim/rational.hpp"

#include <vector>

namespace ksim {

// Shape of the rooted metric. Recursive: every level is shrunk by `scale`,
// so edges at level L have length scale^(depth-L) and root edges length 1.
// Star: the root hangs unscaled recursive subtrees of depth depth-1 at
// distance 1 (the shape used by the epoch game).
enum class TreeShape { Recursive, Star };

struct EdgeDescriptor {
  NodePath child;  // lower endpoint
  int level;       // leaf-incident = 1, root-incident = depth
  Rat length;
};

struct PathSplit {
  std::vector<EdgeDescriptor> up;    // from the source up to the lca
  std::vector<EdgeDescriptor> down;  // from the lca down to the target
};

// Immutable after construction; children exist lazily (any index is valid),
// so the infinitely-branching construction costs nothing until touched.
class TreeGeometry {
 public:
  TreeGeometry(int depth, Rat scale, TreeShape shape = TreeShape::Recursive);

  int depth() const { return depth_; }
  Rat const& scale() const { return scale_; }
  TreeShape shape() const { return shape_; }

  bool valid(NodePath const& p) const { return static_cast<int>(p.depth()) <= depth_; }
  bool is_leaf(NodePath const& p) const { return static_cast<int>(p.depth()) == depth_; }

  // Level of the edge above `child`: depth - |child| + 1.
  int edge_level(NodePath const& child) const;
  Rat const& edge_length(int level) const;

  NodePath lca(NodePath const& a, NodePath const& b) const;
  PathSplit decompose(NodePath const& a, NodePath const& b) const;
  Rat distance(NodePath const& a, NodePath const& b) const;
  // Sum of the away-from-root edges on the a->b path (the charged part).
  Rat down_distance(NodePath const& a, NodePath const& b) const;

  // Length of any root-to-leaf path.
  Rat root_to_leaf_depth() const;

 private:
  void check(NodePath const& p) const;

  int depth_;
  Rat scale_;
  TreeShape shape_;
  std::vector<Rat> length_by_level_;  // index 0 unused; [1..depth]
};

// Lazily materialize a child; errors if `node` is already at leaf depth.
NodePath child_of(TreeGeometry const& geom, NodePath const& node, std::uint32_t index);

}  // namespace ksim
