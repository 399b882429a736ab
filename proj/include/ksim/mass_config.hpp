#pragma once

#include "ksim/node_path.hpp"
#include "ksim/rational.hpp"
#include "ksim/tree.hpp"

#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

namespace ksim {

// Read-only view of a fractional server distribution over tree nodes.
class MassSource {
 public:
  virtual ~MassSource() = default;
  virtual Rat node_mass(NodePath const& node) const = 0;
  virtual Rat subtree_mass(NodePath const& subtree_root) const = 0;
  virtual Rat total() const = 0;
  // Visits (node, mass) pairs with positive mass, in path order.
  virtual void for_each(
      std::function<void(NodePath const&, Rat const&)> const& fn) const = 0;
};

struct Transfer {
  NodePath from;
  NodePath to;
  Rat amount;  // > 0 at application time
};

struct LedgerDelta {
  std::map<int, Rat> down_by_level;
  std::map<int, Rat> up_by_level;
  Rat down_total = 0;
  Rat up_total = 0;

  void add_down(int level, Rat const& cost);
  void add_up(int level, Rat const& cost);
  void merge(LedgerDelta const& other);
  bool empty() const { return down_total == 0 && up_total == 0; }
};

// Cumulative downward/upward traversal cost with per-level decomposition.
// Only the downward totals are "charged" cost; upward is kept for the
// dominance check (up_total <= down_total when all mass starts at the root).
class CostLedger {
 public:
  void accrue(LedgerDelta const& delta);
  Rat const& down_total() const { return down_total_; }
  Rat const& up_total() const { return up_total_; }
  std::map<int, Rat> const& down_by_level() const { return down_by_level_; }
  std::map<int, Rat> const& up_by_level() const { return up_by_level_; }
  Rat down_at_level(int level) const;

 private:
  std::map<int, Rat> down_by_level_;
  std::map<int, Rat> up_by_level_;
  Rat down_total_ = 0;
  Rat up_total_ = 0;
};

class TransferError : public std::runtime_error {
 public:
  TransferError(std::size_t index, std::string const& what)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// A fractional configuration: map node -> positive mass, fixed total.
class MassConfig final : public MassSource {
 public:
  MassConfig() = default;

  // All `k` mass at the root.
  static MassConfig initial(Rat const& k);

  Rat node_mass(NodePath const& node) const override;
  Rat subtree_mass(NodePath const& subtree_root) const override;
  Rat total() const override { return total_; }
  void for_each(
      std::function<void(NodePath const&, Rat const&)> const& fn) const override;
  std::size_t touched_nodes() const { return mass_.size(); }

  // Applies the transfers in order; each pays amount x length on every edge
  // of its path, split into the downward/upward per-level buckets. Throws
  // TransferError (with the violating index) on a non-positive amount or an
  // insufficient source. Total mass is unchanged.
  LedgerDelta apply(std::vector<Transfer> const& transfers, TreeGeometry const& geom,
                    CostLedger* ledger = nullptr);

  // True iff mass at exactly `request` is >= 1.
  bool served(NodePath const& request) const;

 private:
  std::map<NodePath, Rat> mass_;
  Rat total_ = 0;
};

}  // namespace ksim
