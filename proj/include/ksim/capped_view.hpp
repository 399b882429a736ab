#pragma once

#include "ksim/mass_config.hpp"

#include <vector>

namespace ksim {

// Subtree-local accounting device: presents the configuration inside a
// subtree as if its total mass were exactly `cap`. A deficit appears as
// virtual mass at the subtree root; a surplus is parked outside the view
// and drawn down first by later outflows. The view consumes the raw
// transfer stream and emits the transformed local stream, so views nest.
//
// Invariants: the local view always totals `cap`; all view masses are
// nonnegative; while the raw subtree mass stays <= cap the view equals the
// raw restriction plus (cap - mass) virtual mass at the subtree root.
class CappedView final : public MassSource {
 public:
  CappedView(TreeGeometry const& geom, NodePath subtree_root, Rat cap,
             MassSource const& raw);

  // Feeds one raw transfer through the view. Returns the local transfers
  // that the transformed algorithm performs inside the subtree (possibly
  // empty); their cost is accrued to the view ledger.
  std::vector<Transfer> apply(Transfer const& raw_transfer);
  std::vector<Transfer> apply_stream(std::vector<Transfer> const& raw_transfers);

  Rat node_mass(NodePath const& node) const override;
  Rat subtree_mass(NodePath const& subtree_root) const override;
  Rat total() const override { return cap_; }
  void for_each(
      std::function<void(NodePath const&, Rat const&)> const& fn) const override;

  NodePath const& root() const { return root_; }
  Rat const& cap() const { return cap_; }
  Rat const& parked() const { return parked_; }
  Rat const& raw_subtree_mass() const { return raw_subtree_; }
  CostLedger const& ledger() const { return ledger_; }

 private:
  void view_move(NodePath const& from, NodePath const& to, Rat const& amount,
                 std::vector<Transfer>& out);
  void resync(std::vector<Transfer>& out);

  TreeGeometry const* geom_;
  NodePath root_;
  Rat cap_;
  std::map<NodePath, Rat> view_;  // local distribution, total == cap_
  std::map<NodePath, Rat> raw_;   // raw restriction, maintained from the stream
  Rat raw_subtree_ = 0;
  Rat parked_ = 0;
  bool deviated_ = false;
  CostLedger ledger_;
};

}  // namespace ksim
