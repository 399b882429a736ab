#include "ksim/mass_config.hpp"

namespace ksim {

void LedgerDelta::add_down(int level, Rat const& cost) {
  if (cost == 0) return;
  down_by_level[level] += cost;
  down_total += cost;
}

void LedgerDelta::add_up(int level, Rat const& cost) {
  if (cost == 0) return;
  up_by_level[level] += cost;
  up_total += cost;
}

void LedgerDelta::merge(LedgerDelta const& other) {
  for (auto const& [level, cost] : other.down_by_level) add_down(level, cost);
  for (auto const& [level, cost] : other.up_by_level) add_up(level, cost);
}

void CostLedger::accrue(LedgerDelta const& delta) {
  for (auto const& [level, cost] : delta.down_by_level) down_by_level_[level] += cost;
  for (auto const& [level, cost] : delta.up_by_level) up_by_level_[level] += cost;
  down_total_ += delta.down_total;
  up_total_ += delta.up_total;
}

Rat CostLedger::down_at_level(int level) const {
  auto it = down_by_level_.find(level);
  return it == down_by_level_.end() ? Rat(0) : it->second;
}

MassConfig MassConfig::initial(Rat const& k) {
  if (k < 1) throw std::invalid_argument("initial mass must be >= 1");
  MassConfig c;
  c.mass_[NodePath::root()] = k;
  c.total_ = k;
  return c;
}

Rat MassConfig::node_mass(NodePath const& node) const {
  auto it = mass_.find(node);
  return it == mass_.end() ? Rat(0) : it->second;
}

Rat MassConfig::subtree_mass(NodePath const& subtree_root) const {
  // Descendants of a path are contiguous in path order.
  Rat sum(0);
  for (auto it = mass_.lower_bound(subtree_root);
       it != mass_.end() && subtree_root.contains(it->first); ++it)
    sum += it->second;
  return sum;
}

void MassConfig::for_each(
    std::function<void(NodePath const&, Rat const&)> const& fn) const {
  for (auto const& [node, m] : mass_) fn(node, m);
}

LedgerDelta MassConfig::apply(std::vector<Transfer> const& transfers,
                              TreeGeometry const& geom, CostLedger* ledger) {
  LedgerDelta delta;
  for (std::size_t i = 0; i < transfers.size(); ++i) {
    Transfer const& t = transfers[i];
    if (t.amount <= 0)
      throw TransferError(i, "transfer amount must be > 0 (transfer " +
                                 std::to_string(i) + ")");
    auto it = mass_.find(t.from);
    if (it == mass_.end() || it->second < t.amount)
      throw TransferError(i, "insufficient mass at '" + t.from.str() +
                                 "' (transfer " + std::to_string(i) + ")");
    if (t.from == t.to) continue;
    it->second -= t.amount;
    if (it->second == 0) mass_.erase(it);
    mass_[t.to] += t.amount;
    PathSplit split = geom.decompose(t.from, t.to);
    for (auto const& e : split.up) delta.add_up(e.level, t.amount * e.length);
    for (auto const& e : split.down) delta.add_down(e.level, t.amount * e.length);
  }
  if (ledger) ledger->accrue(delta);
  return delta;
}

bool MassConfig::served(NodePath const& request) const {
  return node_mass(request) >= 1;
}

}  // namespace ksim
