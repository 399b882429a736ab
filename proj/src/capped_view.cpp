#include "ksim/capped_view.hpp"

#include <cassert>

namespace ksim {

namespace {

void bump(std::map<NodePath, Rat>& m, NodePath const& node, Rat const& delta) {
  auto it = m.find(node);
  if (it == m.end()) {
    if (delta != 0) m.emplace(node, delta);
    return;
  }
  it->second += delta;
  if (it->second == 0) m.erase(it);
}

}  // namespace

CappedView::CappedView(TreeGeometry const& geom, NodePath subtree_root, Rat cap,
                       MassSource const& raw)
    : geom_(&geom), root_(std::move(subtree_root)), cap_(std::move(cap)) {
  raw.for_each([&](NodePath const& node, Rat const& m) {
    if (!root_.contains(node)) return;
    raw_[node] = m;
    raw_subtree_ += m;
  });
  // Clip the raw restriction into the view in path order; park the excess.
  Rat remaining = cap_;
  for (auto const& [node, m] : raw_) {
    if (remaining == 0) break;
    Rat take = rat_min(m, remaining);
    view_[node] = take;
    remaining -= take;
  }
  if (remaining > 0) view_[root_] += remaining;  // virtual mass (deficit)
  parked_ = raw_subtree_ > cap_ ? Rat(raw_subtree_ - cap_) : Rat(0);
  deviated_ = parked_ > 0;
}

void CappedView::view_move(NodePath const& from, NodePath const& to,
                           Rat const& amount, std::vector<Transfer>& out) {
  if (amount == 0 || from == to) return;
  bump(view_, from, -amount);
  bump(view_, to, amount);
  LedgerDelta delta;
  PathSplit split = geom_->decompose(from, to);
  for (auto const& e : split.up) delta.add_up(e.level, amount * e.length);
  for (auto const& e : split.down) delta.add_down(e.level, amount * e.length);
  ledger_.accrue(delta);
  out.push_back({from, to, amount});
}

void CappedView::resync(std::vector<Transfer>& out) {
  // Reorganize the view into the raw restriction plus virtual root mass
  // (the raw subtree mass is back under the cap here).
  std::map<NodePath, Rat> target = raw_;
  if (cap_ > raw_subtree_) target[root_] += cap_ - raw_subtree_;
  std::vector<std::pair<NodePath, Rat>> deficit;  // target > view
  std::vector<std::pair<NodePath, Rat>> surplus;  // view > target
  for (auto const& [node, want] : target) {
    Rat have = node_mass(node);
    if (want > have) deficit.emplace_back(node, want - have);
  }
  for (auto const& [node, have] : view_) {
    auto it = target.find(node);
    Rat want = it == target.end() ? Rat(0) : it->second;
    if (have > want) surplus.emplace_back(node, have - want);
  }
  std::size_t si = 0;
  for (auto& [node, need] : deficit) {
    while (need > 0) {
      assert(si < surplus.size());
      Rat take = rat_min(need, surplus[si].second);
      view_move(surplus[si].first, node, take, out);
      need -= take;
      surplus[si].second -= take;
      if (surplus[si].second == 0) ++si;
    }
  }
  deviated_ = false;
}

std::vector<Transfer> CappedView::apply(Transfer const& t) {
  std::vector<Transfer> out;
  bool in_from = root_.contains(t.from);
  bool in_to = root_.contains(t.to);
  if (!in_from && !in_to) return out;

  Rat const& a = t.amount;
  bool parked_was_positive = parked_ > 0;

  if (in_from && in_to) {
    bump(raw_, t.from, -a);
    bump(raw_, t.to, a);
    Rat moved = rat_min(a, node_mass(t.from));
    if (moved < a) deviated_ = true;
    view_move(t.from, t.to, moved, out);
  } else if (in_to) {
    Rat before = raw_subtree_;
    raw_subtree_ += a;
    bump(raw_, t.to, a);
    Rat headroom = cap_ > before ? Rat(cap_ - before) : Rat(0);
    Rat take = rat_min(a, headroom);
    if (take > node_mass(root_)) {
      take = node_mass(root_);
      deviated_ = true;
    }
    parked_ += a - take;
    view_move(root_, t.to, take, out);
  } else {
    raw_subtree_ -= a;
    bump(raw_, t.from, -a);
    Rat from_parked = rat_min(parked_, a);
    parked_ -= from_parked;
    Rat q = a - from_parked;
    if (q > 0) {
      Rat moved = rat_min(q, node_mass(t.from));
      if (moved < q) deviated_ = true;
      view_move(t.from, root_, moved, out);
    }
  }

  if (parked_was_positive && parked_ == 0 && deviated_) resync(out);
  return out;
}

std::vector<Transfer> CappedView::apply_stream(std::vector<Transfer> const& ts) {
  std::vector<Transfer> out;
  for (auto const& t : ts) {
    auto local = apply(t);
    out.insert(out.end(), local.begin(), local.end());
  }
  return out;
}

Rat CappedView::node_mass(NodePath const& node) const {
  auto it = view_.find(node);
  return it == view_.end() ? Rat(0) : it->second;
}

Rat CappedView::subtree_mass(NodePath const& subtree_root) const {
  Rat sum(0);
  for (auto it = view_.lower_bound(subtree_root);
       it != view_.end() && subtree_root.contains(it->first); ++it)
    sum += it->second;
  return sum;
}

void CappedView::for_each(
    std::function<void(NodePath const&, Rat const&)> const& fn) const {
  for (auto const& [node, m] : view_) fn(node, m);
}

}  // namespace ksim
