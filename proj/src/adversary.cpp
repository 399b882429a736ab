#include "ksim/adversary.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace ksim {

PhaseAdversary::PhaseAdversary(TreeGeometry const& geom, NodePath root, int depth,
                               long branching, Rat slack, Rat cap_self,
                               CostLedger const* self_ledger)
    : geom_(&geom),
      root_(std::move(root)),
      depth_(depth),
      branching_(branching),
      slack_(std::move(slack)),
      cap_self_(std::move(cap_self)),
      self_ledger_(self_ledger) {
  if (depth_ < 0) throw std::invalid_argument("adversary depth must be >= 0");
  if (branching_ < 2) throw std::invalid_argument("adversary branching must be >= 2");
  if (depth_ >= 1) {
    cap_child_ = level_mass(branching_, depth_ - 1);
    fill_threshold_ = cap_child_ - slack_;
    if (fill_threshold_ <= 0)
      throw std::invalid_argument("slack must be smaller than the child cap");
    // Artificial phase 0: children 0..b-1 count as marked, no requests.
    for (long c = 0; c < branching_; ++c)
      prev_marked_.push_back(static_cast<std::uint32_t>(c));
    next_fresh_ = static_cast<std::uint32_t>(branching_);
  }
}

AdvEvent PhaseAdversary::instance_start_event() const {
  AdvEvent e = base_event(AdvEvent::Kind::InstanceStart);
  e.cap = cap_self_;
  e.phase0_marked = prev_marked_;
  return e;
}

AdvEvent PhaseAdversary::base_event(AdvEvent::Kind kind) const {
  AdvEvent e;
  e.kind = kind;
  e.instance = root_;
  e.instance_depth = depth_;
  e.phase = phase_;
  return e;
}

Rat PhaseAdversary::capped_child_mass(MassSource const& src, std::uint32_t child) const {
  Rat raw = src.subtree_mass(root_.child(child));
  return rat_min(raw, cap_child_);
}

void PhaseAdversary::ensure_sub(std::uint32_t child, MassSource const& src,
                                std::vector<AdvEvent>& events) {
  if (depth_ - 1 < 1) return;  // leaf children need no machinery
  if (subs_.count(child)) return;
  NodePath child_root = root_.child(child);
  Sub sub;
  sub.view = std::make_unique<CappedView>(*geom_, child_root, cap_child_, src);
  sub.adv = std::make_unique<PhaseAdversary>(*geom_, child_root, depth_ - 1, branching_,
                                             slack_, cap_child_, &sub.view->ledger());
  // Announce the sub-instance here: its view starts observing the stream at
  // this exact point of the trace, which the verifier mirrors.
  sub.adv->announced_ = true;
  events.push_back(sub.adv->instance_start_event());
  subs_.emplace(child, std::move(sub));
}

void PhaseAdversary::begin_phase(MassSource const& src, std::vector<AdvEvent>& events) {
  ++phase_;
  std::uint32_t fresh = next_fresh_++;
  marked_.assign(1, fresh);
  loop_j_ = 0;
  AdvEvent e = base_event(AdvEvent::Kind::PhaseStart);
  e.child = fresh;
  events.push_back(std::move(e));
  AdvEvent m = base_event(AdvEvent::Kind::Mark);
  m.j = 0;
  m.child = fresh;
  m.capped_mass = capped_child_mass(src, fresh);
  events.push_back(std::move(m));
  ensure_sub(fresh, src, events);
}

void PhaseAdversary::do_mark(MassSource const& src, std::vector<AdvEvent>& events) {
  std::optional<std::uint32_t> chosen;
  Rat chosen_mass;
  for (std::uint32_t c : prev_marked_) {
    if (std::find(marked_.begin(), marked_.end(), c) != marked_.end()) continue;
    Rat m = capped_child_mass(src, c);
    if (!chosen || m < chosen_mass || (m == chosen_mass && c < *chosen)) {
      chosen = c;
      chosen_mass = m;
    }
  }
  assert(chosen.has_value());
  AdvEvent e = base_event(AdvEvent::Kind::Mark);
  e.j = loop_j_;
  e.child = *chosen;
  e.capped_mass = chosen_mass;
  e.bound = (cap_self_ - Rat(loop_j_) * fill_threshold_) / Rat(branching_ - loop_j_ + 1);
  events.push_back(std::move(e));
  marked_.push_back(*chosen);
  ensure_sub(*chosen, src, events);
}

void PhaseAdversary::complete_phase(std::vector<AdvEvent>& events) {
  std::optional<std::uint32_t> dropped;
  for (std::uint32_t c : prev_marked_) {
    if (std::find(marked_.begin(), marked_.end(), c) == marked_.end()) {
      assert(!dropped.has_value());
      dropped = c;
    }
  }
  assert(dropped.has_value());
  AdvEvent e = base_event(AdvEvent::Kind::PhaseComplete);
  e.marked = marked_;
  e.dropped = *dropped;
  if (self_ledger_) {
    e.down_by_level = self_ledger_->down_by_level();
    e.up_by_level = self_ledger_->up_by_level();
  }
  events.push_back(std::move(e));
  dropped_.insert(*dropped);
  subs_.erase(*dropped);
  prev_marked_ = marked_;
  ++complete_phases_;
}

NodePath PhaseAdversary::delegate(std::uint32_t child, std::vector<AdvEvent>& events) {
  if (depth_ - 1 < 1) return root_.child(child);
  Sub& sub = subs_.at(child);
  return sub.adv->step(*sub.view, events);
}

NodePath PhaseAdversary::step(MassSource const& src, std::vector<AdvEvent>& events) {
  if (depth_ == 0) return root_;  // single node: every request lands here

  if (!announced_) {
    announced_ = true;
    events.push_back(instance_start_event());
  }
  if (phase_ == 0) begin_phase(src, events);

  while (true) {
    if (loop_j_ == 0) {
      std::uint32_t fresh = marked_.front();
      if (capped_child_mass(src, fresh) <= fill_threshold_)
        return delegate(fresh, events);
      loop_j_ = 1;
      do_mark(src, events);
      continue;
    }
    // Serve the least-mass marked subtree still below the threshold;
    // masses are re-read after every single request.
    std::optional<std::uint32_t> target;
    Rat target_mass;
    for (std::uint32_t c : marked_) {
      Rat m = capped_child_mass(src, c);
      if (m > fill_threshold_) continue;
      if (!target || m < target_mass || (m == target_mass && c < *target)) {
        target = c;
        target_mass = m;
      }
    }
    if (target) return delegate(*target, events);
    if (loop_j_ < branching_ - 1) {
      ++loop_j_;
      do_mark(src, events);
      continue;
    }
    complete_phase(events);
    begin_phase(src, events);
  }
}

void PhaseAdversary::ingest(std::vector<Transfer> const& stream) {
  if (stream.empty()) return;
  for (auto& [child, sub] : subs_) {
    auto local = sub.view->apply_stream(stream);
    sub.adv->ingest(local);
  }
}

EpochAdversary::EpochAdversary(TreeGeometry const& geom, long branching,
                               int inner_depth, Rat slack, Rat threshold)
    : geom_(&geom),
      branching_(branching),
      inner_depth_(inner_depth),
      slack_(std::move(slack)),
      threshold_(std::move(threshold)) {
  if (geom.depth() != inner_depth_ + 1)
    throw std::invalid_argument("epoch geometry must have depth inner_depth + 1");
}

NodePath EpochAdversary::step(MassSource const& raw, std::vector<AdvEvent>& events) {
  if (active_ && raw.subtree_mass(NodePath().child(*active_)) > threshold_) {
    AdvEvent e;
    e.kind = AdvEvent::Kind::EpochComplete;
    e.instance = NodePath().child(*active_);
    e.instance_depth = inner_depth_;
    e.epoch = epoch_;
    e.down_by_level = view_->ledger().down_by_level();
    e.up_by_level = view_->ledger().up_by_level();
    events.push_back(std::move(e));
    ++complete_epochs_;
    active_.reset();
    view_.reset();
    inner_.reset();
  }
  if (!active_) {
    std::uint32_t idx = next_index_;
    while (raw.subtree_mass(NodePath().child(idx)) != 0) ++idx;
    next_index_ = idx + 1;
    active_ = idx;
    ++epoch_;
    AdvEvent e;
    e.kind = AdvEvent::Kind::EpochStart;
    e.instance = NodePath().child(idx);
    e.instance_depth = inner_depth_;
    e.epoch = epoch_;
    events.push_back(std::move(e));
    view_ = std::make_unique<CappedView>(*geom_, NodePath().child(idx), threshold_, raw);
    inner_ = std::make_unique<PhaseAdversary>(*geom_, NodePath().child(idx), inner_depth_,
                                              branching_, slack_, threshold_,
                                              &view_->ledger());
  }
  return inner_->step(*view_, events);
}

void EpochAdversary::ingest(std::vector<Transfer> const& stream) {
  if (!view_ || stream.empty()) return;
  auto local = view_->apply_stream(stream);
  inner_->ingest(local);
}

}  // namespace ksim
