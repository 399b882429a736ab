#pragma once

#include "ksim/capped_view.hpp"
#include "ksim/mass_config.hpp"
#include "ksim/params.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace ksim {

// Boundary events emitted by the adversary, recorded in the trace and
// consumed by the offline replay and the verifier.
struct AdvEvent {
  enum class Kind {
    InstanceStart,
    PhaseStart,
    Mark,
    PhaseComplete,
    EpochStart,
    EpochComplete,
  };
  Kind kind;
  NodePath instance;  // instance root ("" for the top instance)
  int instance_depth = 0;
  Rat cap;                                   // InstanceStart
  std::vector<std::uint32_t> phase0_marked;  // InstanceStart
  std::uint64_t phase = 0;                   // phase events
  std::uint32_t child = 0;                   // PhaseStart: fresh; Mark: chosen
  int j = 0;                                 // Mark: 0 = fresh, 1..b-1 = loop marks
  Rat capped_mass;                           // Mark: min(subtree mass, child cap)
  std::optional<Rat> bound;                  // Mark, j >= 1: the averaging bound
  std::vector<std::uint32_t> marked;         // PhaseComplete, in marking order
  std::uint32_t dropped = 0;                 // PhaseComplete
  std::uint64_t epoch = 0;                   // epoch events
  std::map<int, Rat> down_by_level;          // ledger snapshot at boundaries
  std::map<int, Rat> up_by_level;
};

// The recursive phase adversary for one (sub)tree instance. Each phase
// marks one fresh child subtree plus b-1 least-mass carryovers from the
// previous phase and fills every marked subtree past cap_child - slack,
// delegating request generation into per-subtree capped views.
class PhaseAdversary {
 public:
  PhaseAdversary(TreeGeometry const& geom, NodePath root, int depth, long branching,
                 Rat slack, Rat cap_self, CostLedger const* self_ledger);

  // Appends any boundary events that fire and returns the next request.
  // `src` is this instance's mass view (raw config for the top instance).
  NodePath step(MassSource const& src, std::vector<AdvEvent>& events);

  // Feeds this instance's transfer stream into the live subtree views and
  // recursively into their sub-adversaries.
  void ingest(std::vector<Transfer> const& stream);

  std::uint64_t complete_phases() const { return complete_phases_; }
  int depth() const { return depth_; }

 private:
  struct Sub {
    std::unique_ptr<CappedView> view;
    std::unique_ptr<PhaseAdversary> adv;
  };

  Rat capped_child_mass(MassSource const& src, std::uint32_t child) const;
  void ensure_sub(std::uint32_t child, MassSource const& src,
                  std::vector<AdvEvent>& events);
  void begin_phase(MassSource const& src, std::vector<AdvEvent>& events);
  void do_mark(MassSource const& src, std::vector<AdvEvent>& events);
  void complete_phase(std::vector<AdvEvent>& events);
  NodePath delegate(std::uint32_t child, std::vector<AdvEvent>& events);
  AdvEvent base_event(AdvEvent::Kind kind) const;
  AdvEvent instance_start_event() const;

  TreeGeometry const* geom_;
  NodePath root_;
  int depth_;
  long branching_;
  Rat slack_;
  Rat cap_self_;
  Rat cap_child_;
  Rat fill_threshold_;  // cap_child - slack
  CostLedger const* self_ledger_;

  bool announced_ = false;
  std::uint64_t phase_ = 0;
  int loop_j_ = 0;  // 0 while filling the fresh subtree, else 1..b-1
  std::vector<std::uint32_t> marked_;
  std::vector<std::uint32_t> prev_marked_;
  std::uint32_t next_fresh_ = 0;
  std::set<std::uint32_t> dropped_;
  std::map<std::uint32_t, Sub> subs_;
  std::uint64_t complete_phases_ = 0;
};

// The epoch game: repeatedly picks a zero-mass fresh subtree hanging off
// the root, runs the phase adversary inside it, and ends the epoch as soon
// as the online mass in the subtree strictly exceeds the threshold.
class EpochAdversary {
 public:
  EpochAdversary(TreeGeometry const& geom, long branching, int inner_depth,
                 Rat slack, Rat threshold);

  NodePath step(MassSource const& raw, std::vector<AdvEvent>& events);
  void ingest(std::vector<Transfer> const& stream);

  std::uint64_t complete_epochs() const { return complete_epochs_; }
  Rat const& threshold() const { return threshold_; }

 private:
  TreeGeometry const* geom_;
  long branching_;
  int inner_depth_;
  Rat slack_;
  Rat threshold_;  // online mass bound that ends an epoch (strict >)

  std::uint64_t epoch_ = 0;
  std::uint32_t next_index_ = 0;
  std::optional<std::uint32_t> active_;
  std::unique_ptr<CappedView> view_;
  std::unique_ptr<PhaseAdversary> inner_;
  std::uint64_t complete_epochs_ = 0;
};

}  // namespace ksim
