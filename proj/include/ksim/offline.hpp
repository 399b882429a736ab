#pragma once

#include "ksim/mass_config.hpp"
#include "ksim/params.hpp"
#include "ksim/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ksim {

// Cumulative cost per request prefix; at(m) is the value after the first m
// requests.
class PrefixCurve {
 public:
  void add(std::uint64_t m, Rat const& delta);
  Rat at(std::uint64_t m) const;
  Rat const& total() const { return total_; }

 private:
  std::vector<std::pair<std::uint64_t, Rat>> cumulative_;
  Rat total_ = 0;
};

// The retrospective offline strategy replayed over a trace: it keeps the
// per-construction server allotment inside every marked subtree, moving the
// allotment from the dropped subtree to the fresh one at each phase start
// (and into the active subtree at each epoch start).
struct AdvAccount {
  struct PhaseEntry {
    NodePath instance;
    int instance_depth = 0;
    std::uint64_t phase = 0;
    bool complete = false;
    Rat move_cost;  // downward cost of the dropped->fresh move
  };
  struct EpochEntry {
    std::uint64_t epoch = 0;
    bool complete = false;
    Rat inner_cost;  // downward cost inside the active subtree
    Rat entry_cost;  // downward cost of moving the allotment in
  };

  // Accounted cost: initial placements plus the move of every *complete*
  // phase (charged at completion); the final incomplete phase's move shows
  // up only in physical_total and is reported as slack, not cost.
  PrefixCurve curve;
  Rat total;
  // Full downward cost of the replayed feasible schedule; this is what
  // bounds the true optimum from above.
  Rat physical_total;
  std::vector<PhaseEntry> per_phase;
  std::vector<EpochEntry> per_epoch;
  bool feasible = true;  // the replayed schedule served every request
  std::string infeasible_detail;
};

struct ReplayInputs {
  TreeGeometry const* geom = nullptr;
  long branching = 0;
  int depth = 0;         // construction depth (inner depth in epoch modes)
  bool epoch_mode = false;
};

AdvAccount replay_offline(std::vector<trace::Json> const& records,
                          ReplayInputs const& inputs);

// --- brute-force optimal offline cost -------------------------------------

struct OptInstance {
  TreeGeometry geom{0, Rat(1)};
  std::vector<NodePath> nodes;  // the finite node set, root included
  std::vector<NodePath> requests;
  int servers = 1;  // h
};

struct OptBudget {
  int max_servers = 3;
  std::size_t max_nodes = 10;
  std::size_t max_requests = 14;
};

// Exact minimum downward-charged cost over all offline schedules of
// `servers` integral servers starting at the root: dynamic programming over
// (request index, server multiset) states with exact matching costs.
Rat brute_force_opt(OptInstance const& instance, OptBudget const& budget = {});

// Builds a tiny explicit instance from a recorded trace (touched nodes plus
// ancestors); `servers` comes from the caller.
OptInstance instance_from_trace(std::vector<trace::Json> const& records,
                                TreeGeometry const& geom, int servers);

// --- prefix bounds check ---------------------------------------------------

struct BoundsCheck {
  struct Row {
    std::uint64_t m = 0;
    Rat alg;
    Rat adv;
    std::optional<Rat> ratio;  // alg/adv when adv > 0
    Rat slack;                 // rho * adv - alg
  };
  std::vector<Row> rows;
  Rat stabilized_slack;  // max slack over prefixes up to the first complete phase
  bool slack_ok = true;  // no later prefix exceeds the stabilized slack
  std::optional<Rat> opt_total;
  bool opt_le_adv = true;
  std::vector<std::string> violations;
};

// Asserts ALG(m) >= rho * ADV(m) - slack for every prefix with a slack that
// stabilizes after the first complete phase; optionally checks OPT <= ADV.
BoundsCheck validate_bounds(PrefixCurve const& alg, AdvAccount const& adv,
                            Rat const& rho, std::uint64_t request_count,
                            std::optional<std::uint64_t> first_complete_phase_m,
                            std::optional<Rat> opt_total);

}  // namespace ksim
