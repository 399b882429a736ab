#include "ksim/offline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace ksim {

void PrefixCurve::add(std::uint64_t m, Rat const& delta) {
  if (delta == 0) return;
  total_ += delta;
  if (!cumulative_.empty() && cumulative_.back().first == m)
    cumulative_.back().second = total_;
  else
    cumulative_.emplace_back(m, total_);
}

Rat PrefixCurve::at(std::uint64_t m) const {
  Rat out(0);
  for (auto const& [idx, cum] : cumulative_) {
    if (idx > m) break;
    out = cum;
  }
  return out;
}

namespace {

struct PhaseInfo {
  std::uint64_t phase = 0;
  std::uint32_t fresh = 0;
  std::vector<std::uint32_t> marked;  // marking order, fresh first
  bool complete = false;
  std::uint32_t dropped = 0;  // valid when complete
};

struct InstanceInfo {
  NodePath root;
  int depth = 0;
  std::vector<std::uint32_t> phase0_marked;
  std::map<std::uint64_t, PhaseInfo> phases;
};

}  // namespace

AdvAccount replay_offline(std::vector<trace::Json> const& records,
                          ReplayInputs const& inputs) {
  TreeGeometry const& geom = *inputs.geom;
  long b = inputs.branching;

  // Pass 1: index the phase structure per instance, so each phase's dropped
  // subtree is known at its start (the offline strategy uses hindsight).
  std::map<std::string, InstanceInfo> instances;
  for (auto const& rec : records) {
    if (!trace::is_event_record(rec)) continue;
    AdvEvent e = trace::event_from(rec);
    std::string key = e.instance.str();
    switch (e.kind) {
      case AdvEvent::Kind::InstanceStart: {
        auto& info = instances[key];
        info.root = e.instance;
        info.depth = e.instance_depth;
        info.phase0_marked = e.phase0_marked;
        break;
      }
      case AdvEvent::Kind::PhaseStart: {
        auto& ph = instances[key].phases[e.phase];
        ph.phase = e.phase;
        ph.fresh = e.child;
        ph.marked.assign(1, e.child);
        break;
      }
      case AdvEvent::Kind::Mark: {
        if (e.j >= 1) instances[key].phases[e.phase].marked.push_back(e.child);
        break;
      }
      case AdvEvent::Kind::PhaseComplete: {
        auto& ph = instances[key].phases[e.phase];
        ph.complete = true;
        ph.dropped = e.dropped;
        break;
      }
      default:
        break;
    }
  }

  auto dropped_of = [&](InstanceInfo const& info, std::uint64_t phase) {
    auto const& ph = info.phases.at(phase);
    if (ph.complete) return ph.dropped;
    // Incomplete final phase: vacate the least-index previous-phase subtree
    // that the trace never re-marked (it receives no further requests).
    std::vector<std::uint32_t> const& prev =
        phase == 1 ? info.phase0_marked : info.phases.at(phase - 1).marked;
    for (std::uint32_t c : prev)
      if (std::find(ph.marked.begin(), ph.marked.end(), c) == ph.marked.end()) return c;
    throw std::runtime_error("malformed trace: no dropped candidate in phase " +
                             std::to_string(phase));
  };

  AdvAccount account;

  // Pass 2: replay the schedule against an explicit fractional config.
  // The server budget is b^depth in both modes (epoch mode reuses the same
  // allotment from epoch to epoch).
  Rat h_mass(level_servers(b, inputs.depth));
  if (h_mass < 1) h_mass = 1;
  MassConfig adv_cfg = MassConfig::initial(h_mass);
  CostLedger adv_ledger;
  Rat pending(0);    // accounted cost awaiting the next request index
  Rat accounted(0);  // running accounted total

  // Physical moves always run through the ledger; `charge` says whether the
  // cost is accounted immediately (placements, epoch entries) or held back
  // (phase moves, accounted only if the phase completes).
  auto apply_move = [&](std::vector<Transfer> const& ts, bool charge = true) {
    LedgerDelta delta = adv_cfg.apply(ts, geom, &adv_ledger);
    if (charge) {
      pending += delta.down_total;
      accounted += delta.down_total;
    }
    return delta;
  };
  // Held-back move costs keyed by (instance, phase).
  std::map<std::pair<std::string, std::uint64_t>, Rat> held;

  auto gather_to = [&](NodePath const& subtree_root) {
    // Pull every offline server inside the subtree up to its root (upward
    // moves only, so no charged cost).
    std::vector<Transfer> ts;
    adv_cfg.for_each([&](NodePath const& node, Rat const& m) {
      if (node != subtree_root && subtree_root.contains(node))
        ts.push_back({node, subtree_root, m});
    });
    if (!ts.empty()) apply_move(ts);
  };

  std::optional<NodePath> prev_epoch_subtree;
  std::optional<Rat> epoch_start_total;
  Rat epoch_entry_cost(0);

  for (auto const& rec : records) {
    std::string kind = rec.value("record", "");
    if (kind == "request") {
      std::uint64_t m = rec.at("m").get<std::uint64_t>();
      if (pending != 0) {
        account.curve.add(m, pending);
        pending = 0;
      }
      NodePath node = NodePath::parse(rec.at("node").get<std::string>());
      if (account.feasible && !adv_cfg.served(node)) {
        account.feasible = false;
        account.infeasible_detail =
            "offline replay cannot serve request " + std::to_string(m) + " at '" +
            node.str() + "'";
      }
      continue;
    }
    if (!trace::is_event_record(rec)) continue;
    AdvEvent e = trace::event_from(rec);
    auto it = instances.find(e.instance.str());
    switch (e.kind) {
      case AdvEvent::Kind::InstanceStart: {
        // Initial deployment: the instance's allotment, already gathered at
        // its root, spreads over the artificial-phase subtrees.
        if (e.instance_depth < 1) break;
        Rat child_servers(level_servers(b, e.instance_depth - 1));
        std::vector<Transfer> ts;
        for (std::uint32_t c : it->second.phase0_marked)
          ts.push_back({e.instance, e.instance.child(c), child_servers});
        apply_move(ts);
        break;
      }
      case AdvEvent::Kind::PhaseStart: {
        InstanceInfo const& info = it->second;
        if (info.depth < 1) break;
        std::uint32_t dropped = dropped_of(info, e.phase);
        NodePath from = e.instance.child(dropped);
        NodePath to = e.instance.child(e.child);
        Rat child_servers(level_servers(b, info.depth - 1));
        gather_to(from);
        LedgerDelta delta = apply_move({{from, to, child_servers}}, /*charge=*/false);
        held[{e.instance.str(), e.phase}] = delta.down_total;
        AdvAccount::PhaseEntry entry;
        entry.instance = e.instance;
        entry.instance_depth = info.depth;
        entry.phase = e.phase;
        entry.complete = info.phases.at(e.phase).complete;
        entry.move_cost = delta.down_total;
        account.per_phase.push_back(std::move(entry));
        break;
      }
      case AdvEvent::Kind::PhaseComplete: {
        auto hit = held.find({e.instance.str(), e.phase});
        if (hit != held.end()) {
          pending += hit->second;
          accounted += hit->second;
          held.erase(hit);
        }
        break;
      }
      case AdvEvent::Kind::EpochStart: {
        if (prev_epoch_subtree) gather_to(*prev_epoch_subtree);
        NodePath subtree = e.instance;
        Rat servers(level_servers(b, inputs.depth));
        std::vector<Transfer> ts;
        if (prev_epoch_subtree)
          ts.push_back({*prev_epoch_subtree, subtree, servers});
        else
          ts.push_back({NodePath::root(), subtree, servers});
        LedgerDelta delta = apply_move(ts);
        prev_epoch_subtree = subtree;
        epoch_start_total = adv_ledger.down_total();
        epoch_entry_cost = delta.down_total;
        break;
      }
      case AdvEvent::Kind::EpochComplete: {
        AdvAccount::EpochEntry entry;
        entry.epoch = e.epoch;
        entry.complete = true;
        entry.entry_cost = epoch_entry_cost;
        entry.inner_cost = adv_ledger.down_total() - *epoch_start_total;
        account.per_epoch.push_back(std::move(entry));
        epoch_start_total.reset();
        break;
      }
      default:
        break;
    }
  }
  if (epoch_start_total) {
    AdvAccount::EpochEntry entry;
    entry.epoch = account.per_epoch.size() + 1;
    entry.complete = false;
    entry.entry_cost = epoch_entry_cost;
    entry.inner_cost = adv_ledger.down_total() - *epoch_start_total;
    account.per_epoch.push_back(std::move(entry));
  }

  account.total = accounted;
  account.physical_total = adv_ledger.down_total();
  return account;
}

Rat brute_force_opt(OptInstance const& instance, OptBudget const& budget) {
  std::size_t n = instance.nodes.size();
  int h = instance.servers;
  if (h < 1 || h > budget.max_servers)
    throw std::invalid_argument("opt oracle: server count outside budget");
  if (n == 0 || n > budget.max_nodes)
    throw std::invalid_argument("opt oracle: node count outside budget");
  if (instance.requests.size() > budget.max_requests)
    throw std::invalid_argument("opt oracle: request count outside budget");

  std::map<NodePath, int> node_index;
  for (std::size_t i = 0; i < n; ++i) node_index[instance.nodes[i]] = static_cast<int>(i);
  auto index_of = [&](NodePath const& p) {
    auto it = node_index.find(p);
    if (it == node_index.end())
      throw std::invalid_argument("opt oracle: request outside the node set");
    return it->second;
  };
  int root = index_of(NodePath::root());

  // Downward-charged distances between nodes.
  std::vector<std::vector<Rat>> dd(n, std::vector<Rat>(n, Rat(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      dd[i][j] = instance.geom.down_distance(instance.nodes[i], instance.nodes[j]);

  // Enumerate server multisets as sorted index vectors.
  std::vector<std::vector<int>> states;
  std::vector<int> cur(static_cast<std::size_t>(h), 0);
  while (true) {
    states.push_back(cur);
    int pos = h - 1;
    while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == static_cast<int>(n) - 1) --pos;
    if (pos < 0) break;
    int next = cur[static_cast<std::size_t>(pos)] + 1;
    for (int q = pos; q < h; ++q) cur[static_cast<std::size_t>(q)] = next;
  }
  std::map<std::vector<int>, std::size_t> state_index;
  for (std::size_t s = 0; s < states.size(); ++s) state_index[states[s]] = s;

  // Minimum morph cost between multisets: best assignment over permutations.
  std::size_t S = states.size();
  std::vector<std::vector<Rat>> morph(S, std::vector<Rat>(S));
  std::vector<int> perm(static_cast<std::size_t>(h));
  for (std::size_t a = 0; a < S; ++a) {
    for (std::size_t c = 0; c < S; ++c) {
      for (int q = 0; q < h; ++q) perm[static_cast<std::size_t>(q)] = q;
      bool first = true;
      Rat best(0);
      do {
        Rat cost(0);
        for (int q = 0; q < h; ++q)
          cost += dd[static_cast<std::size_t>(states[a][static_cast<std::size_t>(q)])]
                    [static_cast<std::size_t>(
                        states[c][static_cast<std::size_t>(perm[static_cast<std::size_t>(q)])])];
        if (first || cost < best) {
          best = cost;
          first = false;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      morph[a][c] = best;
    }
  }

  std::vector<std::optional<Rat>> dp(S);
  std::vector<int> start(static_cast<std::size_t>(h), root);
  std::sort(start.begin(), start.end());
  dp[state_index.at(start)] = Rat(0);

  for (NodePath const& request : instance.requests) {
    int r = index_of(request);
    std::vector<std::optional<Rat>> next(S);
    for (std::size_t c = 0; c < S; ++c) {
      if (!std::binary_search(states[c].begin(), states[c].end(), r)) continue;
      for (std::size_t a = 0; a < S; ++a) {
        if (!dp[a]) continue;
        Rat cost = *dp[a] + morph[a][c];
        if (!next[c] || cost < *next[c]) next[c] = cost;
      }
    }
    dp = std::move(next);
  }

  std::optional<Rat> best;
  for (auto const& v : dp)
    if (v && (!best || *v < *best)) best = *v;
  if (!best) throw std::logic_error("opt oracle: no feasible schedule");
  return *best;
}

OptInstance instance_from_trace(std::vector<trace::Json> const& records,
                                TreeGeometry const& geom, int servers) {
  OptInstance inst;
  inst.geom = geom;
  inst.servers = servers;
  std::set<NodePath> nodes;
  nodes.insert(NodePath::root());
  auto add_with_ancestors = [&](NodePath p) {
    while (!p.is_root()) {
      nodes.insert(p);
      p = p.parent();
    }
  };
  for (auto const& rec : records) {
    if (rec.value("record", "") != "request") continue;
    add_with_ancestors(NodePath::parse(rec.at("node").get<std::string>()));
    inst.requests.push_back(NodePath::parse(rec.at("node").get<std::string>()));
    for (auto const& t : trace::transfers_from(rec)) {
      add_with_ancestors(t.from);
      add_with_ancestors(t.to);
    }
  }
  inst.nodes.assign(nodes.begin(), nodes.end());
  return inst;
}

BoundsCheck validate_bounds(PrefixCurve const& alg, AdvAccount const& adv,
                            Rat const& rho, std::uint64_t request_count,
                            std::optional<std::uint64_t> first_complete_phase_m,
                            std::optional<Rat> opt_total) {
  BoundsCheck check;
  std::uint64_t stabilize_after =
      first_complete_phase_m ? *first_complete_phase_m : request_count;
  Rat stabilized(0);
  for (std::uint64_t m = 0; m <= request_count; ++m) {
    BoundsCheck::Row row;
    row.m = m;
    row.alg = alg.at(m);
    row.adv = adv.curve.at(m);
    if (row.adv > 0) row.ratio = row.alg / row.adv;
    row.slack = rho * row.adv - row.alg;
    if (m <= stabilize_after) stabilized = rat_max(stabilized, row.slack);
    check.rows.push_back(std::move(row));
  }
  check.stabilized_slack = stabilized;
  for (auto const& row : check.rows) {
    if (row.slack > check.stabilized_slack) {
      check.slack_ok = false;
      check.violations.push_back(
          "prefix " + std::to_string(row.m) + ": slack " + rat_str(row.slack) +
          " exceeds stabilized bound " + rat_str(check.stabilized_slack));
    }
  }
  if (opt_total) {
    check.opt_total = opt_total;
    if (*opt_total > adv.physical_total) {
      check.opt_le_adv = false;
      check.violations.push_back("brute-force optimum " + rat_str(*opt_total) +
                                 " exceeds the replayed offline cost " +
                                 rat_str(adv.physical_total));
    }
  }
  return check;
}

}  // namespace ksim
