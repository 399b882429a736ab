#include "ksim/adversary.hpp"
#include "ksim/capped_view.hpp"
#include "ksim/harness.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

namespace ksim {

namespace {

struct VInst {
  NodePath root;
  int depth = 0;
  Rat cap;
  Rat cap_child;
  Rat fill_threshold;
  std::unique_ptr<CappedView> view;  // null only for the raw top instance ""
  std::vector<std::string> children;
  std::uint64_t phase = 0;
  bool phase_open = false;
  std::vector<std::uint32_t> prev_marked;
  std::vector<std::uint32_t> marked;
  std::set<std::uint32_t> ever_marked;
  std::set<std::uint32_t> dropped;
  Rat phase_start_down;
  Rat required_terms;
  Rat attributable_down;
  int child_edge_level = 0;
};

std::vector<std::string> read_lines(std::string const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read trace: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace

VerifyReport verify_trace(std::string const& trace_path, bool rerun_check) {
  VerifyReport report;
  auto fail = [&](std::uint64_t idx, std::string const& what) {
    report.violations.push_back("record " + std::to_string(idx) + ": " + what);
  };

  std::vector<std::string> lines;
  std::vector<trace::Json> records;
  try {
    lines = read_lines(trace_path);
    for (auto const& line : lines) records.push_back(trace::Json::parse(line));
  } catch (std::exception const& ex) {
    report.violations.push_back(std::string("unparseable trace: ") + ex.what());
    return report;
  }
  if (records.empty() || records.front().value("record", "") != "header" ||
      records.front().value("schema", "") != trace::kSchema) {
    report.violations.push_back("missing or unrecognized header record");
    return report;
  }

  trace::Json const& header = records.front();
  auto const& derived = header.at("derived");
  long b = derived.at("b").get<long>();
  int construction_depth = derived.at("depth").get<int>();
  Rat eps = trace::rat_from(derived.at("epsilon"));
  Rat scale = trace::rat_from(derived.at("scale"));
  Rat online_mass = trace::rat_from(derived.at("online_mass"));
  bool paper_schedule = derived.at("paper_schedule").get<bool>();
  bool star = derived.at("shape").get<std::string>() == "star";
  Rat rho = header.contains("rho") ? trace::rat_from(header.at("rho")) : Rat(0);
  TreeGeometry geom(star ? construction_depth + 1 : construction_depth, scale,
                    star ? TreeShape::Star : TreeShape::Recursive);

  MassConfig mass = MassConfig::initial(online_mass);
  CostLedger ledger;
  PrefixCurve alg_curve;
  std::map<std::string, std::unique_ptr<VInst>> insts;
  std::vector<std::string> roots;  // parentless instance keys, in creation order
  std::optional<std::uint32_t> active_epoch;
  std::uint64_t m = 0;
  std::uint64_t top_phases = 0;
  std::uint64_t epochs = 0;
  std::optional<std::uint64_t> first_complete_m;
  bool footer_seen = false;
  bool replay_broken = false;
  std::set<NodePath> touched;

  auto parent_key_of = [&](NodePath const& root) -> std::optional<std::string> {
    NodePath p = root;
    while (!p.is_root()) {
      p = p.parent();
      auto it = insts.find(p.str());
      if (it != insts.end()) return it->first;
    }
    return std::nullopt;
  };

  std::function<void(std::string const&, std::vector<Transfer> const&)> feed =
      [&](std::string const& key, std::vector<Transfer> const& stream) {
        VInst& inst = *insts.at(key);
        std::vector<Transfer> const* local = &stream;
        std::vector<Transfer> transformed;
        if (inst.view) {
          transformed = inst.view->apply_stream(stream);
          local = &transformed;
        }
        for (auto const& ckey : inst.children) {
          VInst& child = *insts.at(ckey);
          for (auto const& t : *local) {
            PathSplit split = geom.decompose(t.from, t.to);
            for (auto const& e : split.down)
              if (child.root.contains(e.child))
                child.attributable_down += t.amount * e.length;
          }
          feed(ckey, *local);
        }
      };

  auto inst_down_at = [&](VInst const& inst) {
    return inst.view ? inst.view->ledger().down_at_level(inst.child_edge_level)
                     : ledger.down_at_level(inst.child_edge_level);
  };

  for (std::size_t idx = 1; idx < records.size() && !replay_broken; ++idx) {
    trace::Json const& rec = records[idx];
    std::string kind = rec.value("record", "");

    if (kind == "request") {
      std::uint64_t m_rec = rec.at("m").get<std::uint64_t>();
      if (m_rec != m + 1) fail(idx, "request index out of sequence");
      NodePath node = NodePath::parse(rec.at("node").get<std::string>());
      touched.insert(node);
      // Freshness: the request must lie in a currently-marked, never-dropped
      // subtree of every enclosing instance.
      for (auto const& [key, inst] : insts) {
        if (inst->depth < 1) continue;
        if (!inst->root.contains(node) || node.depth() <= inst->root.depth()) continue;
        std::uint32_t child = node.indices[inst->root.depth()];
        if (inst->dropped.count(child))
          fail(idx, "request in dropped subtree " + std::to_string(child) +
                        " of instance '" + key + "'");
        else if (std::find(inst->marked.begin(), inst->marked.end(), child) ==
                 inst->marked.end())
          fail(idx, "request in unmarked subtree " + std::to_string(child) +
                        " of instance '" + key + "'");
      }
      if (star) {
        if (!active_epoch || node.indices.empty() || node.indices[0] != *active_epoch)
          fail(idx, "request outside the active epoch subtree");
      }
      std::vector<Transfer> transfers = trace::transfers_from(rec);
      for (auto const& t : transfers) {
        touched.insert(t.from);
        touched.insert(t.to);
      }
      LedgerDelta delta;
      try {
        delta = mass.apply(transfers, geom, &ledger);
      } catch (std::exception const& ex) {
        fail(idx, std::string("conservation: ") + ex.what());
        replay_broken = true;
        break;
      }
      if (trace::level_map(delta.down_by_level) != rec.at("down") ||
          trace::level_map(delta.up_by_level) != rec.at("up"))
        fail(idx, "ledger delta mismatch");
      if (!mass.served(node)) fail(idx, "request not served");
      if (ledger.up_total() > ledger.down_total())
        fail(idx, "downward dominance violated");
      for (auto const& rkey : roots) feed(rkey, transfers);
      m = m_rec;
      alg_curve.add(m, delta.down_total);
      continue;
    }

    if (trace::is_event_record(rec)) {
      AdvEvent e = trace::event_from(rec);
      std::string key = e.instance.str();
      switch (e.kind) {
        case AdvEvent::Kind::InstanceStart: {
          if (insts.count(key)) {
            fail(idx, "duplicate instance_start for '" + key + "'");
            break;
          }
          auto inst = std::make_unique<VInst>();
          inst->root = e.instance;
          inst->depth = e.instance_depth;
          inst->cap = e.cap;
          if (inst->depth >= 1) {
            inst->cap_child = level_mass(b, inst->depth - 1);
            inst->fill_threshold = inst->cap_child - eps;
            inst->child_edge_level = geom.depth() - static_cast<int>(e.instance.depth());
          }
          std::vector<std::uint32_t> expected0;
          for (long c = 0; c < b; ++c)
            expected0.push_back(static_cast<std::uint32_t>(c));
          if (e.phase0_marked != expected0)
            fail(idx, "unexpected artificial-phase marking in '" + key + "'");
          inst->prev_marked = e.phase0_marked;
          auto parent = parent_key_of(e.instance);
          if (!e.instance.is_root()) {
            MassSource const* src = &mass;
            if (parent && insts.at(*parent)->view) src = insts.at(*parent)->view.get();
            inst->view = std::make_unique<CappedView>(geom, e.instance, e.cap, *src);
          }
          if (parent)
            insts.at(*parent)->children.push_back(key);
          else
            roots.push_back(key);
          insts.emplace(key, std::move(inst));
          break;
        }
        case AdvEvent::Kind::PhaseStart: {
          auto it = insts.find(key);
          if (it == insts.end()) {
            fail(idx, "phase_start for unknown instance '" + key + "'");
            break;
          }
          VInst& inst = *it->second;
          if (e.phase != inst.phase + 1) fail(idx, "phase number out of sequence");
          inst.phase = e.phase;
          inst.phase_open = true;
          inst.marked.clear();
          inst.required_terms = 0;
          inst.phase_start_down = inst_down_at(inst);
          if (inst.ever_marked.count(e.child))
            fail(idx, "fresh subtree was marked before");
          break;
        }
        case AdvEvent::Kind::Mark: {
          auto it = insts.find(key);
          if (it == insts.end()) {
            fail(idx, "mark for unknown instance '" + key + "'");
            break;
          }
          VInst& inst = *it->second;
          MassSource const* src = inst.view ? static_cast<MassSource const*>(inst.view.get())
                                            : &mass;
          Rat recomputed =
              rat_min(src->subtree_mass(inst.root.child(e.child)), inst.cap_child);
          if (recomputed != e.capped_mass)
            fail(idx, "marked-subtree mass mismatch: recorded " +
                          rat_str(e.capped_mass) + ", replayed " + rat_str(recomputed));
          if (e.j == 0) {
            inst.required_terms += rat_max(Rat(0), inst.fill_threshold - recomputed);
          } else {
            if (!e.bound) {
              fail(idx, "loop mark without a bound");
            } else {
              Rat expected = (inst.cap - Rat(e.j) * inst.fill_threshold) /
                             Rat(b - e.j + 1);
              if (*e.bound != expected)
                fail(idx, "marking bound mismatch: recorded " + rat_str(*e.bound) +
                              ", expected " + rat_str(expected));
              if (e.capped_mass > *e.bound)
                fail(idx, "pigeonhole violated: mass " + rat_str(e.capped_mass) +
                              " > bound " + rat_str(*e.bound));
              inst.required_terms += rat_max(Rat(0), inst.fill_threshold - *e.bound);
            }
            if (std::find(inst.prev_marked.begin(), inst.prev_marked.end(), e.child) ==
                inst.prev_marked.end())
              fail(idx, "loop mark outside the previous phase's marked set");
          }
          if (std::find(inst.marked.begin(), inst.marked.end(), e.child) !=
              inst.marked.end())
            fail(idx, "subtree marked twice in one phase");
          inst.marked.push_back(e.child);
          inst.ever_marked.insert(e.child);
          break;
        }
        case AdvEvent::Kind::PhaseComplete: {
          auto it = insts.find(key);
          if (it == insts.end()) {
            fail(idx, "phase_complete for unknown instance '" + key + "'");
            break;
          }
          VInst& inst = *it->second;
          if (e.marked != inst.marked) fail(idx, "phase_complete marked-set mismatch");
          if (static_cast<long>(inst.marked.size()) != b)
            fail(idx, "complete phase with fewer than b marked subtrees");
          std::optional<std::uint32_t> dropped;
          for (std::uint32_t c : inst.prev_marked)
            if (std::find(inst.marked.begin(), inst.marked.end(), c) ==
                inst.marked.end()) {
              if (dropped) fail(idx, "more than one dropped subtree");
              dropped = c;
            }
          if (!dropped || *dropped != e.dropped)
            fail(idx, "dropped-subtree mismatch");
          if (inst.view) {
            if (trace::level_map(inst.view->ledger().down_by_level()) !=
                    trace::level_map(e.down_by_level) ||
                trace::level_map(inst.view->ledger().up_by_level()) !=
                    trace::level_map(e.up_by_level))
              fail(idx, "instance ledger snapshot mismatch");
          } else {
            if (trace::level_map(ledger.down_by_level()) !=
                    trace::level_map(e.down_by_level) ||
                trace::level_map(ledger.up_by_level()) != trace::level_map(e.up_by_level))
              fail(idx, "ledger snapshot mismatch");
          }
          Rat phase_down = inst_down_at(inst) - inst.phase_start_down;
          if (phase_down < inst.required_terms)
            fail(idx, "per-phase root-level cost " + rat_str(phase_down) +
                          " below required " + rat_str(inst.required_terms));
          inst.dropped.insert(e.dropped);
          inst.prev_marked = inst.marked;
          inst.phase_open = false;
          // The dropped subtree's machinery is abandoned for good.
          std::string dkey = inst.root.child(e.dropped).str();
          auto cit = std::find(inst.children.begin(), inst.children.end(), dkey);
          if (cit != inst.children.end()) inst.children.erase(cit);
          if (e.instance.is_root()) {
            ++top_phases;
            if (!first_complete_m) first_complete_m = m;
          }
          break;
        }
        case AdvEvent::Kind::EpochStart: {
          if (active_epoch) fail(idx, "epoch_start while an epoch is active");
          active_epoch = e.instance.indices.at(0);
          break;
        }
        case AdvEvent::Kind::EpochComplete: {
          if (!active_epoch || e.instance.indices.at(0) != *active_epoch) {
            fail(idx, "epoch_complete without a matching active epoch");
          } else {
            auto it = insts.find(key);
            if (it != insts.end() && it->second->view) {
              if (trace::level_map(it->second->view->ledger().down_by_level()) !=
                  trace::level_map(e.down_by_level))
                fail(idx, "epoch ledger snapshot mismatch");
            }
            // Strict threshold crossing.
            Rat threshold = trace::rat_from(derived.at("threshold"));
            if (mass.subtree_mass(e.instance) <= threshold)
              fail(idx, "epoch ended without exceeding the threshold");
            active_epoch.reset();
            ++epochs;
            if (!first_complete_m) first_complete_m = m;
          }
          break;
        }
      }
      continue;
    }

    if (kind == "budget") {
      report.notes.push_back("run stopped: " + rec.value("reason", "?"));
      continue;
    }
    if (kind == "contract_violation") {
      report.notes.push_back("trace records an algorithm contract violation: " +
                             rec.value("detail", ""));
      continue;
    }
    if (kind == "footer") {
      footer_seen = true;
      if (rec.at("requests").get<std::uint64_t>() != m)
        fail(idx, "footer request count mismatch");
      if (trace::rat_from(rec.at("alg_down")) != ledger.down_total() ||
          trace::rat_from(rec.at("alg_up")) != ledger.up_total())
        fail(idx, "footer totals mismatch");
      if (trace::level_map(ledger.down_by_level()) != rec.at("down_by_level") ||
          trace::level_map(ledger.up_by_level()) != rec.at("up_by_level"))
        fail(idx, "footer per-level totals mismatch");
      if (rec.at("complete_phases").get<std::uint64_t>() != top_phases)
        fail(idx, "footer complete-phase count mismatch");
      if (rec.at("complete_epochs").get<std::uint64_t>() != epochs)
        fail(idx, "footer complete-epoch count mismatch");
      continue;
    }
    fail(idx, "unknown record kind '" + kind + "'");
  }
  report.requests_checked = m;

  if (!footer_seen && !replay_broken) {
    report.incomplete_trace = true;
    report.notes.push_back(
        "trace ends without a footer: prefix-valid checks only, final phase incomplete");
  }
  for (auto const& [key, inst] : insts)
    if (inst->phase_open && key.empty())
      report.notes.push_back("final top-level phase " + std::to_string(inst->phase) +
                             " is incomplete");

  if (!replay_broken) {
    // Capped-view cost dominance: the transformed in-subtree cost never
    // exceeds the raw downward cost attributable to the subtree.
    for (auto const& [key, inst] : insts) {
      if (!inst->view) continue;
      if (inst->view->ledger().down_total() > inst->attributable_down)
        report.violations.push_back(
            "capped-view dominance violated in instance '" + key + "': " +
            rat_str(inst->view->ledger().down_total()) + " > " +
            rat_str(inst->attributable_down));
    }

    // Offline replay: feasibility and exact per-phase accounting.
    ReplayInputs inputs;
    inputs.geom = &geom;
    inputs.branching = b;
    inputs.depth = construction_depth;
    inputs.epoch_mode = star;
    AdvAccount adv = replay_offline(records, inputs);
    if (!adv.feasible) report.violations.push_back(adv.infeasible_detail);
    for (auto const& entry : adv.per_phase) {
      if (!entry.complete) continue;
      int level = geom.depth() - static_cast<int>(entry.instance.depth());
      Rat expected =
          Rat(level_servers(b, entry.instance_depth - 1)) * geom.edge_length(level);
      if (entry.move_cost != expected)
        report.violations.push_back(
            "offline per-phase cost mismatch in instance '" + entry.instance.str() +
            "' phase " + std::to_string(entry.phase) + ": " +
            rat_str(entry.move_cost) + " != " + rat_str(expected));
    }

    // Prefix bounds: slack must stabilize after the first complete phase.
    std::optional<Rat> opt_total;
    Int h_servers = level_servers(b, construction_depth);
    if (m > 0 && m <= 12 && h_servers <= 3 && touched.size() <= 10) {
      try {
        OptInstance oi = instance_from_trace(records, geom,
                                             static_cast<int>(h_servers.get_si()));
        opt_total = brute_force_opt(oi);
      } catch (std::exception const& ex) {
        report.notes.push_back(std::string("opt oracle skipped: ") + ex.what());
      }
    }
    BoundsCheck bounds =
        validate_bounds(alg_curve, adv, rho, m, first_complete_m, opt_total);
    if (paper_schedule) {
      for (auto const& v : bounds.violations) report.violations.push_back(v);
    } else {
      for (auto const& v : bounds.violations)
        report.notes.push_back("(non-paper schedule) " + v);
    }

    // Deterministic re-execution, byte for byte.
    if (rerun_check) {
      try {
        RunConfig rc = config_from_header(header);
        RunResult rr = run(rc);
        std::size_t shared = std::min(lines.size(), rr.records.size());
        bool mismatch = false;
        for (std::size_t i = 0; i < shared; ++i) {
          if (trace::to_line(rr.records[i]) != lines[i]) {
            report.violations.push_back("determinism: line " + std::to_string(i + 1) +
                                        " differs from re-execution");
            mismatch = true;
            break;
          }
        }
        if (!mismatch) {
          if (lines.size() > rr.records.size())
            report.violations.push_back("determinism: trace longer than re-execution");
          else if (lines.size() < rr.records.size() && !report.incomplete_trace)
            report.violations.push_back("determinism: trace shorter than re-execution");
          else if (lines.size() < rr.records.size())
            report.notes.push_back("truncated trace matches re-execution prefix");
        }
      } catch (std::exception const& ex) {
        report.violations.push_back(std::string("re-execution failed: ") + ex.what());
      }
    }
  }
  return report;
}

}  // namespace ksim
