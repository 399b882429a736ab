#include "ksim/harness.hpp"

#include "ksim/adversary.hpp"
#include "ksim/capped_view.hpp"

#include <mpfr.h>

#include <algorithm>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ksim {

std::string mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Lemma: return "lemma";
    case RunMode::Theorem: return "theorem";
    case RunMode::Infinite: return "infinite";
  }
  return "?";
}

RunMode mode_from(std::string const& name) {
  if (name == "lemma") return RunMode::Lemma;
  if (name == "theorem") return RunMode::Theorem;
  if (name == "infinite") return RunMode::Infinite;
  throw std::invalid_argument("unknown mode: '" + name + "'");
}

namespace {

struct Setup {
  ConstructionParams params;
  TreeGeometry geom{0, Rat(1)};
  Rat online_mass;  // the algorithm's reservoir
  Rat threshold;    // epoch-ending bound (epoch modes)
};

Setup resolve_setup(RunConfig const& config) {
  Setup s;
  ParamOverrides ov;
  ov.branching = config.override_b;
  ov.online_mass = config.override_k;
  ov.slack = config.epsilon;
  ov.scale = config.scale;

  if (config.mode == RunMode::Lemma) {
    int depth = config.depth.value_or(1);
    s.params = derive_params(config.rho.value_or(Rat(0)), depth, ov);
    s.geom = TreeGeometry(depth, s.params.scale, TreeShape::Recursive);
    s.online_mass = s.params.online_mass;
    return s;
  }

  // Epoch modes: branching comes from --override-b or the h-schedule.
  std::optional<int> depth = config.depth;
  if (!config.override_b) {
    if (!config.h)
      throw std::invalid_argument("epoch modes need --h or --override-b");
    EpochSchedule schedule = epoch_schedule_for_servers(*config.h);
    if (schedule.degenerate)
      throw std::invalid_argument(
          "schedule for h=" + schedule.offline_servers.get_str() +
          " is degenerate (branching " + std::to_string(schedule.branching) +
          " <= 1); pass --override-b to run anyway");
    ov.branching = schedule.branching;
    if (!depth) depth = schedule.depth_index;
  }
  if (!depth) throw std::invalid_argument("epoch modes with --override-b need --depth");
  if (*depth < 1) throw std::invalid_argument("epoch modes need depth >= 1");

  s.params = derive_params(config.rho.value_or(Rat(0)), *depth, ov);
  s.geom = TreeGeometry(*depth + 1, s.params.scale, TreeShape::Star);
  s.threshold = s.params.online_mass;  // b^i (1 + i/(2b))
  if (config.k_online) {
    s.online_mass = *config.k_online;
  } else if (config.mode == RunMode::Infinite) {
    // Stand-in for an unbounded reservoir.
    s.online_mass = rat_max(Rat(1000000), Rat(4) * s.threshold);
  } else {
    s.online_mass = Rat(4) * s.threshold;
  }
  if (s.online_mass < s.threshold)
    throw std::invalid_argument("online mass below the epoch threshold: epochs cannot end");
  return s;
}

trace::Json header_record(RunConfig const& config, Setup const& s) {
  trace::Json j;
  j["record"] = "header";
  j["schema"] = trace::kSchema;
  j["mode"] = mode_name(config.mode);
  j["algorithm"] = config.algorithm;
  trace::Json opts = trace::Json::object();
  for (auto const& [k, v] : config.algorithm_options) opts[k] = v;
  j["algorithm_options"] = std::move(opts);
  if (config.rho) j["rho"] = trace::rat_field(*config.rho);
  if (config.h) j["h_input"] = config.h->get_str();
  if (config.override_b) j["override_b"] = *config.override_b;
  if (config.override_k) j["override_k"] = trace::rat_field(*config.override_k);
  j["max_requests"] = config.budgets.max_requests;
  if (config.budgets.max_cost) j["max_cost"] = trace::rat_field(*config.budgets.max_cost);
  j["phase_target"] = config.phase_target;
  j["epoch_target"] = config.epoch_target;
  j["seed"] = config.seed;
  trace::Json d;
  d["depth"] = s.params.depth;
  d["b"] = s.params.branching;
  d["h"] = s.params.offline_servers.get_str();
  d["k"] = trace::rat_field(s.params.online_mass);
  d["epsilon"] = trace::rat_field(s.params.slack);
  d["scale"] = trace::rat_field(s.params.scale);
  d["paper_schedule"] = s.params.paper_schedule;
  d["shape"] = s.geom.shape() == TreeShape::Recursive ? "recursive" : "star";
  d["online_mass"] = trace::rat_field(s.online_mass);
  if (config.mode != RunMode::Lemma)
    d["threshold"] = trace::rat_field(s.threshold);
  // Non-authoritative decimal approximations, for human consumption only.
  if (config.rho) d["rho_approx30"] = rat_approx(*config.rho);
  if (s.params.branching >= 2)
    d["schedule_ratio_approx30"] = ln_approx(Int(s.params.branching), 3);
  j["derived"] = std::move(d);
  return j;
}

}  // namespace

RunConfig config_from_header(trace::Json const& header) {
  RunConfig c;
  c.mode = mode_from(header.at("mode").get<std::string>());
  c.algorithm = header.at("algorithm").get<std::string>();
  for (auto const& [k, v] : header.at("algorithm_options").items())
    c.algorithm_options[k] = v.get<std::string>();
  if (header.contains("rho")) c.rho = trace::rat_from(header.at("rho"));
  if (header.contains("h_input")) c.h = Int(header.at("h_input").get<std::string>());
  if (header.contains("override_b")) c.override_b = header.at("override_b").get<long>();
  if (header.contains("override_k")) c.override_k = trace::rat_from(header.at("override_k"));
  c.budgets.max_requests = header.at("max_requests").get<std::uint64_t>();
  if (header.contains("max_cost")) c.budgets.max_cost = trace::rat_from(header.at("max_cost"));
  c.phase_target = header.at("phase_target").get<std::uint64_t>();
  c.epoch_target = header.at("epoch_target").get<std::uint64_t>();
  c.seed = header.at("seed").get<std::uint64_t>();
  auto const& d = header.at("derived");
  c.depth = d.at("depth").get<int>();
  c.epsilon = trace::rat_from(d.at("epsilon"));
  c.scale = trace::rat_from(d.at("scale"));
  if (c.mode != RunMode::Lemma) {
    c.k_online = trace::rat_from(d.at("online_mass"));
    if (!c.override_b) c.override_b = d.at("b").get<long>();
  }
  return c;
}

RunResult run(RunConfig const& config) {
  Setup s = resolve_setup(config);
  RunResult res;
  res.params = s.params;
  res.geom = s.geom;

  MassConfig mass = MassConfig::initial(s.online_mass);
  CostLedger ledger;
  auto algorithm = make_algorithm(config.algorithm, config.algorithm_options);

  bool lemma = config.mode == RunMode::Lemma;
  std::unique_ptr<PhaseAdversary> phase_adv;
  std::unique_ptr<EpochAdversary> epoch_adv;
  if (lemma) {
    phase_adv = std::make_unique<PhaseAdversary>(
        s.geom, NodePath::root(), s.params.depth, s.params.branching, s.params.slack,
        s.params.online_mass, &ledger);
  } else {
    epoch_adv = std::make_unique<EpochAdversary>(s.geom, s.params.branching,
                                                 s.params.depth, s.params.slack,
                                                 s.threshold);
  }

  res.records.push_back(header_record(config, s));
  std::uint64_t requests = 0;
  std::uint64_t top_phases = 0;
  std::uint64_t epochs = 0;
  std::string budget_hit = "none";

  // Degenerate depth-0 lemma construction: b >= 2 is still enforced, but a
  // single-node tree has no phases; the loop below handles it uniformly.
  while (true) {
    if (requests >= config.budgets.max_requests) {
      budget_hit = "max_requests";
      res.records.push_back(trace::budget_record(budget_hit));
      break;
    }
    if (config.budgets.max_cost && ledger.down_total() >= *config.budgets.max_cost) {
      budget_hit = "max_cost";
      res.records.push_back(trace::budget_record(budget_hit));
      break;
    }
    std::vector<AdvEvent> events;
    NodePath request =
        lemma ? phase_adv->step(mass, events) : epoch_adv->step(mass, events);
    bool target_hit = false;
    for (auto const& e : events) {
      res.records.push_back(trace::event_record(e));
      if (e.kind == AdvEvent::Kind::PhaseComplete && e.instance.is_root()) {
        ++top_phases;
        if (!res.first_complete_phase_m) res.first_complete_phase_m = requests;
        if (config.phase_target && top_phases >= config.phase_target) target_hit = true;
      }
      if (e.kind == AdvEvent::Kind::EpochComplete) {
        ++epochs;
        if (!res.first_complete_phase_m) res.first_complete_phase_m = requests;
        if (config.epoch_target && epochs >= config.epoch_target) target_hit = true;
      }
    }
    if (target_hit) {
      budget_hit = lemma ? "phase_target" : "epoch_target";
      res.records.push_back(trace::budget_record(budget_hit));
      break;
    }
    try {
      ServeDecision decision = algorithm->serve(mass, request, s.geom);
      LedgerDelta delta = mass.apply(decision.transfers, s.geom, &ledger);
      if (!mass.served(request))
        throw std::runtime_error("request left unserved at '" + request.str() + "'");
      if (lemma)
        phase_adv->ingest(decision.transfers);
      else
        epoch_adv->ingest(decision.transfers);
      ++requests;
      res.records.push_back(
          trace::request_record(requests, request, decision.transfers, delta));
      res.alg_curve.add(requests, delta.down_total);
    } catch (std::exception const& ex) {
      res.records.push_back(trace::violation_record(requests + 1, ex.what()));
      budget_hit = "contract_violation";
      break;
    }
  }

  trace::Json footer;
  footer["record"] = "footer";
  footer["requests"] = requests;
  footer["alg_down"] = trace::rat_field(ledger.down_total());
  footer["alg_up"] = trace::rat_field(ledger.up_total());
  footer["down_by_level"] = trace::level_map(ledger.down_by_level());
  footer["up_by_level"] = trace::level_map(ledger.up_by_level());
  footer["complete_phases"] = top_phases;
  footer["complete_epochs"] = epochs;
  footer["budget_hit"] = budget_hit;
  res.records.push_back(std::move(footer));

  ReplayInputs inputs;
  inputs.geom = &res.geom;
  inputs.branching = s.params.branching;
  inputs.depth = s.params.depth;
  inputs.epoch_mode = !lemma;
  res.adv = replay_offline(res.records, inputs);

  Rat rho_check = config.rho.value_or(Rat(0));
  res.bounds = validate_bounds(res.alg_curve, res.adv, rho_check, requests,
                               res.first_complete_phase_m, std::nullopt);

  RunSummary& sum = res.summary;
  sum.mode = config.mode;
  sum.depth = s.params.depth;
  sum.branching = s.params.branching;
  sum.offline_servers = s.params.offline_servers;
  sum.online_mass = s.online_mass;
  sum.epsilon = s.params.slack;
  sum.algorithm = config.algorithm;
  sum.requests = requests;
  sum.alg_cost = ledger.down_total();
  sum.adv_cost = res.adv.total;
  if (res.adv.total > 0) sum.ratio = sum.alg_cost / res.adv.total;
  Rat offset(0);
  for (auto const& row : res.bounds.rows) offset = rat_max(offset, row.slack);
  sum.offset = offset;
  sum.complete_phases = top_phases;
  sum.complete_epochs = epochs;
  sum.budget_hit = budget_hit;
  sum.paper_schedule = s.params.paper_schedule;

  if (!config.trace_path.empty()) trace::write_jsonl(config.trace_path, res.records);
  if (!config.summary_path.empty()) {
    std::ofstream out(config.summary_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary: " + config.summary_path);
    out << summary_csv_header() << '\n' << summary_csv_row(sum) << '\n';
  }
  if (!config.bounds_csv_path.empty()) {
    std::ofstream out(config.bounds_csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write bounds: " + config.bounds_csv_path);
    out << bounds_csv(res.bounds);
  }
  return res;
}

std::string summary_csv_header() {
  return "mode,depth,b,h,k,epsilon,algorithm,requests,alg_cost,adv_cost,opt_cost,"
         "ratio,offset,complete_phases,complete_epochs,budget_hit";
}

std::string summary_csv_row(RunSummary const& s) {
  std::ostringstream out;
  out << mode_name(s.mode) << ',' << s.depth << ',' << s.branching << ','
      << s.offline_servers.get_str() << ',' << rat_str(s.online_mass) << ','
      << rat_str(s.epsilon) << ',' << s.algorithm << ',' << s.requests << ','
      << rat_str(s.alg_cost) << ',' << rat_str(s.adv_cost) << ','
      << (s.opt_cost ? rat_str(*s.opt_cost) : "") << ','
      << (s.ratio ? rat_str(*s.ratio) : "") << ',' << rat_str(s.offset) << ','
      << s.complete_phases << ',' << s.complete_epochs << ',' << s.budget_hit;
  return out.str();
}

std::string sweep_csv(std::vector<SweepRow> const& rows) {
  std::ostringstream out;
  out << summary_csv_header() << '\n';
  for (auto const& row : rows) {
    if (row.failed) {
      RunSummary s = row.summary;
      std::string err = row.error;
      for (auto& ch : err)
        if (ch == ',' || ch == '\n') ch = ';';
      s.budget_hit = "error:" + err;
      out << summary_csv_row(s) << '\n';
    } else {
      out << summary_csv_row(row.summary) << '\n';
    }
  }
  return out.str();
}

std::vector<SweepRow> sweep(SweepConfig const& config) {
  struct Cell {
    int depth;
    long b;
    std::string algorithm;
    std::optional<Rat> epsilon;
  };
  std::vector<Cell> cells;
  for (int depth : config.depths)
    for (long b : config.b_overrides)
      for (auto const& alg : config.algorithms)
        for (auto const& eps : config.epsilons) cells.push_back({depth, b, alg, eps});

  std::vector<SweepRow> rows(cells.size());
  auto run_cell = [&](std::size_t i) {
    Cell const& cell = cells[i];
    RunConfig rc;
    rc.mode = config.mode;
    rc.depth = cell.depth;
    rc.override_b = cell.b;
    rc.algorithm = cell.algorithm;
    rc.epsilon = cell.epsilon;
    rc.scale = config.scale;
    rc.budgets = config.budgets;
    rc.phase_target = config.phase_target;
    rc.epoch_target = config.epoch_target;
    SweepRow& row = rows[i];
    row.summary.mode = config.mode;
    row.summary.depth = cell.depth;
    row.summary.branching = cell.b;
    row.summary.algorithm = cell.algorithm;
    try {
      row.summary = run(rc).summary;
    } catch (std::exception const& ex) {
      row.failed = true;
      row.error = ex.what();
    }
  };

  int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::future<void>> pending;
    std::size_t next = 0;
    while (next < cells.size() || !pending.empty()) {
      while (static_cast<int>(pending.size()) < jobs && next < cells.size())
        pending.push_back(std::async(std::launch::async, run_cell, next++));
      pending.front().get();
      pending.erase(pending.begin());
    }
  }
  return rows;
}

std::vector<RunSummary> parse_summary_csv(std::string const& text) {
  std::vector<RunSummary> out;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("mode,", 0) == 0) continue;  // header
    }
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    while (fields.size() < 16) fields.push_back("");
    if (fields[15].rfind("error", 0) == 0) continue;
    RunSummary s;
    s.mode = mode_from(fields[0]);
    s.depth = std::stoi(fields[1]);
    s.branching = std::stol(fields[2]);
    s.offline_servers = Int(fields[3]);
    s.online_mass = parse_rat(fields[4]);
    s.epsilon = parse_rat(fields[5]);
    s.algorithm = fields[6];
    s.requests = std::stoull(fields[7]);
    s.alg_cost = parse_rat(fields[8]);
    s.adv_cost = parse_rat(fields[9]);
    if (!fields[10].empty()) s.opt_cost = parse_rat(fields[10]);
    if (!fields[11].empty()) s.ratio = parse_rat(fields[11]);
    s.offset = parse_rat(fields[12]);
    s.complete_phases = std::stoull(fields[13]);
    s.complete_epochs = std::stoull(fields[14]);
    s.budget_hit = fields[15];
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::string, std::string> plot_series(std::vector<RunSummary> const& summaries,
                                               bool x_is_depth, bool ln_ln_x) {
  std::map<std::string, std::vector<RunSummary const*>> by_series;
  for (auto const& s : summaries)
    by_series[mode_name(s.mode) + "-" + s.algorithm].push_back(&s);
  std::map<std::string, std::string> out;
  for (auto& [key, group] : by_series) {
    std::sort(group.begin(), group.end(), [&](auto* a, auto* b) {
      if (x_is_depth) return a->depth < b->depth;
      return a->offline_servers < b->offline_servers;
    });
    std::ostringstream os;
    os << (x_is_depth ? "depth" : "h") << "\tratio";
    if (ln_ln_x) os << "\tln_ln_h_approx30";
    os << '\n';
    for (auto* s : group) {
      if (x_is_depth)
        os << s->depth;
      else
        os << s->offline_servers.get_str();
      os << '\t' << (s->ratio ? rat_str(*s->ratio) : "");
      if (ln_ln_x) {
        std::string lnln = "";
        if (s->offline_servers > 2) {
          // ln(ln h), reporting only.
          mpfr_t x;
          mpfr_init2(x, 256);
          mpfr_set_z(x, s->offline_servers.get_mpz_t(), MPFR_RNDN);
          mpfr_log(x, x, MPFR_RNDN);
          mpfr_log(x, x, MPFR_RNDN);
          char buf[128];
          mpfr_snprintf(buf, sizeof(buf), "%.30Rg", x);
          mpfr_clear(x);
          lnln = buf;
        }
        os << '\t' << lnln;
      }
      os << '\n';
    }
    out[key + ".tsv"] = os.str();
  }
  return out;
}

std::string bounds_csv(BoundsCheck const& bounds) {
  std::ostringstream out;
  out << "prefix_m,alg_cost,adv_cost,opt_cost,ratio\n";
  for (auto const& row : bounds.rows) {
    out << row.m << ',' << rat_str(row.alg) << ',' << rat_str(row.adv) << ','
        << (bounds.opt_total && row.m == bounds.rows.back().m
                ? rat_str(*bounds.opt_total)
                : "")
        << ',' << (row.ratio ? rat_str(*row.ratio) : "") << '\n';
  }
  return out.str();
}

}  // namespace ksim
