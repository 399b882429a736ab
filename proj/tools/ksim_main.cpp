#include "ksim/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace ksim;

std::optional<Rat> opt_rat(std::string const& s) {
  if (s.empty()) return std::nullopt;
  return parse_rat(s);
}

AlgorithmOptions parse_algo_opts(std::vector<std::string> const& kvs) {
  AlgorithmOptions out;
  for (auto const& kv : kvs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--algo-opt expects key=value, got '" + kv + "'");
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

std::string read_file(std::string const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_run(CLI::App& app) {
  auto* cmd = app.add_subcommand("run", "Execute one adversarial run");
  struct Opts {
    std::string mode = "lemma";
    std::string rho, h, epsilon, scale = "1/4", override_k, k, max_cost;
    int depth = -1;
    long override_b = 0;
    std::string algorithm = "greedy";
    std::vector<std::string> algo_opts;
    std::uint64_t max_requests = 100000, phases = 0, epochs = 0, seed = 0;
    std::string trace, summary, bounds_csv;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--mode", opts->mode, "lemma|theorem|infinite")
      ->check(CLI::IsMember({"lemma", "theorem", "infinite"}));
  cmd->add_option("--rho", opts->rho, "target ratio (rational or decimal)");
  cmd->add_option("--h", opts->h, "offline server budget (epoch modes)");
  cmd->add_option("--depth", opts->depth, "construction depth i");
  cmd->add_option("--algorithm", opts->algorithm, "greedy|proportional|dc-tree|hoarder");
  cmd->add_option("--algo-opt", opts->algo_opts, "algorithm option key=value")
      ->take_all();
  cmd->add_option("--epsilon", opts->epsilon, "phase threshold slack (default 1/(4b))");
  cmd->add_option("--scale", opts->scale, "per-level edge shrink factor");
  cmd->add_option("--override-b", opts->override_b, "branching override");
  cmd->add_option("--override-k", opts->override_k, "construction mass override");
  cmd->add_option("--k", opts->k, "online reservoir (epoch modes)");
  cmd->add_option("--max-requests", opts->max_requests, "request budget");
  cmd->add_option("--max-cost", opts->max_cost, "downward-cost budget");
  cmd->add_option("--phases", opts->phases, "stop after N complete top-level phases");
  cmd->add_option("--epochs", opts->epochs, "stop after N complete epochs");
  cmd->add_option("--seed", opts->seed, "seed recorded for randomized plugins");
  cmd->add_option("--trace", opts->trace, "trace output path (JSONL)");
  cmd->add_option("--summary", opts->summary, "summary CSV output path");
  cmd->add_option("--bounds-csv", opts->bounds_csv, "per-prefix ratio table output path");
  cmd->set_config("--config", "", "flat key=value config file; CLI overrides it");
  cmd->callback([opts]() {
    RunConfig rc;
    rc.mode = mode_from(opts->mode);
    rc.rho = opt_rat(opts->rho);
    if (!opts->h.empty()) rc.h = Int(opts->h);
    if (opts->depth >= 0) rc.depth = opts->depth;
    rc.algorithm = opts->algorithm;
    rc.algorithm_options = parse_algo_opts(opts->algo_opts);
    rc.epsilon = opt_rat(opts->epsilon);
    rc.scale = parse_rat(opts->scale);
    if (opts->override_b > 0) rc.override_b = opts->override_b;
    rc.override_k = opt_rat(opts->override_k);
    rc.k_online = opt_rat(opts->k);
    rc.budgets.max_requests = opts->max_requests;
    rc.budgets.max_cost = opt_rat(opts->max_cost);
    rc.phase_target = opts->phases;
    rc.epoch_target = opts->epochs;
    rc.seed = opts->seed;
    rc.trace_path = opts->trace;
    rc.summary_path = opts->summary;
    rc.bounds_csv_path = opts->bounds_csv;
    RunResult res = run(rc);
    std::cout << summary_csv_header() << '\n' << summary_csv_row(res.summary) << '\n';
    if (res.summary.budget_hit == "contract_violation")
      std::cerr << "warning: run aborted on an algorithm contract violation\n";
    if (!res.adv.feasible) std::cerr << "warning: " << res.adv.infeasible_detail << '\n';
  });
  return 0;
}

int cmd_verify(CLI::App& app) {
  auto* cmd = app.add_subcommand("verify", "Re-check every invariant of a trace");
  auto trace_path = std::make_shared<std::string>();
  auto no_rerun = std::make_shared<bool>(false);
  cmd->add_option("--trace", *trace_path, "trace file to verify")->required();
  cmd->add_flag("--no-rerun", *no_rerun, "skip the deterministic re-execution check");
  cmd->callback([trace_path, no_rerun]() {
    VerifyReport report = verify_trace(*trace_path, !*no_rerun);
    for (auto const& note : report.notes) std::cout << "note: " << note << '\n';
    for (auto const& v : report.violations) std::cout << "violation: " << v << '\n';
    std::cout << (report.ok() ? "OK" : "FAILED") << " (" << report.requests_checked
              << " requests, " << report.violations.size() << " violations)\n";
    if (!report.ok()) throw CLI::RuntimeError(1);
  });
  return 0;
}

int cmd_oracle(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "oracle", "Exact offline optimum for a tiny instance or recorded trace");
  auto trace_path = std::make_shared<std::string>();
  auto instance_path = std::make_shared<std::string>();
  auto servers = std::make_shared<int>(0);
  cmd->add_option("--trace", *trace_path, "compute the optimum of a recorded trace");
  cmd->add_option("--instance", *instance_path, "explicit instance JSON file");
  cmd->add_option("--h", *servers, "offline server count (overrides the default)");
  cmd->callback([trace_path, instance_path, servers]() {
    OptInstance inst;
    if (!trace_path->empty()) {
      auto records = trace::read_jsonl(*trace_path);
      if (records.empty() || records.front().value("record", "") != "header")
        throw std::runtime_error("trace has no header");
      auto const& d = records.front().at("derived");
      bool star = d.at("shape").get<std::string>() == "star";
      int depth = d.at("depth").get<int>();
      TreeGeometry geom(star ? depth + 1 : depth, trace::rat_from(d.at("scale")),
                        star ? TreeShape::Star : TreeShape::Recursive);
      Int h = level_servers(d.at("b").get<long>(), depth);
      int h_servers = *servers > 0 ? *servers : static_cast<int>(h.get_si());
      inst = instance_from_trace(records, geom, h_servers);
    } else if (!instance_path->empty()) {
      auto j = trace::Json::parse(read_file(*instance_path));
      bool star = j.value("shape", "recursive") == "star";
      TreeGeometry geom(j.at("depth").get<int>(),
                        parse_rat(j.value("scale", "1/4")),
                        star ? TreeShape::Star : TreeShape::Recursive);
      inst.geom = geom;
      for (auto const& n : j.at("nodes"))
        inst.nodes.push_back(NodePath::parse(n.get<std::string>()));
      for (auto const& r : j.at("requests"))
        inst.requests.push_back(NodePath::parse(r.get<std::string>()));
      inst.servers = *servers > 0 ? *servers : j.at("h").get<int>();
    } else {
      throw CLI::ValidationError("oracle needs --trace or --instance");
    }
    Rat opt = brute_force_opt(inst);
    std::cout << "opt_cost," << rat_str(opt) << '\n';
  });
  return 0;
}

int cmd_sweep(CLI::App& app) {
  auto* cmd = app.add_subcommand("sweep", "Run a parameter grid and emit a summary CSV");
  struct Opts {
    std::string mode = "lemma";
    std::vector<int> depths;
    std::vector<long> b_overrides;
    std::vector<std::string> algorithms;
    std::vector<std::string> epsilons;
    std::string scale = "1/4", max_cost, out;
    std::uint64_t max_requests = 20000, phases = 0, epochs = 0;
    int jobs = 1;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--depths", opts->depths, "construction depths")->required();
  cmd->add_option("--b-overrides", opts->b_overrides, "branching values")->required();
  cmd->add_option("--algorithms", opts->algorithms, "algorithm names")->required();
  cmd->add_option("--epsilons", opts->epsilons, "slack values (default per-cell)");
  cmd->add_option("--mode", opts->mode)->check(CLI::IsMember({"lemma", "theorem", "infinite"}));
  cmd->add_option("--scale", opts->scale);
  cmd->add_option("--max-requests", opts->max_requests);
  cmd->add_option("--max-cost", opts->max_cost);
  cmd->add_option("--phases", opts->phases);
  cmd->add_option("--epochs", opts->epochs);
  cmd->add_option("--jobs", opts->jobs, "concurrent cells");
  cmd->add_option("--out", opts->out, "CSV output path")->required();
  cmd->callback([opts]() {
    SweepConfig sc;
    sc.mode = mode_from(opts->mode);
    sc.depths = opts->depths;
    sc.b_overrides = opts->b_overrides;
    sc.algorithms = opts->algorithms;
    if (!opts->epsilons.empty()) {
      sc.epsilons.clear();
      for (auto const& e : opts->epsilons) sc.epsilons.push_back(parse_rat(e));
    }
    sc.scale = parse_rat(opts->scale);
    sc.budgets.max_requests = opts->max_requests;
    sc.budgets.max_cost = opt_rat(opts->max_cost);
    sc.phase_target = opts->phases;
    sc.epoch_target = opts->epochs;
    sc.jobs = opts->jobs;
    auto rows = sweep(sc);
    std::ofstream out(opts->out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + opts->out);
    out << sweep_csv(rows);
    std::cout << rows.size() << " cells -> " << opts->out << '\n';
  });
  return 0;
}

int cmd_plot_data(CLI::App& app) {
  auto* cmd = app.add_subcommand("plot-data", "Reshape summaries into per-series files");
  auto summaries = std::make_shared<std::vector<std::string>>();
  auto out_dir = std::make_shared<std::string>();
  auto x_axis = std::make_shared<std::string>("depth");
  auto loglog = std::make_shared<bool>(false);
  cmd->add_option("--summaries", *summaries, "summary CSV files")->required();
  cmd->add_option("--out-dir", *out_dir, "output directory")->required();
  cmd->add_option("--x", *x_axis, "x axis: depth|h")->check(CLI::IsMember({"depth", "h"}));
  cmd->add_flag("--loglog", *loglog, "emit an ln(ln h) column for h-series");
  cmd->callback([summaries, out_dir, x_axis, loglog]() {
    std::vector<RunSummary> all;
    for (auto const& path : *summaries) {
      auto rows = parse_summary_csv(read_file(path));
      all.insert(all.end(), rows.begin(), rows.end());
    }
    auto files = plot_series(all, *x_axis == "depth", *loglog);
    std::filesystem::create_directories(*out_dir);
    for (auto const& [name, content] : files) {
      std::ofstream out(std::filesystem::path(*out_dir) / name, std::ios::binary);
      out << content;
    }
    std::cout << files.size() << " series -> " << *out_dir << '\n';
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulation and verification harness for adversarial lower-bound "
      "constructions against fractional k-server algorithms on tree metrics"};
  app.require_subcommand(1);
  cmd_run(app);
  cmd_verify(app);
  cmd_oracle(app);
  cmd_sweep(app);
  cmd_plot_data(app);
  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    return app.exit(e);
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
