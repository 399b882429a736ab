#pragma once

#include "ksim/algorithms.hpp"
#include "ksim/offline.hpp"
#include "ksim/params.hpp"
#include "ksim/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ksim {

enum class RunMode { Lemma, Theorem, Infinite };

std::string mode_name(RunMode mode);
RunMode mode_from(std::string const& name);

struct Budgets {
  std::uint64_t max_requests = 100000;
  std::optional<Rat> max_cost;  // downward-cost cap
};

struct RunConfig {
  RunMode mode = RunMode::Lemma;
  std::optional<Rat> rho;
  std::optional<Int> h;       // offline budget; drives the epoch schedule
  std::optional<int> depth;   // defaults: 1, or the schedule's depth index
  std::string algorithm = "greedy";
  AlgorithmOptions algorithm_options;
  std::optional<Rat> epsilon;
  Rat scale = Rat(1, 4);
  std::optional<long> override_b;
  std::optional<Rat> override_k;   // construction-mass override (lemma mode)
  std::optional<Rat> k_online;     // online reservoir (theorem/infinite modes)
  Budgets budgets;
  std::uint64_t phase_target = 0;  // stop after N complete top-level phases
  std::uint64_t epoch_target = 0;  // stop after N complete epochs
  std::uint64_t seed = 0;          // recorded; builtins are deterministic
  std::string trace_path;
  std::string summary_path;
  std::string bounds_csv_path;
};

struct RunSummary {
  RunMode mode = RunMode::Lemma;
  int depth = 0;
  long branching = 0;
  Int offline_servers;
  Rat online_mass;
  Rat epsilon;
  std::string algorithm;
  std::uint64_t requests = 0;
  Rat alg_cost;
  Rat adv_cost;
  std::optional<Rat> opt_cost;
  std::optional<Rat> ratio;  // alg/adv when adv > 0
  Rat offset;                // max over prefixes of rho*ADV - ALG
  std::uint64_t complete_phases = 0;
  std::uint64_t complete_epochs = 0;
  std::string budget_hit = "none";
  bool paper_schedule = false;
};

struct RunResult {
  std::vector<trace::Json> records;
  RunSummary summary;
  ConstructionParams params;
  TreeGeometry geom{0, Rat(1)};
  AdvAccount adv;
  PrefixCurve alg_curve;
  BoundsCheck bounds;
  std::optional<std::uint64_t> first_complete_phase_m;
};

// Executes the request -> serve -> observe loop until a budget or target
// fires; persists trace/summary/bounds files when paths are configured.
RunResult run(RunConfig const& config);

// Reconstructs a RunConfig from a trace header record.
RunConfig config_from_header(trace::Json const& header);

// --- verification ----------------------------------------------------------

struct VerifyReport {
  std::vector<std::string> violations;
  std::vector<std::string> notes;
  bool incomplete_trace = false;  // no footer record
  std::uint64_t requests_checked = 0;
  bool ok() const { return violations.empty(); }
};

// Re-checks every recorded invariant: conservation, ledger deltas, downward
// dominance, freshness, marking bounds, per-phase root-level cost, offline
// replay accounting and feasibility, prefix bounds, and (optionally) a
// byte-identical deterministic re-execution.
VerifyReport verify_trace(std::string const& trace_path, bool rerun_check = true);

// --- sweeps and plot data ----------------------------------------------------

struct SweepConfig {
  RunMode mode = RunMode::Lemma;
  std::vector<int> depths;
  std::vector<long> b_overrides;
  std::vector<std::string> algorithms;
  std::vector<std::optional<Rat>> epsilons = {std::nullopt};
  Budgets budgets;
  std::uint64_t phase_target = 0;
  std::uint64_t epoch_target = 0;
  Rat scale = Rat(1, 4);
  int jobs = 1;
};

struct SweepRow {
  RunSummary summary;
  bool failed = false;
  std::string error;
};

std::vector<SweepRow> sweep(SweepConfig const& config);

std::string summary_csv_header();
std::string summary_csv_row(RunSummary const& s);
std::string sweep_csv(std::vector<SweepRow> const& rows);

// Parses rows written by summary_csv_row; error rows are skipped.
std::vector<RunSummary> parse_summary_csv(std::string const& text);

// Per-(mode, algorithm) series of (x, ratio) points for plotting; x is the
// depth or the offline budget. When ln_ln_x is set an extra ln(ln h) column
// (30-digit approximation, non-authoritative) is emitted. Keys are series
// file names ("lemma-greedy.tsv").
std::map<std::string, std::string> plot_series(std::vector<RunSummary> const& summaries,
                                               bool x_is_depth, bool ln_ln_x);

std::string bounds_csv(BoundsCheck const& bounds);

}  // namespace ksim
