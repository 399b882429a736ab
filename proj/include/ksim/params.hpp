#pragma once

#include "ksim/rational.hpp"

#include <optional>
#include <string>

namespace ksim {

struct ParamOverrides {
  std::optional<long> branching;
  std::optional<Int> offline_servers;
  std::optional<Rat> online_mass;
  std::optional<Rat> slack;
  std::optional<Rat> scale;
};

// The parameter tuple governing one construction instance. Everything is
// exact; target_ratio is the rational the caller supplied (the ratio the
// run aims to certify), not a transcendental schedule constant.
struct ConstructionParams {
  Rat target_ratio;         // rho
  int depth = 0;            // i
  long branching = 0;       // b
  Int offline_servers;      // h = b^i unless overridden
  Rat online_mass;          // k = b^i * (1 + i/(2b)) unless overridden
  Rat slack;                // eps, default 1/(4b)
  Rat scale;                // per-level shrink factor, default 1/4
  bool paper_schedule = false;  // true iff rho >= 1 and b/h/k are unoverridden
};

// ceil(exp(3*rho)), computed with interval arithmetic at escalating
// precision so the ceiling is provably correct.
Int ceil_exp3(Rat const& rho);

// Derivation: b = ceil(exp(3 rho)), h = b^i, k = b^i (1 + i/(2b)); overrides
// for b recompute h and k before any explicit h/k override applies.
// Rejects results with b < 2 or k < 1.
ConstructionParams derive_params(Rat const& rho, int depth, ParamOverrides const& ov = {});

// The epoch-game schedule derived from an offline server budget h:
// depth_index = floor(sqrt(ln h)), branching = floor(sqrt(depth_index)).
struct EpochSchedule {
  Int offline_servers;          // h as given
  int depth_index = 0;          // floor(sqrt(ln h))
  long branching = 0;           // floor(sqrt(depth_index))
  std::string ratio_approx30;   // ln(branching)/3 to 30 digits; non-authoritative
  bool degenerate = false;      // branching <= 1 (no usable ratio)
  bool feasibility_ok = false;  // branching^2 <= depth_index and depth_index^2 <= ln h
};

EpochSchedule epoch_schedule_for_servers(Int const& h);

// floor(sqrt(n)) for nonnegative integers.
long isqrt_long(long n);

// ln(value)/divisor to `digits` significant digits (reporting only).
std::string ln_approx(Int const& value, long divisor, int digits = 30);

}  // namespace ksim
