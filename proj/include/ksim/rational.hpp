#pragma once

#include <gmpxx.h>

#include <string>

namespace ksim {

// All masses, lengths and costs are exact rationals; the only real-valued
// computations in the project are the schedule constants (see params.hpp).
using Rat = mpq_class;
using Int = mpz_class;

// Canonical serialization: "p" for integers, "p/q" otherwise.
std::string rat_str(Rat const& r);

// Accepts "p", "p/q" and plain decimal forms like "0.25" or "-3.5".
Rat parse_rat(std::string const& text);

// Decimal approximation with the given number of significant digits.
// Used only for human-facing report columns, never for checks.
std::string rat_approx(Rat const& r, int significant_digits = 30);

Int pow_int(long base, int exp);

// k_j = b^j * (1 + j/(2b)), the online mass of a depth-j construction.
Rat level_mass(long branching, int level);

// h_j = b^j, the offline server count of a depth-j construction.
Int level_servers(long branching, int level);

Rat const& rat_min(Rat const& a, Rat const& b);
Rat const& rat_max(Rat const& a, Rat const& b);

}  // namespace ksim
