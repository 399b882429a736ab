#include "ksim/params.hpp"

#include <mpfr.h>

#include <cmath>
#include <stdexcept>

namespace ksim {

namespace {

// ceil of exp(3*rho) under a rounding-direction pair; escalate precision
// until the downward and upward results agree. Terminates for rho != 0
// because exp of a nonzero rational is irrational.
Int ceil_exp3_at(Rat const& rho, mpfr_prec_t prec, mpfr_rnd_t dir) {
  mpfr_t x;
  mpfr_init2(x, prec);
  mpfr_set_q(x, rho.get_mpq_t(), dir);
  mpfr_mul_ui(x, x, 3, dir);
  mpfr_exp(x, x, dir);
  mpfr_ceil(x, x);
  Int out;
  mpfr_get_z(out.get_mpz_t(), x, MPFR_RNDN);
  mpfr_clear(x);
  return out;
}

}  // namespace

Int ceil_exp3(Rat const& rho) {
  if (rho == 0) return Int(1);
  for (mpfr_prec_t prec = 128; prec <= 1 << 20; prec *= 2) {
    Int lo = ceil_exp3_at(rho, prec, MPFR_RNDD);
    Int hi = ceil_exp3_at(rho, prec, MPFR_RNDU);
    if (lo == hi) return lo;
  }
  throw std::runtime_error("ceil(exp(3 rho)) did not stabilize");
}

ConstructionParams derive_params(Rat const& rho, int depth, ParamOverrides const& ov) {
  if (rho < 0) throw std::invalid_argument("rho must be >= 0");
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");

  ConstructionParams p;
  p.target_ratio = rho;
  p.depth = depth;

  bool schedule_touched = false;
  if (ov.branching) {
    p.branching = *ov.branching;
    schedule_touched = true;
  } else {
    Int b = ceil_exp3(rho);
    if (!b.fits_slong_p()) throw std::invalid_argument("branching overflows long");
    p.branching = b.get_si();
  }
  if (p.branching < 2) throw std::invalid_argument("branching must be >= 2 (rho too small?)");

  p.offline_servers = level_servers(p.branching, depth);
  p.online_mass = level_mass(p.branching, depth);
  if (ov.offline_servers) {
    p.offline_servers = *ov.offline_servers;
    schedule_touched = true;
  }
  if (ov.online_mass) {
    p.online_mass = *ov.online_mass;
    schedule_touched = true;
  }
  if (p.online_mass < 1) throw std::invalid_argument("online mass k must be >= 1");

  p.slack = ov.slack ? *ov.slack : Rat(1, 4 * p.branching);
  if (p.slack <= 0 || p.slack >= 1)
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  p.scale = ov.scale ? *ov.scale : Rat(1, 4);
  if (p.scale <= 0 || p.scale > 1) throw std::invalid_argument("scale must lie in (0, 1]");

  p.paper_schedule = !schedule_touched && rho >= 1;
  return p;
}

long isqrt_long(long n) {
  if (n < 0) throw std::invalid_argument("isqrt of negative value");
  long r = static_cast<long>(std::sqrt(static_cast<double>(n)));
  while (r > 0 && r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

namespace {

// floor(sqrt(ln h)) with certified rounding. Terminates because sqrt(ln h)
// is never an integer for integer h >= 2 (ln h is transcendental).
long floor_sqrt_ln(Int const& h, bool* ln_ge_depth_sq) {
  for (mpfr_prec_t prec = 128; prec <= 1 << 20; prec *= 2) {
    long results[2];
    for (int side = 0; side < 2; ++side) {
      mpfr_rnd_t dir = side == 0 ? MPFR_RNDD : MPFR_RNDU;
      mpfr_t x;
      mpfr_init2(x, prec);
      mpfr_set_z(x, h.get_mpz_t(), dir);
      mpfr_log(x, x, dir);
      mpfr_sqrt(x, x, dir);
      mpfr_floor(x, x);
      results[side] = mpfr_get_si(x, MPFR_RNDN);
      mpfr_clear(x);
    }
    if (results[0] == results[1]) {
      // i = floor(sqrt(ln h)) certifies i^2 <= ln h by construction.
      if (ln_ge_depth_sq) *ln_ge_depth_sq = true;
      return results[0];
    }
  }
  throw std::runtime_error("floor(sqrt(ln h)) did not stabilize");
}

}  // namespace

std::string ln_approx(Int const& value, long divisor, int digits) {
  if (value <= 0) return "0";
  mpfr_t x;
  mpfr_init2(x, static_cast<mpfr_prec_t>(digits * 4 + 64));
  mpfr_set_z(x, value.get_mpz_t(), MPFR_RNDN);
  mpfr_log(x, x, MPFR_RNDN);
  mpfr_div_si(x, x, divisor, MPFR_RNDN);
  char fmt[32];
  std::snprintf(fmt, sizeof(fmt), "%%.%dRg", digits);
  char buf[256];
  mpfr_snprintf(buf, sizeof(buf), fmt, x);
  mpfr_clear(x);
  return buf;
}

EpochSchedule epoch_schedule_for_servers(Int const& h) {
  if (h < 2) throw std::invalid_argument("offline server budget must be >= 2");
  EpochSchedule s;
  s.offline_servers = h;
  bool ln_ok = false;
  s.depth_index = static_cast<int>(floor_sqrt_ln(h, &ln_ok));
  s.branching = isqrt_long(s.depth_index);
  s.degenerate = s.branching <= 1;
  s.feasibility_ok = ln_ok && s.branching * s.branching <= s.depth_index;
  s.ratio_approx30 =
      s.branching >= 2 ? ln_approx(Int(s.branching), 3) : std::string("0");
  return s;
}

}  // namespace ksim
