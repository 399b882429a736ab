#include "ksim/rational.hpp"

#include <mpfr.h>

#include <stdexcept>

namespace ksim {

std::string rat_str(Rat const& r) { return r.get_str(); }

Rat parse_rat(std::string const& text) {
  if (text.empty()) throw std::invalid_argument("empty rational literal");
  auto dot = text.find('.');
  if (dot == std::string::npos) {
    Rat r;
    if (r.set_str(text, 10) != 0)
      throw std::invalid_argument("bad rational literal: " + text);
    r.canonicalize();
    return r;
  }
  // Decimal form: digits after the point become a power-of-ten denominator.
  std::string digits = text.substr(0, dot) + text.substr(dot + 1);
  std::size_t frac_len = text.size() - dot - 1;
  if (frac_len == 0 || digits.empty() || digits == "-")
    throw std::invalid_argument("bad decimal literal: " + text);
  Int num;
  if (num.set_str(digits, 10) != 0)
    throw std::invalid_argument("bad decimal literal: " + text);
  Int den = 1;
  for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
  Rat r(num, den);
  r.canonicalize();
  return r;
}

std::string rat_approx(Rat const& r, int significant_digits) {
  if (r == 0) return "0";
  mpfr_t x;
  mpfr_init2(x, static_cast<mpfr_prec_t>(significant_digits * 4 + 64));
  mpfr_set_q(x, r.get_mpq_t(), MPFR_RNDN);
  char fmt[32];
  std::snprintf(fmt, sizeof(fmt), "%%.%dRg", significant_digits);
  char buf[256];
  mpfr_snprintf(buf, sizeof(buf), fmt, x);
  mpfr_clear(x);
  return buf;
}

Int pow_int(long base, int exp) {
  Int result;
  mpz_ui_pow_ui(result.get_mpz_t(), static_cast<unsigned long>(base),
                static_cast<unsigned long>(exp));
  return result;
}

Rat level_mass(long branching, int level) {
  Rat augment(level, 2 * branching);
  augment.canonicalize();
  return Rat(pow_int(branching, level)) * (Rat(1) + augment);
}

Int level_servers(long branching, int level) { return pow_int(branching, level); }

Rat const& rat_min(Rat const& a, Rat const& b) { return a <= b ? a : b; }
Rat const& rat_max(Rat const& a, Rat const& b) { return a >= b ? a : b; }

}  // namespace ksim
