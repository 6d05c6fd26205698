#pragma once

// Exact arithmetic vocabulary shared by every module: GMP-backed rationals for
// probabilities and tolerances, arbitrary-precision integers for indices.

#include <boost/multiprecision/gmp.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "zeroone/error.hpp"

namespace zeroone {

using Rational = boost::multiprecision::mpq_rational;
using Index = boost::multiprecision::mpz_int;

inline Rational make_rational(long long num, long long den = 1) {
  if (den == 0) throw InvalidArgument("zero denominator");
  return Rational(num, den);
}

inline Index pow2_index(unsigned bits) {
  Index v = 1;
  v <<= bits;
  return v;
}

/// 2^e as an exact rational, e may be negative.
inline Rational pow2(long e) {
  if (e >= 0) return Rational(pow2_index(static_cast<unsigned>(e)));
  return Rational(Index(1), pow2_index(static_cast<unsigned>(-e)));
}

/// Largest integer <= q.
inline Index floor_rational(const Rational& q) {
  Index num = boost::multiprecision::numerator(q);
  const Index den = boost::multiprecision::denominator(q);
  Index quot, rem;
  boost::multiprecision::divide_qr(num, den, quot, rem);
  if (rem < 0) --quot;
  return quot;
}

/// Smallest integer >= q.
inline Index ceil_rational(const Rational& q) {
  Index f = floor_rational(q);
  if (Rational(f) != q) ++f;
  return f;
}

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

/// Exact value of a finite double.
inline Rational from_double(double x) {
  if (!std::isfinite(x)) throw InvalidArgument("non-finite double");
  if (x == 0.0) return Rational(0);
  int exp = 0;
  const double mant = std::frexp(x, &exp);  // x = mant * 2^exp, |mant| in [0.5,1)
  const auto scaled = static_cast<long long>(std::ldexp(mant, 53));
  return Rational(scaled) * pow2(exp - 53);
}

inline std::uint64_t to_u64(const Index& i, std::string_view what = "index") {
  if (i < 0 || i > Index(std::numeric_limits<std::uint64_t>::max())) {
    throw IndexOverflow(std::string(what) + " " + i.str() + " does not fit in 64 bits");
  }
  return i.convert_to<std::uint64_t>();
}

inline std::string to_string(const Rational& q) {
  const auto den = boost::multiprecision::denominator(q);
  if (den == 1) return boost::multiprecision::numerator(q).str();
  return boost::multiprecision::numerator(q).str() + "/" + den.str();
}

inline std::string to_string(const Index& i) { return i.str(); }

namespace detail {

inline Index parse_integer(std::string_view s, std::string_view full) {
  if (s.empty()) throw InvalidArgument("malformed number '" + std::string(full) + "'");
  std::size_t pos = 0;
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    pos = 1;
  }
  if (pos == s.size()) throw InvalidArgument("malformed number '" + std::string(full) + "'");
  Index v = 0;
  for (; pos < s.size(); ++pos) {
    const char c = s[pos];
    if (c == '_') continue;
    if (c < '0' || c > '9') throw InvalidArgument("malformed number '" + std::string(full) + "'");
    v = v * 10 + (c - '0');
  }
  return neg ? Index(-v) : v;
}

}  // namespace detail

/// Parses "p/q", an integer, or a plain decimal such as "0.95" or "1e-3" into
/// an exact rational (decimals are read exactly, not via binary floating point).
inline Rational parse_rational(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const Index num = detail::parse_integer(s.substr(0, slash), text);
    const Index den = detail::parse_integer(s.substr(slash + 1), text);
    if (den == 0) throw InvalidArgument("zero denominator in '" + std::string(text) + "'");
    return Rational(num, den);
  }
  long exp10 = 0;
  if (const auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    exp10 = detail::parse_integer(s.substr(e + 1), text).convert_to<long>();
    s = s.substr(0, e);
  }
  std::string digits;
  if (const auto dot = s.find('.'); dot != std::string_view::npos) {
    digits = std::string(s.substr(0, dot)) + std::string(s.substr(dot + 1));
    exp10 -= static_cast<long>(s.size() - dot - 1);
    if (digits.empty() || digits == "-" || digits == "+") digits += "0";
  } else {
    digits = std::string(s);
  }
  Rational value(detail::parse_integer(digits, text));
  Index scale = 1;
  for (long i = 0; i < (exp10 < 0 ? -exp10 : exp10); ++i) scale *= 10;
  return exp10 < 0 ? Rational(value / Rational(scale)) : Rational(value * Rational(scale));
}

inline bool in_open_unit(const Rational& q) { return q > 0 && q < 1; }
inline bool in_closed_unit(const Rational& q) { return q >= 0 && q <= 1; }

}  // namespace zeroone
