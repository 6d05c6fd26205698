#pragma once

/**
 * @file bounds.hpp
 * @brief Explicit index bounds of the finitary zero-one law.
 *
 * Everything here is exact: gap functions act on arbitrary-precision indices,
 * counters are floors of exact rationals, and the natural logarithm needed by
 * the independent-block counter is replaced by a certified rational upper bound.
 *
 * Why an upper bound on ln(1/lambda) is safe: with J = floor(L/eps) + 1 and
 * L >= ln(1/lambda), suppose the probability of B(r, b_J) is at most 1 - lambda
 * and every one of the J + 1 blocks B(a_i, b_i), i <= J, had probability >= eps.
 * Closure and pairwise independence give
 *   lambda <= P(not B(r, b_J)) <= exp(-sum_i P(B(a_i, b_i))),
 * so the sum is at most ln(1/lambda). But the sum is >= (J + 1) eps >= L + eps,
 * which exceeds ln(1/lambda). Rounding L upward therefore only lengthens the
 * searched schedule and the disjunction still holds for the larger J.
 */

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "zeroone/error.hpp"
#include "zeroone/rational.hpp"

namespace zeroone {

inline const Index& default_index_cap() {
  static const Index cap = pow2_index(48);
  return cap;
}

inline constexpr unsigned default_slack_bits = 64;

/// g(n) = n + c
struct OffsetGap {
  Index c;
  bool operator==(const OffsetGap&) const = default;
};

/// g(n) = floor(alpha * n) + c with alpha >= 1
struct AffineGap {
  Rational alpha;
  Index c;
  bool operator==(const AffineGap&) const = default;
};

/// Explicit values for finitely many indices, g(n) = n + tail_offset elsewhere.
struct TableGap {
  std::map<Index, Index> entries;
  Index tail_offset;
  bool operator==(const TableGap&) const = default;
};

/// Monotone-free index map g with g(k) >= k, described by a closed DSL so
/// that adversarial inputs can be serialized and audited.
class GapFunction {
 public:
  using Descriptor = std::variant<OffsetGap, AffineGap, TableGap>;

  static GapFunction offset(Index c, Index cap = default_index_cap()) {
    return GapFunction(OffsetGap{std::move(c)}, std::move(cap));
  }
  static GapFunction affine(Rational alpha, Index c, Index cap = default_index_cap()) {
    return GapFunction(AffineGap{std::move(alpha), std::move(c)}, std::move(cap));
  }
  static GapFunction table(std::vector<std::pair<Index, Index>> entries, Index tail_offset,
                           Index cap = default_index_cap()) {
    TableGap t;
    t.tail_offset = std::move(tail_offset);
    for (auto& [n, v] : entries) {
      if (!t.entries.emplace(n, v).second) {
        throw InvalidArgument("gap table lists index " + n.str() + " twice");
      }
    }
    return GapFunction(std::move(t), std::move(cap));
  }

  explicit GapFunction(Descriptor d, Index cap = default_index_cap())
      : desc_(std::move(d)), cap_(std::move(cap)) {
    validate();
  }

  const Descriptor& descriptor() const noexcept { return desc_; }
  const Index& index_cap() const noexcept { return cap_; }

  GapFunction with_cap(Index cap) const { return GapFunction(desc_, std::move(cap)); }

  /// g(n); throws IndexOverflow when n or the result exceeds the cap.
  Index operator()(const Index& n) const {
    if (n < 0) throw InvalidArgument("negative index " + n.str());
    if (n > cap_) throw IndexOverflow("index " + n.str() + " exceeds cap " + cap_.str());
    Index v = std::visit([&](const auto& d) { return eval(d, n); }, desc_);
    if (v > cap_) {
      throw IndexOverflow("g(" + n.str() + ") = " + v.str() + " exceeds cap " + cap_.str());
    }
    return v;
  }

  /// Compact text form, e.g. "offset:1", "affine:3/2:0", "table:0=5,3=4;tail=0".
  std::string describe() const {
    return std::visit(
        [](const auto& d) -> std::string {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, OffsetGap>) {
            return "offset:" + d.c.str();
          } else if constexpr (std::is_same_v<T, AffineGap>) {
            return "affine:" + to_string(d.alpha) + ":" + d.c.str();
          } else {
            std::string s = "table:";
            bool first = true;
            for (const auto& [n, v] : d.entries) {
              if (!first) s += ",";
              first = false;
              s += n.str() + "=" + v.str();
            }
            return s + ";tail=" + d.tail_offset.str();
          }
        },
        desc_);
  }

  bool operator==(const GapFunction&) const = default;

 private:
  static Index eval(const OffsetGap& d, const Index& n) { return n + d.c; }
  static Index eval(const AffineGap& d, const Index& n) {
    return floor_rational(d.alpha * Rational(n)) + d.c;
  }
  static Index eval(const TableGap& d, const Index& n) {
    if (auto it = d.entries.find(n); it != d.entries.end()) return it->second;
    return n + d.tail_offset;
  }

  void validate() const {
    if (cap_ < 0) throw InvalidArgument("index cap must be nonnegative");
    std::visit(
        [](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, OffsetGap>) {
            if (d.c < 0) throw InvalidArgument("offset gap needs c >= 0");
          } else if constexpr (std::is_same_v<T, AffineGap>) {
            if (d.alpha < 1) throw InvalidArgument("affine gap needs alpha >= 1");
            if (d.c < 0) throw InvalidArgument("affine gap needs c >= 0");
          } else {
            if (d.tail_offset < 0) throw InvalidArgument("table tail offset must be >= 0");
            for (const auto& [n, v] : d.entries) {
              if (n < 0) throw InvalidArgument("gap table has negative index " + n.str());
              if (v < n) {
                throw InvalidArgument("gap table violates g(k) >= k at k = " + n.str() +
                                      " (g = " + v.str() + ")");
              }
            }
          }
        },
        desc_);
  }

  Descriptor desc_;
  Index cap_;
};

inline Index apply_gap(const GapFunction& g, const Index& n) { return g(n); }

/// g~^(i)(r) for g~(j) = g(j) + 1.
inline Index iterate_gap(const GapFunction& g, std::uint64_t i, Index r) {
  if (r > g.index_cap()) throw IndexOverflow("start index " + r.str() + " exceeds cap");
  for (std::uint64_t step = 0; step < i; ++step) {
    r = g(r) + 1;
    if (r > g.index_cap()) {
      throw IndexOverflow("iterate " + std::to_string(step + 1) + " of g~ exceeds cap " +
                          g.index_cap().str());
    }
  }
  return r;
}

/// Interleaved blocks a_0 <= b_0 < a_1 <= b_1 < ... starting at r.
struct IndexSchedule {
  Index r;
  std::vector<Index> a;
  std::vector<Index> b;

  std::size_t size() const noexcept { return a.size(); }
};

inline IndexSchedule schedule(const GapFunction& g, const Index& r, std::uint64_t count) {
  if (count < 1) throw InvalidArgument("schedule needs count >= 1");
  IndexSchedule s;
  s.r = r;
  s.a.reserve(count);
  s.b.reserve(count);
  Index cur = r;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (cur > g.index_cap()) {
      throw IndexOverflow("schedule entry a_" + std::to_string(i) + " exceeds cap " +
                          g.index_cap().str());
    }
    s.a.push_back(cur);
    s.b.push_back(g(cur));
    cur = s.b.back() + 1;
  }
  return s;
}

/// Both tolerances strictly inside (0,1).
struct Tolerances {
  Rational epsilon;
  Rational lambda;

  Tolerances(Rational eps, Rational lam) : epsilon(std::move(eps)), lambda(std::move(lam)) {
    if (!in_open_unit(epsilon)) throw InvalidArgument("epsilon must lie in (0,1)");
    if (!in_open_unit(lambda)) throw InvalidArgument("lambda must lie in (0,1)");
  }
  bool operator==(const Tolerances&) const = default;
};

/// floor(x / eps), exactly.
inline Index counter_main(const Rational& epsilon, const Rational& x) {
  if (!in_open_unit(epsilon)) throw InvalidArgument("epsilon must lie in (0,1)");
  if (x <= 0) throw InvalidArgument("x must be positive");
  return floor_rational(x / epsilon);
}

/// Rational enclosure lo <= ln(y) <= hi.
struct LnEnclosure {
  Rational lo;
  Rational hi;
};

namespace detail {

// 2 * atanh(z) = ln((1+z)/(1-z)) for 0 <= z < 1. All terms are positive, so a
// partial sum is a lower bound and the geometric tail bound
// 2 z^(2N+1) / ((2N+1)(1 - z^2)) makes it an upper bound.
inline LnEnclosure atanh2_enclosure(const Rational& z, unsigned bits) {
  if (z == 0) return {Rational(0), Rational(0)};
  const Rational z2 = z * z;
  const Rational target = pow2(-static_cast<long>(bits));
  Rational power = z;  // z^(2j+1)
  Rational sum = 0;
  for (unsigned long j = 0;; ++j) {
    sum += 2 * power / Rational(2 * j + 1);
    power *= z2;
    const Rational tail = 2 * power / (Rational(2 * j + 3) * (1 - z2));
    if (tail <= target) return {sum, sum + tail};
  }
}

inline unsigned bit_length(const Index& v) {
  return v <= 0 ? 0u : static_cast<unsigned>(boost::multiprecision::msb(v)) + 1u;
}

}  // namespace detail

/// Enclosure of ln(y) for rational y >= 1 with width at most about 2^-bits.
inline LnEnclosure ln_enclosure(const Rational& y, unsigned bits) {
  if (y < 1) throw InvalidArgument("ln_enclosure needs y >= 1");
  // y = 2^k * m with m in [1,2)
  const Index num = boost::multiprecision::numerator(y);
  const Index den = boost::multiprecision::denominator(y);
  long k = static_cast<long>(detail::bit_length(num)) - static_cast<long>(detail::bit_length(den));
  Rational m = y / pow2(k);
  while (m >= 2) {
    m /= 2;
    ++k;
  }
  while (m < 1) {
    m *= 2;
    --k;
  }
  const unsigned kbits = detail::bit_length(Index(k)) + 1;
  const LnEnclosure lnm = detail::atanh2_enclosure((m - 1) / (m + 1), bits + 2);
  if (k == 0) return lnm;
  const LnEnclosure ln2 = detail::atanh2_enclosure(Rational(1, 3), bits + 2 + kbits);
  return {Rational(k) * ln2.lo + lnm.lo, Rational(k) * ln2.hi + lnm.hi};
}

/**
 * Certified rational L with ln(1/lambda) <= L <= ln(1/lambda) + 2^-slack_bits.
 *
 * L is the least multiple of 2^-(slack_bits + 32) that is >= ln(1/lambda).
 * Because the grids are nested, L is nonincreasing in slack_bits and
 * nonincreasing in lambda.
 */
inline Rational ln_recip_upper(const Rational& lambda, unsigned slack_bits = default_slack_bits) {
  if (!in_open_unit(lambda)) throw InvalidArgument("lambda must lie in (0,1)");
  const unsigned grid_bits = slack_bits + 32;
  const Rational grid = pow2(static_cast<long>(grid_bits));
  const Rational y = 1 / lambda;
  unsigned precision = grid_bits + 16;
  for (;;) {
    const LnEnclosure enc = ln_enclosure(y, precision);
    const Index lo = ceil_rational(enc.lo * grid);
    const Index hi = ceil_rational(enc.hi * grid);
    // ln(1/lambda) is irrational for lambda in (0,1), so refinement settles the
    // ceiling; the cap only guards against pathological inputs and stays sound.
    if (lo == hi || precision > 16 * grid_bits) return Rational(hi) / grid;
    precision *= 2;
  }
}

/// J = floor(L / eps) + 1 with L = ln_recip_upper(lambda, slack_bits).
inline Index counter_independent(const Rational& epsilon, const Rational& lambda,
                                 unsigned slack_bits = default_slack_bits) {
  if (!in_open_unit(epsilon)) throw InvalidArgument("epsilon must lie in (0,1)");
  return floor_rational(ln_recip_upper(lambda, slack_bits) / epsilon) + 1;
}

}  // namespace zeroone
